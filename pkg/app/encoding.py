"""
Кодирование ∅′ в раскраску по коротким промежуткам.

Для x = 2^{n_0} + ... + 2^{n_k} промежуток (n_i, n_{i+1}) короткий,
если есть m < n_i, вошедший в ∅′ после стадии n_{i+1}, и очень короткий,
если к тому же m вошёл не позже стадии n_k. sg(x) и vsg(x) считают
такие промежутки. Цвет x есть пара (p, i), где p наименьшее простое, не делящее
vsg(x), i = vsg(x) mod p. При vsg(x) = 0 такого p нет, и число получает
зарезервированный цвет Bottom, который has_color считает цветом (p, 0)
для любого p.

sg читает окончательную принадлежность, vsg только стадии не позже n_k.
На конечных следах обе функции вычислимы.
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from .binum import BinNum, FsQuery, NumSet, fs_enumerate, is_two_apart
from .config import ENCODER_CONFIG
from .oracle import OracleTrace, settle_stage
from .utils import is_prime, iter_primes, least_prime_not_dividing
from .validation import InvalidSolutionWindowError, ValidationError, WindowExhaustedError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PrimePairColor:
    """Цвет (p, i) с простым p и 1 <= i < p, либо Bottom (p = i = None)"""
    p: Optional[int] = None
    i: Optional[int] = None

    def __post_init__(self):
        if self.p is None and self.i is None:
            return
        if self.p is None or self.i is None:
            raise ValidationError("color needs both p and i")
        if not is_prime(self.p):
            raise ValidationError(f"{self.p} is not prime")
        if not 1 <= self.i < self.p:
            raise ValidationError(f"color index {self.i} outside [1, {self.p})")

    @property
    def is_bottom(self) -> bool:
        return self.p is None

    def __str__(self) -> str:
        return "⊥" if self.is_bottom else f"({self.p},{self.i})"


BOTTOM = PrimePairColor()


@dataclass(frozen=True)
class Gap:
    lo: int
    hi: int
    is_short: bool
    is_very_short: bool


@dataclass(frozen=True)
class GapCounts:
    sg: int
    vsg: int
    gaps: Tuple[Gap, ...]


@dataclass(frozen=True)
class SolutionCandidate:
    """
    Кандидат в решение сильной формы: 2-разнесённое Y, избегаемый цвет
    (код) и число элементов, отброшенных с начала.
    """
    Y: NumSet
    witness_color: int
    trim: int = 0

    def __post_init__(self):
        if self.trim < 0:
            raise ValidationError("trim must be natural")
        if self.witness_color < 0:
            raise ValidationError("color code must be natural")

    @property
    def window(self) -> NumSet:
        return NumSet(self.Y.elements[self.trim:])

    def with_trim(self, trim: int) -> "SolutionCandidate":
        return SolutionCandidate(self.Y, self.witness_color, trim)


@dataclass
class CandidateVerdict:
    passed: bool
    violations: List[Dict] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)
    window_size: int = 0

    def to_json(self) -> dict:
        return {
            "passed": self.passed,
            "violations": self.violations,
            "warnings": self.warnings,
            "window_size": self.window_size,
        }


def is_short_gap(lo: int, hi: int, trace: OracleTrace) -> bool:
    """Есть m < lo, вошедший в ∅′ позже стадии hi"""
    return any(m < lo and st > hi for m, st in trace.entries)


def gap_counts(x: BinNum, trace: OracleTrace) -> GapCounts:
    """
    Короткие и очень короткие промежутки числа.

    Args:
        x: Число в виде множества показателей
        trace: След ∅′

    Returns:
        GapCounts с sg, vsg и списком промежутков
    """
    top = x.mu
    gaps = []
    for lo, hi in zip(x.exponents, x.exponents[1:]):
        late = [st for m, st in trace.entries if m < lo and st > hi]
        gaps.append(Gap(lo, hi, bool(late), any(st <= top for st in late)))
    return GapCounts(
        sg=sum(g.is_short for g in gaps),
        vsg=sum(g.is_very_short for g in gaps),
        gaps=tuple(gaps),
    )


def color_of_count(vsg: int) -> PrimePairColor:
    if vsg == 0:
        return BOTTOM
    p = least_prime_not_dividing(vsg)
    return PrimePairColor(p, vsg % p)


def encode_color(x: BinNum, trace: OracleTrace) -> PrimePairColor:
    """Цвет c(x) по числу очень коротких промежутков"""
    return color_of_count(gap_counts(x, trace).vsg)


def has_color_count(vsg: int, p: int, j: int) -> bool:
    if not is_prime(p):
        raise ValidationError(f"{p} is not prime")
    if not 0 <= j <= p:
        raise ValidationError(f"color index {j} outside [0, {p}]")
    if 1 <= j < p:
        return color_of_count(vsg) == PrimePairColor(p, j)
    # (p, 0) и (p, p): все простые <= p делят vsg
    for q in iter_primes():
        if q > p:
            return True
        if vsg % q:
            return False
    return True


def has_color(x: BinNum, trace: OracleTrace, p: int, j: int) -> bool:
    """
    Имеет ли x цвет (p, j), включая условные цвета (p, 0) = (p, p).
    """
    return has_color_count(gap_counts(x, trace).vsg, p, j)


def color_to_code(c: PrimePairColor) -> int:
    """Bottom -> 0; (p, i) по возрастанию p, затем i, со сдвигом на 1"""
    if c.is_bottom:
        return 0
    code = 1
    for q in iter_primes():
        if q == c.p:
            return code + c.i - 1
        code += q - 1
    raise AssertionError("unreachable")


def code_to_color(code: int) -> PrimePairColor:
    if code < 0:
        raise ValidationError("color code must be natural")
    if code == 0:
        return BOTTOM
    rest = code - 1
    for q in iter_primes():
        if rest < q - 1:
            return PrimePairColor(q, rest + 1)
        rest -= q - 1
    raise AssertionError("unreachable")


def color_table(Y: NumSet, trace: OracleTrace, q: FsQuery) -> pd.DataFrame:
    """Таблица цветов окна fs(Y): показатели, λ, μ, sg, vsg, цвет и код"""
    rows = []
    for x in fs_enumerate(Y, q):
        counts = gap_counts(x, trace)
        color = color_of_count(counts.vsg)
        rows.append({
            "exponents": list(x.exponents),
            "lambda": x.lam,
            "mu": x.mu,
            "sg": counts.sg,
            "vsg": counts.vsg,
            "color": str(color),
            "code": color_to_code(color),
        })
    return pd.DataFrame(rows, columns=["exponents", "lambda", "mu", "sg", "vsg", "color", "code"])


def almost_absence_report(Y: NumSet, trace: OracleTrace, q: FsQuery) -> pd.DataFrame:
    """
    Диагностика почти отсутствующих цветов на конечном окне.

    Для каждого встреченного цвета и каждой корзины (p, 0), p не больше
    наибольшего встреченного простого: число элементов окна с этим
    цветом и наибольшее λ среди них.

    Returns:
        DataFrame со столбцами color, code, bucket, count, max_lambda
    """
    if len(Y) == 0:
        return pd.DataFrame(columns=["color", "code", "bucket", "count", "max_lambda"])

    window = [(x, gap_counts(x, trace).vsg) for x in fs_enumerate(Y, q)]
    exact: Dict[PrimePairColor, List[int]] = {}
    for x, vsg in window:
        exact.setdefault(color_of_count(vsg), []).append(x.lam)

    rows = []
    for color in sorted(exact, key=color_to_code):
        lams = exact[color]
        rows.append({
            "color": str(color), "code": color_to_code(color), "bucket": False,
            "count": len(lams), "max_lambda": max(lams),
        })

    top_prime = max((c.p for c in exact if not c.is_bottom), default=2)
    for p in itertools.takewhile(lambda r: r <= top_prime, iter_primes()):
        lams = [x.lam for x, vsg in window if has_color_count(vsg, p, 0)]
        rows.append({
            "color": f"({p},0)", "code": None, "bucket": True,
            "count": len(lams), "max_lambda": max(lams) if lams else None,
        })
    return pd.DataFrame(rows, columns=["color", "code", "bucket", "count", "max_lambda"])


def verify_candidate(cand: SolutionCandidate, trace: OracleTrace, q: Optional[FsQuery] = None) -> CandidateVerdict:
    """
    Проверка кандидата на конечном окне.

    (a) Y 2-разнесено; (b) ни один элемент fs-окна не имеет избегаемого
    цвета; (c) для p избегаемого цвета p делит sg(x) на всём окне.
    Для избегаемого Bottom условие (c) требует sg(x) = 0.

    Returns:
        CandidateVerdict со списком нарушений
    """
    q = q or FsQuery(ENCODER_CONFIG.DEFAULT_FS_TERMS)
    verdict = CandidateVerdict(passed=True)

    if not is_two_apart(cand.Y):
        verdict.violations.append({"check": "a", "reason": "Y is not 2-apart"})

    window = cand.window
    if len(window) == 0:
        verdict.warnings.append("empty window: vacuous pass")
        verdict.passed = not verdict.violations
        return verdict

    witness = code_to_color(cand.witness_color)
    for x in fs_enumerate(window, q):
        counts = gap_counts(x, trace)
        code = color_to_code(color_of_count(counts.vsg))
        if code == cand.witness_color:
            verdict.violations.append({
                "check": "b", "exponents": list(x.exponents), "vsg": counts.vsg,
                "reason": f"attains avoided color {witness}",
            })
        divides = counts.sg == 0 if witness.is_bottom else counts.sg % witness.p == 0
        if not divides:
            verdict.violations.append({
                "check": "c", "exponents": list(x.exponents), "sg": counts.sg,
                "reason": "sg not divisible by the witness prime",
            })
        verdict.window_size += 1

    verdict.passed = not verdict.violations
    return verdict


def find_trim(cand: SolutionCandidate, trace: OracleTrace, q: Optional[FsQuery] = None) -> Optional[int]:
    """
    Наименьшее trim в 0..|Y|-2, при котором проходит условие (c).

    Returns:
        trim или None, если подходящего нет
    """
    for trim in range(max(len(cand.Y) - 1, 0)):
        verdict = verify_candidate(cand.with_trim(trim), trace, q)
        if not any(v["check"] == "c" for v in verdict.violations):
            return trim
    return None


def decode_membership(
    n: int,
    cand: SolutionCandidate,
    trace: OracleTrace,
    q: Optional[FsQuery] = None
) -> bool:
    """
    Восстановление принадлежности n ∈ ∅′ по решению.

    Берётся первая по возрастанию пара x < y окна с n < μ(x);
    n ∈ ∅′ тогда и только тогда, когда n ∈ ∅′[λ(y)].

    Raises:
        InvalidSolutionWindowError: окно не прошло verify_candidate
        WindowExhaustedError: подходящей пары нет
    """
    verdict = verify_candidate(cand, trace, q)
    if not verdict.passed:
        raise InvalidSolutionWindowError(verdict)

    elems = cand.window.elements
    for i, x in enumerate(elems[:-1]):
        if n < x.mu:
            y = elems[i + 1]
            return trace.stage_member(n, y.lam)
    raise WindowExhaustedError()


def harness_candidate(
    trace: OracleTrace,
    size: int = ENCODER_CONFIG.HARNESS_SIZE,
    seed: Optional[int] = None
) -> SolutionCandidate:
    """
    Заведомо корректный кандидат для проверки кодирования.

    Все показатели лежат выше стадии стабилизации следа и выше его
    наибольшего элемента, поэтому коротких промежутков нет, окно
    целиком цвета Bottom, и избегается цвет (2, 1).
    """
    base = max(settle_stage(trace), max(trace.elements, default=0)) + ENCODER_CONFIG.HARNESS_MARGIN
    rng = np.random.default_rng(seed) if seed is not None else None
    elems = []
    lo = base
    for _ in range(size):
        width = int(rng.integers(0, 3)) if rng is not None else 0
        exps = (lo,) if width == 0 else (lo, lo + width)
        elems.append(BinNum(exps))
        lo = exps[-1] + 1 + (int(rng.integers(0, 4)) if rng is not None else 1)
    return SolutionCandidate(NumSet(tuple(elems)), color_to_code(PrimePairColor(2, 1)), 0)
