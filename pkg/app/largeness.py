"""
Большие множества, расщепление и трудная раскраска.

Множество D называется f-большим, если для каждого (e, k) с
определённым пределом E = E_e^{f(e,k)} при всех достаточно больших s
выполнено |D ∩ (s + E)| >= k. Здесь «достаточно большие s» читаются
честно в конечном окне: от границы, после которой E стабилен и ни
одна более ранняя сдвинутая копия с другим приближением не задевает
s + E, до конца окна.

Расщепление D = D^0 ⊔ D^1 строится 2-раскраской блоков F_{e,k,s,j}
через движок локальной леммы; итерация расщеплений даёт слои D_n,
функции f_n и раскраску c_hard(x) = max{n <= x : x ∈ D_n}.
"""

import logging
import threading
from abc import ABC, abstractmethod
from bisect import bisect_left, bisect_right
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from .config import CLI_CONFIG, LARGENESS_CONFIG
from .lll import AuditVerdict, ConstraintFamily, LllParams, PartialColoring, occurrence_audit, two_color
from .oracle import EnumFamily, approximant, approximant_runs, stable_approximant
from .utils import PAIRINGS, mix_seed
from .validation import SparsityError, ValidationError, WindowExhaustedError, validate_window

logger = logging.getLogger(__name__)


# ============================================================================
# ФУНКЦИИ
# ============================================================================

class GFunction:
    """
    Инъективная функция g(e, k) с разрешимым образом.

    Пары (e, k) перебираются по коду нумерации; очередному коду
    назначается наименьшее m, большее всех уже назначенных, с m >= M
    и k*m <= 2^{m/2}. Значения строго растут по коду, поэтому
    g(code) >= M + code.
    """

    def __init__(
        self,
        M: int,
        pairing: str = LARGENESS_CONFIG.PAIRING,
        replay_limit: int = LARGENESS_CONFIG.G_REPLAY_LIMIT
    ):
        if M < 1:
            raise ValidationError("M must be at least 1")
        if pairing not in PAIRINGS:
            raise ValidationError(f"unknown pairing {pairing!r}")
        self.M = M
        self.pairing = pairing
        self.replay_limit = replay_limit
        self._pair, self._unpair = PAIRINGS[pairing]
        self._values: List[int] = []
        self._codes: Dict[int, int] = {}
        self._lock = threading.Lock()

    @staticmethod
    def fits(k: int, m: int) -> bool:
        # k*m <= 2^{m/2} в целых числах
        return (k * m) ** 2 <= 2 ** m

    def _extend(self, code: int) -> None:
        if code >= self.replay_limit:
            raise ValidationError(f"g replay beyond {self.replay_limit} codes")
        if code < len(self._values):
            return
        # g разделяется потоками аудитов
        with self._lock:
            while len(self._values) <= code:
                c = len(self._values)
                _, k = self._unpair(c)
                m = max(self.M, self._values[-1] + 1) if self._values else self.M
                while not self.fits(k, m):
                    m += 1
                self._codes[m] = c
                self._values.append(m)

    def code(self, e: int, k: int) -> int:
        return self._pair(e, k)

    def pair_of(self, code: int) -> Tuple[int, int]:
        return self._unpair(code)

    def lower_bound(self, e: int, k: int) -> int:
        return self.M + self.code(e, k)

    def value_at(self, code: int) -> int:
        self._extend(code)
        return self._values[code]

    def eval(self, e: int, k: int) -> int:
        return self.value_at(self.code(e, k))

    def image_member(self, m: int) -> Optional[Tuple[int, int]]:
        """Пара (e, k) с g(e, k) = m, если m лежит в образе"""
        if m < self.M:
            return None
        self._extend(m - self.M)
        code = self._codes.get(m)
        return None if code is None else self._unpair(code)


def make_g(M: int, pairing: str = LARGENESS_CONFIG.PAIRING) -> GFunction:
    return GFunction(M, pairing)


def g_replay_audit(g: GFunction, codes: int) -> List[Dict]:
    """
    Проверка первых codes значений g: рост по коду, обратимость
    через image_member, неравенство k*g <= 2^{g/2} и g >= M.
    """
    violations = []
    previous = None
    for c in range(codes):
        value = g.value_at(c)
        e, k = g.pair_of(c)
        if value < g.M:
            violations.append({"code": c, "kind": "below_M", "value": value})
        if not GFunction.fits(k, value):
            violations.append({"code": c, "kind": "inequality", "value": value})
        if previous is not None and value <= previous:
            violations.append({"code": c, "kind": "not_increasing", "value": value})
        if g.image_member(value) != (e, k):
            violations.append({"code": c, "kind": "image", "value": value})
        previous = value
    return violations


class BinaryFn:
    """Двуместная функция f(e, k) с описанием"""

    def __init__(self, fn: Callable[[int, int], int], description: str):
        self._fn = fn
        self.description = description

    def eval(self, e: int, k: int) -> int:
        return int(self._fn(e, k))

    def eval_bounded(self, e: int, k: int, cap: int) -> Optional[int]:
        """f(e, k), если значение не превосходит cap, иначе None"""
        value = self.eval(e, k)
        return value if value <= cap else None

    def table(self, e_count: int, k_max: int, cap: int) -> List[List[Optional[int]]]:
        return [
            [e, k, self.eval_bounded(e, k, cap)]
            for e in range(e_count) for k in range(1, k_max + 1)
        ]

    def __repr__(self) -> str:
        return f"BinaryFn({self.description})"


class HatFn(BinaryFn):
    """f̂(e, k) = f(e, k*g(e, k))"""

    def __init__(self, base: BinaryFn, g: GFunction):
        self.base = base
        self.g = g
        super().__init__(self._compose, f"hat({base.description})")

    def _compose(self, e: int, k: int) -> int:
        return self.base.eval(e, k * self.g.eval(e, k))

    def eval_bounded(self, e: int, k: int, cap: int) -> Optional[int]:
        # Для башни f_0(e,k) = k и её шляп выполнено f(e, k) >= k
        if k * self.g.lower_bound(e, k) > cap:
            return None
        return self.base.eval_bounded(e, k * self.g.eval(e, k), cap)


def identity_k() -> BinaryFn:
    """f_0(e, k) = k"""
    return BinaryFn(lambda e, k: k, "k")


def hat(f: BinaryFn, g: GFunction) -> BinaryFn:
    return HatFn(f, g)


def eval_bounded(f: BinaryFn, e: int, k: int, cap: int) -> Optional[int]:
    return f.eval_bounded(e, k, cap)


# ============================================================================
# МНОЖЕСТВА
# ============================================================================

class LargeSet(ABC):
    """Разрешимое множество натуральных чисел"""
    description: str = ""

    @abstractmethod
    def contains(self, n: int) -> bool:
        ...

    def mask(self, window: int) -> np.ndarray:
        return np.fromiter((self.contains(n) for n in range(window)), dtype=bool, count=window)

    def enumerate_up_to(self, N: int) -> Tuple[int, ...]:
        """Элементы множества в [0, N] по возрастанию"""
        return tuple(np.flatnonzero(self.mask(N + 1)).tolist())


class Naturals(LargeSet):
    description = "N"

    def contains(self, n: int) -> bool:
        return n >= 0

    def mask(self, window: int) -> np.ndarray:
        return np.ones(window, dtype=bool)


class PredicateSet(LargeSet):
    def __init__(self, predicate: Callable[[int], bool], description: str):
        self._predicate = predicate
        self.description = description

    def contains(self, n: int) -> bool:
        return bool(self._predicate(n))


class WindowSet(LargeSet):
    """Множество, материализованное битовой маской на окне"""

    def __init__(self, bits: np.ndarray, description: str = ""):
        self.bits = np.asarray(bits, dtype=bool).copy()
        self.bits.setflags(write=False)
        self.description = description

    @property
    def window(self) -> int:
        return len(self.bits)

    def contains(self, n: int) -> bool:
        if n >= self.window:
            raise WindowExhaustedError()
        return n >= 0 and bool(self.bits[n])

    def mask(self, window: int) -> np.ndarray:
        if window > self.window:
            raise WindowExhaustedError()
        return self.bits[:window].copy()

    def to_bitmap(self) -> str:
        return "".join("1" if b else "0" for b in self.bits)

    @classmethod
    def from_bitmap(cls, bitmap: str, description: str = "") -> "WindowSet":
        return cls(np.array([ch == "1" for ch in bitmap], dtype=bool), description)


# ============================================================================
# ПРИЕМЛЕМЫЕ СТАДИИ И БЛОКИ
# ============================================================================

def _block_parameters(e: int, k: int, f: BinaryFn, g: GFunction) -> Tuple[int, int, int]:
    gk = g.eval(e, k)
    K = k * gk
    return gk, K, f.eval(e, K)


def acceptable(
    s: int,
    e: int,
    k: int,
    D: LargeSet,
    f: BinaryFn,
    g: GFunction,
    fam: EnumFamily
) -> bool:
    """
    Приемлемость стадии s для (e, k), проверяемая буквально.

    С n = f(e, k*g(e, k)) и E[t] = E_e^n[t]: |D ∩ (s + E[s])| >= k*g(e, k),
    и любая более ранняя копия t + E[t], задевающая s + E[s],
    имеет то же приближение.
    """
    _, K, n = _block_parameters(e, k, f, g)
    current = approximant(fam, e, n, s)
    shifted = {s + x for x in current.elements}
    if sum(1 for y in shifted if D.contains(y)) < K:
        return False
    for t in range(s):
        earlier = approximant(fam, e, n, t)
        if earlier.same_set(current):
            continue
        if shifted & {t + x for x in earlier.elements}:
            return False
    return True


def blocks(
    s: int,
    e: int,
    k: int,
    f: BinaryFn,
    g: GFunction,
    fam: EnumFamily,
    D: Optional[LargeSet] = None
) -> List[Tuple[int, ...]]:
    """
    Блоки F_{e,k,s,0..k-1}: k подряд идущих кусков по g(e, k) элементов
    из возрастающего списка D ∩ (s + E); лишние элементы не используются.

    Raises:
        ValidationError: стадия s не приемлема
    """
    D = D if D is not None else Naturals()
    if not acceptable(s, e, k, D, f, g, fam):
        raise ValidationError(f"stage {s} is not acceptable for ({e}, {k})")
    gk, K, n = _block_parameters(e, k, f, g)
    current = approximant(fam, e, n, s)
    hits = [y for y in sorted(s + x for x in current.elements) if D.contains(y)][:K]
    return [tuple(hits[j * gk:(j + 1) * gk]) for j in range(k)]


@dataclass(frozen=True, eq=False)
class _Run:
    """Отрезок стадий [lo, hi], на котором приближение постоянно"""
    lo: int
    hi: int
    elements: np.ndarray
    key: FrozenSet[int]


def _runs(fam: EnumFamily, e: int, n: int, last_stage: int) -> List[_Run]:
    return [
        _Run(lo, hi, np.array(sorted(a.elements), dtype=np.int64), a.as_set)
        for lo, hi, a in approximant_runs(fam, e, n, last_stage)
    ]


def _audit_start(runs: Sequence[_Run]) -> int:
    """
    Первая стадия после стабилизации, с которой ни одна более ранняя
    копия с другим приближением не может задеть s + E.
    """
    last = runs[-1]
    start = last.lo
    for prev in runs[:-1]:
        if prev.key != last.key:
            start = max(start, prev.hi + int(prev.elements[-1]) - int(last.elements[0]) + 1)
    return start


def _hit_counts(mask: np.ndarray, elements: np.ndarray) -> np.ndarray:
    """counts[s] = |{a ∈ A : mask[s + a]}| для всех s с s + max(A) < len(mask)"""
    indicator = np.zeros(int(elements[-1]) + 1, dtype=np.int64)
    indicator[elements] = 1
    return np.correlate(mask.astype(np.int64), indicator, mode="valid")


def _forbidden_stages(runs: Sequence[_Run], r: int, window: int) -> np.ndarray:
    """
    Стадии s, у которых s + E[r] пересекает t + E[t'] при t < s
    из более раннего отрезка с другим приближением.
    """
    current = runs[r]
    diff = np.zeros(window + 1, dtype=np.int64)
    for prev in runs[:r]:
        if prev.key == current.key:
            continue
        # t + b = s + a, t < s  =>  s = t + (b - a), b - a > 0
        shifts = np.unique(np.subtract.outer(prev.elements, current.elements).ravel())
        shifts = shifts[shifts > 0]
        starts = np.clip(prev.lo + shifts, 0, window)
        ends = np.clip(prev.hi + shifts + 1, 0, window)
        np.add.at(diff, starts, 1)
        np.add.at(diff, ends, -1)
    return np.cumsum(diff)[:window] > 0


def _acceptable_stages(
    mask: np.ndarray,
    runs: Sequence[_Run],
    K: int,
    window: int
) -> List[Tuple[int, np.ndarray]]:
    """Приемлемые стадии в окне и первые K элементов D ∩ (s + E[s])"""
    found = []
    for r, run in enumerate(runs):
        A = run.elements
        if len(A) == 0 or A[-1] >= window:
            continue
        hi = min(run.hi, window - 1 - int(A[-1]))
        if hi < run.lo:
            continue
        counts = _hit_counts(mask, A)
        forbidden = _forbidden_stages(runs, r, window)
        for s in range(run.lo, hi + 1):
            if forbidden[s] or counts[s] < K:
                continue
            shifted = s + A
            found.append((s, shifted[mask[shifted]][:K]))
    return found


class BlockFamily(ConstraintFamily):
    """
    Семейство блоков F_{e,k,s,j}.

    Процедура вхождений работает как в построении: размер m через
    образ g даёт единственную пару (e, k), а блоки с точкой x ищутся
    среди приемлемых s <= x.
    """

    def __init__(self, g: GFunction):
        self.g = g
        self.min_size = g.M
        self._blocks: List[Tuple[int, ...]] = []
        self._members: List[FrozenSet[int]] = []
        self._labels: List[Tuple[int, int, int, int]] = []
        # (e, k) -> (стадии, индекс первого блока стадии, наибольший отступ от s)
        self._groups: Dict[Tuple[int, int], Tuple[List[int], List[int], List[int]]] = {}

    def add(self, e: int, k: int, s: int, chunks: Sequence[Tuple[int, ...]]) -> None:
        stages, bases, spans = self._groups.setdefault((e, k), ([], [], [0]))
        if stages and s <= stages[-1]:
            raise ValidationError("stages must be added in increasing order")
        stages.append(s)
        bases.append(len(self._blocks))
        for j, chunk in enumerate(chunks):
            self._blocks.append(tuple(chunk))
            self._members.append(frozenset(chunk))
            self._labels.append((e, k, s, j))
            spans[0] = max(spans[0], chunk[-1] - s)

    def __len__(self) -> int:
        return len(self._blocks)

    def enumerate(self, j: int) -> FrozenSet[int]:
        return self._members[j]

    def label(self, j: int) -> Tuple[int, int, int, int]:
        return self._labels[j]

    def occurrences(self, m: int, n: int) -> List[int]:
        pair = self.g.image_member(m)
        if pair is None or pair not in self._groups:
            return []
        stages, bases, spans = self._groups[pair]
        k = pair[1]
        found = []
        for i in range(bisect_left(stages, n - spans[0]), bisect_right(stages, n)):
            for j in range(bases[i], bases[i] + k):
                if n in self._members[j]:
                    found.append(j)
        return found

    @property
    def size_bound(self) -> int:
        return max((len(b) for b in self._blocks), default=0)

    def sets_within(self, frontier: int) -> Dict[int, Tuple[int, ...]]:
        return {j: b for j, b in enumerate(self._blocks) if b[-1] < frontier}


# ============================================================================
# АУДИТ БОЛЬШИХ МНОЖЕСТВ
# ============================================================================

@dataclass
class LargenessVerdict:
    """Итог оконного аудита f-большого множества"""
    passed: bool = True
    checked: int = 0
    counterexamples: List[Dict] = field(default_factory=list)
    skipped: List[Dict] = field(default_factory=list)
    inconclusive: List[Dict] = field(default_factory=list)

    def merged(self, other: "LargenessVerdict") -> "LargenessVerdict":
        return LargenessVerdict(
            passed=self.passed and other.passed,
            checked=self.checked + other.checked,
            counterexamples=self.counterexamples + other.counterexamples,
            skipped=self.skipped + other.skipped,
            inconclusive=self.inconclusive + other.inconclusive,
        )

    def to_json(self) -> dict:
        return {
            "passed": self.passed,
            "checked": self.checked,
            "counterexamples": self.counterexamples,
            "skipped": self.skipped,
            "inconclusive": self.inconclusive,
        }


def _audit_cell(
    mask: np.ndarray,
    f: BinaryFn,
    fam: EnumFamily,
    window: int,
    e: int,
    k: int,
    label: str
) -> LargenessVerdict:
    cell = {"set": label, "e": e, "k": k}
    n = f.eval_bounded(e, k, window)
    if n is None:
        return LargenessVerdict(skipped=[{**cell, "reason": "approximant exceeds window"}])
    if n == 0:
        return LargenessVerdict(skipped=[{**cell, "reason": "empty approximant"}])

    _, settled_at = stable_approximant(fam, e, n)
    if settled_at >= window:
        return LargenessVerdict(inconclusive=[{**cell, "reason": "approximant unsettled in window"}])
    runs = _runs(fam, e, n, window - 1)
    A = runs[-1].elements
    start = _audit_start(runs)
    last = window - 1 - int(A[-1])
    if start > last:
        return LargenessVerdict(inconclusive=[{**cell, "reason": "no audited stage in window"}])

    counts = _hit_counts(mask, A)[start:last + 1]
    bad = np.flatnonzero(counts < k)
    counterexamples = [
        {**cell, "s": start + int(i), "count": int(counts[i])} for i in bad
    ]
    return LargenessVerdict(
        passed=not counterexamples,
        checked=len(counts),
        counterexamples=counterexamples,
    )


def largeness_audit(
    D: LargeSet,
    f: BinaryFn,
    fam: EnumFamily,
    window: int,
    k_max: int = LARGENESS_CONFIG.K_MAX,
    workers: int = 1,
    label: str = "D"
) -> LargenessVerdict:
    """
    Оконная проверка f-большого множества.

    Для каждого e < |fam| и 1 <= k <= k_max с E = E_e^{f(e,k)},
    стабилизированным в окне, проверяется |D ∩ (s + E)| >= k при
    всех s от границы аудита до window - 1 - max(E).

    Returns:
        LargenessVerdict; контрпримеры упорядочены по (e, k, s)
    """
    fam_w = fam.extended_to(window)
    mask = D.mask(window)
    cells = [(e, k) for e in range(len(fam)) for k in range(1, k_max + 1)]

    def run(cell: Tuple[int, int]) -> LargenessVerdict:
        return _audit_cell(mask, f, fam_w, window, cell[0], cell[1], label)

    if workers > 1 and len(cells) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, cells))
    else:
        parts = [run(cell) for cell in cells]

    verdict = LargenessVerdict()
    for part in parts:
        verdict = verdict.merged(part)
    return verdict


# ============================================================================
# РАСЩЕПЛЕНИЕ И ИТЕРАЦИЯ
# ============================================================================

@dataclass
class SplitResult:
    f_hat: BinaryFn
    D0: WindowSet
    D1: WindowSet
    audit: LargenessVerdict
    coloring: PartialColoring
    sparsity: AuditVerdict
    block_count: int
    skipped: List[Dict] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "f_hat": self.f_hat.description,
            "block_count": self.block_count,
            "skipped": self.skipped,
            "sparsity": {"passed": self.sparsity.passed, "cells_checked": self.sparsity.cells_checked},
            "audit": self.audit.to_json(),
        }


def build_block_family(
    mask: np.ndarray,
    f: BinaryFn,
    g: GFunction,
    fam: EnumFamily,
    window: int,
    k_max: int
) -> Tuple[BlockFamily, List[Dict]]:
    """
    Все блоки по приемлемым стадиям окна; fam уже продлено до окна.

    Блоки режутся из D ∩ (s + E). При D = N разреженность вхождений
    следует из выбора g, при D != N она не гарантирована заранее и
    проверяется только аудитом вхождений в split (SparsityError).
    """
    family = BlockFamily(g)
    skipped = []
    f_hat = hat(f, g)
    for e in range(len(fam)):
        for k in range(1, k_max + 1):
            n = f_hat.eval_bounded(e, k, window)
            if n is None:
                skipped.append({"e": e, "k": k, "reason": "approximant exceeds window"})
                continue
            gk = g.eval(e, k)
            runs = _runs(fam, e, n, window - 1)
            for s, hits in _acceptable_stages(mask, runs, k * gk, window):
                family.add(e, k, s, [tuple(hits[j * gk:(j + 1) * gk].tolist()) for j in range(k)])
    return family, skipped


def split(
    D: LargeSet,
    f: BinaryFn,
    g: GFunction,
    fam: EnumFamily,
    params: LllParams,
    window: int,
    k_max: int = LARGENESS_CONFIG.K_MAX,
    workers: int = 1
) -> SplitResult:
    """
    Расщепление D = D^0 ⊔ D^1 с f̂(e, k) = f(e, k*g(e, k)).

    Args:
        D: Расщепляемое f-большое множество
        f: Текущая функция
        g: Функция размеров блоков
        fam: Семейство перечислений
        params: Параметры движка раскраски
        window: Окно [0, window)
        k_max: Верхняя граница аудируемых k
        workers: Потоки для аудитов

    Returns:
        SplitResult с D^0, D^1, f̂ и вердиктом оконного аудита

    Raises:
        SparsityError: семейство блоков не прошло аудит вхождений
        BudgetExceededError: исчерпан бюджет пересэмплирований
    """
    fam_w = fam.extended_to(window)
    mask = D.mask(window)
    family, skipped = build_block_family(mask, f, g, fam_w, window, k_max)
    logger.info("split: %d blocks, %d (e, k) cells skipped", len(family), len(skipped))

    sparsity = occurrence_audit(family, params, family.size_bound, window - 1, workers)
    if not sparsity.passed:
        raise SparsityError(sparsity)

    coloring = two_color(family, params, PartialColoring.empty(), window)
    bits = coloring.as_array().astype(bool)
    D0 = WindowSet(mask & ~bits, f"{D.description}^0")
    D1 = WindowSet(mask & bits, f"{D.description}^1")

    f_hat = hat(f, g)
    audit = largeness_audit(D0, f_hat, fam_w, window, k_max, workers, label="D0").merged(
        largeness_audit(D1, f_hat, fam_w, window, k_max, workers, label="D1")
    )
    if not audit.passed:
        logger.warning("split: %d largeness counterexamples", len(audit.counterexamples))
    return SplitResult(f_hat, D0, D1, audit, coloring, sparsity, len(family), skipped)


@dataclass
class Layer:
    n: int
    D: LargeSet
    f: BinaryFn


@dataclass
class LayerStack:
    """Слои D_0 ⊇ D_1 ⊇ ... ⊇ D_depth и функции f_n на окне"""
    depth: int
    window: int
    k_max: int
    g: GFunction
    family_size: int
    layers: List[Layer] = field(default_factory=list)
    splits: List[SplitResult] = field(default_factory=list)

    def masks(self) -> np.ndarray:
        return np.stack([layer.D.mask(self.window) for layer in self.layers])

    def c_hard(self) -> np.ndarray:
        """c_hard(x) = наибольшее n <= x с x ∈ D_n"""
        x = np.arange(self.window)
        colors = np.zeros(self.window, dtype=np.int64)
        for n, row in enumerate(self.masks()):
            colors[row & (x >= n)] = n
        return colors

    def color_class_differences(self) -> List[Dict]:
        """
        Конечная разность между c_hard^{-1}(n) и D_n^0 на окне
        (для n = depth сравнение идёт с самим D_depth).
        """
        colors = self.c_hard()
        out = []
        for n in range(self.depth + 1):
            reference = self.splits[n].D0.bits if n < self.depth else self.layers[n].D.mask(self.window)
            color_class = colors == n
            out.append({
                "n": n,
                "only_in_color_class": np.flatnonzero(color_class & ~reference).tolist(),
                "only_in_layer": np.flatnonzero(reference & ~color_class).tolist(),
            })
        return out

    def f_table(self, n: int) -> pd.DataFrame:
        rows = self.layers[n].f.table(self.family_size, self.k_max, self.window)
        return pd.DataFrame(rows, columns=["e", "k", "value"]).astype({"value": "Int64"})

    def export(self) -> dict:
        return {
            "format": CLI_CONFIG.FORMAT_VERSION,
            "window": self.window,
            "depth": self.depth,
            "k_max": self.k_max,
            "M": self.g.M,
            "pairing": self.g.pairing,
            "layers": [
                {
                    "n": layer.n,
                    "f": layer.f.description,
                    "f_table": layer.f.table(self.family_size, self.k_max, self.window),
                    "bitmap": WindowSet(layer.D.mask(self.window)).to_bitmap(),
                }
                for layer in self.layers
            ],
            "splits": [result.to_json() for result in self.splits],
            "differences": self.color_class_differences(),
        }

    def plot(self, path: str) -> None:
        """PNG: маски слоёв по строкам и c_hard последней строкой"""
        masks = self.masks().astype(float)
        colors = self.c_hard().astype(float)
        fig, (ax_layers, ax_color) = plt.subplots(
            2, 1, figsize=(12, 2 + 0.5 * len(masks)), sharex=True,
            gridspec_kw={"height_ratios": [len(masks), 1]}
        )
        ax_layers.imshow(masks, aspect="auto", interpolation="nearest", cmap="Greys")
        ax_layers.set_yticks(range(len(masks)))
        ax_layers.set_yticklabels([f"D_{n}" for n in range(len(masks))])
        ax_color.imshow(colors[np.newaxis, :], aspect="auto", interpolation="nearest", cmap="viridis")
        ax_color.set_yticks([0])
        ax_color.set_yticklabels(["c_hard"])
        ax_color.set_xlabel("x")
        fig.tight_layout()
        fig.savefig(path, dpi=100)
        plt.close(fig)


def iterate(
    depth: int,
    fam: EnumFamily,
    params: LllParams,
    window: int,
    k_max: int = LARGENESS_CONFIG.K_MAX,
    workers: int = 1
) -> Tuple[LayerStack, np.ndarray]:
    """
    Итерация расщеплений: D_0 = N, f_0(e, k) = k, f_{n+1} = f̂_n,
    D_{n+1} = D_n^1. Зерно каждого уровня получается подмешиванием
    номера уровня к params.seed.

    Returns:
        Кортеж (LayerStack, c_hard на окне)
    """
    is_valid, error = validate_window(window, depth, k_max)
    if not is_valid:
        raise ValidationError(error)

    g = make_g(params.M)
    D: LargeSet = Naturals()
    f = identity_k()
    stack = LayerStack(depth, window, k_max, g, len(fam), layers=[Layer(0, D, f)])
    for n in range(depth):
        level_params = params.with_seed(mix_seed(params.seed, "layer", n))
        result = split(D, f, g, fam, level_params, window, k_max, workers)
        stack.splits.append(result)
        D, f = result.D1, result.f_hat
        stack.layers.append(Layer(n + 1, D, f))
        logger.info("iterate: layer %d has %d elements in window", n + 1, int(result.D1.bits.sum()))
    return stack, stack.c_hard()


def c_hard_from_export(export: dict) -> List[int]:
    """Независимый пересчёт c_hard по экспортированным битовым картам"""
    window = export["window"]
    bitmaps = [layer["bitmap"] for layer in sorted(export["layers"], key=lambda layer: layer["n"])]
    colors = []
    for x in range(window):
        colors.append(max(n for n, bitmap in enumerate(bitmaps) if n <= x and bitmap[x] == "1"))
    return colors


# ============================================================================
# ЭФФЕКТИВНАЯ ИММУННОСТЬ
# ============================================================================

@dataclass
class ImmunityVerdict:
    color: int
    entries: List[Dict] = field(default_factory=list)

    @property
    def flagged(self) -> bool:
        return any(entry["status"] == "flagged" for entry in self.entries)

    @property
    def passed(self) -> bool:
        return not self.flagged

    def to_json(self) -> dict:
        return {"color": self.color, "passed": self.passed, "flagged": self.flagged, "entries": self.entries}


def immunity_audit(S: Iterable[int], n: int, stack: LayerStack, fam: EnumFamily) -> ImmunityVerdict:
    """
    Проверка шага иммунности для кандидата S, избегающего цвета n.

    Граница для e: f_{n+1}(e, 1) при n < depth (D_n^0 является
    f̂_n-большим) и f_depth(e, 1) при n = depth. Если |W_e| не меньше
    границы и предел E лежит в S, ищется элемент s ∈ S за границей
    аудита и x ∈ E, x != s, с c_hard(x + s) = n: тогда S не решение.

    Returns:
        ImmunityVerdict: по каждому e статус pass, flagged или inconclusive
    """
    window = stack.window
    members = sorted(set(int(x) for x in S))
    if members and (members[0] < 0 or members[-1] >= window):
        raise ValidationError("S must lie inside the window")
    if not 0 <= n <= stack.depth:
        raise ValidationError(f"color {n} is outside 0..{stack.depth}")

    bound_fn = stack.layers[min(n + 1, stack.depth)].f
    colors = stack.c_hard()
    in_S = set(members)
    fam_w = fam.extended_to(window)
    verdict = ImmunityVerdict(color=n)

    for e in range(len(fam)):
        size = len(fam[e].elements)
        bound = bound_fn.eval_bounded(e, 1, window)
        if bound is None or size < bound:
            if bound is None and size > window:
                verdict.entries.append({"e": e, "status": "inconclusive", "reason": "bound exceeds window"})
            else:
                verdict.entries.append({"e": e, "status": "pass", "reason": "enumeration below bound", "bound": bound})
            continue

        limit, settled_at = stable_approximant(fam_w, e, bound)
        if settled_at >= window:
            verdict.entries.append({"e": e, "status": "inconclusive", "reason": "approximant unsettled in window"})
            continue
        E = sorted(limit.elements)
        missing = [x for x in E if x not in in_S]
        if missing:
            verdict.entries.append({"e": e, "status": "pass", "reason": "approximant not inside S",
                                    "bound": bound, "witness": missing[0]})
            continue

        start = _audit_start(_runs(fam_w, e, bound, window - 1))
        witness = None
        for s in members:
            if s < start or s + E[-1] >= window:
                continue
            x = next((x for x in E if x != s and colors[x + s] == n), None)
            if x is not None:
                witness = {"s": s, "x": x, "sum": x + s}
                break
        if witness is None:
            verdict.entries.append({"e": e, "status": "inconclusive", "reason": "no audited element of S",
                                    "bound": bound})
        else:
            verdict.entries.append({"e": e, "status": "flagged", "bound": bound, "witness": witness})

    logger.info("immunity audit for color %d: flagged=%s", n, verdict.flagged)
    return verdict
