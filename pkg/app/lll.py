"""
Вычислимая форма локальной леммы Ловаса.

По разреженному семейству конечных множеств строится 2-раскраска,
в которой ни одно множество семейства не одноцветно. Раскраска
продлевается префиксами: уже зафиксированные биты не меняются,
пересэмплирование (в духе Мозера–Тардоша) трогает только новые
переменные, нарушенное множество выбирается с наименьшим индексом.
"""

import logging
import math
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, FrozenSet, Iterable, List, Tuple

import numpy as np

from .config import LLL_CONFIG
from .utils import mix_seed
from .validation import BudgetExceededError, ValidationError, validate_lll_params

logger = logging.getLogger(__name__)


class ConstraintFamily(ABC):
    """
    Последовательность конечных множеств F_0, F_1, ... с процедурой
    вхождений: occurrences(m, n) даёт индексы j с |F_j| = m и n ∈ F_j.
    """
    min_size: int = 1

    @abstractmethod
    def __len__(self) -> int:
        ...

    @abstractmethod
    def enumerate(self, j: int) -> FrozenSet[int]:
        ...

    @abstractmethod
    def occurrences(self, m: int, n: int) -> List[int]:
        ...

    @property
    @abstractmethod
    def size_bound(self) -> int:
        """Наибольший размер множества семейства"""
        ...

    def sets_within(self, frontier: int) -> Dict[int, Tuple[int, ...]]:
        """
        Все множества, целиком лежащие в [0, frontier).

        Собирается только через процедуру вхождений.
        """
        found: Dict[int, Tuple[int, ...]] = {}
        for n in range(frontier):
            for m in range(self.min_size, self.size_bound + 1):
                for j in self.occurrences(m, n):
                    if j in found:
                        continue
                    members = self.enumerate(j)
                    if max(members) < frontier:
                        found[j] = tuple(sorted(members))
        return dict(sorted(found.items()))


class ExplicitFamily(ConstraintFamily):
    """Конечное семейство, заданное списком множеств"""

    def __init__(self, sets: Iterable[Iterable[int]], min_size: int = 1):
        self.min_size = min_size
        self._sets: List[FrozenSet[int]] = [frozenset(int(x) for x in s) for s in sets]
        self._index: Dict[Tuple[int, int], List[int]] = {}
        for j, s in enumerate(self._sets):
            if len(s) < min_size:
                raise ValidationError(f"set {j} has size {len(s)} < min_size {min_size}")
            if any(x < 0 for x in s):
                raise ValidationError(f"set {j} has a negative element")
            for x in s:
                self._index.setdefault((len(s), x), []).append(j)

    def __len__(self) -> int:
        return len(self._sets)

    def enumerate(self, j: int) -> FrozenSet[int]:
        return self._sets[j]

    def occurrences(self, m: int, n: int) -> List[int]:
        return list(self._index.get((m, n), ()))

    @property
    def size_bound(self) -> int:
        return max((len(s) for s in self._sets), default=0)

    def sets_within(self, frontier: int) -> Dict[int, Tuple[int, ...]]:
        return {
            j: tuple(sorted(s)) for j, s in enumerate(self._sets)
            if s and max(s) < frontier
        }

    def to_json(self) -> dict:
        return {"min_size": self.min_size, "sets": [sorted(s) for s in self._sets]}


@dataclass(frozen=True)
class LllParams:
    """
    Параметры движка. Условие M >= choose_M(q) проверяется в
    validate_lll_params на входе командной строки.
    """
    q: Fraction = LLL_CONFIG.DEFAULT_Q
    M: int = 13
    resample_budget: int = LLL_CONFIG.RESAMPLE_BUDGET
    seed: int = LLL_CONFIG.DEFAULT_SEED

    def __post_init__(self):
        object.__setattr__(self, "q", Fraction(self.q))
        is_valid, error = validate_lll_params(self.q, self.M, self.resample_budget)
        if not is_valid:
            raise ValidationError(error)

    @classmethod
    def for_q(cls, q: Fraction, seed: int = LLL_CONFIG.DEFAULT_SEED,
              resample_budget: int = LLL_CONFIG.RESAMPLE_BUDGET) -> "LllParams":
        return cls(Fraction(q), choose_M(Fraction(q)), resample_budget, seed)

    def with_seed(self, seed: int) -> "LllParams":
        return LllParams(self.q, self.M, self.resample_budget, seed)


@dataclass(frozen=True)
class PartialColoring:
    """Зафиксированный префикс раскраски: биты на [0, frontier)"""
    bits: Tuple[int, ...] = ()

    @classmethod
    def empty(cls) -> "PartialColoring":
        return cls(())

    @property
    def frontier(self) -> int:
        return len(self.bits)

    @property
    def committed(self) -> Dict[int, int]:
        return dict(enumerate(self.bits))

    def __getitem__(self, n: int) -> int:
        return self.bits[n]

    def as_array(self) -> np.ndarray:
        return np.array(self.bits, dtype=np.uint8)

    def to_string(self) -> str:
        return "".join(str(b) for b in self.bits)


@dataclass
class AuditVerdict:
    passed: bool
    violations: List[Dict] = field(default_factory=list)
    cells_checked: int = 0

    def to_json(self) -> dict:
        return {"passed": self.passed, "violations": self.violations, "cells_checked": self.cells_checked}


def _sparsity_condition(m: int, q: float) -> bool:
    # log2 от e * 2^{1-m} * (m * 2^{qm} + 1) без переполнения
    log_lhs = (
        math.log2(math.e) + 1 - m + q * m + math.log2(m)
        + math.log2(1 + 2.0 ** (-q * m) / m)
    )
    return log_lhs <= 0


def choose_M(q: Fraction) -> int:
    """
    Наименьшее m0, при котором для всех m >= m0
    e * 2^{1-m} * (m * 2^{qm} + 1) <= 1.

    Вероятность одноцветности m-множества равна 2^{1-m}; каждая его
    точка лежит не более чем в 2^{qm} множествах того же размера,
    слагаемое m * 2^{qm} + 1 учитывает соседей по всем точкам и
    геометрический хвост по остальным размерам.

    Args:
        q: Доля из условия разреженности, 0 < q < 1

    Returns:
        Константа M
    """
    q = Fraction(q)
    if not 0 < q < 1:
        raise ValidationError(f"q must lie in (0, 1), got {q}")
    qf = float(q)
    # Начиная с m_star логарифм левой части убывает
    m_star = max(1, math.ceil(1 / ((1 - qf) * math.log(2))))
    m1 = m_star
    while not _sparsity_condition(m1, qf):
        m1 += 1
        if m1 > LLL_CONFIG.CHOOSE_M_SEARCH_LIMIT:
            raise ValidationError(f"choose_M({q}) exceeds the search limit")
    m0 = m1
    while m0 > 1 and _sparsity_condition(m0 - 1, qf):
        m0 -= 1
    return m0


def _within_sparsity(count: int, m: int, q: Fraction) -> bool:
    # count <= 2^{qm} точно, без плавающей точки
    return count ** q.denominator <= 2 ** (q.numerator * m)


def _audit_size(fam: ConstraintFamily, expected: Dict[Tuple[int, int], List[int]],
                q: Fraction, m: int, n_max: int) -> List[Dict]:
    violations = []
    for n in range(n_max + 1):
        listed = sorted(fam.occurrences(m, n))
        truth = expected.get((m, n), [])
        if listed != truth:
            violations.append({"m": m, "n": n, "kind": "mismatch", "listed": listed, "expected": truth})
        if not _within_sparsity(len(truth), m, q):
            violations.append({"m": m, "n": n, "kind": "too_many", "count": len(truth)})
    return violations


def occurrence_audit(
    fam: ConstraintFamily,
    params: LllParams,
    m_max: int,
    n_max: int,
    workers: int = 1
) -> AuditVerdict:
    """
    Исчерпывающая проверка процедуры вхождений и условия разреженности
    на ячейках M <= m <= m_max, 0 <= n <= n_max.

    Returns:
        AuditVerdict; нарушения упорядочены по (m, n)
    """
    expected: Dict[Tuple[int, int], List[int]] = {}
    undersized = []
    for j in range(len(fam)):
        s = fam.enumerate(j)
        if len(s) < params.M:
            undersized.append(j)
        for x in s:
            expected.setdefault((len(s), x), []).append(j)

    sizes = list(range(params.M, m_max + 1))
    if workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda m: _audit_size(fam, expected, params.q, m, n_max), sizes))
    else:
        parts = [_audit_size(fam, expected, params.q, m, n_max) for m in sizes]

    violations = [v for part in parts for v in part]
    violations.extend({"j": j, "kind": "below_M"} for j in undersized)
    verdict = AuditVerdict(
        passed=not violations,
        violations=violations,
        cells_checked=len(sizes) * (n_max + 1),
    )
    logger.info("occurrence audit: %d cells, %d violations", verdict.cells_checked, len(violations))
    return verdict


def _monochromatic(bits: np.ndarray, members: np.ndarray) -> bool:
    values = bits[members]
    return bool(values.min() == values.max())


def two_color(
    fam: ConstraintFamily,
    params: LllParams,
    prefix: PartialColoring,
    new_frontier: int
) -> PartialColoring:
    """
    Продление раскраски до [0, new_frontier).

    Каждое множество семейства, целиком лежащее в [0, new_frontier),
    после продления не одноцветно. Биты префикса не меняются.

    Args:
        fam: Семейство ограничений
        params: Параметры движка (зерно, бюджет)
        prefix: Уже зафиксированный префикс
        new_frontier: Новая граница

    Returns:
        Продлённая раскраска

    Raises:
        BudgetExceededError: бюджет пересэмплирований исчерпан
    """
    old = prefix.frontier
    if new_frontier < old:
        raise ValidationError(f"new frontier {new_frontier} is below the committed frontier {old}")

    rng = np.random.default_rng(mix_seed(params.seed, "two_color", old, new_frontier))
    bits = np.zeros(new_frontier, dtype=np.uint8)
    bits[:old] = prefix.as_array()
    bits[old:] = rng.integers(0, 2, size=new_frontier - old, dtype=np.uint8)

    members: Dict[int, np.ndarray] = {}
    free: Dict[int, np.ndarray] = {}
    touching: Dict[int, List[int]] = {}
    for j, s in fam.sets_within(new_frontier).items():
        arr = np.array(s, dtype=np.int64)
        if arr[-1] < old:
            if _monochromatic(bits, arr):
                raise ValidationError(f"committed prefix leaves set {j} monochromatic")
            continue
        members[j] = arr
        free[j] = arr[arr >= old]
        for v in free[j].tolist():
            touching.setdefault(v, []).append(j)

    violated = {j for j, arr in members.items() if _monochromatic(bits, arr)}
    logger.debug("two_color: %d active sets, %d violated initially", len(members), len(violated))

    resamples = 0
    while violated:
        if resamples >= params.resample_budget:
            raise BudgetExceededError(sorted(violated), resamples)
        j = min(violated)
        fv = free[j]
        bits[fv] = rng.integers(0, 2, size=len(fv), dtype=np.uint8)
        resamples += 1
        touched = {t for v in fv.tolist() for t in touching[v]}
        for t in touched:
            if _monochromatic(bits, members[t]):
                violated.add(t)
            else:
                violated.discard(t)

    logger.info("two_color: frontier %d -> %d, %d resamples", old, new_frontier, resamples)
    return PartialColoring(tuple(int(b) for b in bits))


def verify_two_coloring(fam: ConstraintFamily, coloring: PartialColoring) -> List[int]:
    """
    Независимый просмотр: индексы одноцветных множеств внутри границы.
    """
    bad = []
    for j in range(len(fam)):
        s = fam.enumerate(j)
        if not s or max(s) >= coloring.frontier:
            continue
        if len({coloring.bits[x] for x in s}) == 1:
            bad.append(j)
    return bad
