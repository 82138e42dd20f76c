"""
Симуляция поэтапных перечислений.

След OracleTrace задаёт конечное поэтапное перечисление: каждый элемент
входит на своей стадии и больше не уходит. Им представлены ∅′ и его
приближения ∅′[s]; семейство следов EnumFamily представляет W_e^{∅′},
а Approximant хранит конечные приближения E_e^n[s] с порядком ≺.

Поскольку след монотонен, t_x (наименьшее t, начиная с которого x
присутствует на всех стадиях [t, s]) совпадает со стадией входа x.
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .validation import HorizonError, ValidationError, validate_trace_params

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class OracleTrace:
    """Конечное поэтапное перечисление с горизонтом"""
    entries: Tuple[Tuple[int, int], ...]
    horizon: int

    def __post_init__(self):
        entries = tuple(sorted((int(m), int(s)) for m, s in self.entries))
        object.__setattr__(self, "entries", entries)
        if self.horizon < 0:
            raise ValidationError("horizon must be natural")
        elements = [m for m, _ in entries]
        if len(set(elements)) != len(elements):
            raise ValidationError("at most one entry per element")
        for m, s in entries:
            if m < 0 or s < 0:
                raise ValidationError(f"entry ({m}, {s}) must be natural")
            if s > self.horizon:
                raise ValidationError(f"entry ({m}, {s}) lies beyond horizon {self.horizon}")

    @classmethod
    def of(cls, entries: Iterable[Sequence[int]], horizon: Optional[int] = None) -> "OracleTrace":
        pairs = [(int(m), int(s)) for m, s in entries]
        if horizon is None:
            horizon = max((s for _, s in pairs), default=0)
        return cls(tuple(pairs), horizon)

    @cached_property
    def stage_of(self) -> Dict[int, int]:
        return dict(self.entries)

    @property
    def elements(self) -> FrozenSet[int]:
        return frozenset(self.stage_of)

    def final_member(self, m: int) -> bool:
        """Принадлежность m пределу перечисления"""
        return m in self.stage_of

    def stage_member(self, m: int, s: int) -> bool:
        """
        Принадлежность m стадии s, где стадии за горизонтом читаются
        как установившееся состояние (след конечен и к горизонту устоялся).
        """
        stage = self.stage_of.get(m)
        return stage is not None and stage <= s

    def extended_to(self, horizon: int) -> "OracleTrace":
        """Тот же след с горизонтом не меньше заданного"""
        if horizon <= self.horizon:
            return self
        return OracleTrace(self.entries, horizon)

    def to_json(self) -> dict:
        return {"horizon": self.horizon, "entries": [[m, s] for m, s in self.entries]}


@dataclass(frozen=True)
class EnumFamily:
    """Семейство следов, индексированное e = 0, 1, ..."""
    traces: Tuple[OracleTrace, ...]

    def __post_init__(self):
        object.__setattr__(self, "traces", tuple(self.traces))

    def __len__(self) -> int:
        return len(self.traces)

    def __getitem__(self, e: int) -> OracleTrace:
        if not 0 <= e < len(self.traces):
            raise ValidationError(f"no enumeration with index {e}")
        return self.traces[e]

    def extended_to(self, horizon: int) -> "EnumFamily":
        return EnumFamily(tuple(t.extended_to(horizon) for t in self.traces))

    def to_json(self) -> dict:
        return {"traces": [t.to_json() for t in self.traces]}


@dataclass(frozen=True)
class Approximant:
    """Приближение E_e^n[s]: n наименьших элементов W_e[s] по порядку ≺"""
    e: int
    n: int
    s: int
    elements: Tuple[int, ...]
    fallback: bool

    @property
    def as_set(self) -> FrozenSet[int]:
        return frozenset(self.elements)

    def same_set(self, other: "Approximant") -> bool:
        return self.as_set == other.as_set


def member_at(trace: OracleTrace, m: int, s: int) -> bool:
    """
    Принадлежность m приближению на стадии s.

    Raises:
        HorizonError: s за горизонтом следа
    """
    if s > trace.horizon:
        raise HorizonError(s, trace.horizon)
    return trace.stage_member(m, s)


def settle_stage(trace: OracleTrace) -> int:
    """Наибольшая стадия входа (0 для пустого следа)"""
    return max((s for _, s in trace.entries), default=0)


def precedes(trace: OracleTrace, x: int, y: int) -> bool:
    """x ≺ y: раньше вошёл, при равенстве стадий меньше по величине"""
    return (trace.stage_of[x], x) < (trace.stage_of[y], y)


def approximant(fam: EnumFamily, e: int, n: int, s: int) -> Approximant:
    """
    Приближение E_e^n[s].

    Args:
        fam: Семейство перечислений
        e: Индекс перечисления
        n: Сколько элементов брать
        s: Стадия

    Returns:
        Approximant; при |W_e[s]| < n запасной вариант [0, n)
    """
    trace = fam[e]
    if s > trace.horizon:
        raise HorizonError(s, trace.horizon)
    if n < 0:
        raise ValidationError("n must be natural")

    present = sorted((stage, m) for m, stage in trace.entries if stage <= s)
    if len(present) < n:
        return Approximant(e, n, s, tuple(range(n)), True)
    return Approximant(e, n, s, tuple(m for _, m in present[:n]), False)


def stable_approximant(fam: EnumFamily, e: int, n: int) -> Tuple[Approximant, int]:
    """
    Предел E_e^n и наименьшая стадия, с которой он постоянен до горизонта.

    Returns:
        Кортеж (предельное приближение, стадия стабилизации)
    """
    trace = fam[e]
    limit = approximant(fam, e, n, trace.horizon)
    # E_e^n[s] меняется только на стадиях входа элементов
    for s in sorted({st for _, st in trace.entries}, reverse=True):
        if s == 0 or not approximant(fam, e, n, s - 1).same_set(limit):
            stage = s
            break
    else:
        stage = 0
    return limit, stage


def approximant_runs(fam: EnumFamily, e: int, n: int, last_stage: int) -> List[Tuple[int, int, Approximant]]:
    """
    Разбиение стадий [0, last_stage] на отрезки постоянства E_e^n[s].

    Returns:
        Список (первая стадия, последняя стадия, приближение)
    """
    trace = fam[e]
    if last_stage > trace.horizon:
        raise HorizonError(last_stage, trace.horizon)
    change_points = sorted({0} | {st for _, st in trace.entries if st <= last_stage})
    runs: List[Tuple[int, int, Approximant]] = []
    for i, lo in enumerate(change_points):
        hi = change_points[i + 1] - 1 if i + 1 < len(change_points) else last_stage
        current = approximant(fam, e, n, lo)
        if runs and runs[-1][2].same_set(current):
            prev_lo, _, prev = runs[-1]
            runs[-1] = (prev_lo, hi, prev)
        else:
            runs.append((lo, hi, current))
    return runs


def random_trace(
    rng: np.random.Generator,
    count: int,
    max_element: int,
    max_stage: int
) -> OracleTrace:
    """
    Случайный след: count различных элементов из [0, max_element],
    стадии из [0, max_stage], горизонт max_stage.
    """
    is_valid, error = validate_trace_params(count, max_element, max_stage)
    if not is_valid:
        raise ValidationError(error)
    elements = rng.choice(max_element + 1, size=count, replace=False)
    stages = rng.integers(0, max_stage + 1, size=count)
    return OracleTrace(tuple(zip(elements.tolist(), stages.tolist())), max_stage)


def random_family(
    rng: np.random.Generator,
    size: int,
    count: int,
    max_element: int,
    max_stage: int
) -> EnumFamily:
    """Семейство из size случайных следов, в каждом не более count элементов"""
    traces = []
    for _ in range(size):
        c = int(rng.integers(0, count + 1))
        traces.append(random_trace(rng, c, max_element, max_stage))
    return EnumFamily(tuple(traces))
