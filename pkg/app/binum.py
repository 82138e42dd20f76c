"""
Числа как множества двоичных показателей.

Число x > 0 хранится как строго возрастающая последовательность
показателей n_0 < ... < n_k, x = 2^{n_0} + ... + 2^{n_k}. Величина
никогда не материализуется без необходимости: 2-разнесённые множества
быстро уводят показатели далеко за пределы машинного слова.
"""

import heapq
import itertools
import logging
from dataclasses import dataclass
from functools import reduce, total_ordering
from typing import Iterable, Iterator, List, Optional, Tuple

from .validation import EmptyGroundSetError, InsufficientInputError, ValidationError

logger = logging.getLogger(__name__)


@total_ordering
@dataclass(frozen=True)
class BinNum:
    """Положительное натуральное число, заданное множеством показателей"""
    exponents: Tuple[int, ...]

    def __post_init__(self):
        exps = tuple(self.exponents)
        object.__setattr__(self, "exponents", exps)
        if not exps:
            raise ValidationError("BinNum needs at least one exponent")
        if exps[0] < 0:
            raise ValidationError("exponents must be natural numbers")
        if any(a >= b for a, b in zip(exps, exps[1:])):
            raise ValidationError(f"exponents must be strictly increasing: {exps}")

    @classmethod
    def from_value(cls, value: int) -> "BinNum":
        if value <= 0:
            raise ValidationError(f"BinNum is defined for positive values, got {value}")
        exps = []
        n = 0
        while value:
            if value & 1:
                exps.append(n)
            value >>= 1
            n += 1
        return cls(tuple(exps))

    @classmethod
    def power(cls, n: int) -> "BinNum":
        return cls((n,))

    @property
    def value(self) -> int:
        return sum(1 << n for n in self.exponents)

    @property
    def lam(self) -> int:
        return self.exponents[0]

    @property
    def mu(self) -> int:
        return self.exponents[-1]

    def residue(self, modulus_exp: int) -> int:
        """Остаток по модулю 2^{modulus_exp}; читает только младшие показатели"""
        return sum(1 << n for n in self.exponents if n < modulus_exp)

    def sort_key(self) -> Tuple[int, ...]:
        # Сравнение от старшего бита: кортежи в обратном порядке
        return tuple(reversed(self.exponents))

    def __lt__(self, other: "BinNum") -> bool:
        if not isinstance(other, BinNum):
            return NotImplemented
        return self.sort_key() < other.sort_key()

    def __add__(self, other: "BinNum") -> "BinNum":
        return add(self, other)

    def __str__(self) -> str:
        return "+".join(f"2^{n}" for n in self.exponents)


@dataclass(frozen=True)
class NumSet:
    """Конечный срез множества S, строго возрастающий по величине"""
    elements: Tuple[BinNum, ...] = ()

    def __post_init__(self):
        elems = tuple(self.elements)
        object.__setattr__(self, "elements", elems)
        if any(not a < b for a, b in zip(elems, elems[1:])):
            raise ValidationError("NumSet elements must be strictly increasing")

    @classmethod
    def of(cls, items: Iterable[BinNum]) -> "NumSet":
        """Сортировка и удаление повторов"""
        return cls(tuple(sorted(set(items), key=BinNum.sort_key)))

    @classmethod
    def from_values(cls, values: Iterable[int]) -> "NumSet":
        return cls.of(BinNum.from_value(v) for v in values)

    def values(self) -> List[int]:
        return [x.value for x in self.elements]

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self) -> Iterator[BinNum]:
        return iter(self.elements)

    def __getitem__(self, i):
        return self.elements[i]


@dataclass(frozen=True)
class FsQuery:
    """Ограничения окна конечных сумм"""
    max_terms: int
    value_bound: Optional[int] = None

    def __post_init__(self):
        if self.max_terms < 1:
            raise ValidationError("max_terms must be at least 1")


def lambda_mu(x: BinNum) -> Tuple[int, int]:
    """
    Наименьший и наибольший показатели числа.

    Args:
        x: Число в виде множества показателей

    Returns:
        Кортеж (λ(x), μ(x)); λ = μ ровно для степеней двойки
    """
    return x.lam, x.mu


def add(x: BinNum, y: BinNum) -> BinNum:
    """
    Точное сложение с переносами.

    Показатели обоих слагаемых кладутся в кучу; одинаковые показатели
    сливаются в перенос на следующую позицию. Для непересекающихся
    множеств показателей результатом будет их объединение.
    """
    heap = list(x.exponents) + list(y.exponents)
    heapq.heapify(heap)
    out: List[int] = []
    while heap:
        n = heapq.heappop(heap)
        count = 1
        while heap and heap[0] == n:
            heapq.heappop(heap)
            count += 1
        if count % 2:
            out.append(n)
        for _ in range(count // 2):
            heapq.heappush(heap, n + 1)
    return BinNum(tuple(out))


def sum_of(items: Iterable[BinNum]) -> BinNum:
    return reduce(add, items)


def _within_bound(x: BinNum, bound: Optional[int]) -> bool:
    if bound is None:
        return True
    if x.mu >= bound.bit_length():
        return False
    return x.value <= bound


def fs_enumerate(S: NumSet, q: FsQuery) -> NumSet:
    """
    Все суммы от 1 до q.max_terms различных элементов S.

    Args:
        S: Непустое конечное множество
        q: Ограничение числа слагаемых и (необязательно) величины

    Returns:
        Возрастающее множество сумм без повторов
    """
    if len(S) == 0:
        raise EmptyGroundSetError()

    sums = set()
    for r in range(1, min(q.max_terms, len(S)) + 1):
        for combo in itertools.combinations(S.elements, r):
            total = sum_of(combo)
            if _within_bound(total, q.value_bound):
                sums.add(total)
    return NumSet.of(sums)


def is_two_apart(S: Iterable[BinNum]) -> bool:
    """Для соседних x < y выполнено μ(x) < λ(y)"""
    elems = list(S)
    return all(x.mu < y.lam for x, y in zip(elems, elems[1:]))


def stream_of_values(values: Iterable[int]) -> Iterator[BinNum]:
    """Поток BinNum из возрастающей последовательности натуральных"""
    for v in values:
        yield BinNum.from_value(v)


def thin_to_apart(S: Iterator[BinNum], count: int) -> NumSet:
    """
    Прореживание потока до 2-разнесённого множества.

    Первый элемент берётся как есть. Далее при границе b = μ(t_{j-1})
    из потока тянется не более 2^{b+1}+1 свежих элементов; частичные
    суммы (начиная с пустой) сравниваются по модулю 2^{b+1}, и первая
    пара совпавших остатков в порядке просмотра даёт t_j как разность
    частичных сумм, то есть сумму подряд идущих вытянутых элементов,
    с λ(t_j) > b. Каждый элемент потока входит не более чем в одно t_j,
    поэтому fs(T) ⊆ fs(S).

    Args:
        S: Поток строго возрастающих чисел
        count: Сколько элементов построить

    Returns:
        2-разнесённое множество из count элементов

    Raises:
        InsufficientInputError: поток кончился раньше времени
    """
    out: List[BinNum] = []
    it = iter(S)

    def pull() -> BinNum:
        try:
            return next(it)
        except StopIteration:
            raise InsufficientInputError(len(out), count) from None

    while len(out) < count:
        if not out:
            out.append(pull())
            continue

        b = out[-1].mu
        batch_cap = (1 << (b + 1)) + 1
        drawn: List[BinNum] = []
        # остаток частичной суммы -> число вытянутых элементов в ней
        seen = {0: 0}
        residue = 0
        modulus = 1 << (b + 1)
        while True:
            if len(drawn) >= batch_cap:
                raise AssertionError("pigeonhole bound violated")
            x = pull()
            drawn.append(x)
            residue = (residue + x.residue(b + 1)) % modulus
            if residue in seen:
                start = seen[residue]
                t = sum_of(drawn[start:])
                logger.debug("thin_to_apart: t_%d uses %d of %d drawn", len(out), len(drawn) - start, len(drawn))
                out.append(t)
                break
            seen[residue] = len(drawn)

    return NumSet(tuple(out))
