"""
Вспомогательные функции верстака.

Содержит функции для:
- Перечисления простых чисел
- Нумерации пар натуральных чисел
- Смешивания зёрен генераторов
- Канонической сериализации и хеширования JSON
"""

import hashlib
import json
import math
from typing import Any, Iterator, List, Tuple

_PRIMES: List[int] = [2, 3]


def _extend_primes() -> None:
    candidate = _PRIMES[-1] + 2
    while True:
        limit = math.isqrt(candidate)
        if all(candidate % p for p in _PRIMES if p <= limit):
            _PRIMES.append(candidate)
            return
        candidate += 2


def iter_primes() -> Iterator[int]:
    """Простые числа по возрастанию (кэш растёт по требованию)"""
    i = 0
    while True:
        if i >= len(_PRIMES):
            _extend_primes()
        yield _PRIMES[i]
        i += 1


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    for p in iter_primes():
        if p * p > n:
            return True
        if n % p == 0:
            return n == p
    return True


def least_prime_not_dividing(n: int) -> int:
    """
    Наименьшее простое, не делящее n.

    Args:
        n: Положительное натуральное число

    Returns:
        Простое p с n mod p != 0
    """
    if n <= 0:
        raise ValueError("every prime divides 0")
    for p in iter_primes():
        if n % p:
            return p
    raise AssertionError("unreachable")


def cantor_pair(a: int, b: int) -> int:
    return (a + b) * (a + b + 1) // 2 + b


def cantor_unpair(code: int) -> Tuple[int, int]:
    w = (math.isqrt(8 * code + 1) - 1) // 2
    b = code - w * (w + 1) // 2
    return w - b, b


def szudzik_pair(a: int, b: int) -> int:
    return a * a + a + b if a >= b else b * b + a


def szudzik_unpair(code: int) -> Tuple[int, int]:
    r = math.isqrt(code)
    if code - r * r < r:
        return code - r * r, r
    return r, code - r * r - r


PAIRINGS = {
    "cantor": (cantor_pair, cantor_unpair),
    "szudzik": (szudzik_pair, szudzik_unpair),
}


def mix_seed(seed: int, *parts: Any) -> int:
    """
    Детерминированное 64-битное зерно из базового зерна и меток.

    Метки (номер слоя, границы префикса) подмешиваются через blake2b,
    поэтому результат не зависит от порядка запусков и версии Python.
    """
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(seed)).encode())
    for part in parts:
        h.update(b"|")
        h.update(repr(part).encode())
    return int.from_bytes(h.digest(), "big")


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def sha256_of(obj: Any) -> str:
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()
