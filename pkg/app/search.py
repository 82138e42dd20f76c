"""
Переборные решатели и проверки на конечном универсуме.

Все поиски идут в лексикографическом порядке по возрастающим спискам
элементов. Бюджет узлов задаётся на ветвь верхнего уровня (первый
элемент списка), ответ собирается просмотром ветвей по порядку, поэтому
результат и число узлов не зависят от числа потоков. Исчерпание
бюджета даёт статус unknown и никогда не выдаётся за none.
"""

import itertools
import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np

from .config import SEARCH_CONFIG
from .validation import NotTwoBoundedError, ValidationError, validate_search_params

logger = logging.getLogger(__name__)

FOUND = "found"
NONE = "none"
UNKNOWN = "unknown"


# ============================================================================
# РАСКРАСКИ
# ============================================================================

class FiniteColoring:
    """
    Раскраска возрастающих кортежей длины arity из [0, universe).

    Цвета: числа 0..palette-1; зарезервированные цвета (цвет
    переполнения у производных раскрасок) не выдаются как свидетели.
    """

    def __init__(
        self,
        arity: int,
        universe: int,
        fn: Callable[[Tuple[int, ...]], int],
        palette: Optional[int] = None,
        reserved: Iterable[int] = (),
        description: str = ""
    ):
        if arity < 1:
            raise ValidationError("arity must be at least 1")
        if universe < 0:
            raise ValidationError("universe must be natural")
        self.arity = arity
        self.universe = universe
        self._fn = fn
        self._palette = palette
        self.reserved: FrozenSet[int] = frozenset(reserved)
        self.description = description

    def eval(self, tup: Sequence[int]) -> int:
        return int(self._fn(tuple(tup)))

    def domain(self) -> Iterable[Tuple[int, ...]]:
        return itertools.combinations(range(self.universe), self.arity)

    @cached_property
    def palette(self) -> int:
        if self._palette is not None:
            return self._palette
        return 1 + max((self.eval(t) for t in self.domain()), default=0)

    def usable_colors(self) -> List[int]:
        return [j for j in range(self.palette) if j not in self.reserved]

    def colors_on(self, T: Sequence[int]) -> Set[int]:
        return {self.eval(t) for t in itertools.combinations(sorted(T), self.arity)}

    def table(self) -> list:
        if self.arity == 1:
            return [self.eval((x,)) for x in range(self.universe)]
        return [[list(t), self.eval(t)] for t in self.domain()]

    def to_json(self) -> dict:
        return {
            "arity": self.arity,
            "universe": self.universe,
            "palette": self.palette,
            "reserved": sorted(self.reserved),
            "description": self.description,
            "table": self.table(),
        }

    @classmethod
    def from_table(
        cls,
        arity: int,
        universe: int,
        table: Sequence,
        palette: Optional[int] = None,
        reserved: Iterable[int] = (),
        description: str = "table"
    ) -> "FiniteColoring":
        if arity == 1:
            if len(table) != universe:
                raise ValidationError(f"unary table needs {universe} entries, got {len(table)}")
            values = {(x,): int(c) for x, c in enumerate(table)}
        else:
            values = {tuple(int(v) for v in t): int(c) for t, c in table}
        for t in itertools.combinations(range(universe), arity):
            if t not in values:
                raise ValidationError(f"table has no color for {list(t)}")
        return cls(arity, universe, values.__getitem__, palette, reserved, description)

    def __repr__(self) -> str:
        return f"FiniteColoring({self.description}, arity={self.arity}, N={self.universe})"


def constant_coloring(universe: int, value: int = 0, arity: int = 1) -> FiniteColoring:
    return FiniteColoring(arity, universe, lambda t: value, max(2, value + 1), description=f"constant {value}")


def identity_coloring(universe: int) -> FiniteColoring:
    return FiniteColoring(1, universe, lambda t: t[0], max(universe, 1), description="identity")


def mod_coloring(universe: int, modulus: int, arity: int = 1) -> FiniteColoring:
    """c(t) = (сумма t) mod modulus"""
    if modulus < 1:
        raise ValidationError("modulus must be positive")
    return FiniteColoring(arity, universe, lambda t: sum(t) % modulus, modulus, description=f"sum mod {modulus}")


def parity_coloring(universe: int) -> FiniteColoring:
    return mod_coloring(universe, 2, arity=1)


def sum_parity_coloring(universe: int) -> FiniteColoring:
    return mod_coloring(universe, 2, arity=2)


def max_coloring(universe: int) -> FiniteColoring:
    return FiniteColoring(2, universe, lambda t: max(t), max(universe, 1), description="max")


def random_coloring(rng: np.random.Generator, universe: int, palette: int, arity: int = 1) -> FiniteColoring:
    """Случайная таблица с цветами из [0, palette)"""
    if arity == 1:
        table = rng.integers(0, palette, size=universe).tolist()
    else:
        table = [[list(t), int(rng.integers(0, palette))]
                 for t in itertools.combinations(range(universe), arity)]
    return FiniteColoring.from_table(arity, universe, table, palette, description=f"random {palette}")


GENERATORS: Dict[str, Callable[..., FiniteColoring]] = {
    "constant": constant_coloring,
    "identity": identity_coloring,
    "parity": parity_coloring,
    "sum_parity": sum_parity_coloring,
    "mod": mod_coloring,
    "max": max_coloring,
}


def sum_colorings(c: FiniteColoring, n: int) -> List[FiniteColoring]:
    """
    Производные раскраски арностей 1..n: {a_0, ..., a_j} -> c(a_0 + ... + a_j).

    Первая из них сама c. Суммы, выходящие за универсум, получают
    зарезервированный цвет переполнения c.palette.
    """
    if c.arity != 1:
        raise ValidationError("sum_colorings needs a unary coloring")
    if n < 1:
        raise ValidationError("n must be at least 1")
    overflow = c.palette

    def derived(arity: int) -> FiniteColoring:
        def fn(t: Tuple[int, ...]) -> int:
            total = sum(t)
            return c.eval((total,)) if total < c.universe else overflow
        return FiniteColoring(
            arity, c.universe, fn, c.palette + 1, c.reserved | {overflow},
            description=f"sums of {arity} under {c.description}"
        )

    return [c] + [derived(arity) for arity in range(2, n + 1)]


# ============================================================================
# ДВИЖОК ЛЕКСИКОГРАФИЧЕСКОГО ПЕРЕБОРА
# ============================================================================

@dataclass
class SearchResult:
    status: str
    elements: Tuple[int, ...] = ()
    witness: Optional[int] = None
    nodes: int = 0
    # бюджет узлов действует на каждую ветвь верхнего уровня отдельно
    branch_budget: Optional[int] = None

    @property
    def found(self) -> bool:
        return self.status == FOUND

    def to_json(self) -> dict:
        return {
            "status": self.status,
            "elements": list(self.elements),
            "witness": self.witness,
            "nodes": self.nodes,
            "node_budget_per_branch": self.branch_budget,
        }


@dataclass
class _Problem:
    """
    feasible: антимонотонное условие, выполнено на каждом префиксе
    решения; на полном списке оно и есть условие решения.
    """
    candidates: Sequence[int]
    size: int
    feasible: Callable[[Tuple[int, ...]], bool]
    witness: Callable[[Tuple[int, ...]], Optional[int]] = lambda T: None


class _BudgetSpent(Exception):
    pass


def _search_branch(problem: _Problem, first: int, budget: int) -> SearchResult:
    """Лексикографический поиск среди списков, начинающихся с candidates[first]"""
    cands = problem.candidates
    nodes = 0

    def dfs(prefix: Tuple[int, ...], next_index: int) -> Optional[Tuple[int, ...]]:
        nonlocal nodes
        if len(prefix) == problem.size:
            return prefix
        need = problem.size - len(prefix)
        for i in range(next_index, len(cands) - need + 1):
            nodes += 1
            if nodes > budget:
                raise _BudgetSpent()
            extended = prefix + (cands[i],)
            if not problem.feasible(extended):
                continue
            found = dfs(extended, i + 1)
            if found is not None:
                return found
        return None

    try:
        nodes += 1
        root = (cands[first],)
        found = dfs(root, first + 1) if problem.feasible(root) else None
    except _BudgetSpent:
        return SearchResult(UNKNOWN, nodes=budget)
    if found is None:
        return SearchResult(NONE, nodes=nodes)
    return SearchResult(FOUND, found, problem.witness(found), nodes)


def _run_search(problem: _Problem, node_budget: int, workers: int) -> SearchResult:
    is_valid, error = validate_search_params(max(len(problem.candidates), 1), problem.size, node_budget)
    if not is_valid:
        raise ValidationError(error)

    if problem.size == 0:
        empty: Tuple[int, ...] = ()
        if problem.feasible(empty):
            return SearchResult(FOUND, empty, problem.witness(empty), 0)
        return SearchResult(NONE)

    branches = list(range(len(problem.candidates) - problem.size + 1))
    total = 0
    step = max(workers, 1)
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for lo in range(0, len(branches), step):
            chunk = branches[lo:lo + step]
            if pool is not None:
                results = list(pool.map(lambda b: _search_branch(problem, b, node_budget), chunk))
            else:
                results = [_search_branch(problem, b, node_budget) for b in chunk]
            for result in results:
                total += result.nodes
                if result.status != NONE:
                    return SearchResult(result.status, result.elements, result.witness, total, node_budget)
    finally:
        if pool is not None:
            pool.shutdown()
    return SearchResult(NONE, nodes=total, branch_budget=node_budget)


def _least_absent(colors: Set[int], usable: Sequence[int]) -> Optional[int]:
    return next((j for j in usable if j not in colors), None)


# ============================================================================
# РЕШАТЕЛИ
# ============================================================================

def find_thin(
    c: FiniteColoring,
    target_size: int,
    node_budget: int = SEARCH_CONFIG.NODE_BUDGET,
    workers: int = 1
) -> SearchResult:
    """
    Лексикографически наименьшее T ⊆ [0, N) размера target_size, на
    котором c([T]^arity) пропускает некоторый цвет.

    Returns:
        SearchResult; witness: наименьший пропущенный цвет
    """
    if target_size > c.universe:
        return SearchResult(NONE)
    usable = c.usable_colors()

    def absent(T: Tuple[int, ...]) -> Optional[int]:
        return _least_absent(c.colors_on(T), usable)

    problem = _Problem(range(c.universe), target_size, lambda T: absent(T) is not None, absent)
    result = _run_search(problem, node_budget, workers)
    logger.info("find_thin: %s after %d nodes", result.status, result.nodes)
    return result


@dataclass(frozen=True)
class FsWindow:
    """
    Окно конечных сумм. exact2: суммы ровно двух элементов;
    upto: от 1 до m элементов; full: все непустые подмножества.
    """
    mode: str
    m: int = 2

    def __post_init__(self):
        if self.mode not in ("exact2", "upto", "full"):
            raise ValidationError(f"unknown fs mode {self.mode!r}")
        if self.mode == "upto" and self.m < 1:
            raise ValidationError("upto mode needs m >= 1")

    def term_counts(self, size: int) -> range:
        if self.mode == "exact2":
            return range(2, 3)
        if self.mode == "upto":
            return range(1, min(self.m, size) + 1)
        return range(1, size + 1)

    def sums(self, S: Sequence[int]) -> List[int]:
        return [sum(combo) for r in self.term_counts(len(S)) for combo in itertools.combinations(S, r)]


def find_fs_solution(
    c: FiniteColoring,
    window: FsWindow,
    kind: str,
    target_size: int,
    node_budget: int = SEARCH_CONFIG.NODE_BUDGET,
    workers: int = 1
) -> SearchResult:
    """
    Лексикографически наименьшее S ⊆ [1, N) размера target_size, у
    которого все суммы окна меньше N, а их цвета пропускают некоторый
    цвет (kind="thin") или совпадают (kind="homog").

    Returns:
        SearchResult; witness: пропущенный цвет либо общий цвет
    """
    if c.arity != 1:
        raise ValidationError("find_fs_solution needs a unary coloring")
    if kind not in ("thin", "homog"):
        raise ValidationError(f"unknown solution kind {kind!r}")
    usable = c.usable_colors()

    def colors(S: Tuple[int, ...]) -> Optional[Set[int]]:
        sums = window.sums(S)
        if any(total >= c.universe for total in sums):
            return None
        return {c.eval((total,)) for total in sums}

    def witness(S: Tuple[int, ...]) -> Optional[int]:
        seen = colors(S)
        if seen is None:
            return None
        if kind == "thin":
            return _least_absent(seen, usable)
        if len(seen) > 1:
            return None
        return next(iter(seen)) if seen else (usable[0] if usable else None)

    problem = _Problem(range(1, c.universe), target_size, lambda S: witness(S) is not None, witness)
    result = _run_search(problem, node_budget, workers)
    logger.info("find_fs_solution(%s, %s): %s after %d nodes", window.mode, kind, result.status, result.nodes)
    return result


def find_ht2_solution(
    c: FiniteColoring,
    kind: str,
    target_size: int,
    node_budget: int = SEARCH_CONFIG.NODE_BUDGET
) -> SearchResult:
    """
    Специализированный решатель для окна ровно двух слагаемых:
    прямой перебор itertools.combinations без отсечений.
    """
    if kind not in ("thin", "homog"):
        raise ValidationError(f"unknown solution kind {kind!r}")
    usable = [j for j in range(c.palette) if j not in c.reserved]
    nodes = 0
    for S in itertools.combinations(range(1, c.universe), target_size):
        nodes += 1
        if nodes > node_budget:
            return SearchResult(UNKNOWN, nodes=node_budget)
        pair_sums = [a + b for a, b in itertools.combinations(S, 2)]
        if any(total >= c.universe for total in pair_sums):
            continue
        seen = {c.eval((total,)) for total in pair_sums}
        if kind == "thin":
            missing = [j for j in usable if j not in seen]
            if missing:
                return SearchResult(FOUND, S, missing[0], nodes)
        elif len(seen) <= 1:
            color = min(seen) if seen else (usable[0] if usable else None)
            if color is not None:
                return SearchResult(FOUND, S, color, nodes)
    return SearchResult(NONE, nodes=nodes)


def simultaneous_thin(
    colorings: Sequence[FiniteColoring],
    target_size: int,
    node_budget: int = SEARCH_CONFIG.NODE_BUDGET,
    workers: int = 1
) -> SearchResult:
    """
    Одно T и один цвет j, пропущенный всеми раскрасками на [T]^{m_i}.

    Returns:
        SearchResult; witness: наименьший общий пропущенный цвет
    """
    if not colorings:
        raise ValidationError("at least one coloring is required")
    universe = colorings[0].universe
    if any(c.universe != universe for c in colorings):
        raise ValidationError("all colorings must share one universe")
    if target_size > universe:
        return SearchResult(NONE)
    palette = max(c.palette for c in colorings)
    reserved = frozenset().union(*(c.reserved for c in colorings))
    usable = [j for j in range(palette) if j not in reserved]

    def absent(T: Tuple[int, ...]) -> Optional[int]:
        seen: Set[int] = set()
        for c in colorings:
            seen |= c.colors_on(T)
        return _least_absent(seen, usable)

    problem = _Problem(range(universe), target_size, lambda T: absent(T) is not None, absent)
    result = _run_search(problem, node_budget, workers)
    logger.info("simultaneous_thin: %s after %d nodes", result.status, result.nodes)
    return result


def check_two_bounded(c: FiniteColoring) -> None:
    """
    Raises:
        NotTwoBoundedError: некоторый цвет принимается более двух раз
    """
    counts = Counter(c.eval(t) for t in c.domain())
    for color, count in sorted(counts.items()):
        if count > 2:
            raise NotTwoBoundedError(color, count)


def rrt_solve(
    c: FiniteColoring,
    target_size: int,
    node_budget: int = SEARCH_CONFIG.NODE_BUDGET,
    workers: int = 1
) -> SearchResult:
    """Лексикографически наименьшее R, на [R]^2 которого c инъективна"""
    if c.arity != 2:
        raise ValidationError("rrt_solve needs a binary coloring")
    check_two_bounded(c)
    if target_size > c.universe:
        return SearchResult(NONE)

    def injective(R: Tuple[int, ...]) -> bool:
        pairs = list(itertools.combinations(R, 2))
        return len({c.eval(p) for p in pairs}) == len(pairs)

    result = _run_search(_Problem(range(c.universe), target_size, injective), node_budget, workers)
    logger.info("rrt_solve: %s after %d nodes", result.status, result.nodes)
    return result


# ============================================================================
# НЕЗАВИСИМЫЕ ПРОВЕРКИ
# ============================================================================

@dataclass
class WindowCheck:
    valid: bool
    colors: List[int] = field(default_factory=list)
    in_window: int = 0
    outside: int = 0

    def to_json(self) -> dict:
        return {"valid": self.valid, "colors": self.colors, "in_window": self.in_window, "outside": self.outside}


def check_fs_window(
    c: FiniteColoring,
    S: Sequence[int],
    window: FsWindow,
    kind: str,
    witness: int
) -> WindowCheck:
    """
    Независимая проверка окна конечных сумм: подмножества S
    перебираются битовыми масками, цвета считаются заново. Суммы,
    не меньшие N, лежат вне окна и только подсчитываются.
    """
    elements = list(S)
    if len(set(elements)) != len(elements):
        return WindowCheck(False)
    if window.mode == "exact2":
        allowed = {2}
    elif window.mode == "upto":
        allowed = set(range(1, window.m + 1))
    else:
        allowed = set(range(1, len(elements) + 1))

    colors: Set[int] = set()
    in_window = outside = 0
    for mask in range(1, 1 << len(elements)):
        if bin(mask).count("1") not in allowed:
            continue
        total = sum(x for i, x in enumerate(elements) if mask >> i & 1)
        if total >= c.universe:
            outside += 1
            continue
        in_window += 1
        colors.add(c.eval((total,)))

    if kind == "thin":
        valid = witness not in colors and witness not in c.reserved
    else:
        valid = colors <= {witness}
    return WindowCheck(valid, sorted(colors), in_window, outside)


def check_thin(c: FiniteColoring, T: Sequence[int], color: int) -> bool:
    """Цвет color не принимается на [T]^arity и не зарезервирован"""
    if color in c.reserved:
        return False
    return all(c.eval(t) != color for t in itertools.combinations(sorted(T), c.arity))


def check_rainbow(c: FiniteColoring, R: Sequence[int]) -> bool:
    seen = set()
    for pair in itertools.combinations(sorted(R), 2):
        color = c.eval(pair)
        if color in seen:
            return False
        seen.add(color)
    return True


# ============================================================================
# ФУНКЦИИ, ПОХОЖИЕ НА СЛОЖЕНИЕ
# ============================================================================

@dataclass
class AdditionLike:
    """f({x, y}) с границей ухода g(x, n) и границей совпадений b"""
    fn: Callable[[int, int], int]
    escape_bound: Callable[[int, int], int]
    collision_bound: int
    description: str = ""

    def eval(self, x: int, y: int) -> int:
        return int(self.fn(min(x, y), max(x, y)))


def addition() -> AdditionLike:
    return AdditionLike(lambda x, y: x + y, lambda x, n: n, 1, "addition")


def maximum() -> AdditionLike:
    return AdditionLike(lambda x, y: y, lambda x, n: n, 1, "max")


@dataclass
class AdditionLikeVerdict:
    passed: bool
    violations: List[Dict] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)
    scan_bound: int = 0

    def to_json(self) -> dict:
        return {
            "passed": self.passed,
            "violations": self.violations,
            "warnings": self.warnings,
            "scan_bound": self.scan_bound,
        }


def addition_like_validate(
    f: AdditionLike,
    x_max: int,
    n_max: int,
    y_scan_bound: Optional[int] = None
) -> AdditionLikeVerdict:
    """
    Оконная проверка двух условий: f({x, y}) > n при y > g(x, n) и
    не более b чисел z с f({x, z}) = f({x, y}).

    Args:
        f: Проверяемая функция
        x_max, n_max: Границы перебора x и n
        y_scan_bound: Граница перебора y и z (по умолчанию
            max g(x, n) + SEARCH_CONFIG.ADDLIKE_SCAN_MARGIN)

    Returns:
        AdditionLikeVerdict; проверка честна только в пределах окна
    """
    if y_scan_bound is None:
        y_scan_bound = max(
            f.escape_bound(x, n) for x in range(x_max + 1) for n in range(n_max + 1)
        ) + SEARCH_CONFIG.ADDLIKE_SCAN_MARGIN

    violations: List[Dict] = []
    warnings: List[str] = []
    if x_max == 0:
        warnings.append("degenerate window: only x = 0 is scanned")

    for x in range(x_max + 1):
        for n in range(n_max + 1):
            for y in range(f.escape_bound(x, n) + 1, y_scan_bound + 1):
                if y != x and f.eval(x, y) <= n:
                    violations.append({"clause": "escape", "x": x, "n": n, "y": y})
                    break

        counts = Counter(f.eval(x, z) for z in range(y_scan_bound + 1) if z != x)
        for value, count in sorted(counts.items()):
            if count > f.collision_bound:
                violations.append({"clause": "collision", "x": x, "value": value, "count": count})

    logger.info("addition_like_validate(%s): %d violations", f.description, len(violations))
    return AdditionLikeVerdict(not violations, violations, warnings, y_scan_bound)
