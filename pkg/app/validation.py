"""
Ошибки и валидация входных данных верстака.
"""

from fractions import Fraction
from typing import Any, List, Optional, Sequence, Tuple


class ValidationError(ValueError):
    """Исключение для ошибок валидации"""
    pass


class HorizonError(ValidationError):
    """Запрос стадии за горизонтом следа"""

    def __init__(self, stage: int, horizon: int):
        super().__init__("stage beyond trace horizon")
        self.stage = stage
        self.horizon = horizon


class EmptyGroundSetError(ValidationError):
    def __init__(self):
        super().__init__("empty ground set")


class InsufficientInputError(ValidationError):
    """Поток исчерпан раньше, чем построено нужное число элементов"""

    def __init__(self, produced: int, requested: int):
        super().__init__("insufficient input")
        self.produced = produced
        self.requested = requested


class WindowExhaustedError(ValidationError):
    def __init__(self):
        super().__init__("window exhausted")


class InvalidSolutionWindowError(ValidationError):
    """Кандидат не прошёл проверку окна; вердикт приложен"""

    def __init__(self, verdict: Any):
        super().__init__("not a valid solution window")
        self.verdict = verdict


class NotTwoBoundedError(ValidationError):
    def __init__(self, color: int, count: int):
        super().__init__("not 2-bounded")
        self.color = color
        self.count = count


class SparsityError(ValidationError):
    """Семейство не прошло аудит вхождений"""

    def __init__(self, verdict: Any):
        super().__init__("occurrence audit failed")
        self.verdict = verdict


class InputFormatError(ValidationError):
    """Ошибка разбора входного файла с позицией"""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        if line is not None:
            message = f"parse error at line {line} column {column}: {message}"
        super().__init__(message)
        self.line = line
        self.column = column


class BudgetExceededError(RuntimeError):
    """Исчерпан бюджет пересэмплирования"""

    def __init__(self, violations: Sequence[int], resamples: int):
        super().__init__("budget exceeded")
        self.violations: List[int] = list(violations)
        self.resamples = resamples


def validate_trace_params(
    count: int,
    max_element: int,
    max_stage: int
) -> Tuple[bool, str]:
    """
    Валидация параметров генерации следа.

    Args:
        count: Количество элементов следа
        max_element: Наибольший допустимый элемент
        max_stage: Наибольшая стадия (она же горизонт)

    Returns:
        Кортеж (is_valid, error_message)
    """
    if count < 0:
        return False, "❌ Количество элементов не может быть отрицательным"

    if max_element < 0:
        return False, "❌ Наибольший элемент не может быть отрицательным"

    if count > max_element + 1:
        return False, f"❌ Нельзя выбрать {count} различных элементов из [0, {max_element}]"

    if max_stage < 0:
        return False, "❌ Наибольшая стадия не может быть отрицательной"

    return True, ""


def validate_lll_params(
    q: Fraction,
    M: int,
    resample_budget: int,
    min_M: Optional[int] = None
) -> Tuple[bool, str]:
    """
    Валидация параметров движка ресэмплинга.

    Args:
        q: Доля из условия разреженности, 0 < q < 1
        M: Минимальный размер множества семейства
        resample_budget: Бюджет пересэмплирований
        min_M: Значение choose_M(q), если его нужно проверить

    Returns:
        Кортеж (is_valid, error_message)
    """
    if not (0 < q < 1):
        return False, f"❌ q должно лежать в (0, 1), получено {q}"

    if M < 1:
        return False, "❌ M должно быть положительным"

    if min_M is not None and M < min_M:
        return False, f"❌ M = {M} меньше choose_M(q) = {min_M}"

    if resample_budget <= 0:
        return False, "❌ Бюджет пересэмплирований должен быть положительным"

    return True, ""


def validate_window(window: int, depth: int, k_max: int) -> Tuple[bool, str]:
    """
    Валидация параметров окна для расщепления и итерации.

    Returns:
        Кортеж (is_valid, error_message)
    """
    if window <= 0:
        return False, "❌ Окно должно быть положительным"

    if depth < 1:
        return False, "❌ Глубина должна быть не меньше 1"

    if k_max < 1:
        return False, "❌ k_max должно быть не меньше 1"

    return True, ""


def validate_search_params(universe: int, target_size: int, node_budget: int) -> Tuple[bool, str]:
    """
    Валидация параметров переборного поиска.

    Returns:
        Кортеж (is_valid, error_message)
    """
    if universe <= 0:
        return False, "❌ Универсум должен быть непустым"

    if target_size < 0:
        return False, "❌ Размер множества не может быть отрицательным"

    if node_budget <= 0:
        return False, "❌ Бюджет узлов должен быть положительным"

    return True, ""


def validate_all_inputs(
    seed: int,
    window: int,
    depth: int,
    q: Fraction,
    resample_budget: int,
    node_budget: int,
    k_max: int = 2
) -> Tuple[bool, str]:
    """
    Комплексная валидация конфигурации эксперимента.

    Returns:
        Кортеж (is_valid, error_message)
        error_message содержит первую найденную ошибку
    """
    if seed < 0 or seed >= 2 ** 64:
        return False, "❌ Зерно должно быть 64-битным неотрицательным числом"

    is_valid, error = validate_window(window, depth, k_max)
    if not is_valid:
        return False, error

    is_valid, error = validate_lll_params(q, 1, resample_budget)
    if not is_valid:
        return False, error

    if node_budget <= 0:
        return False, "❌ Бюджет узлов должен быть положительным"

    return True, ""


def parse_fraction(text: str) -> Fraction:
    """Разбор рационального числа вида '1/2' или '0.5'"""
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError) as e:
        raise ValidationError(f"bad rational {text!r}: {e}") from e
