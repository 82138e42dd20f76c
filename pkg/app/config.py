"""
Конфигурация верстака thin-HT.

Содержит все константы, используемые в построениях и проверках,
а также конфигурацию эксперимента для командной строки.
"""

import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv

load_dotenv()


@dataclass
class LllConfig:
    """Параметры движка ресэмплинга (локальная лемма Ловаса)"""
    # Доля q из условия разреженности: не более 2^{qm} множеств размера m через точку
    DEFAULT_Q: Fraction = Fraction(1, 2)

    # Предел числа пересэмплирований на один вызов two_color
    RESAMPLE_BUDGET: int = 200_000

    # Верхняя граница перебора m при поиске константы M
    CHOOSE_M_SEARCH_LIMIT: int = 1_000_000

    DEFAULT_SEED: int = 7


@dataclass
class LargenessConfig:
    """Параметры расщепления и итерации слоёв"""
    # Аудируемая сетка: e < |семейства|, 1 <= k <= K_MAX
    K_MAX: int = 2

    DEFAULT_WINDOW: int = 1024
    DEFAULT_DEPTH: int = 2

    # Нумерация пар (e, k) для жадного построения g
    PAIRING: str = "cantor"

    # Защита от неограниченного воспроизведения жадного построения g
    G_REPLAY_LIMIT: int = 500_000


@dataclass
class EncoderConfig:
    """Параметры кодировщика промежутков"""
    # Окно fs(Y): суммы не более чем из стольких элементов
    DEFAULT_FS_TERMS: int = 3

    # Размер Y, который строит проверочный стенд roundtrip
    HARNESS_SIZE: int = 4

    # Отступ от стадии стабилизации и от максимального элемента следа
    HARNESS_MARGIN: int = 2


@dataclass
class SearchConfig:
    """Параметры переборных решателей"""
    # Предел узлов на одну ветвь верхнего уровня
    NODE_BUDGET: int = 500_000

    DEFAULT_WORKERS: int = 1

    # Запас перебора y и z над наибольшим g(x, n) при проверке addition-like
    ADDLIKE_SCAN_MARGIN: int = 64


@dataclass
class TraceDefaults:
    """Значения по умолчанию для генерации следов"""
    COUNT: int = 8
    MAX_ELEMENT: int = 8
    MAX_STAGE: int = 64


@dataclass
class CliConfig:
    """Настройки командной строки и отчётов"""
    FORMAT_VERSION: int = 1
    TOOL_VERSION: str = "0.3.0"

    OUTPUT_DIR_ENV: str = "THINHT_OUTPUT_DIR"
    LOG_LEVEL_ENV: str = "THINHT_LOG_LEVEL"

    EXIT_OK: int = 0
    EXIT_VERDICT_FAILURE: int = 2
    EXIT_INPUT_ERROR: int = 3
    EXIT_BUDGET_EXHAUSTED: int = 4

    def output_dir(self) -> str:
        """Каталог отчётов: переменная окружения или текущий каталог"""
        return os.getenv(self.OUTPUT_DIR_ENV, ".")

    def log_level(self) -> str:
        return os.getenv(self.LOG_LEVEL_ENV, "WARNING")


@dataclass
class ExperimentConfig:
    """
    Конфигурация одного запуска командной строки.

    Поля threads, output и artifacts (пути побочных файлов) не входят
    в хеш конфигурации: отчёты с разным числом потоков совпадают побайтно.
    """
    command: List[str]
    seed: int = LllConfig.DEFAULT_SEED
    window: int = LargenessConfig.DEFAULT_WINDOW
    depth: int = LargenessConfig.DEFAULT_DEPTH
    q: str = "1/2"
    resample_budget: int = LllConfig.RESAMPLE_BUDGET
    node_budget: int = SearchConfig.NODE_BUDGET
    inputs: Dict[str, Any] = field(default_factory=dict)
    params: Dict[str, Any] = field(default_factory=dict)
    output: Optional[str] = None
    threads: int = 1
    artifacts: Dict[str, str] = field(default_factory=dict)

    def payload(self) -> Dict[str, Any]:
        """Часть конфигурации, определяющая результат"""
        return {
            "command": list(self.command),
            "seed": self.seed,
            "window": self.window,
            "depth": self.depth,
            "q": self.q,
            "resample_budget": self.resample_budget,
            "node_budget": self.node_budget,
            "inputs": dict(self.inputs),
            "params": dict(self.params),
        }


# Глобальные экземпляры конфигурации
LLL_CONFIG = LllConfig()
LARGENESS_CONFIG = LargenessConfig()
ENCODER_CONFIG = EncoderConfig()
SEARCH_CONFIG = SearchConfig()
TRACE_DEFAULTS = TraceDefaults()
CLI_CONFIG = CliConfig()
