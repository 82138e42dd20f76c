"""
Файловые форматы и отчёты.

Все файлы записываются в JSON с полем "format": 1. Числа BinNum записываются
массивами показателей, а не величинами. Отчёт содержит эхо команды,
конфигурацию и её хеш, вердикт, контрпримеры и время выполнения;
при одинаковой конфигурации отчёты совпадают побайтно всюду,
кроме раздела timings.
"""

import json
import logging
import os
import tempfile
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from .binum import BinNum, NumSet
from .config import CLI_CONFIG, ExperimentConfig
from .encoding import SolutionCandidate
from .lll import ExplicitFamily
from .oracle import EnumFamily, OracleTrace
from .search import GENERATORS, FiniteColoring
from .utils import canonical_json, sha256_of
from .validation import InputFormatError, ValidationError

logger = logging.getLogger(__name__)


# ============================================================================
# ОТЧЁТ
# ============================================================================

@dataclass
class Report:
    """Отчёт одного запуска командной строки"""
    config: ExperimentConfig
    verdict: Dict[str, Any] = field(default_factory=dict)
    counterexamples: List[Any] = field(default_factory=list)
    exit_code: int = CLI_CONFIG.EXIT_OK
    timings: Dict[str, float] = field(default_factory=dict)

    @property
    def config_hash(self) -> str:
        return sha256_of(self.config.payload())

    def to_json(self) -> dict:
        return {
            "format": CLI_CONFIG.FORMAT_VERSION,
            "tool_version": CLI_CONFIG.TOOL_VERSION,
            "command": list(self.config.command),
            "config": self.config.payload(),
            "config_hash": self.config_hash,
            "verdict": self.verdict,
            "counterexamples": self.counterexamples,
            "exit_code": self.exit_code,
            "timings": self.timings,
        }

    def verdict_payload(self) -> str:
        return canonical_json({"verdict": self.verdict, "counterexamples": self.counterexamples})


def verdict_payload_of(report: dict) -> str:
    """Каноническая форма вердикта из загруженного отчёта"""
    return canonical_json({"verdict": report.get("verdict"), "counterexamples": report.get("counterexamples")})


def write_json_atomic(path: str, obj: Any) -> None:
    """Запись через временный файл в том же каталоге и os.replace"""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(prefix=".tmp-", suffix=".json", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            json.dump(obj, f, indent=2, sort_keys=True, ensure_ascii=False)
            f.write("\n")
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise
    logger.debug("wrote %s", path)


def write_report(report: Report, path: str) -> None:
    write_json_atomic(path, report.to_json())


# ============================================================================
# ЧТЕНИЕ ФАЙЛОВ
# ============================================================================

def load_json(path: str) -> Any:
    """
    Raises:
        InputFormatError: файл не читается или не является JSON (с позицией)
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise InputFormatError(f"cannot read {path}: {e.strerror}") from e
    return parse_json_text(text, path)


def parse_json_text(text: str, source: str = "<input>") -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise InputFormatError(f"{source}: {e.msg}", e.lineno, e.colno) from e


def _require(obj: Any, key: str, kind: type, where: str) -> Any:
    if not isinstance(obj, dict) or key not in obj:
        raise InputFormatError(f"{where}: missing field {key!r}")
    value = obj[key]
    if kind is int and isinstance(value, bool) or not isinstance(value, kind):
        raise InputFormatError(f"{where}: field {key!r} must be {kind.__name__}")
    return value


def _check_format(obj: Any, where: str) -> None:
    if not isinstance(obj, dict):
        raise InputFormatError(f"{where}: expected a JSON object")
    version = obj.get("format", CLI_CONFIG.FORMAT_VERSION)
    if version != CLI_CONFIG.FORMAT_VERSION:
        raise InputFormatError(f"{where}: unsupported format {version!r}")


def _int_pairs(items: Any, where: str) -> List[List[int]]:
    if not isinstance(items, list):
        raise InputFormatError(f"{where}: expected a list")
    pairs = []
    for i, item in enumerate(items):
        if (not isinstance(item, list) or len(item) != 2
                or not all(isinstance(v, int) and not isinstance(v, bool) for v in item)):
            raise InputFormatError(f"{where}[{i}]: expected a pair of integers")
        pairs.append(item)
    return pairs


def trace_from_json(obj: Any, where: str = "trace") -> OracleTrace:
    _check_format(obj, where)
    horizon = _require(obj, "horizon", int, where)
    entries = _int_pairs(_require(obj, "entries", list, where), f"{where}.entries")
    try:
        return OracleTrace.of(entries, horizon)
    except ValidationError as e:
        raise InputFormatError(f"{where}: {e}") from e


def trace_to_json(trace: OracleTrace) -> dict:
    return {"format": CLI_CONFIG.FORMAT_VERSION, **trace.to_json()}


def family_from_json(obj: Any, where: str = "family") -> EnumFamily:
    """Файл семейства {"traces": [...]} либо одиночного следа"""
    _check_format(obj, where)
    if "traces" not in obj:
        return EnumFamily((trace_from_json(obj, where),))
    traces = _require(obj, "traces", list, where)
    return EnumFamily(tuple(trace_from_json(t, f"{where}.traces[{i}]") for i, t in enumerate(traces)))


def family_to_json(fam: EnumFamily) -> dict:
    return {"format": CLI_CONFIG.FORMAT_VERSION, **fam.to_json()}


def candidate_from_json(obj: Any, where: str = "candidate") -> SolutionCandidate:
    _check_format(obj, where)
    Y = _require(obj, "Y", list, where)
    witness = _require(obj, "witness", int, where)
    trim = obj.get("trim", 0)
    try:
        elements = tuple(BinNum(tuple(exps)) for exps in Y)
        return SolutionCandidate(NumSet(elements), witness, trim)
    except (ValidationError, TypeError) as e:
        raise InputFormatError(f"{where}: {e}") from e


def candidate_to_json(cand: SolutionCandidate) -> dict:
    return {
        "format": CLI_CONFIG.FORMAT_VERSION,
        "Y": [list(x.exponents) for x in cand.Y],
        "witness": cand.witness_color,
        "trim": cand.trim,
    }


def constraint_family_from_json(obj: Any, where: str = "family") -> ExplicitFamily:
    _check_format(obj, where)
    min_size = _require(obj, "min_size", int, where)
    sets = _require(obj, "sets", list, where)
    for i, s in enumerate(sets):
        if not isinstance(s, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in s):
            raise InputFormatError(f"{where}.sets[{i}]: expected a list of integers")
    try:
        return ExplicitFamily(sets, min_size)
    except ValidationError as e:
        raise InputFormatError(f"{where}: {e}") from e


def coloring_from_json(obj: Any, where: str = "coloring") -> FiniteColoring:
    """
    Раскраска: {"generator": имя, "universe": N, "params": {...}} либо
    явная таблица {"arity": a, "universe": N, "table": [...]}.
    """
    _check_format(obj, where)
    universe = _require(obj, "universe", int, where)
    try:
        if "generator" in obj:
            name = _require(obj, "generator", str, where)
            if name not in GENERATORS:
                raise InputFormatError(f"{where}: unknown generator {name!r}")
            params = obj.get("params", {})
            if not isinstance(params, dict):
                raise InputFormatError(f"{where}: params must be an object")
            return GENERATORS[name](universe, **params)
        arity = _require(obj, "arity", int, where)
        table = _require(obj, "table", list, where)
        return FiniteColoring.from_table(
            arity, universe, table, obj.get("palette"), obj.get("reserved", ()), obj.get("description", "table")
        )
    except (ValidationError, TypeError) as e:
        if isinstance(e, InputFormatError):
            raise
        raise InputFormatError(f"{where}: {e}") from e


def load_trace(path: str) -> OracleTrace:
    return trace_from_json(load_json(path), path)


def load_family(path: str) -> EnumFamily:
    return family_from_json(load_json(path), path)


def load_candidate(path: str) -> SolutionCandidate:
    return candidate_from_json(load_json(path), path)


def load_constraint_family(path: str) -> ExplicitFamily:
    return constraint_family_from_json(load_json(path), path)


def load_coloring(path: str) -> FiniteColoring:
    return coloring_from_json(load_json(path), path)


def load_report(path: str) -> dict:
    report = load_json(path)
    _check_format(report, path)
    _require(report, "config", dict, path)
    _require(report, "config_hash", str, path)
    return report


def config_from_report(report: dict) -> ExperimentConfig:
    payload = report["config"]
    try:
        return ExperimentConfig(**payload)
    except TypeError as e:
        raise InputFormatError(f"report config: {e}") from e


def report_hash_matches(report: dict) -> bool:
    return sha256_of(report["config"]) == report["config_hash"]


def default_output(name: str, output: Optional[str] = None) -> str:
    if output:
        return output
    return os.path.join(CLI_CONFIG.output_dir(), name)
