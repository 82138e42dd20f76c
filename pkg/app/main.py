"""
Командная строка верстака thin-HT.

    python app/main.py trace gen --count 3 --max-stage 16 -o t.json
    python app/main.py roundtrip --trace t.json
    python app/main.py large iterate --depth 2 --window 4096 --traces t.json
    python app/main.py search fs --generator parity --universe 32 --mode exact2 --size 3
    python app/main.py replay report.json

Каждая экспериментальная команда пишет JSON-отчёт (атомарно) и
возвращает код выхода: 0 при успехе, 2 если вердикт не прошёл, 3 при
ошибке входных данных, 4 если исчерпан бюджет.
"""

import argparse
import logging
import os
import sys
import time
from typing import Any, Callable, Dict, List, Optional

import numpy as np
import pandas as pd

SCRIPT_DIR = os.path.dirname(os.path.abspath(__file__))
PROJECT_ROOT = os.path.dirname(SCRIPT_DIR)
if PROJECT_ROOT not in sys.path:
    sys.path.insert(0, PROJECT_ROOT)

from app.binum import FsQuery
from app.config import (
    CLI_CONFIG, ENCODER_CONFIG, LARGENESS_CONFIG, LLL_CONFIG, SEARCH_CONFIG, TRACE_DEFAULTS,
    ExperimentConfig
)
from app.encoding import (
    almost_absence_report, color_table, decode_membership, harness_candidate, verify_candidate
)
from app.largeness import (
    Naturals, c_hard_from_export, identity_k, immunity_audit, iterate, make_g, split
)
from app.lll import LllParams, choose_M, occurrence_audit, two_color, verify_two_coloring, PartialColoring
from app.oracle import EnumFamily, random_family, random_trace, settle_stage
from app.reports import (
    Report, candidate_from_json, candidate_to_json, coloring_from_json, config_from_report,
    constraint_family_from_json, default_output, family_from_json, family_to_json, load_json,
    load_report, report_hash_matches, trace_from_json, trace_to_json, verdict_payload_of,
    write_json_atomic, write_report
)
from app.search import (
    GENERATORS, UNKNOWN, FsWindow, addition, check_fs_window, check_rainbow, check_thin,
    find_fs_solution, find_ht2_solution, find_thin, maximum, rrt_solve, simultaneous_thin,
    sum_colorings, addition_like_validate
)
from app.utils import sha256_of
from app.validation import (
    BudgetExceededError, InputFormatError, SparsityError, ValidationError, WindowExhaustedError,
    parse_fraction, validate_all_inputs, validate_lll_params, validate_search_params
)

logger = logging.getLogger("app.main")

# Ключи аргументов, которые не попадают в params
INPUT_KEYS = ("trace", "candidate", "family", "traces", "coloring", "set_file")
ARTIFACT_KEYS = ("export", "plot")
CONFIG_KEYS = ("seed", "window", "depth", "q", "resample_budget", "node_budget")
SERVICE_KEYS = ("group", "sub", "output", "threads", "log_level")


# ============================================================================
# ВСПОМОГАТЕЛЬНОЕ
# ============================================================================

def _plain(value: Any) -> Any:
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, float):
        if value != value:
            return None
        return int(value) if value.is_integer() else value
    if value is pd.NA:
        return None
    return value


def _given(values: Dict[str, Any], key: str, default: Any) -> Any:
    value = values.get(key)
    return default if value is None else value


def _records(df: pd.DataFrame) -> List[Dict[str, Any]]:
    return [{k: _plain(v) for k, v in row.items()} for row in df.to_dict(orient="records")]


def _input(config: ExperimentConfig, key: str, parse: Callable[[Any, str], Any]) -> Any:
    """Загрузка входного файла с проверкой, что содержимое не менялось"""
    entry = config.inputs[key]
    entries = entry if isinstance(entry, list) else [entry]
    loaded = []
    for item in entries:
        obj = load_json(item["path"])
        if sha256_of(obj) != item["sha256"]:
            raise InputFormatError(f"{item['path']}: content differs from the recorded input")
        loaded.append(parse(obj, item["path"]))
    return loaded if isinstance(entry, list) else loaded[0]


def _lll_params(config: ExperimentConfig) -> LllParams:
    q = parse_fraction(config.q)
    min_M = choose_M(q)
    M = _given(config.params, "M", min_M)
    is_valid, error = validate_lll_params(q, M, config.resample_budget, min_M)
    if not is_valid:
        raise ValidationError(error)
    return LllParams(q, M, config.resample_budget, config.seed)


def _coloring(config: ExperimentConfig):
    if "coloring" in config.inputs:
        return _input(config, "coloring", coloring_from_json)
    p = config.params
    name = p.get("generator")
    if name is None:
        raise ValidationError("either --coloring or --generator is required")
    if name not in GENERATORS:
        raise ValidationError(f"unknown generator {name!r}")
    if p.get("universe") is None:
        raise ValidationError("--universe is required with --generator")
    return GENERATORS[name](p["universe"], **p.get("gen_param", {}))


def _validate_search(colorings, config: ExperimentConfig) -> None:
    for c in colorings:
        is_valid, error = validate_search_params(c.universe, config.params["size"], config.node_budget)
        if not is_valid:
            raise ValidationError(error)


def _search_exit(*statuses: str) -> int:
    if UNKNOWN in statuses:
        return CLI_CONFIG.EXIT_BUDGET_EXHAUSTED
    return CLI_CONFIG.EXIT_OK


# ============================================================================
# КОДИРОВАНИЕ
# ============================================================================

def cmd_encode(config: ExperimentConfig) -> Report:
    trace = _input(config, "trace", trace_from_json)
    p = config.params
    q = FsQuery(p.get("terms", ENCODER_CONFIG.DEFAULT_FS_TERMS))
    if "candidate" in config.inputs:
        Y = _input(config, "candidate", candidate_from_json).window
    else:
        Y = harness_candidate(trace, p.get("size", ENCODER_CONFIG.HARNESS_SIZE), config.seed).Y
    table = color_table(Y, trace, q)
    verdict = {
        "window_size": len(table),
        "all_bottom": bool((table["code"] == 0).all()),
        "colors": _records(table),
        "absence": _records(almost_absence_report(Y, trace, q)),
    }
    return Report(config, verdict)


def cmd_decode(config: ExperimentConfig) -> Report:
    trace = _input(config, "trace", trace_from_json)
    cand = _input(config, "candidate", candidate_from_json)
    p = config.params
    q = FsQuery(p.get("terms", ENCODER_CONFIG.DEFAULT_FS_TERMS))

    check = verify_candidate(cand, trace, q)
    if not check.passed:
        return Report(
            config,
            {"error": "not a valid solution window", "candidate": check.to_json()},
            check.violations,
            CLI_CONFIG.EXIT_VERDICT_FAILURE,
        )

    queries = p.get("n") or list(range(p.get("upto", max(trace.elements, default=0)) + 1))
    answers: Dict[str, Any] = {}
    for n in queries:
        try:
            answers[str(n)] = decode_membership(n, cand, trace, q)
        except WindowExhaustedError:
            answers[str(n)] = "window exhausted"
    return Report(config, {"candidate": check.to_json(), "membership": answers})


def cmd_roundtrip(config: ExperimentConfig) -> Report:
    trace = _input(config, "trace", trace_from_json)
    p = config.params
    q = FsQuery(p.get("terms", ENCODER_CONFIG.DEFAULT_FS_TERMS))
    cand = harness_candidate(trace, p.get("size", ENCODER_CONFIG.HARNESS_SIZE), config.seed)
    check = verify_candidate(cand, trace, q)

    mismatches = []
    top = max(trace.elements, default=0)
    if check.passed:
        for n in range(top + 1):
            decoded = decode_membership(n, cand, trace, q)
            if decoded != trace.final_member(n):
                mismatches.append({"n": n, "decoded": decoded, "expected": trace.final_member(n)})
    agreement = (top + 1 - len(mismatches)) / (top + 1) if check.passed else 0.0

    verdict = {
        "candidate": candidate_to_json(cand),
        "check": check.to_json(),
        "queried": top + 1,
        "agreement": agreement,
    }
    failed = not check.passed or bool(mismatches)
    return Report(config, verdict, mismatches,
                  CLI_CONFIG.EXIT_VERDICT_FAILURE if failed else CLI_CONFIG.EXIT_OK)


# ============================================================================
# ЛОКАЛЬНАЯ ЛЕММА
# ============================================================================

def cmd_lll_choose_m(config: ExperimentConfig) -> Report:
    q = parse_fraction(config.q)
    return Report(config, {"q": str(q), "M": choose_M(q)})


def _audit_family(config: ExperimentConfig, n_max_default: Optional[int] = None):
    fam = _input(config, "family", constraint_family_from_json)
    params = _lll_params(config)
    p = config.params
    m_max = p.get("m_max") or max(fam.size_bound, params.M)
    if n_max_default is None:
        n_max_default = max((max(fam.enumerate(j)) for j in range(len(fam)) if fam.enumerate(j)), default=0)
    n_max = p.get("n_max") or n_max_default
    return fam, params, occurrence_audit(fam, params, m_max, n_max, config.threads)


def cmd_lll_audit(config: ExperimentConfig) -> Report:
    _, _, audit = _audit_family(config)
    exit_code = CLI_CONFIG.EXIT_OK if audit.passed else CLI_CONFIG.EXIT_VERDICT_FAILURE
    return Report(config, {"audit": audit.to_json()}, audit.violations, exit_code)


def cmd_lll_color(config: ExperimentConfig) -> Report:
    p = config.params
    frontier = p["frontier"]
    fam, params, audit = _audit_family(config, frontier - 1)
    if not audit.passed:
        return Report(config, {"audit": audit.to_json(), "error": "occurrence audit failed"},
                      audit.violations, CLI_CONFIG.EXIT_VERDICT_FAILURE)

    prefix = PartialColoring.empty()
    prefix_frontier = p.get("prefix_frontier")
    if prefix_frontier:
        prefix = two_color(fam, params, prefix, prefix_frontier)
    coloring = two_color(fam, params, prefix, frontier)
    monochromatic = verify_two_coloring(fam, coloring)

    verdict = {
        "audit": audit.to_json(),
        "frontier": coloring.frontier,
        "coloring": coloring.to_string(),
        "monochromatic": monochromatic,
        "prefix_stable": coloring.bits[:prefix.frontier] == prefix.bits,
    }
    failed = bool(monochromatic) or not verdict["prefix_stable"]
    return Report(config, verdict, monochromatic,
                  CLI_CONFIG.EXIT_VERDICT_FAILURE if failed else CLI_CONFIG.EXIT_OK)


# ============================================================================
# БОЛЬШИЕ МНОЖЕСТВА
# ============================================================================

def cmd_large_split(config: ExperimentConfig) -> Report:
    fam = _input(config, "traces", family_from_json)
    params = _lll_params(config)
    k_max = config.params.get("k_max", LARGENESS_CONFIG.K_MAX)
    D = Naturals()
    result = split(D, identity_k(), make_g(params.M), fam, params, config.window, k_max, config.threads)

    union = result.D0.bits | result.D1.bits
    partition_ok = bool(union.all() and not (result.D0.bits & result.D1.bits).any())
    verdict = {**result.to_json(), "partition_ok": partition_ok, "coloring_sha256": sha256_of(result.coloring.to_string())}
    failed = not (result.audit.passed and partition_ok)
    return Report(config, verdict, result.audit.counterexamples,
                  CLI_CONFIG.EXIT_VERDICT_FAILURE if failed else CLI_CONFIG.EXIT_OK)


def cmd_large_iterate(config: ExperimentConfig) -> Report:
    fam = _input(config, "traces", family_from_json)
    params = _lll_params(config)
    k_max = config.params.get("k_max", LARGENESS_CONFIG.K_MAX)
    stack, colors = iterate(config.depth, fam, params, config.window, k_max, config.threads)

    export = stack.export()
    recomputed = c_hard_from_export(export)
    matches = recomputed == colors.tolist()
    if config.artifacts.get("export"):
        write_json_atomic(config.artifacts["export"], export)
    if config.artifacts.get("plot"):
        stack.plot(config.artifacts["plot"])

    counterexamples = [c for result in stack.splits for c in result.audit.counterexamples]
    verdict = {
        "levels": [result.to_json() for result in stack.splits],
        "layer_sizes": [int(row.sum()) for row in stack.masks()],
        "c_hard_sha256": sha256_of(colors.tolist()),
        "c_hard_histogram": np.bincount(colors, minlength=config.depth + 1).tolist(),
        "c_hard_matches_export": matches,
        "differences": export["differences"],
    }
    failed = bool(counterexamples) or not matches
    return Report(config, verdict, counterexamples,
                  CLI_CONFIG.EXIT_VERDICT_FAILURE if failed else CLI_CONFIG.EXIT_OK)


def cmd_large_audit(config: ExperimentConfig) -> Report:
    fam = _input(config, "traces", family_from_json)
    params = _lll_params(config)
    p = config.params
    if "set_file" in config.inputs:
        S = _input(config, "set_file", lambda obj, where: [int(x) for x in obj])
    else:
        S = p.get("set") or []
    stack, _ = iterate(config.depth, fam, params, config.window,
                       p.get("k_max", LARGENESS_CONFIG.K_MAX), config.threads)
    verdict = immunity_audit(S, p.get("color", 0), stack, fam)
    flagged = [entry for entry in verdict.entries if entry["status"] == "flagged"]
    return Report(config, verdict.to_json(), flagged,
                  CLI_CONFIG.EXIT_VERDICT_FAILURE if verdict.flagged else CLI_CONFIG.EXIT_OK)


# ============================================================================
# ПЕРЕБОР
# ============================================================================

def cmd_search_thin(config: ExperimentConfig) -> Report:
    c = _coloring(config)
    _validate_search([c], config)
    result = find_thin(c, config.params["size"], config.node_budget, config.threads)
    checked = check_thin(c, result.elements, result.witness) if result.found else None
    exit_code = _search_exit(result.status)
    if checked is False:
        exit_code = CLI_CONFIG.EXIT_VERDICT_FAILURE
    return Report(config, {"coloring": repr(c), "result": result.to_json(), "checked": checked}, [], exit_code)


def cmd_search_fs(config: ExperimentConfig) -> Report:
    c = _coloring(config)
    _validate_search([c], config)
    p = config.params
    window = FsWindow(p.get("mode", "exact2"), p.get("m", 2))
    kind = p.get("kind", "thin")
    result = find_fs_solution(c, window, kind, p["size"], config.node_budget, config.threads)

    verdict: Dict[str, Any] = {"coloring": repr(c), "result": result.to_json()}
    failed = False
    if result.found:
        check = check_fs_window(c, result.elements, window, kind, result.witness)
        verdict["check"] = check.to_json()
        failed = not check.valid
    statuses = [result.status]
    if window.mode == "exact2":
        oracle = find_ht2_solution(c, kind, p["size"], config.node_budget)
        statuses.append(oracle.status)
        agrees = (oracle.status, oracle.elements, oracle.witness) == (result.status, result.elements, result.witness)
        verdict["ht2_oracle"] = {"status": oracle.status, "agrees": agrees}
        failed = failed or (UNKNOWN not in statuses and not agrees)
    exit_code = CLI_CONFIG.EXIT_VERDICT_FAILURE if failed else _search_exit(*statuses)
    return Report(config, verdict, [], exit_code)


def cmd_search_simul(config: ExperimentConfig) -> Report:
    p = config.params
    sum_of = p.get("sum_of")
    if sum_of:
        base = _coloring(config)
        if isinstance(base, list):
            base = base[0]
        colorings = sum_colorings(base, sum_of)
    else:
        loaded = _coloring(config)
        colorings = loaded if isinstance(loaded, list) else [loaded]
    _validate_search(colorings, config)
    result = simultaneous_thin(colorings, p["size"], config.node_budget, config.threads)

    verdict: Dict[str, Any] = {"colorings": [repr(c) for c in colorings], "result": result.to_json()}
    failed = False
    if result.found:
        verdict["checked"] = [check_thin(c, result.elements, result.witness) for c in colorings]
        failed = not all(verdict["checked"])
        if sum_of:
            check = check_fs_window(base, result.elements, FsWindow("upto", sum_of), "thin", result.witness)
            verdict["fs_window"] = check.to_json()
            failed = failed or not check.valid
    exit_code = CLI_CONFIG.EXIT_VERDICT_FAILURE if failed else _search_exit(result.status)
    return Report(config, verdict, [], exit_code)


def cmd_search_rrt(config: ExperimentConfig) -> Report:
    c = _coloring(config)
    _validate_search([c], config)
    result = rrt_solve(c, config.params["size"], config.node_budget, config.threads)
    checked = check_rainbow(c, result.elements) if result.found else None
    exit_code = CLI_CONFIG.EXIT_VERDICT_FAILURE if checked is False else _search_exit(result.status)
    return Report(config, {"coloring": repr(c), "result": result.to_json(), "checked": checked}, [], exit_code)


def cmd_search_addlike(config: ExperimentConfig) -> Report:
    p = config.params
    functions = {"addition": addition, "max": maximum}
    name = p.get("function", "addition")
    if name not in functions:
        raise ValidationError(f"unknown function {name!r}")
    verdict = addition_like_validate(functions[name](), p.get("x_max", 8), p.get("n_max", 8), p.get("y_scan"))
    exit_code = CLI_CONFIG.EXIT_OK if verdict.passed else CLI_CONFIG.EXIT_VERDICT_FAILURE
    return Report(config, verdict.to_json(), verdict.violations, exit_code)


HANDLERS: Dict[tuple, Callable[[ExperimentConfig], Report]] = {
    ("encode",): cmd_encode,
    ("decode",): cmd_decode,
    ("roundtrip",): cmd_roundtrip,
    ("lll", "choose-m"): cmd_lll_choose_m,
    ("lll", "audit"): cmd_lll_audit,
    ("lll", "color"): cmd_lll_color,
    ("large", "split"): cmd_large_split,
    ("large", "iterate"): cmd_large_iterate,
    ("large", "audit"): cmd_large_audit,
    ("search", "thin"): cmd_search_thin,
    ("search", "fs"): cmd_search_fs,
    ("search", "simul"): cmd_search_simul,
    ("search", "rrt"): cmd_search_rrt,
    ("search", "addlike"): cmd_search_addlike,
}


def run_experiment(config: ExperimentConfig) -> Report:
    """
    Запуск команды по конфигурации. Исчерпание бюджета и провал
    аудита вхождений становятся полями отчёта с ненулевым кодом.
    """
    handler = HANDLERS.get(tuple(config.command))
    if handler is None:
        raise ValidationError(f"unknown command {' '.join(config.command)!r}")
    is_valid, error = validate_all_inputs(
        config.seed, config.window, config.depth, parse_fraction(config.q),
        config.resample_budget, config.node_budget, config.params.get("k_max", LARGENESS_CONFIG.K_MAX)
    )
    if not is_valid:
        raise ValidationError(error)

    started = time.perf_counter()
    try:
        report = handler(config)
    except BudgetExceededError as e:
        report = Report(config, {"error": "budget exceeded", "resamples": e.resamples},
                        e.violations, CLI_CONFIG.EXIT_BUDGET_EXHAUSTED)
    except SparsityError as e:
        report = Report(config, {"error": "occurrence audit failed", "audit": e.verdict.to_json()},
                        e.verdict.violations, CLI_CONFIG.EXIT_VERDICT_FAILURE)
    report.timings["total_s"] = round(time.perf_counter() - started, 6)
    logger.info("%s finished with exit code %d", " ".join(config.command), report.exit_code)
    return report


# ============================================================================
# СЛЕДЫ
# ============================================================================

def cmd_trace_gen(args: argparse.Namespace) -> int:
    rng = np.random.default_rng(args.seed)
    if args.family_size:
        fam = random_family(rng, args.family_size, args.count, args.max_element, args.max_stage)
        payload = family_to_json(fam)
    else:
        trace = random_trace(rng, args.count, args.max_element, args.max_stage)
        payload = trace_to_json(trace)
    path = default_output("trace.json", args.output)
    write_json_atomic(path, payload)
    print(f"✅ След записан: {path}")
    return CLI_CONFIG.EXIT_OK


def _show_trace(trace, label: str) -> None:
    table = pd.DataFrame(list(trace.entries), columns=["element", "stage"])
    print(f"{label}: горизонт {trace.horizon}, элементов {len(trace.entries)}")
    if len(table):
        print(table.to_string(index=False))
    print(f"Стадия стабилизации: {settle_stage(trace)}")


def cmd_trace_show(args: argparse.Namespace) -> int:
    obj = load_json(args.file)
    fam: EnumFamily = family_from_json(obj, args.file)
    if "traces" in obj:
        for e, trace in enumerate(fam.traces):
            _show_trace(trace, f"W_{e}")
    else:
        _show_trace(fam[0], "След")
    return CLI_CONFIG.EXIT_OK


# ============================================================================
# РАЗБОР АРГУМЕНТОВ
# ============================================================================

def _key_value(text: str) -> tuple:
    key, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    return key, int(value)


def _int_list(text: str) -> List[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from e


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="thinht", description="Верстак тонких вариантов теоремы Хиндмана")
    parser.add_argument("--log-level", default=CLI_CONFIG.log_level())
    parser.add_argument("--threads", type=int, default=SEARCH_CONFIG.DEFAULT_WORKERS)
    groups = parser.add_subparsers(dest="group", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=LLL_CONFIG.DEFAULT_SEED)
    common.add_argument("-o", "--output", default=None, help="путь отчёта (или файла следа для trace gen)")

    lll_common = argparse.ArgumentParser(add_help=False)
    lll_common.add_argument("--q", default=str(LLL_CONFIG.DEFAULT_Q))
    lll_common.add_argument("--M", type=int, default=None, help="константа M (не меньше choose_M(q))")
    lll_common.add_argument("--resample-budget", type=int, default=LLL_CONFIG.RESAMPLE_BUDGET)

    large_common = argparse.ArgumentParser(add_help=False, parents=[lll_common])
    large_common.add_argument("--traces", required=True, help="файл семейства следов")
    large_common.add_argument("--window", type=int, default=LARGENESS_CONFIG.DEFAULT_WINDOW)
    large_common.add_argument("--k-max", type=int, default=LARGENESS_CONFIG.K_MAX)

    coloring_common = argparse.ArgumentParser(add_help=False)
    coloring_common.add_argument("--coloring", action="append", default=None, help="файл раскраски")
    coloring_common.add_argument("--generator", choices=sorted(GENERATORS), default=None)
    coloring_common.add_argument("--universe", type=int, default=None)
    coloring_common.add_argument("--gen-param", type=_key_value, action="append", default=None,
                                 help="параметр генератора KEY=VALUE")
    coloring_common.add_argument("--size", type=int, required=True)
    coloring_common.add_argument("--node-budget", type=int, default=SEARCH_CONFIG.NODE_BUDGET,
                                 help="предел узлов на каждую ветвь верхнего уровня (не на весь перебор)")

    # trace
    trace = groups.add_parser("trace", help="генерация и просмотр следов")
    trace_sub = trace.add_subparsers(dest="sub", required=True)
    gen = trace_sub.add_parser("gen", parents=[common])
    gen.add_argument("--count", type=int, default=TRACE_DEFAULTS.COUNT)
    gen.add_argument("--max-element", type=int, default=TRACE_DEFAULTS.MAX_ELEMENT)
    gen.add_argument("--max-stage", type=int, default=TRACE_DEFAULTS.MAX_STAGE)
    gen.add_argument("--family-size", type=int, default=None)
    show = trace_sub.add_parser("show")
    show.add_argument("file")

    # encode / decode / roundtrip
    encode = groups.add_parser("encode", parents=[common], help="цвета окна fs(Y)")
    encode.add_argument("--trace", required=True)
    encode.add_argument("--candidate", default=None)
    encode.add_argument("--terms", type=int, default=ENCODER_CONFIG.DEFAULT_FS_TERMS)
    encode.add_argument("--size", type=int, default=ENCODER_CONFIG.HARNESS_SIZE)

    decode = groups.add_parser("decode", parents=[common], help="восстановление ∅′ по решению")
    decode.add_argument("--trace", required=True)
    decode.add_argument("--candidate", required=True)
    decode.add_argument("--terms", type=int, default=ENCODER_CONFIG.DEFAULT_FS_TERMS)
    decode.add_argument("--n", type=_int_list, default=None, help="список n через запятую")
    decode.add_argument("--upto", type=int, default=None)

    roundtrip = groups.add_parser("roundtrip", parents=[common], help="кодирование и декодирование по стенду")
    roundtrip.add_argument("--trace", required=True)
    roundtrip.add_argument("--terms", type=int, default=ENCODER_CONFIG.DEFAULT_FS_TERMS)
    roundtrip.add_argument("--size", type=int, default=ENCODER_CONFIG.HARNESS_SIZE)

    # lll
    lll = groups.add_parser("lll", help="движок локальной леммы")
    lll_sub = lll.add_subparsers(dest="sub", required=True)
    lll_sub.add_parser("choose-m", parents=[common, lll_common])
    for name in ("audit", "color"):
        cmd = lll_sub.add_parser(name, parents=[common, lll_common])
        cmd.add_argument("--family", required=True, help='файл {"min_size": M, "sets": [...]}')
        cmd.add_argument("--m-max", type=int, default=None)
        cmd.add_argument("--n-max", type=int, default=None)
        if name == "color":
            cmd.add_argument("--frontier", type=int, required=True)
            cmd.add_argument("--prefix-frontier", type=int, default=None)

    # large
    large = groups.add_parser("large", help="расщепление и трудная раскраска")
    large_sub = large.add_subparsers(dest="sub", required=True)
    large_sub.add_parser("split", parents=[common, large_common])
    iterate_cmd = large_sub.add_parser("iterate", parents=[common, large_common])
    iterate_cmd.add_argument("--depth", type=int, default=LARGENESS_CONFIG.DEFAULT_DEPTH)
    iterate_cmd.add_argument("--export", default=None, help="JSON со слоями")
    iterate_cmd.add_argument("--plot", default=None, help="PNG со слоями")
    audit_cmd = large_sub.add_parser("audit", parents=[common, large_common])
    audit_cmd.add_argument("--depth", type=int, default=LARGENESS_CONFIG.DEFAULT_DEPTH)
    audit_cmd.add_argument("--color", type=int, default=0)
    audit_cmd.add_argument("--set", type=_int_list, default=None)
    audit_cmd.add_argument("--set-file", default=None)

    # search
    search = groups.add_parser("search", help="переборные решатели")
    search_sub = search.add_subparsers(dest="sub", required=True)
    search_sub.add_parser("thin", parents=[common, coloring_common])
    fs = search_sub.add_parser("fs", parents=[common, coloring_common])
    fs.add_argument("--mode", choices=["exact2", "upto", "full"], default="exact2")
    fs.add_argument("--m", type=int, default=2)
    fs.add_argument("--kind", choices=["thin", "homog"], default="thin")
    simul = search_sub.add_parser("simul", parents=[common, coloring_common])
    simul.add_argument("--sum-of", type=int, default=None, help="производные раскраски арностей 1..n")
    search_sub.add_parser("rrt", parents=[common, coloring_common])
    addlike = search_sub.add_parser("addlike", parents=[common])
    addlike.add_argument("--function", choices=["addition", "max"], default="addition")
    addlike.add_argument("--x-max", type=int, default=8)
    addlike.add_argument("--n-max", type=int, default=8)
    addlike.add_argument("--y-scan", type=int, default=None)

    # replay
    replay = groups.add_parser("replay", help="повторный запуск по отчёту")
    replay.add_argument("report")

    return parser


def _input_entry(path: str) -> Dict[str, str]:
    return {"path": path, "sha256": sha256_of(load_json(path))}


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    """Перенос аргументов в конфигурацию эксперимента"""
    values = vars(args)
    command = [args.group] + ([args.sub] if getattr(args, "sub", None) else [])

    inputs: Dict[str, Any] = {}
    for key in INPUT_KEYS:
        value = values.get(key)
        if value is None:
            continue
        inputs[key] = [_input_entry(v) for v in value] if isinstance(value, list) else _input_entry(value)
        if key == "coloring" and len(value) == 1:
            inputs[key] = inputs[key][0]

    artifacts = {key: values[key] for key in ARTIFACT_KEYS if values.get(key)}
    excluded = set(INPUT_KEYS) | set(ARTIFACT_KEYS) | set(CONFIG_KEYS) | set(SERVICE_KEYS)
    params = {key: value for key, value in values.items() if key not in excluded and value is not None}
    if "gen_param" in params:
        params["gen_param"] = dict(params["gen_param"])

    return ExperimentConfig(
        command=command,
        seed=args.seed,
        window=_given(values, "window", LARGENESS_CONFIG.DEFAULT_WINDOW),
        depth=_given(values, "depth", LARGENESS_CONFIG.DEFAULT_DEPTH),
        q=_given(values, "q", str(LLL_CONFIG.DEFAULT_Q)),
        resample_budget=_given(values, "resample_budget", LLL_CONFIG.RESAMPLE_BUDGET),
        node_budget=_given(values, "node_budget", SEARCH_CONFIG.NODE_BUDGET),
        inputs=inputs,
        params=params,
        output=args.output,
        threads=args.threads,
        artifacts=artifacts,
    )


def cmd_replay(args: argparse.Namespace) -> int:
    report = load_report(args.report)
    if not report_hash_matches(report):
        raise InputFormatError(f"{args.report}: config hash does not match the embedded config")
    config = config_from_report(report)
    config.threads = args.threads
    rerun = run_experiment(config)
    same = rerun.verdict_payload() == verdict_payload_of(report)
    if same:
        print(f"✅ Вердикт воспроизведён: {report['config_hash'][:12]}")
        return CLI_CONFIG.EXIT_OK
    print(f"❌ Вердикт отличается от записанного: {report['config_hash'][:12]}")
    return CLI_CONFIG.EXIT_VERDICT_FAILURE


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
        stream=sys.stderr,
    )

    try:
        if args.group == "trace":
            return cmd_trace_gen(args) if args.sub == "gen" else cmd_trace_show(args)
        if args.group == "replay":
            return cmd_replay(args)
        config = config_from_args(args)
        report = run_experiment(config)
        path = default_output(f"{'-'.join(config.command)}.json", config.output)
        write_report(report, path)
        mark = "✅" if report.exit_code == CLI_CONFIG.EXIT_OK else "❌"
        print(f"{mark} {' '.join(config.command)}: код {report.exit_code}, отчёт {path}")
        return report.exit_code
    except ValidationError as e:
        logger.error("input error: %s", e)
        message = str(e)
        print(message if message.startswith("❌") else f"❌ {message}", file=sys.stderr)
        return CLI_CONFIG.EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
