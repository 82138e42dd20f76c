"""Тесты командной строки: коды выхода, отчёты, воспроизводимость."""

import json
import shutil

import pytest

from app.config import CLI_CONFIG
from app.main import build_parser, config_from_args, main
from app.reports import family_to_json, verdict_payload_of


def _run(tmp_path, name, *argv, threads=1):
    out = tmp_path / name
    code = main(["--threads", str(threads), *argv, "-o", str(out)])
    report = json.loads(out.read_text(encoding="utf-8")) if out.exists() else None
    return code, report


def _write(tmp_path, name, obj):
    path = tmp_path / name
    path.write_text(json.dumps(obj), encoding="utf-8")
    return str(path)


def test_choose_m(tmp_path):
    code, report = _run(tmp_path, "m.json", "lll", "choose-m")
    assert code == CLI_CONFIG.EXIT_OK
    assert report["verdict"] == {"q": "1/2", "M": 13}
    assert report["exit_code"] == 0
    assert report["format"] == 1
    assert "total_s" in report["timings"]


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(CLI_CONFIG.OUTPUT_DIR_ENV, str(tmp_path))
    assert main(["lll", "choose-m"]) == 0
    assert (tmp_path / "lll-choose-m.json").exists()


def test_trace_gen_and_roundtrip(tmp_path, capsys):
    trace_path = tmp_path / "t.json"
    assert main(["trace", "gen", "--count", "4", "--max-stage", "16", "--seed", "3", "-o", str(trace_path)]) == 0
    assert main(["trace", "show", str(trace_path)]) == 0
    assert "Стадия стабилизации" in capsys.readouterr().out

    code, report = _run(tmp_path, "rt.json", "roundtrip", "--trace", str(trace_path))
    assert code == 0
    assert report["verdict"]["check"]["passed"]
    assert report["verdict"]["agreement"] == 1.0
    assert report["config"]["inputs"]["trace"]["path"] == str(trace_path)


def test_trace_gen_family(tmp_path):
    path = tmp_path / "fam.json"
    assert main(["trace", "gen", "--family-size", "3", "--count", "2", "-o", str(path)]) == 0
    assert len(json.loads(path.read_text(encoding="utf-8"))["traces"]) == 3


def test_decode_with_golden_candidate(tmp_path, golden_path):
    code, report = _run(
        tmp_path, "dec.json", "decode",
        "--trace", golden_path("trace.json"), "--candidate", golden_path("candidate.json"), "--n", "0,1,3"
    )
    assert code == 0
    assert report["verdict"]["candidate"]["passed"]
    assert report["verdict"]["membership"] == {"0": False, "1": True, "3": True}


def test_search_thin(tmp_path):
    code, report = _run(
        tmp_path, "thin.json", "search", "thin", "--generator", "mod", "--universe", "8",
        "--gen-param", "modulus=2", "--gen-param", "arity=2", "--size", "3"
    )
    assert code == 0
    assert report["verdict"]["result"]["elements"] == [0, 2, 4]
    assert report["verdict"]["result"]["witness"] == 1
    assert report["verdict"]["checked"] is True
    assert report["config"]["params"]["gen_param"] == {"modulus": 2, "arity": 2}


def test_search_fs_agrees_with_direct_solver(tmp_path):
    code, report = _run(
        tmp_path, "fs.json", "search", "fs", "--generator", "parity", "--universe", "32", "--size", "3"
    )
    assert code == 0
    verdict = report["verdict"]
    assert verdict["result"]["elements"] == [1, 3, 5]
    assert verdict["check"]["valid"]
    assert verdict["ht2_oracle"] == {"status": "found", "agrees": True}


def test_search_simul_sum_reduction(tmp_path):
    code, report = _run(
        tmp_path, "simul.json", "search", "simul", "--generator", "parity", "--universe", "16",
        "--sum-of", "2", "--size", "3"
    )
    assert code == 0
    assert report["verdict"]["result"]["elements"] == [0, 2, 4]
    assert report["verdict"]["checked"] == [True, True]
    assert report["verdict"]["fs_window"]["valid"]


def test_search_with_coloring_file(tmp_path, golden_path):
    code, report = _run(
        tmp_path, "rrt.json", "search", "rrt", "--coloring", golden_path("coloring_table.json"), "--size", "3"
    )
    # таблица принимает каждый цвет ровно дважды
    assert code == 0
    assert report["verdict"]["result"]["status"] == "found"
    assert report["verdict"]["checked"] is True


def test_budget_exhaustion_exit_code(tmp_path):
    code, report = _run(
        tmp_path, "budget.json", "search", "thin", "--generator", "sum_parity", "--universe", "8",
        "--size", "3", "--node-budget", "1"
    )
    assert code == CLI_CONFIG.EXIT_BUDGET_EXHAUSTED
    assert report["verdict"]["result"]["status"] == "unknown"


def test_verdict_failure_exit_code(tmp_path):
    code, report = _run(tmp_path, "max.json", "search", "addlike", "--function", "max", "--x-max", "4")
    assert code == CLI_CONFIG.EXIT_VERDICT_FAILURE
    assert not report["verdict"]["passed"]
    assert report["counterexamples"]


def test_occurrence_audit_failure(tmp_path, golden_path):
    code, report = _run(tmp_path, "audit.json", "lll", "audit", "--family", golden_path("constraint_family.json"))
    assert code == CLI_CONFIG.EXIT_VERDICT_FAILURE
    assert {"j": 0, "kind": "below_M"} in report["counterexamples"]


@pytest.mark.parametrize("argv", [
    ["search", "thin", "--size", "3"],
    ["search", "thin", "--generator", "parity", "--size", "3"],
    ["search", "thin", "--generator", "parity", "--universe", "8", "--size", "3", "--node-budget", "0"],
    ["lll", "choose-m", "--q", "3/2"],
    ["large", "iterate", "--traces", "missing.json"],
])
def test_input_errors(tmp_path, capsys, argv):
    out = tmp_path / "err.json"
    assert main([*argv, "-o", str(out)]) == CLI_CONFIG.EXIT_INPUT_ERROR
    assert "❌" in capsys.readouterr().err
    assert not out.exists()


def test_malformed_input_reports_position(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{"format": 1,\n "horizon": }', encoding="utf-8")
    assert main(["roundtrip", "--trace", str(path), "-o", str(tmp_path / "r.json")]) == 3
    assert "parse error at line 2" in capsys.readouterr().err


def test_depth_zero_rejected(tmp_path):
    traces = _write(tmp_path, "fam.json", {"traces": [{"horizon": 2, "entries": []}]})
    assert main(["large", "iterate", "--traces", traces, "--depth", "0", "-o", str(tmp_path / "r.json")]) == 3


@pytest.fixture
def thread_inputs(tmp_path, golden_path, small_family):
    return {
        "trace": golden_path("trace.json"),
        "candidate": golden_path("candidate.json"),
        "coloring": golden_path("coloring_table.json"),
        "traces": _write(tmp_path, "fam.json", family_to_json(small_family)),
        "sets": _write(tmp_path, "sets.json", {"format": 1, "min_size": 13,
                                               "sets": [list(range(13)), list(range(13, 26))]}),
    }


@pytest.mark.parametrize("argv", [
    ["encode", "--trace", "{trace}"],
    ["decode", "--trace", "{trace}", "--candidate", "{candidate}", "--n", "0,1,3"],
    ["roundtrip", "--trace", "{trace}"],
    ["lll", "audit", "--family", "{sets}"],
    ["lll", "color", "--family", "{sets}", "--frontier", "32"],
    ["large", "iterate", "--traces", "{traces}", "--depth", "2", "--window", "1024"],
    ["large", "audit", "--traces", "{traces}", "--depth", "1", "--window", "512", "--set", "100,200,300"],
    ["search", "thin", "--generator", "mod", "--universe", "12",
     "--gen-param", "modulus=3", "--gen-param", "arity=2", "--size", "4"],
    ["search", "fs", "--generator", "parity", "--universe", "32", "--size", "3"],
    ["search", "simul", "--generator", "parity", "--universe", "16", "--sum-of", "2", "--size", "3"],
    ["search", "rrt", "--coloring", "{coloring}", "--size", "3"],
    ["search", "addlike", "--function", "max", "--x-max", "4"],
], ids=lambda argv: "-".join(argv[:2]))
def test_threads_do_not_change_verdict(tmp_path, thread_inputs, argv):
    argv = [arg.format(**thread_inputs) for arg in argv]
    code_1, single = _run(tmp_path, "t1.json", *argv, threads=1)
    code_8, pooled = _run(tmp_path, "t8.json", *argv, threads=8)
    assert code_1 == code_8
    assert single["config_hash"] == pooled["config_hash"]
    assert verdict_payload_of(single) == verdict_payload_of(pooled)


def test_large_split_threads_do_not_change_verdict(tmp_path, small_family):
    traces = _write(tmp_path, "fam.json", family_to_json(small_family))
    argv = ["large", "split", "--traces", traces, "--window", "1024", "--seed", "3"]
    code_1, single = _run(tmp_path, "s1.json", *argv, threads=1)
    code_8, pooled = _run(tmp_path, "s8.json", *argv, threads=8)
    assert code_1 == code_8 == 0
    assert single["verdict"]["partition_ok"]
    assert verdict_payload_of(single) == verdict_payload_of(pooled)


def test_replay(tmp_path, capsys):
    code, _ = _run(tmp_path, "fs.json", "search", "fs", "--generator", "parity", "--universe", "16",
                   "--size", "2", "--mode", "full", "--kind", "homog")
    assert code == 0
    assert main(["--threads", "4", "replay", str(tmp_path / "fs.json")]) == 0
    assert "✅" in capsys.readouterr().out


def test_replay_detects_changed_input(tmp_path, golden_path):
    coloring = tmp_path / "c.json"
    shutil.copy(golden_path("coloring_table.json"), coloring)
    code, _ = _run(tmp_path, "thin.json", "search", "thin", "--coloring", str(coloring), "--size", "2")
    assert code == 0
    obj = json.loads(coloring.read_text(encoding="utf-8"))
    obj["table"][0][1] = 2
    coloring.write_text(json.dumps(obj), encoding="utf-8")
    assert main(["replay", str(tmp_path / "thin.json")]) == CLI_CONFIG.EXIT_INPUT_ERROR


def test_replay_detects_tampered_config(tmp_path):
    _run(tmp_path, "m.json", "lll", "choose-m")
    path = tmp_path / "m.json"
    report = json.loads(path.read_text(encoding="utf-8"))
    report["config"]["q"] = "1/3"
    path.write_text(json.dumps(report), encoding="utf-8")
    assert main(["replay", str(path)]) == CLI_CONFIG.EXIT_INPUT_ERROR


def test_service_fields_stay_out_of_params(tmp_path):
    args = build_parser().parse_args([
        "--threads", "2", "large", "iterate", "--traces", _write(tmp_path, "f.json", {"horizon": 0, "entries": []}),
        "--export", "layers.json", "--M", "14"
    ])
    config = config_from_args(args)
    assert config.command == ["large", "iterate"]
    assert config.artifacts == {"export": "layers.json"}
    assert config.params == {"M": 14, "k_max": 2}
    assert config.threads == 2
    assert "threads" not in config.payload()


def test_trace_show_settle_stage(tmp_path, capsys):
    path = _write(tmp_path, "t.json", {"horizon": 16, "entries": [[0, 3]]})
    assert main(["trace", "show", path]) == 0
    assert "Стадия стабилизации: 3" in capsys.readouterr().out


def test_trace_show_truncated_file(tmp_path, capsys):
    path = tmp_path / "t.json"
    path.write_text('{"horizon": 16, "entries": [[0, 3]', encoding="utf-8")
    assert main(["trace", "show", str(path)]) == CLI_CONFIG.EXIT_INPUT_ERROR
    assert "parse error" in capsys.readouterr().err


def test_roundtrip_single_entry(tmp_path):
    trace = _write(tmp_path, "t.json", {"horizon": 16, "entries": [[0, 3]]})
    code, report = _run(tmp_path, "rt.json", "roundtrip", "--trace", trace)
    assert code == 0
    assert report["verdict"]["agreement"] == 1.0
    assert report["counterexamples"] == []


def test_encode_empty_trace_is_all_bottom(tmp_path):
    trace = _write(tmp_path, "t.json", {"horizon": 0, "entries": []})
    code, report = _run(tmp_path, "enc.json", "encode", "--trace", trace)
    assert code == 0
    assert report["verdict"]["all_bottom"]
    assert {row["color"] for row in report["verdict"]["colors"]} == {"⊥"}


def test_decode_rejects_invalid_candidate(tmp_path, golden_path):
    # μ(x) = λ(y) = 13: Y не 2-разнесено
    cand = _write(tmp_path, "c.json", {"format": 1, "Y": [[10, 13], [13, 14]], "witness": 1})
    code, report = _run(tmp_path, "dec.json", "decode", "--trace", golden_path("trace.json"), "--candidate", cand)
    assert code == CLI_CONFIG.EXIT_VERDICT_FAILURE
    assert report["verdict"]["error"] == "not a valid solution window"
    assert report["counterexamples"][0]["check"] == "a"


def test_lll_color_requires_audit(tmp_path, golden_path):
    code, report = _run(
        tmp_path, "color.json", "lll", "color", "--family", golden_path("constraint_family.json"), "--frontier", "8"
    )
    assert code == CLI_CONFIG.EXIT_VERDICT_FAILURE
    assert report["verdict"]["error"] == "occurrence audit failed"


def test_large_iterate_is_reproducible(tmp_path, small_family):
    traces = _write(tmp_path, "fam.json", family_to_json(small_family))
    argv = ["large", "iterate", "--depth", "2", "--window", "1024", "--traces", traces]
    code_a, first = _run(tmp_path, "a.json", *argv)
    code_b, second = _run(tmp_path, "b.json", *argv, threads=8)
    assert code_a == code_b
    assert first["config_hash"] == second["config_hash"]
    assert verdict_payload_of(first) == verdict_payload_of(second)
    assert first["verdict"]["c_hard_matches_export"]
