"""Тесты файловых форматов и отчётов."""

import json
import os

import pytest

from app.binum import BinNum
from app.config import ExperimentConfig
from app.reports import (
    Report, candidate_from_json, candidate_to_json, coloring_from_json, config_from_report, family_from_json,
    load_candidate, load_constraint_family, load_json, load_trace, parse_json_text, report_hash_matches,
    trace_to_json, verdict_payload_of, write_json_atomic
)
from app.validation import InputFormatError


def test_golden_trace(golden_path):
    trace = load_trace(golden_path("trace.json"))
    assert trace.horizon == 12
    assert trace.entries == ((1, 2), (3, 5), (6, 9))
    assert trace_to_json(trace) == load_json(golden_path("trace.json"))


def test_golden_candidate(golden_path):
    cand = load_candidate(golden_path("candidate.json"))
    assert [x.exponents for x in cand.Y] == [(10,), (13, 14), (17,)]
    assert cand.witness_color == 1
    assert candidate_to_json(cand) == load_json(golden_path("candidate.json"))


def test_golden_constraint_family(golden_path):
    fam = load_constraint_family(golden_path("constraint_family.json"))
    assert len(fam) == 2
    assert fam.enumerate(1) == frozenset({3, 4, 5})
    assert fam.occurrences(3, 4) == [1]


def test_golden_coloring_table(golden_path):
    c = coloring_from_json(load_json(golden_path("coloring_table.json")))
    assert c.arity == 2
    assert c.eval((1, 3)) == 1
    assert c.palette == 3


def test_single_trace_is_a_family():
    fam = family_from_json({"horizon": 4, "entries": [[0, 1]]})
    assert len(fam) == 1
    assert fam[0].final_member(0)


def test_parse_error_has_position():
    text = '{\n  "horizon": 3,\n  oops\n}'
    with pytest.raises(InputFormatError) as excinfo:
        parse_json_text(text)
    assert excinfo.value.line == 3
    assert excinfo.value.column == 3
    assert str(excinfo.value).startswith("parse error at line 3 column 3")


@pytest.mark.parametrize("obj, fragment", [
    ({"entries": []}, "missing field 'horizon'"),
    ({"horizon": 3, "entries": [[1]]}, "expected a pair of integers"),
    ({"horizon": 3, "entries": [[1, 5]]}, "beyond horizon"),
    ({"format": 2, "horizon": 3, "entries": []}, "unsupported format"),
    ([1, 2], "expected a JSON object"),
])
def test_bad_trace_files(obj, fragment):
    with pytest.raises(InputFormatError, match=fragment):
        family_from_json(obj)


def test_bad_candidates():
    with pytest.raises(InputFormatError, match="witness"):
        candidate_from_json({"Y": [[3]], "witness": "1"})
    with pytest.raises(InputFormatError):
        candidate_from_json({"Y": [[3, 3]], "witness": 1})
    with pytest.raises(InputFormatError):
        candidate_from_json({"Y": [[5], [3]], "witness": 1})


def test_coloring_generator():
    c = coloring_from_json({"generator": "mod", "universe": 8, "params": {"modulus": 3}})
    assert c.eval((5,)) == 2
    with pytest.raises(InputFormatError, match="unknown generator"):
        coloring_from_json({"generator": "rainbow", "universe": 8})
    with pytest.raises(InputFormatError):
        coloring_from_json({"arity": 1, "universe": 3, "table": [0, 1]})


def test_missing_file(tmp_path):
    with pytest.raises(InputFormatError, match="cannot read"):
        load_json(str(tmp_path / "absent.json"))


def test_write_json_atomic(tmp_path):
    path = tmp_path / "nested" / "out.json"
    write_json_atomic(str(path), {"b": 1, "a": [BinNum((0, 2)).value]})
    text = path.read_text(encoding="utf-8")
    assert text.endswith("\n")
    assert json.loads(text) == {"a": [5], "b": 1}
    assert text.index('"a"') < text.index('"b"')
    assert os.listdir(path.parent) == ["out.json"]


def test_atomic_write_keeps_old_file_on_failure(tmp_path):
    path = tmp_path / "out.json"
    write_json_atomic(str(path), {"ok": True})
    with pytest.raises(TypeError):
        write_json_atomic(str(path), {"bad": object()})
    assert json.loads(path.read_text(encoding="utf-8")) == {"ok": True}
    assert os.listdir(tmp_path) == ["out.json"]


# ============================================================================
# ОТЧЁТЫ
# ============================================================================

def _config(**overrides):
    values = dict(command=["search", "thin"], params={"size": 3, "generator": "parity", "universe": 8})
    values.update(overrides)
    return ExperimentConfig(**values)


def test_config_hash_ignores_service_fields():
    base = Report(_config())
    other = Report(_config(threads=8, output="x.json", artifacts={"plot": "p.png"}))
    assert base.config_hash == other.config_hash
    assert base.config_hash != Report(_config(seed=8)).config_hash


def test_report_round_trip():
    report = Report(_config(), {"result": {"status": "found"}}, timings={"total_s": 0.5})
    obj = report.to_json()
    assert obj["format"] == 1
    assert report_hash_matches(obj)
    assert verdict_payload_of(obj) == report.verdict_payload()
    assert config_from_report(obj).payload() == report.config.payload()

    obj["config"]["seed"] += 1
    assert not report_hash_matches(obj)


def test_verdict_payload_excludes_timings():
    fast = Report(_config(), {"x": 1}, timings={"total_s": 0.1})
    slow = Report(_config(), {"x": 1}, timings={"total_s": 9.0})
    assert fast.verdict_payload() == slow.verdict_payload()
