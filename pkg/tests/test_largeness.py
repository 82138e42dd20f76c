"""Тесты больших множеств, расщепления и трудной раскраски."""

import json
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from app.largeness import (
    BinaryFn, GFunction, Naturals, PredicateSet, WindowSet, _acceptable_stages, _audit_start, _runs,
    acceptable, blocks, build_block_family, c_hard_from_export, g_replay_audit, hat, identity_k, immunity_audit, iterate,
    largeness_audit, make_g, split
)
from app.lll import LllParams, occurrence_audit
from app.oracle import EnumFamily, OracleTrace, approximant
from app.validation import ValidationError, WindowExhaustedError
from tests.settings import SLOW_SETTINGS

HARD_WINDOW = 2 ** 12


@st.composite
def families(draw):
    traces = []
    for _ in range(draw(st.integers(1, 2))):
        elements = draw(st.lists(st.integers(0, 10), max_size=6, unique=True))
        stages = [draw(st.integers(0, 20)) for _ in elements]
        traces.append(OracleTrace.of(list(zip(elements, stages)), horizon=20))
    return EnumFamily(tuple(traces))


@pytest.fixture(scope="module")
def hard_instance():
    fam = EnumFamily((OracleTrace.of([(m, 0) for m in range(20)], horizon=0),))
    stack, colors = iterate(2, fam, LllParams(seed=5), HARD_WINDOW, k_max=2)
    return fam, stack, colors


# ============================================================================
# ФУНКЦИЯ g
# ============================================================================

def test_g_first_values():
    g = make_g(13)
    assert [g.value_at(c) for c in range(6)] == [13, 14, 15, 16, 17, 18]
    assert g.eval(0, 1) == 15
    assert g.eval(0, 2) == 18
    assert g.eval(0, 15) == 148


def test_g_replay_audit_passes():
    assert g_replay_audit(make_g(13), 100) == []
    assert g_replay_audit(GFunction(13, "szudzik"), 100) == []
    assert g_replay_audit(make_g(2), 100) == []


def test_g_small_m_waits_for_inequality():
    g = make_g(2)
    assert g.eval(0, 1) == 4
    assert g.eval(1, 1) == 6
    assert g.eval(0, 2) == 8


def test_g_image_member():
    g = make_g(13)
    assert g.image_member(14) == (1, 0)
    assert g.image_member(15) == (0, 1)
    assert g.image_member(12) is None


def test_g_lower_bound():
    g = make_g(13)
    for e in range(5):
        for k in range(1, 5):
            assert g.eval(e, k) >= g.lower_bound(e, k)


def test_g_rejects_bad_setup():
    with pytest.raises(ValidationError):
        GFunction(0)
    with pytest.raises(ValidationError):
        GFunction(13, "hilbert")
    with pytest.raises(ValidationError):
        GFunction(13, replay_limit=10).value_at(10)


def test_g_extends_consistently_from_threads():
    shared = make_g(13)
    targets = [20013 + i for i in range(8)]
    with ThreadPoolExecutor(max_workers=8) as pool:
        images = list(pool.map(shared.image_member, targets))
    reference = make_g(13)
    assert images == [reference.image_member(m) for m in targets]
    codes = range(0, 20008, 97)
    assert [shared.value_at(c) for c in codes] == [reference.value_at(c) for c in codes]
    assert g_replay_audit(shared, 2000) == []


# ============================================================================
# ФУНКЦИИ f
# ============================================================================

def test_hat_tower_values():
    g = make_g(13)
    f1 = hat(identity_k(), g)
    f2 = hat(f1, g)
    assert f1.eval(0, 1) == 15
    assert f2.eval(0, 1) == 2220
    assert f2.eval_bounded(0, 1, 10 ** 6) == 2220


def test_eval_bounded_short_circuits():
    g = GFunction(13, replay_limit=200)
    f3 = hat(hat(hat(identity_k(), g), g), g)
    # f3(0, 1) требовал бы g на кодах далеко за пределом воспроизведения
    assert f3.eval_bounded(0, 1, 100) is None


def test_f_table_lists_bounded_values():
    g = make_g(13)
    assert hat(identity_k(), g).table(1, 2, 16) == [[0, 1, 15], [0, 2, None]]


# ============================================================================
# МНОЖЕСТВА
# ============================================================================

def test_window_set_bitmap_round_trip():
    ws = WindowSet.from_bitmap("1011")
    assert ws.to_bitmap() == "1011"
    assert ws.enumerate_up_to(3) == (0, 2, 3)
    with pytest.raises(WindowExhaustedError):
        ws.contains(4)


def test_predicate_set_mask():
    evens = PredicateSet(lambda x: x % 2 == 0, "evens")
    assert evens.mask(6).tolist() == [True, False, True, False, True, False]
    assert Naturals().enumerate_up_to(3) == (0, 1, 2, 3)


# ============================================================================
# ПРИЕМЛЕМЫЕ СТАДИИ
# ============================================================================

def test_acceptable_skips_overlapping_stages():
    # E^4: [0, 4) на стадиях 0..4, затем {10, 11, 12, 0}
    fam = EnumFamily((OracleTrace.of([(10, 0), (11, 0), (12, 0), (0, 5)], horizon=40),))
    g, f, D = make_g(2), identity_k(), Naturals()
    assert [s for s in range(12) if acceptable(s, 0, 1, D, f, g, fam)] == [0, 1, 2, 3, 4, 8, 9, 10, 11]
    assert _audit_start(_runs(fam, 0, 4, 40)) == 8
    with pytest.raises(ValidationError):
        blocks(6, 0, 1, f, g, fam)
    assert blocks(8, 0, 1, f, g, fam) == [(8, 18, 19, 20)]


def test_blocks_chunk_by_g():
    fam = EnumFamily((OracleTrace.of([(m, 0) for m in range(20)], horizon=10),))
    g = make_g(13)
    assert blocks(5, 0, 1, identity_k(), g, fam) == [tuple(range(5, 20))]
    chunks = blocks(5, 0, 2, identity_k(), g, fam)
    assert [len(c) for c in chunks] == [18, 18]
    assert chunks[0] == tuple(range(5, 23))


def test_blocks_inside_D():
    # n = f(e, K) = 2K + 1 = 9: E = [0, 9), нечётных в нём 4 = K
    fam = EnumFamily((OracleTrace.of([], horizon=10),))
    odds = PredicateSet(lambda x: x % 2 == 1, "odds")
    f = BinaryFn(lambda e, k: 2 * k + 1, "2k+1")
    assert blocks(0, 0, 1, f, make_g(2), fam, odds) == [(1, 3, 5, 7)]
    assert not acceptable(0, 0, 1, odds, identity_k(), make_g(2), fam)


@given(families(), st.sampled_from([Naturals(), PredicateSet(lambda x: x % 3 != 0, "not div 3")]))
@SLOW_SETTINGS
def test_fast_stages_match_literal_check(fam, D):
    window = 48
    fam_w = fam.extended_to(window)
    g, f = make_g(2), identity_k()
    mask = D.mask(window)
    for e in range(len(fam)):
        for k in (1, 2):
            K = k * g.eval(e, k)
            fast = {s: hits.tolist() for s, hits in _acceptable_stages(mask, _runs(fam_w, e, K, window - 1), K, window)}
            literal = {}
            for s in range(window):
                E = approximant(fam_w, e, K, s).elements
                if s + max(E) >= window or not acceptable(s, e, k, D, f, g, fam_w):
                    continue
                literal[s] = [y for c in blocks(s, e, k, f, g, fam_w, D) for y in c]
            assert fast == literal


# ============================================================================
# СЕМЕЙСТВО БЛОКОВ
# ============================================================================

@given(families())
@SLOW_SETTINGS
def test_block_family_occurrences_match_listing(fam):
    window = 64
    g = make_g(2)
    family, _ = build_block_family(Naturals().mask(window), identity_k(), g, fam.extended_to(window), window, 2)
    truth = {}
    for j in range(len(family)):
        s = family.enumerate(j)
        for x in s:
            truth.setdefault((len(s), x), []).append(j)
    for m in range(g.M, family.size_bound + 1):
        for n in range(window):
            assert sorted(family.occurrences(m, n)) == truth.get((m, n), [])


def test_block_family_sets_within(small_family):
    window = 128
    g = make_g(13)
    family, skipped = build_block_family(Naturals().mask(window), identity_k(), g,
                                         small_family.extended_to(window), window, 2)
    assert skipped == []
    within = family.sets_within(40)
    assert within
    assert all(max(b) < 40 for b in within.values())
    e, k, s, j = family.label(0)
    assert (e, k, j) == (0, 1, 0)
    assert family.enumerate(0) == frozenset(range(s, s + g.eval(0, 1)))


# ============================================================================
# АУДИТ БОЛЬШИХ МНОЖЕСТВ
# ============================================================================

def test_largeness_audit_finds_counterexamples():
    fam = EnumFamily((OracleTrace.of([], horizon=0),))
    sparse = PredicateSet(lambda x: x % 100 == 0, "multiples of 100")
    verdict = largeness_audit(sparse, identity_k(), fam, 50, k_max=1)
    assert not verdict.passed
    assert verdict.checked == 50
    assert [c["s"] for c in verdict.counterexamples] == list(range(1, 50))


def test_naturals_are_f0_large(small_family):
    verdict = largeness_audit(Naturals(), identity_k(), small_family, 256, k_max=2)
    assert verdict.passed
    assert verdict.checked > 0


def test_largeness_audit_skips_beyond_window(small_family):
    g = make_g(13)
    verdict = largeness_audit(Naturals(), hat(hat(identity_k(), g), g), small_family, 256, k_max=1)
    assert {c["reason"] for c in verdict.skipped} == {"approximant exceeds window"}


# ============================================================================
# РАСЩЕПЛЕНИЕ
# ============================================================================

def test_split_of_naturals(small_family):
    window = 2 ** 10
    params = LllParams(seed=3)
    result = split(Naturals(), identity_k(), make_g(params.M), small_family, params, window, k_max=2)
    assert (result.D0.bits | result.D1.bits).all()
    assert not (result.D0.bits & result.D1.bits).any()
    assert result.audit.passed
    assert result.audit.counterexamples == []
    assert result.sparsity.passed
    assert result.block_count > 0
    assert result.skipped == []


def test_split_is_deterministic_across_workers(small_family):
    params = LllParams(seed=9)
    one = split(Naturals(), identity_k(), make_g(params.M), small_family, params, 512, workers=1)
    many = split(Naturals(), identity_k(), make_g(params.M), small_family, params, 512, workers=8)
    assert one.coloring == many.coloring
    assert one.to_json() == many.to_json()


def test_split_block_family_is_sparse(small_family):
    params = LllParams(seed=3)
    g = make_g(params.M)
    window = 512
    family, _ = build_block_family(Naturals().mask(window), identity_k(), g,
                                   small_family.extended_to(window), window, 2)
    assert occurrence_audit(family, params, family.size_bound, window - 1).passed


# ============================================================================
# ИТЕРАЦИЯ И ИММУННОСТЬ
# ============================================================================

def test_iterate_layers_are_nested(hard_instance):
    _, stack, _ = hard_instance
    masks = stack.masks()
    assert masks.shape == (3, HARD_WINDOW)
    assert masks[0].all()
    assert not (masks[2] & ~masks[1]).any()
    assert all(result.audit.passed for result in stack.splits)


def test_every_level_passes_sparsity(hard_instance):
    _, stack, _ = hard_instance
    assert len(stack.splits) == 2
    for result in stack.splits:
        assert result.sparsity.passed
        assert result.sparsity.cells_checked > 0


def test_second_layer_builds_blocks(hard_instance):
    _, stack, _ = hard_instance
    assert stack.layers[2].f.eval_bounded(0, 1, HARD_WINDOW) == 2220
    assert stack.splits[1].block_count > 0


def test_c_hard_matches_export(hard_instance):
    _, stack, colors = hard_instance
    export = json.loads(json.dumps(stack.export()))
    assert c_hard_from_export(export) == colors.tolist()
    assert colors[0] == 0
    assert set(np.unique(colors).tolist()) <= {0, 1, 2}


def test_c_hard_definition(hard_instance):
    _, stack, colors = hard_instance
    masks = stack.masks()
    for x in range(0, HARD_WINDOW, 37):
        assert colors[x] == max(n for n in range(3) if n <= x and masks[n][x])


def test_color_classes_differ_from_layers_finitely(hard_instance):
    _, stack, _ = hard_instance
    differences = stack.color_class_differences()
    assert [d["n"] for d in differences] == [0, 1, 2]
    for d in differences:
        assert all(x < 2 for x in d["only_in_color_class"] + d["only_in_layer"])


def test_f_table_uses_nullable_ints(hard_instance):
    _, stack, _ = hard_instance
    table = stack.f_table(2)
    assert str(table["value"].dtype) == "Int64"
    assert table.set_index(["e", "k"]).loc[(0, 1), "value"] == 2220


@pytest.mark.parametrize("s0", [20, 57, 100, 333, 512, 777, 1024, 2048, 3000, 4000])
def test_immunity_flags_planted_sets(hard_instance, s0):
    fam, stack, _ = hard_instance
    S = list(range(15)) + [s0]
    verdict = immunity_audit(S, 0, stack, fam)
    assert verdict.flagged
    entry = verdict.entries[0]
    assert entry["status"] == "flagged"
    witness = entry["witness"]
    assert witness["sum"] == witness["s"] + witness["x"]
    assert stack.c_hard()[witness["sum"]] == 0


@pytest.mark.parametrize("S", [[100, 200, 300], list(range(20, 35)), [4095]])
def test_immunity_passes_sets_missing_the_approximant(hard_instance, S):
    fam, stack, _ = hard_instance
    verdict = immunity_audit(S, 0, stack, fam)
    assert verdict.passed
    assert verdict.entries[0]["status"] == "pass"
    assert verdict.entries[0]["reason"] == "approximant not inside S"


def test_immunity_for_top_colors_uses_larger_bounds(hard_instance):
    fam, stack, _ = hard_instance
    for color in (1, 2):
        verdict = immunity_audit(list(range(15)) + [100], color, stack, fam)
        assert verdict.entries[0]["reason"] == "enumeration below bound"
        assert verdict.entries[0]["bound"] == 2220


@pytest.fixture(scope="module")
def long_family():
    """Перечисление, длинное настолько, чтобы дойти до f_2(0, 1) = 2220"""
    return EnumFamily((OracleTrace.of([(m, 0) for m in range(2300)], horizon=0),))


@pytest.mark.parametrize("color", [1, 2])
def test_immunity_flags_top_colors(hard_instance, long_family, color):
    _, stack, colors = hard_instance
    verdict = immunity_audit(range(2220), color, stack, long_family)
    assert verdict.flagged
    entry = verdict.entries[0]
    assert entry["bound"] == 2220
    witness = entry["witness"]
    assert witness["x"] != witness["s"]
    assert 0 <= witness["x"] < 2220
    assert colors[witness["sum"]] == color


@pytest.mark.parametrize("color", [1, 2])
def test_immunity_passes_top_colors(hard_instance, long_family, color):
    _, stack, _ = hard_instance
    verdict = immunity_audit(range(1, 2221), color, stack, long_family)
    assert verdict.passed
    assert verdict.entries[0] == {
        "e": 0, "status": "pass", "reason": "approximant not inside S", "bound": 2220, "witness": 0
    }


def test_immunity_bound_for_color_zero_is_next_layer(hard_instance, long_family):
    _, stack, _ = hard_instance
    verdict = immunity_audit(list(range(15)) + [100], 0, stack, long_family)
    assert verdict.entries[0]["bound"] == 15
    assert verdict.flagged


def test_immunity_rejects_bad_input(hard_instance):
    fam, stack, _ = hard_instance
    with pytest.raises(ValidationError):
        immunity_audit([HARD_WINDOW], 0, stack, fam)
    with pytest.raises(ValidationError):
        immunity_audit([1], 3, stack, fam)


def test_plot_writes_png(hard_instance, tmp_path):
    _, stack, _ = hard_instance
    path = tmp_path / "layers.png"
    stack.plot(str(path))
    assert path.read_bytes()[:4] == b"\x89PNG"


def test_iterate_rejects_zero_depth(small_family):
    with pytest.raises(ValidationError):
        iterate(0, small_family, LllParams(), 64)
