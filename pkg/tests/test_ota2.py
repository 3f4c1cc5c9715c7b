import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pvtsizing.env import PASS_REWARD, PvtCorner, denormalize_action, evaluate_ota2, load_ota2_constants, ota2_benchmark
from pvtsizing.env.ota2 import Ota2Constants
from pvtsizing.pruner import PerformanceMatrix, select_training_tasks

from oracles import ota2_reference

K = load_ota2_constants()
SIZING = np.array([10.0, 5.0, 5.0, 5.0, 20.0, 30.0, 2.0])


def test_constants_file_is_versioned():
    assert K == Ota2Constants(40.0, 0.1, 0.5, 0.2, 0.005)


def test_constants_schema_mismatch(tmp_path):
    path = tmp_path / "k.json"
    path.write_text(json.dumps({"schema_version": 99, "g0": 1, "i0": 1, "k6": 1, "CL": 1, "cpar": 1}))
    with pytest.raises(ValueError, match="schema"):
        load_ota2_constants(path)


@pytest.mark.parametrize("process", ["TT", "SS", "FF", "SF", "FS"])
@pytest.mark.parametrize("vdd,temp", [(1.0, 0.0), (1.1, 50.0), (1.2, 100.0)])
def test_matches_reference_equations(process, vdd, temp):
    got = evaluate_ota2(SIZING, PvtCorner(process, vdd, temp), K)
    ref = ota2_reference(SIZING[:6], SIZING[6], process, vdd, temp, K.to_dict())
    for name in ("i", "ugb", "phm"):
        assert got[name] == pytest.approx(ref[name], rel=1e-12)


def test_halving_cc_doubles_ugb():
    c = PvtCorner("TT", 1.1, 25.0)
    half = SIZING.copy()
    half[6] /= 2
    assert evaluate_ota2(half, c, K)["ugb"] == pytest.approx(2 * evaluate_ota2(SIZING, c, K)["ugb"], rel=1e-14)


def test_cold_is_faster_than_hot():
    cold = evaluate_ota2(SIZING, PvtCorner("TT", 1.1, 0.0), K)["ugb"]
    hot = evaluate_ota2(SIZING, PvtCorner("TT", 1.1, 100.0), K)["ugb"]
    assert cold > hot


def test_fast_nmos_corner_beats_slow_nmos_corner():
    fs = evaluate_ota2(SIZING, PvtCorner("FS", 1.1, 50.0), K)["ugb"]
    sf = evaluate_ota2(SIZING, PvtCorner("SF", 1.1, 50.0), K)["ugb"]
    assert fs > sf
    assert fs / sf == pytest.approx(1.12 / 0.88, rel=1e-12)


sizing_st = st.tuples(*[st.floats(0.5, 50.0)] * 6, st.floats(0.1, 10.0)).map(np.array)
corner_st = st.tuples(st.sampled_from(["TT", "SS", "FF", "SF", "FS"]), st.floats(1.0, 1.2), st.floats(0.0, 100.0))


@settings(max_examples=200, deadline=None)
@given(sizing_st, corner_st)
def test_partial_derivative_signs(x, corner):
    c = PvtCorner(*corner)
    base = evaluate_ota2(x, c, K)
    more_cc = x.copy()
    more_cc[6] *= 1.01
    more_w5 = x.copy()
    more_w5[4] *= 1.01
    assert evaluate_ota2(more_cc, c, K)["ugb"] < base["ugb"]
    assert evaluate_ota2(more_w5, c, K)["i"] > base["i"]


@settings(max_examples=100, deadline=None)
@given(sizing_st, corner_st)
def test_ugb_continuous_in_supply_and_temperature(x, corner):
    p, v, t = corner
    a = evaluate_ota2(x, PvtCorner(p, v, t), K)["ugb"]
    b = evaluate_ota2(x, PvtCorner(p, min(v + 1e-7, 1.2), min(t + 1e-5, 100.0)), K)["ugb"]
    assert abs(a - b) <= 1e-5 * max(1.0, abs(a))


def test_benchmark_has_thirty_corners_and_expected_grid():
    b = ota2_benchmark()
    assert b.n_corners == 30
    assert b.space.grid_size() == 100 ** 7
    assert b.metric_names == ["i", "ugb", "phm"]


def test_vectorized_evaluation_matches_per_corner_dicts():
    b = ota2_benchmark()
    values = b.evaluate(SIZING)
    for idx, corner in enumerate(b.corners):
        d = evaluate_ota2(SIZING, corner, K)
        assert np.allclose(values[idx], [d["i"], d["ugb"], d["phm"]], rtol=1e-13)


def test_calibration_gate_small_sample():
    # the full 1e5-sample gate lives in the acceptance suite
    b = ota2_benchmark()
    rng = np.random.default_rng(0)
    raw = rng.uniform(-1, 1, size=(20_000, 7))
    nominal_pass = 0
    for a in raw:
        _, _, big_r = b.rewards(denormalize_action(a, b.space), [b.nominal_index])
        nominal_pass += big_r[0] == PASS_REWARD
    assert 0 < nominal_pass / len(raw) < 0.5


@pytest.mark.xfail(strict=True, reason="supply-only spread of the current metric dominates z-scored k-means; "
                                       "see the decisions ledger")
def test_pruning_separates_speed_limited_from_stability_limited_corners():
    b = ota2_benchmark()
    rng = np.random.default_rng(1)
    separated = 0
    checked = 0
    for _ in range(20_000):
        x = denormalize_action(rng.uniform(-1, 1, 7), b.space)
        vals, r, big_r = b.rewards(x)
        slow = vals[:, 1] < 15.0 * 0.98
        unstable = vals[:, 2] < 60.0 * 0.98
        if not (slow.any() and unstable.any()) or (slow & unstable).any():
            continue
        checked += 1
        sel = select_training_tasks(PerformanceMatrix(vals, r, big_r), b.nominal_index, 0)
        if sel.k >= 2 and not set(sel.labels[slow]) & set(sel.labels[unstable]):
            separated += 1
    assert checked > 0
    assert separated > 0
