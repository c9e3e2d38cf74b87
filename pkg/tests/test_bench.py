"""Monte-Carlo orchestration: determinism, ordering, summaries, CSV."""

import json
import math

import numpy as np
import pytest

from dapalloc.bench import (
    DEFAULT_ALGORITHMS,
    CcdfSeries,
    DropResult,
    ccdf,
    evaluate_icsi_mode,
    evaluate_rapp_mode,
    grid_2ue,
    run_montecarlo,
    summarize,
    sweep_homogeneous,
    write_drop_results_csv,
    write_summary_json,
    write_table_csv,
)
from dapalloc.scenario import ScenarioConfig, two_ue_grid

SMALL_SC = ScenarioConfig(n_users=4, m_antennas=64, p_max=0.1, seed=17)


def test_ccdf_frozen():
    s = ccdf([3.0, 1.0, 2.0], label="x")
    assert isinstance(s, CcdfSeries)
    np.testing.assert_array_equal(s.values, [1.0, 2.0, 3.0])
    np.testing.assert_allclose(s.probabilities, [2 / 3, 1 / 3, 0.0], rtol=1e-15)
    assert s.label == "x"
    with pytest.raises(ValueError):
        ccdf([])


def test_drop_result_rejects_unknown_label():
    with pytest.raises(ValueError):
        DropResult(0, "GENIE", 1.0, 1.0, 6.0, 0.5, np.array([1.0]))


def test_montecarlo_shape_and_order():
    results = run_montecarlo(SMALL_SC, n_drops=6)
    assert len(results) == 6 * len(DEFAULT_ALGORITHMS)
    for i, r in enumerate(results):
        assert r.drop_id == i // 4
        assert r.algorithm == DEFAULT_ALGORITHMS[i % 4]
        assert r.error is None
        assert r.rates.shape == (4,)
        assert r.sum_rate == pytest.approx(float(np.sum(r.rates)), rel=1e-12)
        assert 0.25 <= r.omega_max <= 1.0 + 1e-12


def test_montecarlo_deterministic_across_workers():
    """Worker count is an implementation detail: results must be identical."""
    serial = run_montecarlo(SMALL_SC, n_drops=6, workers=1)
    parallel = run_montecarlo(SMALL_SC, n_drops=6, workers=2)
    assert len(serial) == len(parallel)
    for a, b in zip(serial, parallel):
        assert a.drop_id == b.drop_id
        assert a.algorithm == b.algorithm
        assert a.sum_rate == b.sum_rate  # bitwise
        assert np.array_equal(a.rates, b.rates)


def test_montecarlo_per_drop_dominance():
    results = run_montecarlo(SMALL_SC, n_drops=8)
    by_drop = {}
    for r in results:
        by_drop.setdefault(r.drop_id, {})[r.algorithm] = r.sum_rate
    for drop, rates in by_drop.items():
        assert rates["DAPA-FPDA"] >= rates["REF-E"] * (1 - 1e-9), drop
        assert rates["DAPA-FPDA"] >= rates["DAPA-E"] * (1 - 1e-9), drop
        assert rates["REF-FPDA"] >= rates["REF-E"] * (1 - 1e-9), drop


def test_montecarlo_algorithm_subset():
    results = run_montecarlo(SMALL_SC, algorithms=("REF-E",), n_drops=3)
    assert [r.algorithm for r in results] == ["REF-E"] * 3


def test_rapp_mode_paired_and_never_better():
    soft, rapp = evaluate_rapp_mode(SMALL_SC, n_drops=5)
    assert len(soft) == len(rapp) == 5 * 4
    for a, b in zip(soft, rapp):
        assert (a.drop_id, a.algorithm) == (b.drop_id, b.algorithm)
        # same allocation, so the back-off must agree...
        assert a.ibo_db == b.ibo_db
        assert a.total_power_p == b.total_power_p
        # ...and the smooth amplifier can only lose rate at p = 2
        assert b.sum_rate <= a.sum_rate * (1 + 1e-12)


def test_icsi_mode_uniform_delta():
    perfect, imperfect = evaluate_icsi_mode(SMALL_SC, n_drops=5, delta_policy=0.1)
    for a, b in zip(perfect, imperfect):
        assert (a.drop_id, a.algorithm) == (b.drop_id, b.algorithm)
        assert b.sum_rate < a.sum_rate  # estimation error always costs rate here


def test_icsi_mode_zero_delta_identical():
    perfect, imperfect = evaluate_icsi_mode(SMALL_SC, n_drops=3, delta_policy=0.0)
    for a, b in zip(perfect, imperfect):
        assert a.sum_rate == b.sum_rate  # bitwise
        assert np.array_equal(a.rates, b.rates)


def test_icsi_mode_estimated_requires_pilots():
    with pytest.raises(ValueError):
        evaluate_icsi_mode(SMALL_SC, n_drops=2, delta_policy="estimated")
    with pytest.raises(ValueError):
        evaluate_icsi_mode(SMALL_SC, n_drops=2, delta_policy=1.5)
    sc = ScenarioConfig(
        n_users=4, m_antennas=64, p_max=0.1, seed=17, pilot_len=60, rho_ul_w=0.2
    )
    perfect, imperfect = evaluate_icsi_mode(sc, n_drops=2, delta_policy="estimated")
    for a, b in zip(perfect, imperfect):
        assert b.sum_rate <= a.sum_rate


def test_sweep_homogeneous_columns():
    rows = sweep_homogeneous(SMALL_SC, [90.0, 100.0, 110.0])
    assert len(rows) == 3
    assert rows[0]["pl_db"] == 90.0
    for label in DEFAULT_ALGORITHMS:
        assert f"{label}_sum_rate" in rows[0]
        assert f"{label}_ibo_db" in rows[0]
    # identical users: joint optimization reduces to the equal split
    for row in rows:
        assert row["DAPA-FPDA_sum_rate"] == pytest.approx(
            row["DAPA-E_sum_rate"], rel=1e-9
        )
        assert row["DAPA-FPDA_ibo_db"] == pytest.approx(
            row["DAPA-E_ibo_db"], abs=1e-6
        )
    # REF strategies pin the back-off at 6 dB everywhere
    assert rows[1]["REF-E_ibo_db"] == pytest.approx(6.0, abs=1e-12)


def test_grid_2ue_records():
    sc = ScenarioConfig(n_users=2, m_antennas=64, p_max=0.1, seed=17)
    records = grid_2ue(sc, two_ue_grid(90.0, 110.0, 10.0, sc))
    assert len(records) == 9
    cell = {(r["pl1_db"], r["pl2_db"]): r for r in records}
    assert set(cell) == {(a, b) for a in (90.0, 100.0, 110.0) for b in (90.0, 100.0, 110.0)}
    diag = cell[(100.0, 100.0)]
    assert diag["omega1"] == pytest.approx(0.5, abs=1e-9)
    assert diag["sum_rate_ratio_vs_ref_e"] >= 1.0 - 1e-9
    # symmetry of the ratio across the diagonal
    assert cell[(90.0, 110.0)]["sum_rate_ratio_vs_ref_e"] == pytest.approx(
        cell[(110.0, 90.0)]["sum_rate_ratio_vs_ref_e"], rel=1e-9
    )


def test_summarize_structure():
    results = run_montecarlo(SMALL_SC, n_drops=6)
    s = summarize(results)
    assert set(s["algorithms"]) == set(DEFAULT_ALGORITHMS)
    block = s["algorithms"]["DAPA-FPDA"]
    assert block["failures"] == 0
    assert block["sum_rate"]["n"] == 6
    assert block["sum_rate"]["q1"] <= block["sum_rate"]["median"] <= block["sum_rate"]["q3"]
    ratio = block["sum_rate_ratio_vs_ref_e"]
    assert ratio["median"] >= 1.0 - 1e-9
    assert "sum_rate_ratio_vs_ref_e" not in s["algorithms"]["REF-E"]


def test_drop_csv_round_trip(tmp_path):
    results = run_montecarlo(SMALL_SC, n_drops=3, algorithms=("DAPA-FPDA",))
    path = tmp_path / "drops.csv"
    write_drop_results_csv(results, str(path))
    lines = path.read_text().strip().split("\n")
    assert lines[0] == (
        "drop_id,algorithm,sum_rate,total_power_p,ibo_db,omega_max,"
        "rate_0,rate_1,rate_2,rate_3"
    )
    assert len(lines) == 4
    row = lines[1].split(",")
    assert int(row[0]) == 0
    assert row[1] == "DAPA-FPDA"
    # 17 significant digits survive the round trip exactly
    assert float(row[2]) == results[0].sum_rate
    assert float(row[6]) == results[0].rates[0]
    with pytest.raises(ValueError):
        write_drop_results_csv([], str(path))


def test_table_csv(tmp_path):
    rows = [{"a": 1.5, "b": "x"}, {"a": 2.5, "b": "y"}]
    path = tmp_path / "t.csv"
    write_table_csv(rows, str(path))
    assert path.read_text() == "a,b\n1.5,x\n2.5,y\n"
    with pytest.raises(ValueError):
        write_table_csv([], str(path))


def test_summary_json(tmp_path):
    path = tmp_path / "s.json"
    write_summary_json({"b": 1, "a": math.nan}, str(path))
    text = path.read_text()
    assert text.endswith("\n")
    loaded = json.loads(text)
    assert loaded["b"] == 1
    assert math.isnan(loaded["a"])
