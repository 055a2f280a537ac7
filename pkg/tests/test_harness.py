import csv
import io
import json
import math

import numpy as np
import pytest

from daor.config import parse_config
from daor.design import DesignConfig, design_os, waterfill_precoder
from daor.errors import InfeasiblePrivacy
from daor.harness import (SWEEP_COLUMNS, dumps, result_record, run_beampattern, run_bounds, run_compare,
                          run_design, run_sweep)
from daor.metrics import Verdict, achievable_rate

SMALL = {"channel": {"n_t": 6, "n_r": 4}, "design": {"n_streams": 2}}


def small(**kw):
    return parse_config({**SMALL, **kw})


def test_design_record_contents():
    out, rec = run_design(small(gamma_th_list=[0.0]), seed=5)
    assert rec["schema_version"] == 1 and rec["command"] == "design"
    assert rec["case"] == "Unconstrained" and rec["strategy"] == "WaterFill"
    w = rec["precoder_w"]
    mat = (np.array(w["real"]) + 1j * np.array(w["imag"])).reshape(w["shape"])
    assert np.array_equal(mat, out.precoder.matrix_w)
    assert rec["config"]["design"]["n_streams"] == 2
    assert "wall_time_s" not in rec
    assert rec["timestamp"].endswith("Z")


def test_design_record_reference_setup_meets_threshold():
    _, rec = run_design(parse_config({"gamma_th_list": [2.0]}), seed=0)
    assert rec["achieved_gamma"] >= 2.0 - 1e-6 and rec["case"] == "Interior"


def test_design_is_byte_identical():
    cfg = small(gamma_th_list=[1.0])
    assert dumps(run_design(cfg, 3)[1]) == dumps(run_design(cfg, 3)[1])


def test_design_gamma_max_token_is_resolved():
    _, rec = run_design(small(gamma_th_list=["gamma_max"]), seed=1)
    assert rec["gamma_th_request"] == "gamma_max"
    assert rec["gamma_th"] == rec["gamma_max"] and rec["case"] == "BoundaryMax"


def test_design_infeasible_raises():
    with pytest.raises(InfeasiblePrivacy):
        run_design(small(gamma_th_list=[1e6]), seed=1)


def test_timing_adds_wall_time(monkeypatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
    _, rec = run_design(small(gamma_th_list=[0.0]), seed=1, timing=True)
    assert rec["wall_time_s"] >= 0 and rec["timestamp"] == "2023-11-14T22:13:20Z"


def test_sweep_single_trial_has_zero_std():
    res = run_sweep(small(trials=1, gamma_th_list=[0.0, 1.0]))
    assert res.columns == SWEEP_COLUMNS
    assert all(r[4] == 0.0 for r in res.rows)
    assert len(res.rows) == 2 * 4


def test_sweep_gamma_zero_is_waterfilling_mean():
    cfg = small(trials=4, gamma_th_list=[0.0])
    from daor.harness import _channel
    dcfg = cfg.design_config(10.0, 0.0)
    ref = np.mean([achievable_rate(_channel(cfg, i), waterfill_precoder(_channel(cfg, i), dcfg), 0.1)
                   for i in range(4)])
    assert run_sweep(cfg).value(gamma_th=0.0, metric="rate_bits") == pytest.approx(ref, rel=1e-12)


def test_sweep_counts_infeasible_and_excludes_them():
    res = run_sweep(small(trials=3, gamma_th_list=[1e6]))
    row = res.lookup(metric="rate_bits")[0]
    assert row["infeasible"] == 3 and math.isnan(row["mean"])
    assert math.isfinite(res.value(metric="gamma_max"))
    csv_text = res.to_csv()
    assert csv_text.splitlines()[0] == ",".join(SWEEP_COLUMNS)
    assert json.loads(dumps(result_record(small(), "sweep", res)))["rows"][0]["mean"] is None


def test_sweep_worker_count_does_not_change_output():
    cfg = small(trials=4, gamma_th_list=[0.5, "gamma_max"], snr_db_list=[0.0, 10.0])
    assert run_sweep(cfg, workers=1).to_csv() == run_sweep(cfg, workers=2).to_csv()


def test_beampattern_rows_and_markers():
    out, pat, verdict, rows = run_beampattern(parse_config({"gamma_th_list": [2.0], "grid_step": 0.5}), seed=2)
    markers = {r[2]: r for r in rows if r[2]}
    assert set(markers) == {"phi", "phi_hat"}
    assert len(rows) == 361 + 2
    diff = markers["phi_hat"][1] - markers["phi"][1]
    assert diff == pytest.approx(10 * math.log10(out.achieved_gamma), abs=1e-9)
    assert max(r[1] for r in rows[:-2]) == 0.0
    assert isinstance(verdict, Verdict)


def test_beampattern_gamma_max_is_fake_dominant():
    _, _, verdict, _ = run_beampattern(parse_config({"gamma_th_list": ["gamma_max"]}), seed=0)
    assert verdict is Verdict.FAKE_DOMINANT


def test_compare_rows():
    res = run_compare(parse_config({"trials": 2, "q_list": [1, 10]}))
    assert res.value(strategy="OS", metric="solver_calls") <= 1820
    assert res.value(strategy="SS-10", metric="solver_calls") == 10
    assert res.value(strategy="SS-10", metric="call_reduction") == pytest.approx(1 - 10 / 1820)
    assert res.value(strategy="SS-10", metric="rate_bits") <= res.value(strategy="OS", metric="rate_bits") + 1e-9


def test_bounds_rows():
    res = run_bounds(small(trials=3, snr_db_list=[0.0, 20.0]))
    assert res.value(snr_db=20.0, metric="gamma_max") > res.value(snr_db=0.0, metric="gamma_max")
    assert res.value(snr_db=0.0, metric="gamma_min") < 1 < res.value(snr_db=0.0, metric="gamma_max")
    rows = list(csv.reader(io.StringIO(res.to_csv())))
    assert rows[0] == ["snr_db", "metric", "mean", "std", "trials"] and len(rows) == 9
