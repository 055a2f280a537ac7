"""Seeded Monte Carlo runs and their CSV/JSON records.

Trial ``i`` of every command draws its channel with seed
``mix_seed(master_seed, i)``, so the same draws are shared by all SNR and
threshold cells of a run. Trials are mapped over a process pool in index
order and reduced afterwards, so output never depends on the worker count.

Output columns (schema version 1):

- sweep: ``snr_db, gamma_th, metric, mean, std, trials, infeasible``
- compare: ``snr_db, strategy, metric, mean, std, trials, infeasible``
- bounds: ``snr_db, metric, mean, std, trials``
- beampattern: ``theta_deg, power_db, marker``

Standard deviations are population values (``ddof=0``). Rate-type metrics
average only feasible trials; ``infeasible`` counts the rest. Wall times are
random by nature and only appear when ``timing`` is requested.
"""

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Dict, List, Optional

import numpy as np

from .channel import mix_seed, sample_channel, steering_vector
from .config import GAMMA_MAX, SCHEMA_VERSION, ExperimentConfig
from .design import (DesignOutcome, boundary_precoder, build_quadratic_forms,
                     complexity_report, design_os, design_ss, waterfill_precoder)
from .errors import InfeasiblePrivacy
from .metrics import achievable_rate, beampattern, covariance, dominant_direction

SWEEP_COLUMNS = ("snr_db", "gamma_th", "metric", "mean", "std", "trials", "infeasible")
COMPARE_COLUMNS = ("snr_db", "strategy", "metric", "mean", "std", "trials", "infeasible")
BOUNDS_COLUMNS = ("snr_db", "metric", "mean", "std", "trials")
BEAMPATTERN_COLUMNS = ("theta_deg", "power_db", "marker")


@dataclass(frozen=True)
class SweepResult:
    columns: tuple
    rows: List[tuple]

    def to_csv(self):
        return rows_to_csv(self.columns, self.rows)

    def lookup(self, **keys):
        """Rows whose named columns equal the given values, as dicts."""
        out = []
        for row in self.rows:
            rec = dict(zip(self.columns, row))
            if all(rec[k] == v for k, v in keys.items()):
                out.append(rec)
        return out

    def value(self, **keys):
        match = self.lookup(**keys)
        if len(match) != 1:
            raise KeyError(f"{len(match)} rows match {keys}")
        return match[0]["mean"]


def _fmt(v):
    if isinstance(v, float):
        return "" if not math.isfinite(v) else repr(v)
    return str(v)


def rows_to_csv(columns, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def timestamp(timing=False):
    """ISO-8601 UTC stamp; ``SOURCE_DATE_EPOCH`` wins, the clock is read only when timing."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        secs = int(epoch)
    elif timing:
        secs = int(time.time())
    else:
        secs = 0
    return datetime.fromtimestamp(secs, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def make_record(cfg: ExperimentConfig, command, timing, **payload):
    rec = {"schema_version": SCHEMA_VERSION, "command": command,
           "timestamp": timestamp(timing), "config": cfg.echo()}
    rec.update(payload)
    return rec


def dumps(record):
    return json.dumps(record, indent=2, sort_keys=False, allow_nan=False) + "\n"


def _stats(values):
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        return math.nan, math.nan
    return float(arr.mean()), float(arr.std())


def _pool_map(fn, items, workers):
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    chunk = max(1, len(items) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=chunk))


def _channel(cfg: ExperimentConfig, trial):
    return sample_channel(cfg.channel_config(), mix_seed(cfg.master_seed, trial))


def _resolve_gamma(token, quadratics):
    return quadratics.lambda_max if token == GAMMA_MAX else float(token)


def _run_one(h, cfg: ExperimentConfig, snr_db, token, strategy, q=None) -> Optional[DesignOutcome]:
    """One design; ``None`` when the threshold is out of reach for this draw."""
    if token == GAMMA_MAX:
        gamma = build_quadratic_forms(h, cfg.design_config(snr_db, 0.0)).lambda_max
    else:
        gamma = float(token)
    dcfg = cfg.design_config(snr_db, gamma, q)
    try:
        if strategy == "ss":
            return design_ss(h, dcfg, q)
        return design_os(h, dcfg)
    except InfeasiblePrivacy:
        return None


# single design ---------------------------------------------------------------

def _precoder_json(w):
    return {"shape": list(w.shape),
            "real": w.real.ravel(order="C").tolist(),
            "imag": w.imag.ravel(order="C").tolist()}


def run_design(cfg: ExperimentConfig, seed=None, timing=False):
    """Design for trial 0 of ``seed`` at the first SNR and threshold of the config.

    Returns ``(outcome, record)``. Raises :class:`InfeasiblePrivacy` when the
    requested threshold exceeds the draw's largest attainable DAOR.
    """
    if seed is not None:
        cfg = cfg.model_copy(update={"master_seed": int(seed)})
    h = _channel(cfg, 0)
    snr, token = cfg.snr_db_list[0], cfg.gamma_th_list[0]
    quad = build_quadratic_forms(h, cfg.design_config(snr, 0.0))
    gamma_th = _resolve_gamma(token, quad)
    dcfg = cfg.design_config(snr, gamma_th)
    out = design_ss(h, dcfg) if cfg.strategy == "ss" else design_os(h, dcfg)
    payload = {
        "master_seed": cfg.master_seed,
        "channel_seed": h.seed,
        "snr_db": snr,
        "noise_n0": dcfg.noise_n0,
        "gamma_th_request": token,
        "gamma_th": gamma_th,
        "case": out.case_label.value,
        "strategy": out.strategy.value,
        "achieved_gamma": out.achieved_gamma,
        "gamma_min": out.quadratics.lambda_min,
        "gamma_max": out.quadratics.lambda_max,
        "rate_bits": out.rate_bits,
        "chosen_indices": list(out.chosen_indices),
        "solver_calls": out.solver_calls,
        "precoder_w": _precoder_json(out.precoder.matrix_w),
    }
    if timing:
        payload["wall_time_s"] = out.wall_time
    return out, make_record(cfg, "design", timing, **payload)


# sweep -----------------------------------------------------------------------

_SWEEP_METRICS = ("rate_bits", "achieved_gamma", "gamma_max", "solver_calls")


def _sweep_trial(args):
    cfg, trial = args
    h = _channel(cfg, trial)
    cells = {}
    for snr in cfg.snr_db_list:
        gmax = build_quadratic_forms(h, cfg.design_config(snr, 0.0)).lambda_max
        for token in cfg.gamma_th_list:
            out = _run_one(h, cfg, snr, token, cfg.strategy)
            if out is None:
                cells[(snr, token)] = {"gamma_max": gmax}
            else:
                cells[(snr, token)] = {"rate_bits": out.rate_bits, "achieved_gamma": out.achieved_gamma,
                                       "gamma_max": gmax, "solver_calls": float(out.solver_calls),
                                       "wall_time_s": out.wall_time}
    return cells


def run_sweep(cfg: ExperimentConfig, workers=None, timing=False) -> SweepResult:
    """Cartesian sweep over SNR and threshold lists with ``cfg.trials`` draws per cell."""
    workers = cfg.workers if workers is None else workers
    per_trial = _pool_map(_sweep_trial, [(cfg, i) for i in range(cfg.trials)], workers)
    metrics = _SWEEP_METRICS + (("wall_time_s",) if timing else ())
    rows = []
    for snr in cfg.snr_db_list:
        for token in cfg.gamma_th_list:
            cells = [t[(snr, token)] for t in per_trial]
            infeasible = sum("rate_bits" not in c for c in cells)
            for m in metrics:
                mean, std = _stats([c[m] for c in cells if m in c])
                rows.append((snr, token if token == GAMMA_MAX else float(token), m, mean, std,
                             cfg.trials, infeasible))
    return SweepResult(SWEEP_COLUMNS, rows)


# beampattern -----------------------------------------------------------------

def run_beampattern(cfg: ExperimentConfig, seed=None, timing=False):
    """Design as :func:`run_design`, then return the receive Bartlett pattern.

    Returns ``(outcome, pattern, verdict, rows)``; the rows hold the grid
    followed by one marker row each for ``phi`` and ``phi_hat``, evaluated
    at the exact angles.
    """
    out, _ = run_design(cfg, seed, timing)
    if seed is not None:
        cfg = cfg.model_copy(update={"master_seed": int(seed)})
    h = _channel(cfg, 0)
    rx = h.config.rx_geometry
    r = covariance(h, out.precoder, cfg.noise_n0(cfg.snr_db_list[0]))
    pat = beampattern(r, rx, cfg.grid_step)
    phi, phi_hat = cfg.channel.true_angle_phi, cfg.design.phi_hat
    a_peak = steering_vector(pat.peak_angle, rx)
    ref = float(np.real(np.vdot(a_peak, r @ a_peak)))
    rows = [(float(t), float(p), "") for t, p in zip(pat.grid, pat.power_db)]
    for name, ang in (("phi", phi), ("phi_hat", phi_hat)):
        a = steering_vector(ang, rx)
        val = float(np.real(np.vdot(a, r @ a)))
        rows.append((float(ang), 10.0 * math.log10(val / ref), name))
    verdict = dominant_direction(pat, phi, phi_hat)
    return out, pat, verdict, rows


# compare ---------------------------------------------------------------------

def _compare_trial(args):
    cfg, trial = args
    h = _channel(cfg, trial)
    token = cfg.gamma_th_list[0]
    res = {}
    for snr in cfg.snr_db_list:
        runs = [("OS", "os", None)] + [(f"SS-{q}", "ss", q) for q in cfg.q_list]
        for label, strat, q in runs:
            out = _run_one(h, cfg, snr, token, strat, q)
            res[(snr, label)] = None if out is None else (
                out.rate_bits, float(out.solver_calls), out.wall_time)
    return res


def run_compare(cfg: ExperimentConfig, workers=None, timing=False) -> SweepResult:
    """OS against SS-Q for every ``q`` in ``cfg.q_list`` at the first threshold."""
    workers = cfg.workers if workers is None else workers
    per_trial = _pool_map(_compare_trial, [(cfg, i) for i in range(cfg.trials)], workers)
    n_t, n_s = cfg.channel.n_t, cfg.design.n_streams
    total = math.comb(n_t, n_s)
    rows = []
    for snr in cfg.snr_db_list:
        labels = ["OS"] + [f"SS-{q}" for q in cfg.q_list]
        os_rate = None
        for label, q in zip(labels, [None] + list(cfg.q_list)):
            vals = [t[(snr, label)] for t in per_trial]
            ok = [v for v in vals if v is not None]
            infeasible = len(vals) - len(ok)
            rate = _stats([v[0] for v in ok])
            calls = _stats([v[1] for v in ok])
            rows.append((snr, label, "rate_bits", *rate, cfg.trials, infeasible))
            rows.append((snr, label, "solver_calls", *calls, cfg.trials, infeasible))
            if timing:
                rows.append((snr, label, "wall_time_s", *_stats([v[2] for v in ok]), cfg.trials, infeasible))
            if label == "OS":
                os_rate = rate[0]
                reduction = 0.0
            else:
                reduction = complexity_report(n_t, n_s, min(q, total))[2]
                rows.append((snr, label, "rate_ratio_to_os", rate[0] / os_rate if os_rate else math.nan,
                             0.0, cfg.trials, infeasible))
            rows.append((snr, label, "call_reduction", reduction, 0.0, cfg.trials, infeasible))
    return SweepResult(COMPARE_COLUMNS, rows)


# bounds ----------------------------------------------------------------------

_BOUNDS_METRICS = ("gamma_min", "gamma_max", "boundary_rate_bits", "capacity_bits")


def _bounds_trial(args):
    cfg, trial = args
    h = _channel(cfg, trial)
    res = {}
    for snr in cfg.snr_db_list:
        dcfg = cfg.design_config(snr, 0.0)
        q = build_quadratic_forms(h, dcfg)
        w_max = boundary_precoder(q.t_max, dcfg.power_p, dcfg.n_streams)
        res[snr] = (q.lambda_min, q.lambda_max, achievable_rate(h, w_max, dcfg.noise_n0),
                    achievable_rate(h, waterfill_precoder(h, dcfg), dcfg.noise_n0))
    return res


def run_bounds(cfg: ExperimentConfig, workers=None) -> SweepResult:
    """Per SNR: DAOR range, rate of the maximum-DAOR boundary precoder and capacity."""
    workers = cfg.workers if workers is None else workers
    per_trial = _pool_map(_bounds_trial, [(cfg, i) for i in range(cfg.trials)], workers)
    rows = []
    for snr in cfg.snr_db_list:
        for k, m in enumerate(_BOUNDS_METRICS):
            rows.append((snr, m, *_stats([t[snr][k] for t in per_trial]), cfg.trials))
    return SweepResult(BOUNDS_COLUMNS, rows)


def result_record(cfg, command, result: SweepResult, timing=False) -> Dict:
    rows = [dict(zip(result.columns, [None if isinstance(v, float) and not math.isfinite(v) else v
                                      for v in row])) for row in result.rows]
    return make_record(cfg, command, timing, columns=list(result.columns), rows=rows)
