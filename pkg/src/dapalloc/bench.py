"""Monte-Carlo experiment driver and statistics.

Runs the allocation strategies over many random user drops, collects
per-drop results, computes empirical survival functions (CCDF) and
quartile summaries, and serializes everything as diff-able CSV (17
significant digits) plus a JSON summary.

Determinism: a drop is a pure function of (scenario seed, drop id), and
results are collected in drop order, so the output is byte-identical
for any worker count.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial
from typing import Optional, Sequence, Union

import numpy as np

from dapalloc.allocator import ALGORITHMS
from dapalloc.dapa import SolverError
from dapalloc.metrics import Allocation, SystemConfig, UeSet, evaluate
from dapalloc.numerics import ConvergenceError
from dapalloc.pa_model import RAPP, PaModel
from dapalloc.scenario import ScenarioConfig, drop_ues, two_ue_grid

__all__ = [
    "DropResult",
    "CcdfSeries",
    "run_montecarlo",
    "evaluate_rapp_mode",
    "evaluate_icsi_mode",
    "ccdf",
    "sweep_homogeneous",
    "grid_2ue",
    "summarize",
    "write_drop_results_csv",
    "write_table_csv",
    "write_summary_json",
]

logger = logging.getLogger(__name__)

DEFAULT_ALGORITHMS = ("DAPA-FPDA", "DAPA-E", "REF-FPDA", "REF-E")


@dataclass(frozen=True)
class DropResult:
    """One (drop, strategy) outcome.

    ``error`` is None for successful solves; failed solves carry the
    error message with NaN metrics so a run never dies on one drop.
    """

    drop_id: int
    algorithm: str
    sum_rate: float
    total_power_p: float
    ibo_db: float
    omega_max: float
    rates: np.ndarray
    error: Optional[str] = None

    def __post_init__(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm label {self.algorithm!r}")


@dataclass(frozen=True)
class CcdfSeries:
    """Empirical survival function: P(X > value) on the sample grid."""

    values: np.ndarray
    probabilities: np.ndarray
    label: str = ""


def _system_config(sc: ScenarioConfig, pa: Optional[PaModel] = None) -> SystemConfig:
    return SystemConfig(
        m_antennas=sc.m_antennas,
        n_users=sc.n_users,
        p_max=sc.p_max,
        bandwidth_hz=sc.bandwidth_hz,
        pa=pa if pa is not None else PaModel(),
    )


def _evaluate_to_result(
    drop_id: int,
    label: str,
    cfg: SystemConfig,
    ues: UeSet,
    alloc: Allocation,
    precoder: str = "zf",
) -> DropResult:
    report = evaluate(cfg, ues, alloc, precoder=precoder)
    return DropResult(
        drop_id=drop_id,
        algorithm=label,
        sum_rate=report.sum_rate,
        total_power_p=alloc.total_power_p,
        ibo_db=report.ibo_db,
        omega_max=float(np.max(alloc.omega)),
        rates=report.rate,
    )


def _failure_result(drop_id: int, label: str, n_users: int, exc: Exception) -> DropResult:
    logger.warning("drop %d, %s failed: %s", drop_id, label, exc)
    return DropResult(
        drop_id=drop_id,
        algorithm=label,
        sum_rate=math.nan,
        total_power_p=math.nan,
        ibo_db=math.nan,
        omega_max=math.nan,
        rates=np.full(n_users, math.nan),
        error=str(exc),
    )


def _solve_drop(
    drop_id: int,
    sc: ScenarioConfig,
    algorithms: Sequence[str],
    delta: Optional[float],
) -> list[tuple[str, Optional[Allocation], Optional[str]]]:
    """Allocations of every strategy on one drop (errors captured)."""
    ues = drop_ues(sc, drop_id)
    cfg = _system_config(sc)
    out: list[tuple[str, Optional[Allocation], Optional[str]]] = []
    for label in algorithms:
        try:
            alloc = ALGORITHMS[label](ues, cfg, delta)
            out.append((label, alloc, None))
        except (SolverError, ConvergenceError, ValueError) as exc:
            out.append((label, None, str(exc)))
    return out


def _run_drops(
    sc: ScenarioConfig,
    algorithms: Sequence[str],
    n_drops: int,
    delta: Optional[float],
    workers: int,
) -> list[list[tuple[str, Optional[Allocation], Optional[str]]]]:
    """Per-drop allocation lists, in drop order regardless of workers."""
    for label in algorithms:
        if label not in ALGORITHMS:
            raise ValueError(f"unknown algorithm label {label!r}")
    if n_drops < 1:
        raise ValueError("n_drops must be >= 1")
    task = partial(_solve_drop, sc=sc, algorithms=tuple(algorithms), delta=delta)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(task, range(n_drops)))
    return [task(drop_id) for drop_id in range(n_drops)]


def run_montecarlo(
    sc: ScenarioConfig,
    algorithms: Sequence[str] = DEFAULT_ALGORITHMS,
    n_drops: int = 1000,
    delta: Optional[float] = None,
    workers: int = 1,
) -> list[DropResult]:
    """Random drops -> allocations -> ideal-clipper evaluation.

    Returns n_drops * len(algorithms) results ordered by (drop,
    algorithm).  Individual solver failures are logged and recorded as
    NaN results; the run continues.
    """
    cfg = _system_config(sc)
    results: list[DropResult] = []
    for drop_id, solved in enumerate(
        _run_drops(sc, algorithms, n_drops, delta, workers)
    ):
        ues = drop_ues(sc, drop_id)
        for label, alloc, err in solved:
            if alloc is None:
                results.append(_failure_result(drop_id, label, sc.n_users, RuntimeError(err)))
            else:
                results.append(_evaluate_to_result(drop_id, label, cfg, ues, alloc))
    return results


def evaluate_rapp_mode(
    sc: ScenarioConfig,
    n_drops: int,
    algorithms: Sequence[str] = DEFAULT_ALGORITHMS,
    smoothness_p: float = 2.0,
    delta: Optional[float] = None,
    workers: int = 1,
) -> tuple[list[DropResult], list[DropResult]]:
    """Optimize for the ideal clipper, evaluate under both amplifier laws.

    Returns (clipper-evaluated, smooth-amplifier-evaluated) result lists
    over identical allocations, so any rate difference is purely the
    amplifier model.
    """
    cfg_soft = _system_config(sc)
    cfg_rapp = _system_config(sc, PaModel(kind=RAPP, smoothness_p=smoothness_p))
    soft_results: list[DropResult] = []
    rapp_results: list[DropResult] = []
    for drop_id, solved in enumerate(
        _run_drops(sc, algorithms, n_drops, delta, workers)
    ):
        ues = drop_ues(sc, drop_id)
        for label, alloc, err in solved:
            if alloc is None:
                failure = _failure_result(drop_id, label, sc.n_users, RuntimeError(err))
                soft_results.append(failure)
                rapp_results.append(failure)
            else:
                soft_results.append(_evaluate_to_result(drop_id, label, cfg_soft, ues, alloc))
                rapp_results.append(_evaluate_to_result(drop_id, label, cfg_rapp, ues, alloc))
    return soft_results, rapp_results


def evaluate_icsi_mode(
    sc: ScenarioConfig,
    n_drops: int,
    delta_policy: Union[float, str] = 0.1,
    algorithms: Sequence[str] = DEFAULT_ALGORITHMS,
    delta: Optional[float] = None,
    workers: int = 1,
) -> tuple[list[DropResult], list[DropResult]]:
    """Optimize with perfect channel knowledge, evaluate with and
    without channel-estimation error.

    ``delta_policy`` is either a uniform error fraction in [0, 1) or
    the string ``"estimated"`` to use each drop's per-user fractions
    derived from the scenario's pilot parameters.
    """
    if isinstance(delta_policy, str):
        if delta_policy != "estimated":
            raise ValueError("delta_policy must be a float or 'estimated'")
        if sc.pilot_len is None:
            raise ValueError("'estimated' policy requires pilot parameters in the scenario")
    elif not 0 <= float(delta_policy) < 1:
        raise ValueError("uniform csi error fraction must lie in [0, 1)")

    cfg = _system_config(sc)
    perfect: list[DropResult] = []
    imperfect: list[DropResult] = []
    for drop_id, solved in enumerate(
        _run_drops(sc, algorithms, n_drops, delta, workers)
    ):
        ues = drop_ues(sc, drop_id)
        if isinstance(delta_policy, str):
            csi = ues.csi_delta
        else:
            csi = np.full(sc.n_users, float(delta_policy))
        ues_icsi = UeSet(beta=ues.beta, noise_w=ues.noise_w, csi_delta=csi)
        for label, alloc, err in solved:
            if alloc is None:
                failure = _failure_result(drop_id, label, sc.n_users, RuntimeError(err))
                perfect.append(failure)
                imperfect.append(failure)
            else:
                perfect.append(_evaluate_to_result(drop_id, label, cfg, ues, alloc))
                imperfect.append(
                    _evaluate_to_result(drop_id, label, cfg, ues_icsi, alloc, "zf_icsi")
                )
    return perfect, imperfect


def ccdf(values: Sequence[float], label: str = "") -> CcdfSeries:
    """Empirical survival function of a sample.

    Sorted ascending; the probability attached to the i-th sorted value
    is the fraction of samples strictly above it, stepping from
    1 - 1/n down to 0.
    """
    arr = np.sort(np.asarray(values, dtype=np.float64))
    if arr.size == 0:
        raise ValueError("ccdf needs at least one value")
    probs = 1.0 - np.arange(1, arr.size + 1) / arr.size
    return CcdfSeries(values=arr, probabilities=probs, label=label)


def sweep_homogeneous(
    sc: ScenarioConfig,
    pl_db_grid: Sequence[float],
    algorithms: Sequence[str] = DEFAULT_ALGORITHMS,
    delta: Optional[float] = None,
) -> list[dict]:
    """All-users-equal path-loss sweep: one row per grid value.

    Each row holds the path loss plus every strategy's sum rate and
    back-off at that path loss.
    """
    from dapalloc.scenario import homogeneous_sweep

    cfg = _system_config(sc)
    rows = []
    for pl_db, ues in zip(pl_db_grid, homogeneous_sweep(pl_db_grid, sc)):
        row: dict = {"pl_db": float(pl_db)}
        for label in algorithms:
            try:
                alloc = ALGORITHMS[label](ues, cfg, delta)
                report = evaluate(cfg, ues, alloc, precoder="zf")
                row[f"{label}_sum_rate"] = report.sum_rate
                row[f"{label}_ibo_db"] = report.ibo_db
            except (SolverError, ConvergenceError) as exc:
                logger.warning("sweep at %s dB, %s failed: %s", pl_db, label, exc)
                row[f"{label}_sum_rate"] = math.nan
                row[f"{label}_ibo_db"] = math.nan
        rows.append(row)
    return rows


def _grid_cell(
    idx: tuple[int, int],
    sc: ScenarioConfig,
    grid_db: np.ndarray,
    delta: Optional[float],
) -> dict:
    from dapalloc.allocator import alternating_optimize, ref_e

    i, j = idx
    beta = np.array([10.0 ** (-grid_db[i] / 10.0), 10.0 ** (-grid_db[j] / 10.0)])
    ues = UeSet(beta=beta, noise_w=np.full(2, sc.noise_w))
    cfg = _system_config(sc)
    row: dict = {"pl1_db": float(grid_db[i]), "pl2_db": float(grid_db[j])}
    try:
        alloc, _ = alternating_optimize(ues, cfg, delta)
        report = evaluate(cfg, ues, alloc, precoder="zf")
        ref_report = evaluate(cfg, ues, ref_e(ues, cfg), precoder="zf")
        row["sum_rate_ratio_vs_ref_e"] = report.sum_rate / ref_report.sum_rate
        row["omega1"] = float(alloc.omega[0])
        row["ibo_db"] = report.ibo_db
    except (SolverError, ConvergenceError) as exc:
        logger.warning("2-user cell (%d, %d) failed: %s", i, j, exc)
        row["sum_rate_ratio_vs_ref_e"] = math.nan
        row["omega1"] = math.nan
        row["ibo_db"] = math.nan
    return row


def grid_2ue(
    sc: ScenarioConfig,
    grid: tuple[np.ndarray, list[list[UeSet]]],
    delta: Optional[float] = None,
    workers: int = 1,
) -> list[dict]:
    """Two-user path-loss grid: optimality gain, split, and back-off.

    ``grid`` is the (values, cells) pair from
    :func:`dapalloc.scenario.two_ue_grid`.  Each record compares the
    alternating optimizer against the fixed-back-off equal-split
    baseline on one (path loss 1, path loss 2) cell.
    """
    grid_db, cells = grid
    n = len(grid_db)
    indices = [(i, j) for i in range(n) for j in range(n)]
    task = partial(_grid_cell, sc=sc, grid_db=np.asarray(grid_db), delta=delta)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(task, indices))
    return [task(idx) for idx in indices]


def _quartiles(values: np.ndarray) -> dict:
    clean = values[np.isfinite(values)]
    if clean.size == 0:
        return {"n": 0, "median": math.nan, "q1": math.nan, "q3": math.nan}
    return {
        "n": int(clean.size),
        "median": float(np.median(clean)),
        "q1": float(np.percentile(clean, 25)),
        "q3": float(np.percentile(clean, 75)),
    }


def summarize(results: Sequence[DropResult]) -> dict:
    """Per-strategy medians/quartiles plus per-drop ratios vs REF-E."""
    labels = sorted({r.algorithm for r in results})
    summary: dict = {"algorithms": {}}
    by_label = {
        label: sorted(
            (r for r in results if r.algorithm == label), key=lambda r: r.drop_id
        )
        for label in labels
    }
    for label, rows in by_label.items():
        summary["algorithms"][label] = {
            "sum_rate": _quartiles(np.array([r.sum_rate for r in rows])),
            "ibo_db": _quartiles(np.array([r.ibo_db for r in rows])),
            "omega_max": _quartiles(np.array([r.omega_max for r in rows])),
            "failures": sum(1 for r in rows if r.error is not None),
        }
    if "REF-E" in by_label:
        ref = {r.drop_id: r.sum_rate for r in by_label["REF-E"]}
        for label, rows in by_label.items():
            if label == "REF-E":
                continue
            ratios = np.array(
                [
                    r.sum_rate / ref[r.drop_id]
                    for r in rows
                    if r.drop_id in ref and math.isfinite(r.sum_rate)
                ]
            )
            summary["algorithms"][label]["sum_rate_ratio_vs_ref_e"] = _quartiles(ratios)
    return summary


def write_drop_results_csv(results: Sequence[DropResult], path: str) -> None:
    """Per-drop CSV: metrics plus one rate column per user."""
    if not results:
        raise ValueError("no results to write")
    n_users = results[0].rates.size
    rate_cols = ",".join(f"rate_{i}" for i in range(n_users))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            f"drop_id,algorithm,sum_rate,total_power_p,ibo_db,omega_max,{rate_cols}\n"
        )
        for r in results:
            rates = ",".join(f"{v:.17g}" for v in r.rates)
            fh.write(
                f"{r.drop_id},{r.algorithm},{r.sum_rate:.17g},"
                f"{r.total_power_p:.17g},{r.ibo_db:.17g},{r.omega_max:.17g},{rates}\n"
            )


def write_table_csv(rows: Sequence[dict], path: str) -> None:
    """Write a list of uniform dict rows as CSV (17 significant digits)."""
    if not rows:
        raise ValueError("no rows to write")
    cols = list(rows[0].keys())
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(cols) + "\n")
        for row in rows:
            cells = []
            for c in cols:
                v = row[c]
                cells.append(f"{v:.17g}" if isinstance(v, float) else str(v))
            fh.write(",".join(cells) + "\n")


def write_summary_json(summary: dict, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")
