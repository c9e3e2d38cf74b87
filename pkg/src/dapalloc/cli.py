"""Command-line front end.

Subcommands
-----------
solve
    One user set from a JSON config -> allocation JSON on stdout.
sweep-homogeneous
    Equal-path-loss sweep; one CSV per strategy plus a summary JSON.
grid-2ue
    Two-user path-loss grid; CSV of per-cell ratio/split/back-off.
montecarlo
    Random-drop benchmark (optionally re-evaluated under the smooth
    amplifier law or under channel-estimation error); one CSV per
    strategy plus a summary JSON.
linklevel
    Time-domain OFDM simulation; measured-vs-analytic SDR CSV.
hessian-check
    Curvature probes of the two-user sum rate; CSV plus a summary
    locating an indefinite point.
validate
    Fast self-contained invariant battery; PASS/FAIL per check.

All commands exit 0 on success.  Any failure prints a single-line
machine-readable JSON object ``{"error": {...}}`` on stdout and exits
nonzero.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import os
import sys
from typing import Optional

import numpy as np

__all__ = ["main"]

logger = logging.getLogger(__name__)

_EXIT_ERROR = 2


def _load_config(path: Optional[str]) -> dict:
    if path is None:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise ValueError("config file must contain a JSON object")
    return cfg


def _scenario_from(cfg: dict, seed: Optional[int]):
    from dapalloc.scenario import ScenarioConfig

    sc = ScenarioConfig.from_dict(cfg.get("scenario", {}))
    if seed is not None:
        sc = dataclasses.replace(sc, seed=seed)
    return sc


def _out_path(out_dir: str, name: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    return os.path.join(out_dir, name)


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# solve


def _ue_set_from(cfg: dict):
    from dapalloc.metrics import UeSet

    if "beta" in cfg and "pl_db" in cfg:
        raise ValueError("give either 'beta' or 'pl_db', not both")
    if "beta" in cfg:
        beta = np.asarray(cfg["beta"], dtype=np.float64)
    elif "pl_db" in cfg:
        beta = 10.0 ** (-np.asarray(cfg["pl_db"], dtype=np.float64) / 10.0)
    else:
        raise ValueError("config needs a 'beta' or 'pl_db' array")
    if "noise_w" not in cfg:
        raise ValueError("config needs 'noise_w' (scalar watts or per-user array)")
    return UeSet(beta=beta, noise_w=np.asarray(cfg["noise_w"], dtype=np.float64))


def _cmd_solve(args: argparse.Namespace) -> int:
    from dapalloc.allocator import ALGORITHMS
    from dapalloc.metrics import SystemConfig, evaluate

    cfg = _load_config(args.config)
    if args.config is None:
        raise ValueError("solve requires --config")
    ues = _ue_set_from(cfg)
    sys_cfg = SystemConfig(
        m_antennas=int(cfg["m_antennas"]),
        n_users=ues.beta.size,
        p_max=float(cfg["p_max"]),
        bandwidth_hz=float(cfg["bandwidth_hz"]),
    )
    label = cfg.get("algorithm", "DAPA-FPDA")
    if label not in ALGORITHMS:
        raise ValueError(f"unknown algorithm label {label!r}")
    alloc = ALGORITHMS[label](ues, sys_cfg, args.delta)
    report = evaluate(sys_cfg, ues, alloc, precoder="zf")
    payload = {
        "algorithm": label,
        "total_power_p": alloc.total_power_p,
        "omega": alloc.omega.tolist(),
        "per_user_power": alloc.per_user_power.tolist(),
        "ibo_db": report.ibo_db,
        "sindr": report.sindr.tolist(),
        "rates": report.rate.tolist(),
        "sum_rate": report.sum_rate,
    }
    print(json.dumps(payload, indent=2, sort_keys=True))
    if args.out is not None:
        _write_json(_out_path(args.out, "solve.json"), payload)
    return 0


# ---------------------------------------------------------------------------
# sweep-homogeneous


def _cmd_sweep_homogeneous(args: argparse.Namespace) -> int:
    from dapalloc.bench import DEFAULT_ALGORITHMS, sweep_homogeneous, write_table_csv

    cfg = _load_config(args.config)
    sc = _scenario_from(cfg, args.seed)
    grid = cfg.get("pl_db_grid")
    if grid is None:
        grid = np.arange(80.0, 130.0 + 1e-9, 2.5).tolist()
    algorithms = tuple(cfg.get("algorithms", DEFAULT_ALGORITHMS))
    rows = sweep_homogeneous(sc, grid, algorithms, args.delta)
    for label in algorithms:
        per_alg = [
            {
                "pl_db": row["pl_db"],
                "sum_rate": row[f"{label}_sum_rate"],
                "ibo_db": row[f"{label}_ibo_db"],
            }
            for row in rows
        ]
        write_table_csv(per_alg, _out_path(args.out, f"sweep_homogeneous_{label}.csv"))
    _write_json(
        _out_path(args.out, "sweep_homogeneous_summary.json"),
        {"scenario": sc.to_dict(), "pl_db_grid": list(map(float, grid)),
         "algorithms": list(algorithms)},
    )
    print(f"wrote {len(algorithms)} CSV file(s) to {args.out}")
    return 0


# ---------------------------------------------------------------------------
# grid-2ue


def _cmd_grid_2ue(args: argparse.Namespace) -> int:
    from dapalloc.bench import grid_2ue, write_table_csv
    from dapalloc.scenario import two_ue_grid

    cfg = _load_config(args.config)
    sc = _scenario_from(cfg, args.seed)
    lo = float(cfg.get("pl_lo_db", 60.0))
    hi = float(cfg.get("pl_hi_db", 150.0))
    step = float(cfg.get("pl_step_db", 5.0))
    grid = two_ue_grid(lo, hi, step, sc)
    rows = grid_2ue(sc, grid, args.delta, args.workers)
    write_table_csv(rows, _out_path(args.out, "grid_2ue.csv"))
    _write_json(
        _out_path(args.out, "grid_2ue_summary.json"),
        {"scenario": sc.to_dict(), "pl_lo_db": lo, "pl_hi_db": hi,
         "pl_step_db": step, "n_cells": len(rows)},
    )
    print(f"wrote grid_2ue.csv ({len(rows)} cells) to {args.out}")
    return 0


# ---------------------------------------------------------------------------
# montecarlo


def _split_by_algorithm(results):
    labels = sorted({r.algorithm for r in results})
    return {label: [r for r in results if r.algorithm == label] for label in labels}


def _cmd_montecarlo(args: argparse.Namespace) -> int:
    from dapalloc import bench

    cfg = _load_config(args.config)
    sc = _scenario_from(cfg, args.seed)
    n_drops = int(cfg.get("n_drops", 1000))
    algorithms = tuple(cfg.get("algorithms", bench.DEFAULT_ALGORITHMS))
    mode = cfg.get("mode", "plain")

    if mode == "plain":
        results = bench.run_montecarlo(sc, algorithms, n_drops, args.delta, args.workers)
        paired: dict = {"montecarlo": results}
    elif mode == "rapp":
        soft, rapp = bench.evaluate_rapp_mode(
            sc, n_drops, algorithms,
            smoothness_p=float(cfg.get("smoothness_p", 2.0)),
            delta=args.delta, workers=args.workers,
        )
        paired = {"montecarlo": soft, "montecarlo_rapp": rapp}
    elif mode == "icsi":
        policy = cfg.get("csi_delta", 0.1)
        perfect, icsi = bench.evaluate_icsi_mode(
            sc, n_drops, policy, algorithms, args.delta, args.workers
        )
        paired = {"montecarlo": perfect, "montecarlo_icsi": icsi}
    else:
        raise ValueError(f"unknown mode {mode!r}; expected plain, rapp, or icsi")

    n_files = 0
    summary: dict = {"scenario": sc.to_dict(), "n_drops": n_drops, "mode": mode}
    for experiment, results in paired.items():
        for label, rows in _split_by_algorithm(results).items():
            bench.write_drop_results_csv(
                rows, _out_path(args.out, f"{experiment}_{label}.csv")
            )
            n_files += 1
        summary[experiment] = bench.summarize(results)
    bench.write_summary_json(summary, _out_path(args.out, "montecarlo_summary.json"))
    print(f"wrote {n_files} CSV file(s) and montecarlo_summary.json to {args.out}")
    return 0


# ---------------------------------------------------------------------------
# linklevel


def _cmd_linklevel(args: argparse.Namespace) -> int:
    from dapalloc.linklevel import LinkSimConfig, simulate_sdr, write_sdr_csv

    cfg = _load_config(args.config)
    params = dict(cfg.get("linklevel", cfg))
    params.pop("scenario", None)
    if "ibo_grid_db" in params:
        params["ibo_grid_db"] = tuple(float(v) for v in params["ibo_grid_db"])
    if args.seed is not None:
        params["seed"] = args.seed
    try:
        sim_cfg = LinkSimConfig(**params)
    except TypeError as exc:
        raise ValueError(f"bad linklevel config: {exc}") from exc
    points = simulate_sdr(sim_cfg)
    write_sdr_csv(points, _out_path(args.out, "linklevel.csv"))
    worst = max(abs(p.sdr_meas_db - p.sdr_analytic_db) for p in points)
    print(
        f"wrote linklevel.csv ({len(points)} points) to {args.out}; "
        f"worst |measured - analytic| = {worst:.3f} dB"
    )
    return 0


# ---------------------------------------------------------------------------
# hessian-check


def _cmd_hessian_check(args: argparse.Namespace) -> int:
    from dapalloc.nonconvexity import (
        find_indefinite_point,
        probes_to_csv,
        reference_two_user_setup,
        scan_grid,
    )

    cfg = _load_config(args.config)
    n_points = int(cfg.get("n_points", 40))
    sys_cfg, ues = reference_two_user_setup()
    probes = scan_grid(sys_cfg, ues, n_points=n_points)
    probes_to_csv(probes, _out_path(args.out, "hessian_probes.csv"))
    witness = find_indefinite_point(sys_cfg, ues, n_points=n_points)
    summary: dict = {"n_probes": len(probes), "indefinite_found": witness is not None}
    if witness is not None:
        summary["witness"] = {
            "p1": witness.p1,
            "p2": witness.p2,
            "step": witness.step,
            "eigenvalues": list(witness.eigenvalues),
        }
    _write_json(_out_path(args.out, "hessian_summary.json"), summary)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


# ---------------------------------------------------------------------------
# validate


def _check(name: str, ok: bool, detail: str = "") -> bool:
    tag = "PASS" if ok else "FAIL"
    suffix = f": {detail}" if detail and not ok else ""
    print(f"{tag} {name}{suffix}")
    return ok


def _cmd_validate(args: argparse.Namespace) -> int:
    """Self-contained invariant battery (no third-party test deps)."""
    from dapalloc import (
        Allocation,
        SystemConfig,
        UeSet,
        WaterfillProblem,
        alternating_optimize,
        bussgang_gain_rapp,
        bussgang_gain_soft,
        distortion_coeff_rapp,
        distortion_coeff_soft,
        erfc,
        erfcx,
        evaluate,
        lambert_w0,
        lambert_w0_of_log,
        ref_e,
        root_bounds,
        solve_fpda,
        sum_rate_derivative,
    )
    from dapalloc.bench import ccdf
    from dapalloc.scenario import ScenarioConfig, drop_ues

    ok = True

    ok &= _check(
        "erfc anchor (x=1)",
        abs(erfc(1.0) - 0.15729920705028513) <= 1e-15,
    )
    xs = np.linspace(0.05, 6.0, 40)
    ok &= _check(
        "erfcx consistency (erfcx*exp(-x^2) == erfc)",
        bool(np.all(np.abs(erfcx(xs) * np.exp(-(xs**2)) - erfc(xs)) <= 1e-13)),
    )
    ok &= _check(
        "Lambert W anchor (W(1))",
        abs(lambert_w0(1.0) - 0.5671432904097838) <= 1e-14,
    )
    ws = lambert_w0(np.geomspace(1e-3, 1e3, 25))
    ok &= _check(
        "Lambert W round trip (w*exp(w) == x)",
        bool(
            np.all(
                np.abs(ws * np.exp(ws) - np.geomspace(1e-3, 1e3, 25))
                <= 1e-10 * np.geomspace(1e-3, 1e3, 25)
            )
        ),
    )
    w_log = lambert_w0_of_log(100.0)
    ok &= _check(
        "log-argument Lambert W (w + ln w = 100)",
        abs(w_log + math.log(w_log) - 100.0) <= 1e-10,
    )

    psis = np.geomspace(0.3, 30.0, 12)
    lam = bussgang_gain_soft(psis)
    c = distortion_coeff_soft(psis)
    ok &= _check(
        "clipper power split (lambda + dist == 1 - exp(-psi))",
        bool(np.all(np.abs(lam + c - (-np.expm1(-psis))) <= 1e-12)),
    )
    psi_probe = 10 ** 0.6
    ok &= _check(
        "smooth amplifier -> clipper limit (p = 200)",
        abs(bussgang_gain_rapp(psi_probe, 200.0) - bussgang_gain_soft(psi_probe)) <= 1e-3
        and abs(distortion_coeff_rapp(psi_probe, 200.0) - distortion_coeff_soft(psi_probe))
        <= 1e-3,
    )

    wf = solve_fpda(WaterfillProblem(breakpoints=np.array([0.0, 0.3])))
    ok &= _check(
        "water-filling two-user anchor",
        bool(np.allclose(wf, [0.65, 0.35], rtol=0, atol=1e-12)),
    )
    rng = np.random.default_rng(7)
    g = rng.uniform(0.0, 5.0, size=16)
    wf = solve_fpda(WaterfillProblem(breakpoints=g))
    mu = np.max(g[wf > 0] + wf[wf > 0])
    ok &= _check(
        "water-filling budget and KKT",
        abs(wf.sum() - 1.0) <= 1e-12
        and bool(np.all(np.abs(np.where(wf > 0, g + wf - mu, 0.0)) <= 1e-9))
        and bool(np.all(g[wf == 0] >= mu - 1e-9)),
    )

    cfg = SystemConfig(m_antennas=64, n_users=4, p_max=0.01, bandwidth_hz=18e6)
    ues = UeSet(
        beta=np.array([1e-10, 3e-10, 1e-9, 5e-9]),
        noise_w=np.full(4, 7.2e-14),
    )
    omega = np.full(4, 0.25)
    lo, hi = root_bounds(ues.noise_w[0], float(np.max(ues.beta)), cfg)
    ok &= _check(
        "optimizer bracket sign change",
        sum_rate_derivative(lo, ues, omega, cfg) > 0
        and sum_rate_derivative(hi, ues, omega, cfg) < 0,
    )
    alloc, trace = alternating_optimize(ues, cfg)
    ref = ref_e(ues, cfg)
    gain = evaluate(cfg, ues, alloc, "zf").sum_rate / evaluate(cfg, ues, ref, "zf").sum_rate
    ok &= _check(
        "alternating optimizer converges and dominates fixed back-off",
        trace.converged and gain >= 1.0 - 1e-9,
    )
    report = evaluate(cfg, ues, Allocation(alloc.total_power_p, alloc.omega), "zf")
    ok &= _check(
        "rate report finite and consistent",
        math.isfinite(report.sum_rate)
        and abs(report.sum_rate - float(np.sum(report.rate))) <= 1e-6 * report.sum_rate,
    )

    series = ccdf([1.0, 2.0, 3.0])
    ok &= _check(
        "ccdf definition",
        bool(np.allclose(series.probabilities, [2 / 3, 1 / 3, 0.0], rtol=0, atol=1e-15)),
    )

    sc = ScenarioConfig(n_users=8, m_antennas=64, p_max=0.01, seed=123)
    a = drop_ues(sc, 5)
    b = drop_ues(sc, 5)
    other = drop_ues(sc, 6)
    ok &= _check(
        "scenario drops deterministic per (seed, drop)",
        bool(np.array_equal(a.beta, b.beta)) and not bool(np.array_equal(a.beta, other.beta)),
    )

    print("all checks passed" if ok else "some checks FAILED")
    return 0 if ok else 1


# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dapalloc",
        description="Distortion-aware downlink power allocation toolkit.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "solve": _cmd_solve,
        "sweep-homogeneous": _cmd_sweep_homogeneous,
        "grid-2ue": _cmd_grid_2ue,
        "montecarlo": _cmd_montecarlo,
        "linklevel": _cmd_linklevel,
        "hessian-check": _cmd_hessian_check,
        "validate": _cmd_validate,
    }
    for name, handler in commands.items():
        p = sub.add_parser(name)
        p.add_argument("--config", type=str, default=None, help="JSON config file")
        p.add_argument("--seed", type=int, default=None, help="override scenario seed")
        p.add_argument("--out", type=str, default=".", help="output directory")
        p.add_argument("--workers", type=int, default=1, help="worker processes")
        p.add_argument(
            "--delta", type=float, default=None, help="solver power tolerance (watts)"
        )
        p.set_defaults(handler=handler)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    logging.basicConfig(level=logging.INFO, stream=sys.stderr, format="%(message)s")
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print(
            json.dumps({"error": {"type": "ValueError", "message": "seed must fit in u64"}})
        )
        return _EXIT_ERROR
    try:
        return args.handler(args)
    except Exception as exc:  # noqa: BLE001 - CLI boundary turns errors into JSON
        print(json.dumps({"error": {"type": type(exc).__name__, "message": str(exc)}}))
        return _EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
