"""Command-line front end: ``zo-saddle solve | verify | rate``.

Exit codes: 0 success, 1 a verification check failed, 2 configuration error,
3 runtime failure.  ``ZO_SADDLE_THREADS`` overrides the worker count.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, load_config
from .errors import ConfigError, DegenerateSeries, ZoSaddleError
from .metrics import fit_rate
from .restarts import RestartSchedule, default_R0, restart_solve_many
from .solver import SolverConfig, build_geometry, solve_many
from .verify import NoiseOverride, run_suite, write_reports

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3

RUN_COLUMNS = ("run_id", "seed", "N", "tau", "delta", "regime", "final_gap", "wall_ms", "oracle_calls",
               "config_hash")
RATE_COLUMNS = ("axis", "value", "total_iters", "median_gap", "n_seeds")


def _num(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def worker_count(cfg: ExperimentConfig) -> int:
    env = os.environ.get("ZO_SADDLE_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"ZO_SADDLE_THREADS must be an integer, got {env!r}") from None
        if n < 1:
            raise ConfigError("ZO_SADDLE_THREADS must be >= 1")
        return n
    return cfg.workers


@dataclass(frozen=True)
class Point:
    n_iters: int | None
    delta: float | None
    d: int | None


def sweep_points(cfg: ExperimentConfig) -> list:
    sw = cfg.sweep
    if sw.d_grid is not None and not cfg.problem.has_dimension_family:
        raise ConfigError("sweep.d_grid needs a random_matrix_game or random_ball_game problem")
    if sw.delta_grid is not None and cfg.noise.kind == "none":
        raise ConfigError("sweep.delta_grid needs a noise kind other than none")
    ds = sw.d_grid or [None]
    deltas = sw.delta_grid or [None]
    ns = sw.n_ladder or [None]
    return [Point(n, delta, d) for d, delta, n in itertools.product(ds, deltas, ns)]


def build_run(cfg: ExperimentConfig, point: Point):
    """Problem, noise model, setups and solver config for one sweep point."""
    problem = cfg.problem.build(point.d)
    sx, sy = cfg.prox.build(problem)
    probe = SolverConfig(1, 1.0, mode=cfg.prox.mode)
    _, joint = build_geometry(problem, sx, sy, probe)
    model = cfg.noise.build(problem, joint, point.delta)
    s = cfg.solver
    solver_cfg = SolverConfig(
        n_iters=point.n_iters or s.n_iters,
        tau=s.resolve_tau(problem),
        step_rule=s.step_rule.build(model, point.delta),
        mode=cfg.prox.mode,
        constant=s.constant,
        m2=s.m2,
    )
    return problem, model, (sx, sy), joint, solver_cfg


def schedule_for(cfg: ExperimentConfig, problem, joint, eps: float) -> RestartSchedule:
    if problem.growth is None:
        raise ConfigError("restarts need a problem with a growth condition (e.g. strongly_monotone)")
    R0 = cfg.restart.R0 if cfg.restart.R0 is not None else default_R0(problem, joint)
    return RestartSchedule.for_target(problem.growth.r, problem.growth.mu_r, R0, eps, cfg.restart.stage_constant)


def run_point(cfg: ExperimentConfig, point: Point, eps: float | None = None):
    problem, model, (sx, sy), joint, scfg = build_run(cfg, point)
    seeds = cfg.sweep.seeds
    if cfg.restart.enabled or eps is not None:
        target = eps if eps is not None else cfg.restart.eps
        if target is None:
            raise ConfigError("restart.eps is required when restarts are enabled")
        reports = restart_solve_many(problem, model, sx, sy, scfg, schedule_for(cfg, problem, joint, target), seeds)
    else:
        reports = solve_many(problem, model, sx, sy, scfg, seeds)
    return model, reports


def _map_points(cfg, fn, items):
    workers = worker_count(cfg)
    if workers == 1 or len(items) == 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def cmd_solve(config_path) -> int:
    cfg = load_config(config_path)
    points = sweep_points(cfg)
    h = cfg.config_hash()
    t0 = time.perf_counter()
    results = _map_points(cfg, lambda p: run_point(cfg, p), points)
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    summary = []
    run_id = 0
    for point, (model, reports) in zip(points, results):
        for rep in reports:
            rows.append({
                "run_id": run_id, "seed": rep.seed, "N": rep.n_iters, "tau": _num(rep.tau),
                "delta": _num(model.amplitude), "regime": model.regime,
                "final_gap": _num(rep.final_gap),
                "wall_ms": _num(rep.wall_time * 1e3) if cfg.record_timing else "",
                "oracle_calls": rep.oracle_calls, "config_hash": h,
            })
            summary.append({"run_id": run_id, "seed": rep.seed, "N": rep.n_iters, "final_gap": rep.final_gap,
                            "gamma": rep.gamma, "z_hat": rep.z_hat.tolist(),
                            "stage_budgets": rep.stage_budgets})
            run_id += 1
    with open(out / "runs.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=RUN_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    gaps = [r["final_gap"] for r in summary if r["final_gap"] is not None]
    report = {
        "config_hash": h,
        "n_runs": len(summary),
        "median_final_gap": float(np.median(gaps)) if gaps else None,
        "wall_seconds": time.perf_counter() - t0,
        "runs": summary,
    }
    with open(out / "report.json", "w") as fh:
        json.dump(report, fh, indent=2)
    print(f"wrote {len(rows)} runs to {out / 'runs.csv'}")
    return EXIT_OK


def cmd_rate(config_path) -> int:
    cfg = load_config(config_path)
    sw = cfg.sweep
    rows = []
    messages = []
    seeds = sw.seeds
    if sw.eps_ladder is not None:
        if len(sw.eps_ladder) < 3:
            raise ConfigError("sweep.eps_ladder needs at least 3 points for a rate fit")
        res = _map_points(cfg, lambda e: run_point(cfg, Point(None, None, None), e), list(sw.eps_ladder))
        pts = []
        for eps, (_, reps) in zip(sw.eps_ladder, res):
            total = reps[0].n_iters
            med = float(np.median([r.final_gap for r in reps]))
            rows.append(("eps", eps, total, med, len(seeds)))
            pts.append((1.0 / eps, total))
        fit = fit_rate(pts)
        messages.append(f"restart total-iterations exponent vs 1/eps: {fit.slope:.4f} (r2={fit.r_squared:.3f})")
        if cfg.restart.compare_plain:
            from .experiments import plain_budget_for_target

            problem, model, (sx, sy), joint, scfg = build_run(cfg, Point(None, None, None))
            ppts = []
            for eps in sw.eps_ladder:
                n = plain_budget_for_target(problem, joint, eps, scfg.constant)
                reps = solve_many(problem, model, sx, sy, SolverConfig(
                    n, scfg.tau, scfg.step_rule, scfg.mode, constant=scfg.constant, m2=scfg.m2), seeds)
                rows.append(("eps_plain", eps, n, float(np.median([r.final_gap for r in reps])), len(seeds)))
                ppts.append((1.0 / eps, n))
            messages.append(f"plain total-iterations exponent vs 1/eps: {fit_rate(ppts).slope:.4f}")
    elif sw.d_grid is not None and sw.target_gap is not None:
        if len(sw.d_grid) < 3:
            raise ConfigError("sweep.d_grid needs at least 3 points for a rate fit")
        from dataclasses import replace

        from .experiments import median_final_gap, required_budget

        pts = []
        for d in sw.d_grid:
            problem, model, setups, _, scfg = build_run(cfg, Point(None, None, d))
            n_req, _ = required_budget(
                lambda n: median_final_gap(problem, model, setups, replace(scfg, n_iters=n), seeds), sw.target_gap)
            rows.append(("d", d, n_req, sw.target_gap, len(seeds)))
            pts.append((d, n_req))
        fit = fit_rate(pts)
        messages.append(f"required-budget exponent in d: {fit.slope:.4f} (r2={fit.r_squared:.3f})")
    else:
        ladder = sw.n_ladder or []
        if len(ladder) < 3:
            raise ConfigError("sweep.n_ladder needs at least 3 points for a rate fit")
        res = _map_points(cfg, lambda n: run_point(cfg, Point(n, None, None)), list(ladder))
        pts = []
        for n, (_, reps) in zip(ladder, res):
            med = float(np.median([r.final_gap for r in reps]))
            rows.append(("N", n, n, med, len(seeds)))
            pts.append((n, med))
        fit = fit_rate(pts)
        messages.append(f"gap slope vs N: {fit.slope:.4f} (r2={fit.r_squared:.3f})")
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "rates.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RATE_COLUMNS)
        for axis, value, total, med, ns in rows:
            w.writerow([axis, _num(value), _num(total) if math.isfinite(total) else "inf", _num(med), ns])
    for m in messages:
        print(m)
    return EXIT_OK


def cmd_verify(suite: str, seed: int, output: str | None = None, delta: float | None = None,
               declared_delta: float | None = None) -> int:
    override = None
    if delta is not None or declared_delta is not None:
        d = delta if delta is not None else declared_delta
        override = NoiseOverride(d, declared_delta if declared_delta is not None else d)
    try:
        reports = run_suite(suite, seed, override)
    except KeyError as err:
        raise ConfigError(err.args[0]) from None
    path = Path(output) if output else Path(f"verify_{suite}_{seed}.csv")
    if path.parent != Path(""):
        path.parent.mkdir(parents=True, exist_ok=True)
    write_reports(path, reports)
    for r in reports:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status} {r.lemma_id}: statistic={r.statistic:.6g} bound={r.bound:.6g}")
    return EXIT_OK if all(r.passed for r in reports) else EXIT_CHECK_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="zo-saddle", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("solve", help="run the configured solves and write runs.csv / report.json")
    p.add_argument("config")
    p = sub.add_parser("rate", help="run a ladder, fit the log-log slope and write rates.csv")
    p.add_argument("config")
    p = sub.add_parser("verify", help="run a Monte-Carlo check suite")
    p.add_argument("suite", help="all | inner_product | smoothing | second_moment | bias | tails")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", default=None, help="CSV path for the check reports")
    p.add_argument("--delta", type=float, default=None, help="actual bounded-noise level for noisy checks")
    p.add_argument("--declared-delta", type=float, default=None, help="noise level the checks are told about")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        if args.command == "solve":
            return cmd_solve(args.config)
        if args.command == "rate":
            return cmd_rate(args.config)
        return cmd_verify(args.suite, args.seed, args.output, args.delta, args.declared_delta)
    except (ConfigError, DegenerateSeries) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (ZoSaddleError, ArithmeticError, ValueError) as err:
        print(f"runtime error: {err}", file=sys.stderr)
        return EXIT_RUNTIME


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
