"""Rate experiments shared by the ``rate`` command and the acceptance tests.

Each ``criterion_*`` function runs one experiment at fixed instances and
seeds and returns a :class:`CriterionResult` with the measured numbers.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .geometry import euclidean_setup
from .metrics import detect_plateau, fit_rate, quantiles
from .noise import NoiseModel
from .problems import XiLaw, bilinear_ball_game, matrix_game, random_ball_game, strongly_monotone_ball_game
from .restarts import RestartSchedule, default_R0, restart_solve_many
from .solver import Case1, HeavyTail, SolverConfig, build_geometry, m_case1, solve_many


@dataclass
class CriterionResult:
    name: str
    passed: bool
    summary: str
    values: dict = field(default_factory=dict)
    seconds: float = 0.0


def euclidean_setups(problem):
    sy = None if problem.y_domain is None else euclidean_setup(problem.y_domain)
    return euclidean_setup(problem.x_domain), sy


def median_final_gap(problem, model, setups, config: SolverConfig, seeds) -> float:
    reps = solve_many(problem, model, setups[0], setups[1], config, seeds)
    return float(np.median([r.final_gap for r in reps]))


def n_ladder_medians(problem, model, setups, config: SolverConfig, ladder, seeds) -> list:
    return [(int(n), median_final_gap(problem, model, setups, replace(config, n_iters=int(n)), seeds))
            for n in ladder]


def required_budget(median_at: Callable[[int], float], eps: float, n_start: int = 16,
                    factor: float = math.sqrt(2.0), n_max: int = 10 ** 7):
    """Smallest budget whose median gap is ``<= eps`` on a geometric ladder.

    The answer is log-interpolated between the last failing and the first
    passing rung, which keeps it continuous in ``eps``.  Returns
    ``(N_required, [(N, median), ...])``.
    """
    evaluated = []
    n = int(n_start)
    prev = None
    while n <= n_max:
        med = median_at(n)
        evaluated.append((n, med))
        if med <= eps:
            if prev is None or prev[1] <= med:
                return float(n), evaluated
            (n0, g0), (n1, g1) = prev, (n, med)
            t = (math.log(g0) - math.log(eps)) / (math.log(g0) - math.log(g1))
            return float(math.exp(math.log(n0) + t * (math.log(n1) - math.log(n0)))), evaluated
        prev = (n, med)
        n = max(n + 1, int(round(n * factor)))
    return math.inf, evaluated


# --------------------------------------------------------------------------- #
# acceptance experiments
# --------------------------------------------------------------------------- #

PENNIES = [[1.0, -1.0], [-1.0, 1.0]]


def criterion_rate(seeds=range(20), ladder=(100, 1000, 10_000, 100_000)) -> CriterionResult:
    """Noiseless-oracle 1/sqrt(N) decay on matching pennies with stochastic payoffs."""
    t0 = time.perf_counter()
    prob = matrix_game(PENNIES, XiLaw("uniform", 1.0))
    setups = euclidean_setups(prob)
    pts = n_ladder_medians(prob, NoiseModel.none(prob.d), setups, SolverConfig(100, 1e-3, Case1(0.0)),
                           ladder, list(seeds))
    fit = fit_rate(pts)
    mono = all(b[1] <= a[1] for a, b in zip(pts, pts[1:]))
    ok = -0.65 <= fit.slope <= -0.35 and fit.r_squared >= 0.95 and mono
    return CriterionResult("rate_1_over_sqrt_N", ok,
                           f"slope={fit.slope:.3f} r2={fit.r_squared:.3f} medians={_fmt(pts)}",
                           {"slope": fit.slope, "r2": fit.r_squared, "points": pts, "monotone": mono},
                           time.perf_counter() - t0)


def criterion_dimension(d_grid=(8, 32, 128), eps=0.1, seeds=range(8), game_seed=1) -> CriterionResult:
    """Budget needed for a fixed gap grows roughly linearly in d."""
    t0 = time.perf_counter()
    budgets = []
    ladders = {}
    for d in d_grid:
        prob = random_ball_game(d // 2, d - d // 2, seed=game_seed)
        setups = euclidean_setups(prob)
        model = NoiseModel.none(prob.d)
        cfg = SolverConfig(1, 1e-3, Case1(0.0))
        n_req, ev = required_budget(
            lambda n: median_final_gap(prob, model, setups, replace(cfg, n_iters=n), list(seeds)), eps, n_start=64)
        budgets.append((d, n_req))
        ladders[d] = ev
    fit = fit_rate(budgets)
    ok = 0.6 <= fit.slope <= 1.4
    return CriterionResult("dimension_scaling", ok,
                           f"exponent={fit.slope:.3f} budgets={[(d, round(n)) for d, n in budgets]}",
                           {"exponent": fit.slope, "budgets": budgets, "ladders": ladders},
                           time.perf_counter() - t0)


def criterion_noise_floor(deltas=(0.005, 0.01, 0.02), eps=0.1, n_iters=2 ** 16, seeds=range(20),
                          width=0.1, window=4) -> CriterionResult:
    """Plateau grows linearly in Delta; sub-threshold noise costs at most 2x the budget."""
    t0 = time.perf_counter()
    prob = matrix_game(PENNIES, XiLaw("uniform", 1.0))
    setups = euclidean_setups(prob)
    tau = SolverConfig.tau_for_target(eps, prob.M2)
    center = np.full(prob.d, 0.5)
    plateaus = []
    for delta in deltas:
        model = NoiseModel.ramp(delta, prob.d, width, anchor=center, seed=3)
        reps = solve_many(prob, model, *setups, SolverConfig(n_iters, tau, Case1(delta)), list(seeds))
        series = np.median(np.array([[g for _, g in r.gap_series] for r in reps]), axis=0)
        plateaus.append(detect_plateau(series.tolist(), window))
    factors = [b / a for a, b in zip(plateaus, plateaus[1:])]
    floor_ok = all(1.5 <= f <= 3.0 for f in factors)

    _, joint = build_geometry(prob, *setups, SolverConfig(1, tau))
    threshold = eps ** 2 / (joint.diameter * prob.M2 * math.sqrt(prob.d))
    small = 0.9 * threshold
    seeds = list(seeds)

    def budget(delta):
        model = NoiseModel.ramp(delta, prob.d, width, anchor=center, seed=3) if delta > 0 else NoiseModel.none(prob.d)
        cfg = SolverConfig(1, tau, Case1(delta))
        return required_budget(lambda n: median_final_gap(prob, model, setups, replace(cfg, n_iters=n), seeds),
                               eps, n_start=8)[0]

    n_clean, n_noisy = budget(0.0), budget(small)
    budget_ok = n_noisy <= 2.0 * n_clean
    return CriterionResult(
        "noise_floor", floor_ok and budget_ok,
        f"plateaus={[round(p, 4) for p in plateaus]} factors={[round(f, 2) for f in factors]} "
        f"threshold={threshold:.2e} budget_clean={n_clean:.0f} budget_noisy={n_noisy:.0f}",
        {"plateaus": plateaus, "factors": factors, "threshold": threshold,
         "budget_clean": n_clean, "budget_noisy": n_noisy},
        time.perf_counter() - t0)


def restart_instance(mu=1.0):
    return strongly_monotone_ball_game(np.eye(2), mu, [0.54, 0.72], [-0.9, 0.0])


def plain_budget_for_target(problem, joint, eps: float, constant: float = 1.0) -> int:
    """Iterations after which the ``M D sqrt(2/N)`` bound drops to ``eps``."""
    M = m_case1(problem.M2, problem.d, joint.a_q_sq(problem.d), 0.0, 1.0, constant)
    return max(1, math.ceil(2.0 * (M * joint.diameter / eps) ** 2))


def criterion_restarts(eps_grid=(0.2, 0.1, 0.05, 0.025), seeds=range(10), mu=1.0,
                       empirical=True) -> CriterionResult:
    """Total iterations of each method configured for target eps, versus 1/eps."""
    t0 = time.perf_counter()
    prob = restart_instance(mu)
    setups = euclidean_setups(prob)
    model = NoiseModel.none(prob.d)
    base = SolverConfig(1, 1e-3, Case1(0.0))
    _, joint = build_geometry(prob, *setups, base)
    R0 = default_R0(prob, joint)
    seeds = list(seeds)
    r_tot, p_tot, r_gap, p_gap = [], [], [], []
    for eps in eps_grid:
        sched = RestartSchedule.for_target(2.0, mu, R0, eps)
        reps = restart_solve_many(prob, model, *setups, base, sched, seeds)
        r_tot.append((1.0 / eps, reps[0].n_iters))
        r_gap.append(float(np.median([r.final_gap for r in reps])))
        n_plain = plain_budget_for_target(prob, joint, eps)
        p_tot.append((1.0 / eps, n_plain))
        p_gap.append(median_final_gap(prob, model, setups, replace(base, n_iters=n_plain), seeds))
    r_fit, p_fit = fit_rate(r_tot), fit_rate(p_tot)
    reached = all(g <= e for g, e in zip(r_gap, eps_grid)) and all(g <= e for g, e in zip(p_gap, eps_grid))
    ok = 0.7 <= r_fit.slope <= 1.3 and 1.6 <= p_fit.slope <= 2.4 and reached
    values = {"restart_exponent": r_fit.slope, "plain_exponent": p_fit.slope, "restart_totals": r_tot,
              "plain_totals": p_tot, "restart_gaps": r_gap, "plain_gaps": p_gap, "reached": reached}
    summary = (f"restart_exponent={r_fit.slope:.3f} plain_exponent={p_fit.slope:.3f} "
               f"reached={reached}")
    if empirical:
        emp = []
        for eps in eps_grid:
            n_req, _ = required_budget(
                lambda n: median_final_gap(prob, model, setups, replace(base, n_iters=n), seeds), eps, n_start=2)
            emp.append((1.0 / eps, n_req))
        values["plain_empirical_budgets"] = emp
        values["plain_empirical_exponent"] = fit_rate(emp).slope
        summary += f" plain_empirical_exponent={values['plain_empirical_exponent']:.3f}"
    return CriterionResult("restart_acceleration", ok, summary, values, time.perf_counter() - t0)


def heavy_tail_instance(alpha=1.55, amplitude=0.2):
    return bilinear_ball_game(np.eye(2), b=np.array([0.3, -0.2]), c=np.array([0.1, 0.25]),
                              xi_law=XiLaw("pareto", amplitude, alpha))


def criterion_heavy_tail(kappa=0.5, ladder=(100, 1000, 10_000, 100_000), seeds=range(20),
                         tail_n=3000, tail_trials=1000) -> CriterionResult:
    """Heavy-tail steps decay like N^(-k/(1+k)); light-tail steps show a heavier upper tail."""
    t0 = time.perf_counter()
    prob = heavy_tail_instance()
    setups = euclidean_setups(prob)
    model = NoiseModel.none(prob.d)
    heavy = SolverConfig(1, 1e-3, HeavyTail(kappa))
    pts = n_ladder_medians(prob, model, setups, heavy, ladder, list(seeds))
    fit = fit_rate(pts)
    # the payoff noise has no second moment, so the light-tail step uses the (1+k)-moment bound
    light = SolverConfig(tail_n, 1e-3, Case1(0.0), m2=prob.M2_tilde(kappa))
    trial_seeds = list(range(10_000, 10_000 + tail_trials))
    hq = quantiles([r.final_gap for r in solve_many(prob, model, *setups, replace(heavy, n_iters=tail_n), trial_seeds)])
    lq = quantiles([r.final_gap for r in solve_many(prob, model, *setups, light, trial_seeds)])
    h_ratio, l_ratio = hq[0.99] / hq[0.5], lq[0.99] / lq[0.5]
    ok = -0.45 <= fit.slope <= -0.22 and l_ratio >= 2.0 * h_ratio
    return CriterionResult(
        "heavy_tail", ok,
        f"slope={fit.slope:.3f} medians={_fmt(pts)} q99/q50 heavy={h_ratio:.2f} light={l_ratio:.2f}",
        {"slope": fit.slope, "points": pts, "heavy_ratio": h_ratio, "light_ratio": l_ratio,
         "heavy_quantiles": hq, "light_quantiles": lq},
        time.perf_counter() - t0)


def _fmt(pts) -> str:
    return "[" + ", ".join(f"({n}, {g:.4g})" for n, g in pts) + "]"
