"""Monte-Carlo checks of the estimator's auxiliary inequalities.

Every check returns a :class:`LemmaCheckReport`.  Statistical comparisons use
one of two documented inflations and nothing else:

* ratio checks pass when ``statistic <= bound * (1 + 3 / sqrt(n))``;
* difference checks allow ``3`` standard errors of the estimated quantity.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .estimator import _chunks, estimate_gradient, sample_sphere, saddle_field, smooth_gradient_oracle, smooth_value
from .geometry import euclidean_setup
from .metrics import quantiles
from .noise import NoiseModel
from .problems import XiLaw, abs_problem_1d, linear_problem, matrix_game, random_ball_game
from .solver import Case1, SolverConfig, solve_many
from .streams import derive_rng

C_MAX = 8.0
SUITES = ("inner_product", "smoothing", "second_moment", "bias", "tails")


@dataclass
class LemmaCheckReport:
    lemma_id: str
    n_samples: int
    statistic: float
    bound: float
    margin: float
    passed: bool
    seed: int | None = None
    details: dict = field(default_factory=dict)

    def row(self) -> dict:
        out = asdict(self)
        out.pop("details")
        return out


def _slack(n: int) -> float:
    return 1.0 + 3.0 / math.sqrt(n)


def _report(lemma_id, n, statistic, bound, passed, seed=None, **details) -> LemmaCheckReport:
    return LemmaCheckReport(lemma_id, int(n), float(statistic), float(bound),
                            float(bound - statistic), bool(passed), seed, details)


# --------------------------------------------------------------------------- #
# E |<e, r>| <= ||r|| / sqrt(d)
# --------------------------------------------------------------------------- #


def check_inner_product_bound(d: int, n_samples: int, n_directions: int, rng: np.random.Generator,
                              directions=None, seed=None) -> LemmaCheckReport:
    """Estimate ``E|<e, r>|`` for several ``r`` and compare with ``||r|| / sqrt(d)``.

    The reported statistic and bound belong to the direction with the largest
    ratio; every direction has to pass.
    """
    if directions is None:
        R = rng.standard_normal((n_directions, d)) * rng.uniform(0.5, 2.0, (n_directions, 1))
    else:
        R = np.atleast_2d(np.asarray(directions, dtype=float))
    acc = np.zeros(R.shape[0])
    for m in _chunks(n_samples, 65536):
        acc += np.abs(sample_sphere(d, rng, m) @ R.T).sum(axis=0)
    est = acc / n_samples
    bound = np.linalg.norm(R, axis=1) / math.sqrt(d)
    ok = est <= bound * _slack(n_samples)
    ratio = np.divide(est, bound, out=np.zeros_like(est), where=bound > 0)
    worst = int(np.argmax(ratio))
    return _report(f"inner_product[d={d}]", n_samples, est[worst], bound[worst], bool(np.all(ok)), seed,
                   max_ratio=float(ratio[worst]), n_directions=int(R.shape[0]))


# --------------------------------------------------------------------------- #
# sup |f^tau - f| <= tau M2
# --------------------------------------------------------------------------- #


def check_smoothing_gap(problem, tau: float, n_points: int, n_samples: int, rng: np.random.Generator,
                        points=None, seed=None) -> LemmaCheckReport:
    """``|f^tau(z) - f(z)| <= tau M2 + 3 stderr`` at sampled domain points."""
    Z = problem.sample_point(rng, n_points) if points is None else np.atleast_2d(points)
    bound = tau * problem.M2
    gaps, ok = [], True
    for z in Z:
        mean, se = smooth_value(problem, z, tau, n_samples, rng)
        gap = abs(mean - float(problem.value(z)))
        gaps.append(gap)
        ok = ok and gap <= bound + 3.0 * se
    return _report(f"smoothing[{problem.name}]", n_samples, max(gaps), bound, ok, seed,
                   tau=tau, n_points=len(gaps))


# --------------------------------------------------------------------------- #
# E ||g||^2 <= c (a^2 d M2^2 + d^2 a^2 Delta^2 / tau^2)
# --------------------------------------------------------------------------- #


def second_moment_scale(problem, model: NoiseModel, tau: float, a_q_sq: float = 1.0) -> float:
    """Reference scale for ``E||g||^2`` built from the model's declared noise level."""
    d = problem.d
    if model.regime == "lipschitz":
        return a_q_sq * d * (problem.M2 ** 2 + model.m2_delta ** 2)
    return a_q_sq * d * problem.M2 ** 2 + d ** 2 * a_q_sq * model.delta_max ** 2 / tau ** 2


def estimate_second_moment(problem, model, z, tau, n_samples, rng) -> float:
    total = 0.0
    for m in _chunks(n_samples, 65536):
        g = estimate_gradient(problem, model, z, tau, rng, m).g
        total += float(np.sum(g * g))
    return total / n_samples


def check_second_moment(problem: Callable, model: Callable | None, tau: float, d_grid, n_samples: int,
                        rng: np.random.Generator, c_max: float = C_MAX, seed=None) -> LemmaCheckReport:
    """Ratio of ``E||g||_2^2`` to its reference scale across a dimension grid.

    ``problem`` and ``model`` map a dimension to an instance; ``model=None``
    means a noiseless oracle.  The estimate is taken at a random domain point.
    """
    ratios, moments = [], []
    for d in d_grid:
        prob = problem(d)
        mod = NoiseModel.none(prob.d) if model is None else model(prob.d)
        z = prob.sample_point(rng)
        mom = estimate_second_moment(prob, mod, z, tau, n_samples, rng)
        moments.append(mom)
        ratios.append(mom / second_moment_scale(prob, mod, tau))
    stat = max(ratios)
    return _report("second_moment", n_samples, stat, c_max, stat <= c_max * _slack(n_samples), seed,
                   d_grid=list(d_grid), ratios=ratios, moments=moments)


# --------------------------------------------------------------------------- #
# |E<g, r> - <grad f^tau, r>| <= (d Delta / tau) ||r|| / sqrt(d)
# --------------------------------------------------------------------------- #


def check_estimator_bias(problem, model: NoiseModel, z, tau: float, n_samples: int, rng: np.random.Generator,
                         n_directions: int = 3, directions=None, seed=None) -> LemmaCheckReport:
    """Compare the mean estimate with the smoothed field along test directions.

    The envelope uses the model's declared bound, so an oracle noisier than
    declared shows up as a failure.
    """
    z = np.asarray(z, dtype=float)
    d = problem.d
    R = rng.standard_normal((n_directions, d)) if directions is None else np.atleast_2d(directions)
    s1 = np.zeros(R.shape[0])
    s2 = np.zeros(R.shape[0])
    for m in _chunks(n_samples, 65536):
        g = estimate_gradient(problem, model, z, tau, rng, m).g
        t = g @ R.T
        s1 += t.sum(axis=0)
        s2 += (t * t).sum(axis=0)
    mean_g = s1 / n_samples
    se_g = np.sqrt(np.maximum(s2 / n_samples - mean_g ** 2, 0.0) / n_samples)
    # the estimator returns the saddle field, so compare with the signed smoothed gradient
    signs = saddle_field(np.ones(d), problem.dx)
    grad, se_ref = smooth_gradient_oracle(problem, z, tau, n_samples, rng, directions=R * signs)
    ref = R @ (grad * signs)
    dev = np.abs(mean_g - ref)
    sigma = np.sqrt(se_g ** 2 + se_ref ** 2)
    env = (d * model.delta_max / tau) * np.linalg.norm(R, axis=1) / math.sqrt(d)
    ok = dev <= env + 3.0 * sigma
    worst = int(np.argmax(dev - env - 3.0 * sigma))
    return _report(f"bias[{problem.name}]", n_samples, dev[worst], env[worst] + 3.0 * sigma[worst],
                   bool(np.all(ok)), seed, envelope=env.tolist(), sigma=sigma.tolist(), deviation=dev.tolist())


# --------------------------------------------------------------------------- #
# empirical tails of the final gap
# --------------------------------------------------------------------------- #


@dataclass
class TailReport:
    quantiles: dict
    gaps: np.ndarray
    ratio_90_50: float
    ratio_99_50: float
    passed: bool


def _ratio(a, b):
    if b == 0:
        return 1.0 if a == 0 else math.inf
    return a / b


def empirical_tail_report(problem, model: NoiseModel, config: SolverConfig, n_trials: int,
                          rng: np.random.Generator, setup_x=None, setup_y=None) -> TailReport:
    """Quantiles of the final gap over ``n_trials`` independent seeds; passes if ``q90 <= 3 q50``."""
    sx = euclidean_setup(problem.x_domain) if setup_x is None else setup_x
    sy = (None if problem.y_domain is None else euclidean_setup(problem.y_domain)) if setup_y is None else setup_y
    seeds = [int(s) for s in rng.integers(0, 2 ** 62, n_trials)]
    reports = solve_many(problem, model, sx, sy, config, seeds)
    gaps = np.array([r.final_gap for r in reports])
    q = quantiles(gaps)
    r90 = _ratio(q[0.9], q[0.5])
    return TailReport(q, gaps, r90, _ratio(q[0.99], q[0.5]), r90 <= 3.0)


# --------------------------------------------------------------------------- #
# suites
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class NoiseOverride:
    """Replace the bounded noise of the noisy checks (used to force failures)."""

    delta: float
    declared: float


def _bounded(dim, delta, declared, tau):
    return NoiseModel.bounded(delta, dim, wavelength=0.25 * tau, seed=11, declared_bound=declared)


def suite_inner_product(seed: int, **_):
    out = []
    for i, d in enumerate((1, 2, 4, 16, 64, 256)):
        out.append(check_inner_product_bound(d, 200_000, 20, derive_rng(seed, "verify-inner", i), seed=seed))
    return out


def suite_smoothing(seed: int, **_):
    cases = [
        (abs_problem_1d(), 0.1),
        (matrix_game([[1.0, -1.0], [-1.0, 1.0]]), 0.05),
        (random_ball_game(3, 3, seed=seed), 0.05),
    ]
    out = []
    for i, (prob, tau) in enumerate(cases):
        rng = derive_rng(seed, "verify-smoothing", i)
        out.append(check_smoothing_gap(prob, tau, 6, 100_000, rng, seed=seed))
    return out


def suite_second_moment(seed: int, override: NoiseOverride | None = None, **_):
    tau = 0.05
    delta, declared = (0.01, 0.01) if override is None else (override.delta, override.declared)

    def prob(d):
        c = derive_rng(seed, "verify-linear-coef", d).standard_normal(d)
        return linear_problem(c / np.linalg.norm(c))

    grid = (2, 8, 32, 128)
    return [
        check_second_moment(prob, None, tau, grid, 50_000, derive_rng(seed, "verify-moment", 0), seed=seed),
        check_second_moment(prob, lambda d: _bounded(d, delta, declared, tau), tau, grid, 50_000,
                            derive_rng(seed, "verify-moment", 1), seed=seed),
    ]


def suite_bias(seed: int, override: NoiseOverride | None = None, **_):
    tau = 0.1
    delta, declared = (0.01, 0.01) if override is None else (override.delta, override.declared)
    clean = random_ball_game(4, 4, seed=seed, xi_law=XiLaw("uniform", 1.0))
    noisy = random_ball_game(4, 4, seed=seed)
    rng0 = derive_rng(seed, "verify-bias", 0)
    rng1 = derive_rng(seed, "verify-bias", 1)
    return [
        check_estimator_bias(clean, NoiseModel.none(clean.d), clean.sample_point(rng0), tau, 200_000, rng0,
                             n_directions=3, seed=seed),
        check_estimator_bias(noisy, _bounded(noisy.d, delta, declared, tau), noisy.sample_point(rng1), tau,
                             200_000, rng1, n_directions=5, seed=seed),
    ]


def suite_tails(seed: int, **_):
    prob = matrix_game([[1.0, -1.0], [-1.0, 1.0]], XiLaw("uniform", 1.0))
    cfg = SolverConfig(1000, 0.01, Case1(0.0), seed=seed)
    tr = empirical_tail_report(prob, NoiseModel.none(prob.d), cfg, 50, derive_rng(seed, "verify-tails"))
    q = tr.quantiles
    return [_report("tails[matching_pennies]", 50, q[0.9], 3.0 * q[0.5], tr.passed, seed,
                    q50=q[0.5], q90=q[0.9], q99=q[0.99])]


SUITE_FUNCS = {
    "inner_product": suite_inner_product,
    "smoothing": suite_smoothing,
    "second_moment": suite_second_moment,
    "bias": suite_bias,
    "tails": suite_tails,
}


def run_suite(name: str, seed: int = 0, override: NoiseOverride | None = None) -> list:
    """Run one named suite, or every suite for ``name="all"``."""
    if name == "all":
        names = SUITES
    elif name in SUITE_FUNCS:
        names = (name,)
    else:
        raise KeyError(f"unknown suite {name!r}; choose from all, {', '.join(SUITES)}")
    out = []
    for n in names:
        out.extend(SUITE_FUNCS[n](seed, override=override))
    return out


REPORT_COLUMNS = ("lemma_id", "n_samples", "statistic", "bound", "margin", "passed", "seed")


def write_reports(path, reports) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=REPORT_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in reports:
            row = r.row()
            w.writerow({k: (repr(row[k]) if isinstance(row[k], float) else row[k]) for k in REPORT_COLUMNS})
