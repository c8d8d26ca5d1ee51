import csv
import math

import numpy as np
import pytest

from zo_saddle.estimator import estimate_gradient
from zo_saddle.noise import NoiseModel
from zo_saddle.problems import XiLaw, abs_problem_1d, linear_problem, matrix_game, random_ball_game
from zo_saddle.solver import Case1, Manual, SolverConfig
from zo_saddle.streams import derive_rng
from zo_saddle.verify import (NoiseOverride, check_estimator_bias, check_inner_product_bound,
                              check_second_moment, check_smoothing_gap, empirical_tail_report, run_suite,
                              write_reports)


def _sphere_abs_coordinate_mean(d):
    # E|e_1| for e uniform on the unit sphere of R^d
    return math.gamma(d / 2) / (math.sqrt(math.pi) * math.gamma((d + 1) / 2))


def test_inner_product_examples(rng):
    rep = check_inner_product_bound(1, 10_000, 3, rng)
    assert rep.passed and abs(rep.margin) <= 1e-12
    rep = check_inner_product_bound(4, 400_000, 1, rng, directions=[[1.0, 0.0, 0.0, 0.0]])
    assert rep.passed
    assert rep.statistic == pytest.approx(_sphere_abs_coordinate_mean(4), abs=3e-3)
    assert _sphere_abs_coordinate_mean(4) == pytest.approx(0.4244, abs=1e-4)
    rep = check_inner_product_bound(5, 1000, 1, rng, directions=[np.zeros(5)])
    assert rep.passed and rep.statistic == 0.0 and rep.bound == 0.0


def test_smoothing_examples(rng):
    absf = abs_problem_1d()
    assert check_smoothing_gap(absf, 0.0, 4, 10, rng).statistic == 0.0
    tau = 0.2
    rep = check_smoothing_gap(absf, tau, 1, 400_000, rng, points=[[0.0]])
    assert rep.passed
    assert rep.statistic == pytest.approx(tau / 2, abs=3e-3)
    lin = linear_problem([0.3, -0.4], 1.0)
    rep = check_smoothing_gap(lin, 0.1, 3, 100_000, rng)
    assert rep.passed and rep.statistic < 1e-3


def _linear_family(d):
    c = np.zeros(d)
    c[0] = 1.0
    return linear_problem(c)


def test_second_moment_examples(rng):
    rep = check_second_moment(_linear_family, None, 0.05, (2,), 200_000, rng)
    assert rep.passed and rep.details["moments"][0] <= 8 * 2
    # doubling d roughly doubles E||g||^2 for a linear function
    rep = check_second_moment(_linear_family, None, 0.05, (8, 16), 200_000, rng)
    m8, m16 = rep.details["moments"]
    assert 1.5 <= m16 / m8 <= 2.5


def test_second_moment_constant_function_with_bounded_noise(rng):
    tau, delta = 0.05, 0.02
    const = lambda d: linear_problem(np.zeros(d))
    for d in (2, 8):
        p = const(d)
        g = estimate_gradient(p, NoiseModel.bounded(delta, d, wavelength=tau, seed=1), np.zeros(d), tau, rng, 20_000).g
        assert np.all(np.sum(g * g, axis=1) <= d ** 2 * delta ** 2 / tau ** 2 + 1e-9)
    rep = check_second_moment(const, lambda d: NoiseModel.bounded(delta, d, wavelength=tau, seed=1), tau, (2, 8),
                              20_000, rng)
    assert rep.passed and rep.statistic <= 1.0 + 1e-12


def test_bias_examples(rng):
    p = random_ball_game(2, 2, seed=1, xi_law=XiLaw("uniform", 1.0))
    z = p.sample_point(rng)
    assert check_estimator_bias(p, NoiseModel.none(4), z, 0.1, 200_000, rng).passed
    rep = check_estimator_bias(p, NoiseModel.none(4), z, 0.1, 1000, rng, directions=[np.zeros(4)])
    assert rep.passed and rep.statistic == 0.0 and rep.bound == 0.0
    q = random_ball_game(2, 2, seed=1)
    tau, delta = 0.1, 0.01
    model = NoiseModel.bounded(delta, 4, wavelength=0.25 * tau, seed=3)
    R = rng.standard_normal((4, 4))
    rep = check_estimator_bias(q, model, q.sample_point(rng), tau, 200_000, rng, directions=R)
    assert rep.passed
    n = 200_000
    for r, dev, sigma in zip(R, rep.details["deviation"], rep.details["sigma"]):
        assert dev <= math.sqrt(4) * delta * np.linalg.norm(r) / tau * (1 + 3 / math.sqrt(n)) + 3 * sigma


def test_bias_detects_undeclared_noise(rng):
    q = random_ball_game(2, 2, seed=1)
    tau = 0.1
    z = q.sample_point(rng)
    # a ramp tilts the oracle by Delta / width along u, far beyond the declared envelope
    model = NoiseModel.ramp(1.0, 4, width=1.0, anchor=z, seed=3, declared_bound=0.01)
    u = model.direction * np.array([1.0, 1.0, -1.0, -1.0])
    rep = check_estimator_bias(q, model, z, tau, 200_000, rng, directions=[u])
    assert not rep.passed


def test_tail_report_examples(rng):
    p = matrix_game([[1.0, -1.0], [-1.0, 1.0]])
    rep = empirical_tail_report(p, NoiseModel.none(4), SolverConfig(50, 0.01, Manual(0.0)), 20, rng)
    assert len(set(rep.quantiles.values())) == 1 and rep.passed
    p = matrix_game([[1.0, -1.0], [-1.0, 1.0]], XiLaw("uniform", 1.0))
    rep = empirical_tail_report(p, NoiseModel.none(4), SolverConfig(1000, 0.01, Case1(0.0)), 50, rng)
    assert rep.ratio_90_50 <= 3.0 and rep.passed


def test_checks_are_reproducible():
    a = check_inner_product_bound(16, 20_000, 5, derive_rng(3, "t"))
    b = check_inner_product_bound(16, 20_000, 5, derive_rng(3, "t"))
    assert a == b
    assert run_suite("smoothing", seed=4) == run_suite("smoothing", seed=4)


def test_default_suites_pass():
    reports = run_suite("all", seed=7)
    assert len(reports) == 6 + 3 + 2 + 2 + 1
    assert all(r.passed for r in reports), [r.lemma_id for r in reports if not r.passed]


def test_forced_failure():
    reports = run_suite("bias", seed=7, override=NoiseOverride(delta=1.0, declared=0.01))
    assert not all(r.passed for r in reports)
    reports = run_suite("second_moment", seed=7, override=NoiseOverride(delta=1.0, declared=0.01))
    assert not all(r.passed for r in reports)


def test_unknown_suite():
    with pytest.raises(KeyError):
        run_suite("nope")


def test_write_reports(tmp_path):
    reports = run_suite("inner_product", seed=1)
    path = tmp_path / "checks.csv"
    write_reports(path, reports)
    rows = list(csv.DictReader(open(path)))
    assert [r["lemma_id"] for r in rows] == [r.lemma_id for r in reports]
    assert set(rows[0]) == {"lemma_id", "n_samples", "statistic", "bound", "margin", "passed", "seed"}
