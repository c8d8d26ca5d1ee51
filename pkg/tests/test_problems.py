import itertools

import numpy as np
import pytest

from zo_saddle.errors import DimensionMismatch, NoGapOracle
from zo_saddle.problems import (SaddleProblem, XiLaw, abs_problem_1d, bilinear_ball_game, duality_gap,
                                linear_problem, matrix_game, random_ball_game, random_matrix_game,
                                strongly_monotone_ball_game)
from zo_saddle.geometry import EuclideanBall

PENNIES = [[1.0, -1.0], [-1.0, 1.0]]


def _registry():
    return {
        "pennies": matrix_game(PENNIES, XiLaw("uniform", 1.0)),
        "random_matrix": random_matrix_game(3, 4, seed=2, xi_law=XiLaw("uniform", 0.5)),
        "ball": bilinear_ball_game(np.eye(2), [0.3, -0.1], [0.2, 0.0], 1.0, 0.5, 0.0, XiLaw("uniform", 2.0)),
        "random_ball": random_ball_game(3, 2, seed=4),
        "strongly_monotone": strongly_monotone_ball_game(np.eye(2), 1.0, [0.54, 0.72], [-0.9, 0.0]),
        "abs": abs_problem_1d(),
        "linear": linear_problem([0.6, -0.8], 2.0),
    }


PROBLEMS = _registry()


def _gap_bruteforce_matrix(A, x, y):
    # vertex enumeration: best responses over simplices sit at vertices
    A = np.asarray(A)
    up = max(x @ A[:, j] for j in range(A.shape[1]))
    down = min(A[i] @ y for i in range(A.shape[0]))
    return up - down


def test_matrix_game_gap_examples():
    p = matrix_game(PENNIES)
    assert duality_gap(p, [0.5, 0.5, 0.5, 0.5]) == 0.0
    assert duality_gap(p, [1.0, 0.0, 1.0, 0.0]) == 2.0
    assert duality_gap(p, [1.0, 0.0, 0.5, 0.5]) == 1.0
    zero = matrix_game(np.zeros((3, 2)))
    assert duality_gap(zero, [0.2, 0.3, 0.5, 0.9, 0.1]) == 0.0


def test_matrix_game_gap_matches_vertex_enumeration(rng):
    A = rng.standard_normal((4, 3))
    p = matrix_game(A)
    for _ in range(50):
        z = p.sample_point(rng)
        assert duality_gap(p, z) == pytest.approx(_gap_bruteforce_matrix(A, z[:4], z[4:]), abs=1e-12)


def test_ball_game_gap_examples():
    p = bilinear_ball_game(np.eye(2))
    assert duality_gap(p, np.zeros(4)) == 0.0
    assert duality_gap(p, [1.0, 0.0, 0.0, 0.0]) == pytest.approx(1.0, abs=1e-15)
    q = bilinear_ball_game(np.zeros((2, 2)), b=[1.0, 0.0])
    assert duality_gap(q, [-1.0, 0.0, 0.0, 0.0]) == pytest.approx(0.0, abs=1e-15)


def test_ball_game_gap_matches_sampled_best_responses(rng):
    # independent route: dense sampling of the two balls bounds the gap from below
    p = bilinear_ball_game(rng.standard_normal((2, 2)), [0.3, -0.2], [0.1, 0.4], 1.0, 0.8, mu=0.5)
    angles = np.linspace(0, 2 * np.pi, 721)
    radii = np.linspace(0, 1, 201)
    grid = (radii[:, None, None] * np.stack([np.cos(angles), np.sin(angles)], -1)[None]).reshape(-1, 2)
    for _ in range(5):
        z = p.sample_point(rng)
        x, y = z[:2], z[2:]
        up = p.value(np.concatenate([np.tile(x, (len(grid), 1)), 0.8 * grid], axis=1)).max()
        down = p.value(np.concatenate([grid, np.tile(y, (len(grid), 1))], axis=1)).min()
        assert duality_gap(p, z) >= up - down - 1e-12
        assert duality_gap(p, z) <= up - down + 1e-4


def test_abs_problem_examples():
    p = abs_problem_1d()
    assert p.value([0.5]) == 0.5
    assert p.value([-0.3]) == 0.3
    assert np.array_equal(p.solution, [0.0])
    assert p.dy == 0


@pytest.mark.parametrize("name", sorted(PROBLEMS))
def test_gap_nonnegative_and_zero_at_solution(name, rng):
    p = PROBLEMS[name]
    gaps = duality_gap(p, p.sample_point(rng, 500))
    assert np.all(gaps >= 0)
    if p.solution is not None:
        assert duality_gap(p, p.solution) <= 1e-12


@pytest.mark.parametrize("name", sorted(PROBLEMS))
def test_convex_concave(name, rng):
    p = PROBLEMS[name]
    n = 1000
    z1, z2, z3 = p.sample_point(rng, n), p.sample_point(rng, n), p.sample_point(rng, n)
    lam = rng.random(n)[:, None]
    xi = p.sample_xi(rng, n) if p.xi_law.active else None
    dx = p.dx

    def mix(a, b):
        return lam * a + (1 - lam) * b

    # convexity in x with y from z3
    xs = [np.concatenate([z[:, :dx], z3[:, dx:]], axis=1) for z in (z1, z2)]
    lhs = p.value(mix(*xs), xi)
    rhs = lam[:, 0] * p.value(xs[0], xi) + (1 - lam[:, 0]) * p.value(xs[1], xi)
    assert np.all(lhs <= rhs + 1e-9)
    if p.dy:
        ys = [np.concatenate([z3[:, :dx], z[:, dx:]], axis=1) for z in (z1, z2)]
        lhs = p.value(mix(*ys), xi)
        rhs = lam[:, 0] * p.value(ys[0], xi) + (1 - lam[:, 0]) * p.value(ys[1], xi)
        assert np.all(lhs >= rhs - 1e-9)


@pytest.mark.parametrize("name", sorted(PROBLEMS))
def test_lipschitz_per_realisation(name, rng):
    p = PROBLEMS[name]
    n = 1000
    z1, z2 = p.sample_point(rng, n), p.sample_point(rng, n)
    xi = p.sample_xi(rng, n) if p.xi_law.active else np.zeros(n)
    diff = np.abs(p.value(z1, xi) - p.value(z2, xi))
    assert np.all(diff <= p.lipschitz_of_xi(xi) * np.linalg.norm(z1 - z2, axis=1) + 1e-9)


def test_M2_bounds_root_mean_square(rng):
    p = PROBLEMS["pennies"]
    xi = p.sample_xi(rng, 400_000)
    assert np.sqrt(np.mean(p.lipschitz_of_xi(xi) ** 2)) <= p.M2


def test_growth_condition_strongly_monotone(rng):
    p = PROBLEMS["strongly_monotone"]
    g = p.growth
    z = p.sample_point(rng, 2000)
    lhs = 0.5 * g.mu_r * np.linalg.norm(z - p.solution, axis=1) ** g.r
    assert np.all(lhs <= duality_gap(p, z) + 1e-12)


def test_pareto_moments():
    law = XiLaw("pareto", 0.2, 1.55)
    assert np.isinf(law.abs_moment(2.0))
    assert np.isfinite(law.abs_moment(1.5))
    p = bilinear_ball_game(np.eye(2), xi_law=law)
    assert np.isinf(p.M2)
    assert np.isfinite(p.M2_tilde(0.5))


def test_errors():
    with pytest.raises(DimensionMismatch):
        bilinear_ball_game(np.eye(2), b=[1.0, 0.0, 0.0])
    with pytest.raises(DimensionMismatch):
        matrix_game(PENNIES).value(np.zeros(3))
    p = SaddleProblem("no_gap", EuclideanBall.origin(1), None, lambda x, y, xi=None: x[..., 0], lambda xi: 1.0)
    with pytest.raises(NoGapOracle):
        duality_gap(p, [0.0])
