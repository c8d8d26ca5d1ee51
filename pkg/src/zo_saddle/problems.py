"""Convex-concave test problems with stochastic payoffs and exact gap oracles.

Every problem evaluates ``f(x, y, xi)`` on batches: ``x`` of shape ``(..., dx)``,
``y`` of shape ``(..., dy)`` and ``xi`` of shape ``(...)``.  Passing
``xi=None`` evaluates the expectation ``f(x, y) = E f(x, y, xi)``.  The
formulas are defined on all of ``R^d``, so the estimator may evaluate them
slightly outside the feasible set.

The stochastic part is always ``xi * x^T E y`` with a fixed matrix ``E`` of unit
operator norm and a scalar, zero-mean ``xi`` (bounded uniform or symmetric
Pareto).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DimensionMismatch, NoGapOracle
from .geometry import Box, Domain, EuclideanBall, Simplex
from .streams import derive_rng


@dataclass(frozen=True)
class GrowthSpec:
    r: float
    mu_r: float

    def __post_init__(self):
        if self.r < 1:
            raise ValueError("growth exponent r must be >= 1")
        if self.mu_r <= 0:
            raise ValueError("growth modulus must be positive")


@dataclass(frozen=True)
class XiLaw:
    """Scalar zero-mean payoff noise ``xi = amplitude * s``.

    ``kind="uniform"``: ``s ~ U[-1, 1]``.
    ``kind="pareto"``: ``s = sign * P`` with ``P`` Pareto(alpha) on ``[1, inf)``.
    """

    kind: str = "none"
    amplitude: float = 0.0
    alpha: float = 2.0

    def __post_init__(self):
        if self.kind not in ("none", "uniform", "pareto"):
            raise ValueError(f"unknown xi law {self.kind!r}")
        if self.amplitude < 0:
            raise ValueError("noise amplitude must be non-negative")
        if self.kind == "pareto" and self.alpha <= 1:
            raise ValueError("pareto tail index must exceed 1 for a finite mean")

    @property
    def active(self) -> bool:
        return self.kind != "none" and self.amplitude > 0

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.kind == "uniform":
            return self.amplitude * rng.uniform(-1.0, 1.0, size)
        if self.kind == "pareto":
            mag = 1.0 + rng.pareto(self.alpha, size)
            sign = np.where(rng.random(size) < 0.5, -1.0, 1.0)
            return self.amplitude * sign * mag
        return np.zeros(size)

    def abs_moment(self, p: float) -> float:
        """``E |xi|^p`` (``inf`` when the moment does not exist)."""
        if not self.active:
            return 0.0
        if self.kind == "uniform":
            return self.amplitude ** p / (p + 1.0)
        if p >= self.alpha:
            return math.inf
        return self.amplitude ** p * self.alpha / (self.alpha - p)


NO_XI = XiLaw()


@dataclass(eq=False)
class SaddleProblem:
    """``min_x max_y E f(x, y, xi)`` over ``x_domain x y_domain``.

    ``M2`` bounds the root mean square of the Lipschitz modulus ``M2(xi)``
    (w.r.t. the Euclidean norm on ``Z``); ``M2_tilde(kappa)`` bounds its
    ``(1 + kappa)``-th moment.
    """

    name: str
    x_domain: Domain
    y_domain: Optional[Domain]
    f: Callable
    lipschitz_of_xi: Callable
    xi_law: XiLaw = NO_XI
    gap_oracle: Optional[Callable] = None
    solution: Optional[np.ndarray] = None
    growth: Optional[GrowthSpec] = None

    @property
    def dx(self) -> int:
        return self.x_domain.dim

    @property
    def dy(self) -> int:
        return 0 if self.y_domain is None else self.y_domain.dim

    @property
    def d(self) -> int:
        return self.dx + self.dy

    @property
    def M2(self) -> float:
        return self._moment_bound(2.0)

    def M2_tilde(self, kappa: float) -> float:
        return self._moment_bound(1.0 + kappa)

    def _moment_bound(self, p: float) -> float:
        # M2(xi) = base + slope * |xi|; Minkowski gives ||M2(xi)||_p <= base + slope ||xi||_p
        base = float(self.lipschitz_of_xi(0.0))
        slope = float(self.lipschitz_of_xi(1.0)) - base
        return base + slope * self.xi_law.abs_moment(p) ** (1.0 / p)

    def split(self, z):
        z = np.asarray(z, dtype=float)
        if z.shape[-1] != self.d:
            raise DimensionMismatch(f"point has dimension {z.shape[-1]}, problem has {self.d}")
        return z[..., : self.dx], z[..., self.dx:]

    def value(self, z, xi=None) -> np.ndarray:
        x, y = self.split(z)
        return self.f(x, y, xi)

    def sample_xi(self, rng: np.random.Generator, size) -> np.ndarray:
        return self.xi_law.sample(rng, size)

    def contains(self, z, tol: float = 1e-9):
        x, y = self.split(z)
        ok = np.asarray(self.x_domain.contains(x, tol))
        if self.y_domain is not None:
            ok = ok & np.asarray(self.y_domain.contains(y, tol))
        return ok

    def sample_point(self, rng: np.random.Generator, size=None) -> np.ndarray:
        x = self.x_domain.sample(rng, size)
        if self.y_domain is None:
            return x
        return np.concatenate([x, self.y_domain.sample(rng, size)], axis=-1)


def duality_gap(problem: SaddleProblem, z) -> np.ndarray | float:
    """``max_y f(x, y) - min_x f(x, y)`` at ``z = (x, y)``, computed exactly."""
    if problem.gap_oracle is None:
        raise NoGapOracle(f"problem {problem.name!r} has no closed-form best response")
    x, y = problem.split(z)
    gap = np.maximum(problem.gap_oracle(x, y), 0.0)
    return float(gap) if np.ndim(gap) == 0 else gap


def _bilinear(x, M, y):
    return np.einsum("...i,...i->...", x @ M, y)


def _default_E(dx: int, dy: int, seed: int) -> np.ndarray:
    rng = derive_rng(seed, "payoff-noise-matrix")
    E = rng.choice([-1.0, 1.0], size=(dx, dy))
    return E / np.linalg.norm(E, 2)


def _xi_term(xi, x, E, y):
    if xi is None:
        return 0.0
    return np.asarray(xi) * _bilinear(x, E, y)


def matrix_game(A, xi_law: XiLaw = NO_XI, E=None, seed: int = 0) -> SaddleProblem:
    """``f(x, y, xi) = x^T (A + xi E) y`` on a pair of probability simplices."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.ndim != 2 or not np.all(np.isfinite(A)):
        raise DimensionMismatch("payoff matrix must be a finite 2-d array")
    dx, dy = A.shape
    E = _default_E(dx, dy, seed) if E is None else np.asarray(E, dtype=float)
    if E.shape != A.shape:
        raise DimensionMismatch("noise matrix must have the shape of A")
    norm_A = float(np.linalg.norm(A, 2))
    norm_E = float(np.linalg.norm(E, 2))
    radius = math.sqrt(2.0)  # sqrt(max||x||^2 + max||y||^2) on two simplices

    def f(x, y, xi=None):
        return _bilinear(x, A, y) + _xi_term(xi, x, E, y)

    def gap(x, y):
        return np.max(x @ A, axis=-1) - np.min(y @ A.T, axis=-1)

    def lip(xi):
        return radius * (norm_A + norm_E * np.abs(xi))

    solution = None
    if A.shape == (2, 2) and np.allclose(A, [[1, -1], [-1, 1]]):
        solution = np.full(4, 0.5)
    return SaddleProblem("matrix_game", Simplex(dx), Simplex(dy), f, lip, xi_law, gap, solution)


def _ball_best(norm_w, radius, mu):
    """``max_{||u|| <= radius} <w, u> - mu/2 ||u||^2`` as a function of ``||w||``."""
    if mu == 0:
        return radius * norm_w
    inside = norm_w <= mu * radius
    return np.where(inside, norm_w ** 2 / (2 * mu), radius * norm_w - 0.5 * mu * radius ** 2)


def bilinear_ball_game(A, b=None, c=None, rx: float = 1.0, ry: float = 1.0, mu: float = 0.0,
                       xi_law: XiLaw = NO_XI, E=None, seed: int = 0,
                       solution=None, growth: GrowthSpec | None = None) -> SaddleProblem:
    """``x^T (A + xi E) y + b^T x - c^T y + mu/2 ||x||^2 - mu/2 ||y||^2`` on origin-centred balls.

    The gap is closed-form because each best response maximises a concave
    quadratic over a ball.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    dx, dy = A.shape
    b = np.zeros(dx) if b is None else np.asarray(b, dtype=float)
    c = np.zeros(dy) if c is None else np.asarray(c, dtype=float)
    if b.shape != (dx,) or c.shape != (dy,):
        raise DimensionMismatch("linear terms must match the matrix dimensions")
    if rx <= 0 or ry <= 0:
        raise ValueError("ball radii must be positive")
    if mu < 0:
        raise ValueError("regularisation mu must be non-negative")
    E = _default_E(dx, dy, seed) if E is None else np.asarray(E, dtype=float)
    if E.shape != A.shape:
        raise DimensionMismatch("noise matrix must have the shape of A")
    norm_A = float(np.linalg.norm(A, 2))
    norm_E = float(np.linalg.norm(E, 2))
    R = math.hypot(rx, ry)
    lin = math.sqrt(float(b @ b + c @ c))

    def f(x, y, xi=None):
        out = _bilinear(x, A, y) + (x @ b - y @ c)
        if mu:
            out = out + 0.5 * mu * (np.einsum("...i,...i->...", x, x) - np.einsum("...i,...i->...", y, y))
        if xi is None:
            return out
        return out + _xi_term(xi, x, E, y)

    def gap(x, y):
        w = x @ A - c
        v = y @ A.T + b
        up = _ball_best(np.linalg.norm(w, axis=-1), ry, mu) + x @ b + 0.5 * mu * np.sum(x * x, -1)
        down = -_ball_best(np.linalg.norm(v, axis=-1), rx, mu) - y @ c - 0.5 * mu * np.sum(y * y, -1)
        return up - down

    def lip(xi):
        return R * (norm_A + mu + norm_E * np.abs(xi)) + lin

    if solution is None and not b.any() and not c.any():
        solution = np.zeros(dx + dy)
    return SaddleProblem("bilinear_ball_game", EuclideanBall.origin(dx, rx), EuclideanBall.origin(dy, ry),
                         f, lip, xi_law, gap, None if solution is None else np.asarray(solution, float), growth)


def strongly_monotone_ball_game(A, mu: float, x_star, y_star, rx: float = 1.0, ry: float = 1.0,
                                xi_law: XiLaw = NO_XI, E=None, seed: int = 0) -> SaddleProblem:
    """Regularised ball game whose saddle point is the interior point ``(x_star, y_star)``.

    The linear terms are chosen so that both partial gradients vanish at the
    requested point; the r-growth condition then holds with ``r = 2`` and
    ``mu_r = mu``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    x_star = np.asarray(x_star, dtype=float)
    y_star = np.asarray(y_star, dtype=float)
    if mu <= 0:
        raise ValueError("strong monotonicity needs mu > 0")
    if np.linalg.norm(x_star) >= rx or np.linalg.norm(y_star) >= ry:
        raise ValueError("saddle point must be interior to the balls")
    b = -(A @ y_star) - mu * x_star
    c = A.T @ x_star - mu * y_star
    p = bilinear_ball_game(A, b, c, rx, ry, mu, xi_law, E, seed,
                           solution=np.concatenate([x_star, y_star]), growth=GrowthSpec(2.0, mu))
    p.name = "strongly_monotone_ball_game"
    return p


def abs_problem_1d() -> SaddleProblem:
    """``f(x) = |x|`` on ``[-1, 1]`` with an empty y-block."""

    def f(x, y, xi=None):
        return np.abs(x[..., 0])

    def gap(x, y):
        return np.abs(x[..., 0])

    def lip(xi):
        return 1.0

    return SaddleProblem("abs_1d", Box([-1.0], [1.0]), None, f, lip, NO_XI, gap,
                         np.zeros(1), GrowthSpec(1.0, 2.0))


def linear_problem(coef, radius: float = 1.0) -> SaddleProblem:
    """``f(x) = <coef, x>`` on the origin ball of the given radius (empty y-block)."""
    coef = np.atleast_1d(np.asarray(coef, dtype=float))
    norm_c = float(np.linalg.norm(coef))

    def f(x, y, xi=None):
        return x @ coef

    def gap(x, y):
        return x @ coef + radius * norm_c

    def lip(xi):
        return norm_c

    return SaddleProblem("linear", EuclideanBall.origin(coef.size, radius), None, f, lip, NO_XI, gap)


def random_matrix_game(dx: int, dy: int, seed: int = 0, xi_law: XiLaw = NO_XI) -> SaddleProblem:
    """Matrix game with i.i.d. standard normal payoffs scaled to unit operator norm."""
    rng = derive_rng(seed, "random-matrix-game")
    A = rng.standard_normal((dx, dy))
    A /= np.linalg.norm(A, 2)
    return matrix_game(A, xi_law, seed=seed)


def random_ball_game(dx: int, dy: int, seed: int = 0, rx: float = 1.0, ry: float = 1.0,
                     xi_law: XiLaw = NO_XI) -> SaddleProblem:
    """Ball game with a random orthogonal-like coupling matrix of unit operator norm.

    ``b`` and ``c`` are random vectors of norm 0.5, which puts the saddle
    point at a dimension-independent distance from the origin.
    """
    rng = derive_rng(seed, "random-ball-game")
    A = rng.standard_normal((dx, dy))
    u, _, vt = np.linalg.svd(A, full_matrices=False)
    A = u @ vt
    b = rng.standard_normal(dx)
    c = rng.standard_normal(dy)
    b *= 0.5 / np.linalg.norm(b)
    c *= 0.5 / np.linalg.norm(c)
    return bilinear_ball_game(A, b, c, rx, ry, xi_law=xi_law, seed=seed)
