"""Random directions, the two-point gradient estimator and randomized smoothing."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .noise import NoiseModel

MC_CHUNK = 65536


def sample_sphere(d: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Uniform draw(s) from the unit sphere in ``R^d`` (normalised Gaussians)."""
    if d < 1:
        raise ValueError("dimension must be >= 1")
    shape = (d,) if size is None else (size, d)
    eta = rng.standard_normal(shape)
    norm = np.linalg.norm(eta, axis=-1, keepdims=True)
    bad = norm[..., 0] < 1e-150
    while np.any(bad):
        # probability-zero event, redraw the offending rows
        eta[bad] = rng.standard_normal((int(np.sum(bad)), d)) if eta.ndim == 2 else rng.standard_normal(d)
        norm = np.linalg.norm(eta, axis=-1, keepdims=True)
        bad = norm[..., 0] < 1e-150
    return eta / norm


def sample_ball(d: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Uniform draw(s) from the unit Euclidean ball: sphere point scaled by ``U^(1/d)``."""
    e = sample_sphere(d, rng, size)
    u = rng.random(() if size is None else (size,))
    return e * np.power(u, 1.0 / d)[..., None]


def field_signs(dx: int, dy: int) -> np.ndarray:
    """``(+1, ..., +1, -1, ..., -1)``: maps a gradient to the saddle field ``(grad_x, -grad_y)``."""
    return np.concatenate([np.ones(dx), -np.ones(dy)])


def saddle_field(grad, dx: int) -> np.ndarray:
    grad = np.asarray(grad, dtype=float)
    return grad * field_signs(dx, grad.shape[-1] - dx)


class GradientEstimate(NamedTuple):
    g: np.ndarray
    e: np.ndarray
    coef: np.ndarray


def two_point_gradient(problem, model: NoiseModel, z, tau: float, e, xi=None) -> GradientEstimate:
    """``g = d / (2 tau) (phi(z + tau e, xi) - phi(z - tau e, xi)) (e_x, -e_y)``.

    Both oracle calls share the same ``xi``.  Works row-wise on batches.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    z = np.asarray(z, dtype=float)
    e = np.asarray(e, dtype=float)
    d = problem.d
    both = np.concatenate([np.atleast_2d(z + tau * e), np.atleast_2d(z - tau * e)])
    xi2 = None if xi is None else np.concatenate([np.atleast_1d(xi), np.atleast_1d(xi)])
    vals = problem.value(both, xi2) + model(both)
    half = vals.shape[0] // 2
    coef = d / (2.0 * tau) * (vals[:half] - vals[half:])
    g = coef[:, None] * e.reshape(-1, d) * field_signs(problem.dx, problem.dy)
    if z.ndim == 1 and e.ndim == 1:
        return GradientEstimate(g[0], e, coef[0])
    return GradientEstimate(g, e, coef)


def estimate_gradient(problem, model: NoiseModel, z, tau: float, rng: np.random.Generator,
                      size: int | None = None) -> GradientEstimate:
    """Draw ``e`` on the sphere and ``xi`` independently, then apply :func:`two_point_gradient`.

    With ``size`` given, returns ``size`` independent estimates at the same ``z``.
    """
    z = np.asarray(z, dtype=float)
    if size is not None:
        z = np.broadcast_to(z, (size, problem.d))
    e = sample_sphere(problem.d, rng, size)
    xi = problem.sample_xi(rng, () if size is None else (size,)) if problem.xi_law.active else None
    return two_point_gradient(problem, model, z, tau, e, xi)


def _chunks(n: int, chunk: int):
    done = 0
    while done < n:
        m = min(chunk, n - done)
        yield m
        done += m


def smooth_value(problem, z, tau: float, n_samples: int, rng: np.random.Generator,
                 chunk: int = MC_CHUNK) -> tuple[float, float]:
    """Monte-Carlo estimate of ``f^tau(z) = E f(z + tau u)``, ``u`` uniform in the unit ball.

    Returns ``(mean, standard error)``; ``tau = 0`` returns ``f(z)`` exactly.
    """
    if tau < 0 or n_samples < 1:
        raise ValueError("need tau >= 0 and n_samples >= 1")
    z = np.asarray(z, dtype=float)
    if tau == 0:
        return float(problem.value(z)), 0.0
    s1 = s2 = 0.0
    for m in _chunks(n_samples, chunk):
        vals = problem.value(z + tau * sample_ball(problem.d, rng, m))
        s1 += float(np.sum(vals))
        s2 += float(np.sum(vals * vals))
    mean = s1 / n_samples
    var = max(s2 / n_samples - mean * mean, 0.0)
    return mean, float(np.sqrt(var / n_samples))


def smooth_gradient_oracle(problem, z, tau: float, n_samples: int, rng: np.random.Generator,
                           chunk: int = MC_CHUNK, directions=None):
    """Monte-Carlo estimate of ``grad f^tau(z)`` from the one-point sphere identity.

    Uses ``E[(d / tau) (f(z + tau e) - f(z)) e]``; subtracting ``f(z)`` changes
    nothing in expectation since ``E e = 0`` but cuts the variance.  Returns the
    plain gradient (no sign flip on the y-block) and its componentwise
    standard error.  With ``directions`` (rows ``r``) the second output is the
    standard error of each projection ``<grad, r>`` instead.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    z = np.asarray(z, dtype=float)
    d = problem.d
    R = None if directions is None else np.atleast_2d(np.asarray(directions, dtype=float))
    f0 = float(problem.value(z))
    s1 = np.zeros(d)
    s2 = np.zeros(d) if R is None else np.zeros(R.shape[0])
    for m in _chunks(n_samples, chunk):
        e = sample_sphere(d, rng, m)
        w = (d / tau) * (problem.value(z + tau * e) - f0)[:, None] * e
        s1 += w.sum(axis=0)
        t = w if R is None else w @ R.T
        s2 += (t * t).sum(axis=0)
    mean = s1 / n_samples
    proj = mean if R is None else R @ mean
    var = np.maximum(s2 / n_samples - proj * proj, 0.0)
    return mean, np.sqrt(var / n_samples)
