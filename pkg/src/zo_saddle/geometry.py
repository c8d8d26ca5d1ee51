"""Proximal setups: domains, prox-functions, Bregman divergences and prox maps.

Two standard setups are provided:

* ``euclidean`` (p = 2): ``omega(z) = 0.5 * ||z - c||_2^2`` with ``c`` the
  domain's prox-center, on a ball, box or simplex.  The prox map is a
  gradient step followed by Euclidean projection.
* ``entropy`` (p = 1): ``omega(z) = sum z_i log z_i`` on the probability
  simplex.  The prox map is the multiplicative-weights update.

plus the heavy-tail geometry ``omega(z) = K_q^(1/k) k/(1+k) ||z - c||_2^((1+k)/k)``
on a product of Euclidean balls.

All point arguments may be single vectors of shape ``(d,)`` or batches of
shape ``(S, d)``; every operation acts row-wise on the last axis.

Divergence convention: ``bregman(z, v) = omega(z) - omega(v) - <grad omega(v), z - v>``,
i.e. the divergence of ``z`` measured from the base point ``v``.  The prox step
from ``z`` minimises ``bregman(v, z) + <gamma g, v>`` over ``v``, which is the
usual mirror-descent update.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, DomainViolation, NumericalOverflow, UnboundedDomain

DOMAIN_TOL = 1e-9
MASS_FLOOR = 1e-12
# sqrt(E ||e||_inf^4) <= A_INF_CONST * log(d + 1) / d for e uniform on the sphere
A_INF_CONST = 2.0
_TINY = np.finfo(float).tiny


def _as_float_array(z) -> np.ndarray:
    return np.asarray(z, dtype=float)


# --------------------------------------------------------------------------- #
# domains
# --------------------------------------------------------------------------- #


class Domain:
    """Compact convex set with a Euclidean projection."""

    dim: int

    def project(self, z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def contains(self, z, tol: float = DOMAIN_TOL) -> np.ndarray | bool:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        raise NotImplementedError

    def center(self) -> np.ndarray:
        raise NotImplementedError

    def max_distance(self) -> float:
        """Largest Euclidean distance between two points of the set."""
        raise NotImplementedError

    def max_norm(self) -> float:
        """Largest Euclidean norm of a point of the set."""
        raise NotImplementedError

    def check(self, z, name: str = "point") -> None:
        z = _as_float_array(z)
        if z.shape[-1] != self.dim:
            raise DimensionMismatch(f"{name} has dimension {z.shape[-1]}, domain has {self.dim}")
        if not np.all(self.contains(z)):
            raise DomainViolation(f"{name} lies outside {self!r}")


@dataclass(frozen=True, eq=False)
class EuclideanBall(Domain):
    center_: np.ndarray
    radius: float

    def __post_init__(self):
        c = np.atleast_1d(_as_float_array(self.center_)).copy()
        if c.ndim != 1 or c.size < 1:
            raise ValueError("ball center must be a non-empty vector")
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise ValueError("ball radius must be positive and finite")
        c.setflags(write=False)
        object.__setattr__(self, "center_", c)
        object.__setattr__(self, "radius", float(self.radius))

    @classmethod
    def origin(cls, dim: int, radius: float = 1.0) -> "EuclideanBall":
        return cls(np.zeros(dim), radius)

    @property
    def dim(self) -> int:
        return self.center_.size

    def project(self, z):
        z = _as_float_array(z)
        diff = z - self.center_
        norm = np.sqrt(np.einsum("...i,...i->...", diff, diff))[..., None]
        scale = np.minimum(1.0, self.radius / np.maximum(norm, _TINY))
        return self.center_ + diff * scale

    def contains(self, z, tol=DOMAIN_TOL):
        z = _as_float_array(z)
        return np.linalg.norm(z - self.center_, axis=-1) <= self.radius + tol

    def sample(self, rng, size=None):
        from .estimator import sample_ball

        return self.center_ + self.radius * sample_ball(self.dim, rng, size)

    def center(self):
        return self.center_.copy()

    def max_distance(self):
        return 2.0 * self.radius

    def max_norm(self):
        return float(np.linalg.norm(self.center_)) + self.radius

    def __repr__(self):
        return f"EuclideanBall(dim={self.dim}, radius={self.radius})"


@dataclass(frozen=True, eq=False)
class Simplex(Domain):
    """Probability simplex ``{z >= 0, sum z = 1}`` in ``R^dim``."""

    dim: int

    def __post_init__(self):
        if int(self.dim) < 1:
            raise ValueError("simplex dimension must be >= 1")
        object.__setattr__(self, "dim", int(self.dim))

    def project(self, z):
        # sort-based projection (Held, Wolfe, Crowder; Duchi et al.), vectorised over rows
        v = _as_float_array(z)
        u = -np.sort(-v, axis=-1)
        css = np.cumsum(u, axis=-1) - 1.0
        idx = np.arange(1, self.dim + 1)
        rho = np.count_nonzero(u - css / idx > 0, axis=-1)
        rho = np.maximum(rho, 1)
        theta = np.take_along_axis(css, (rho - 1)[..., None], axis=-1) / rho[..., None]
        return np.maximum(v - theta, 0.0)

    def contains(self, z, tol=DOMAIN_TOL):
        z = _as_float_array(z)
        return np.all(z >= -tol, axis=-1) & (np.abs(z.sum(axis=-1) - 1.0) <= tol * max(1, self.dim))

    def sample(self, rng, size=None):
        return rng.dirichlet(np.ones(self.dim), size=size)

    def center(self):
        return np.full(self.dim, 1.0 / self.dim)

    def max_distance(self):
        return math.sqrt(2.0) if self.dim > 1 else 0.0

    def max_norm(self):
        return 1.0


@dataclass(frozen=True, eq=False)
class Box(Domain):
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(_as_float_array(self.lo)).copy()
        hi = np.atleast_1d(_as_float_array(self.hi)).copy()
        if lo.shape != hi.shape or lo.ndim != 1 or lo.size < 1:
            raise ValueError("box bounds must be vectors of equal length")
        if not np.all(lo < hi):
            raise ValueError("box requires lo < hi componentwise")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self):
        return self.lo.size

    @property
    def bounded(self) -> bool:
        return bool(np.all(np.isfinite(self.lo)) and np.all(np.isfinite(self.hi)))

    def project(self, z):
        return np.clip(_as_float_array(z), self.lo, self.hi)

    def contains(self, z, tol=DOMAIN_TOL):
        z = _as_float_array(z)
        return np.all((z >= self.lo - tol) & (z <= self.hi + tol), axis=-1)

    def sample(self, rng, size=None):
        if not self.bounded:
            raise UnboundedDomain("cannot sample uniformly from an unbounded box")
        shape = (self.dim,) if size is None else (size, self.dim)
        return self.lo + (self.hi - self.lo) * rng.random(shape)

    def center(self):
        if not self.bounded:
            return np.clip(np.zeros(self.dim), self.lo, self.hi)
        return 0.5 * (self.lo + self.hi)

    def max_distance(self):
        if not self.bounded:
            raise UnboundedDomain("box is unbounded")
        return float(np.linalg.norm(self.hi - self.lo))

    def max_norm(self):
        if not self.bounded:
            raise UnboundedDomain("box is unbounded")
        return float(np.linalg.norm(np.maximum(np.abs(self.lo), np.abs(self.hi))))

    def __repr__(self):
        return f"Box(dim={self.dim})"


# --------------------------------------------------------------------------- #
# standard setups
# --------------------------------------------------------------------------- #


def a_q_squared(p_norm: int, d: int) -> float:
    """Declared bound ``a_q^2`` on ``sqrt(E ||e||_q^4)`` for ``e`` uniform on the d-sphere.

    For p = 2 (q = 2) this is exactly 1.  For p = 1 (q = inf) we use
    ``min(1, 2 log(d + 1) / d)``, which dominates the true moment for every d.
    """
    if d < 1:
        raise ValueError("dimension must be >= 1")
    if p_norm == 2:
        return 1.0
    if p_norm == 1:
        return min(1.0, A_INF_CONST * math.log(d + 1) / d)
    raise ValueError(f"unsupported p-norm {p_norm}")


def dual_norm(g: np.ndarray, p_norm: int) -> np.ndarray:
    return np.linalg.norm(g, ord=2 if p_norm == 2 else np.inf, axis=-1)


@dataclass(frozen=True, eq=False)
class ProxSetup:
    """Norm / prox-function pair on a single domain.

    ``kind`` is ``"euclidean"`` (p = 2, any domain) or ``"entropy"``
    (p = 1, simplex only).
    """

    domain: Domain
    kind: str = "euclidean"

    def __post_init__(self):
        if self.kind not in ("euclidean", "entropy"):
            raise ValueError(f"unknown prox setup kind {self.kind!r}")
        if self.kind == "entropy" and not isinstance(self.domain, Simplex):
            raise ValueError("the entropy setup is only defined on the simplex")

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def p_norm(self) -> int:
        return 2 if self.kind == "euclidean" else 1

    @property
    def a_q_sq(self) -> float:
        return a_q_squared(self.p_norm, self.dim)

    @property
    def diameter(self) -> float:
        return diameter(self)

    def prox_center(self) -> np.ndarray:
        return self.domain.center()

    def norm(self, z) -> np.ndarray:
        return np.linalg.norm(_as_float_array(z), ord=self.p_norm, axis=-1)

    def omega(self, z) -> np.ndarray:
        z = _as_float_array(z)
        if self.kind == "euclidean":
            return 0.5 * np.sum((z - self.domain.center()) ** 2, axis=-1)
        zc = np.maximum(z, 0.0)
        return np.sum(np.where(zc > 0, zc * np.log(np.where(zc > 0, zc, 1.0)), 0.0), axis=-1)

    def grad_omega(self, z) -> np.ndarray:
        z = _as_float_array(z)
        if self.kind == "euclidean":
            return z - self.domain.center()
        return np.log(np.maximum(z, MASS_FLOOR)) + 1.0

    def bregman(self, z, v) -> np.ndarray:
        return bregman(self, z, v)

    def prox_step(self, z, g, gamma) -> np.ndarray:
        if self.kind == "euclidean" and isinstance(gamma, float):
            # hot path of the solver loop: plain projected step
            return self.domain.project(z - gamma * g)
        return prox_step(self, z, g, gamma)


def euclidean_setup(domain: Domain) -> ProxSetup:
    return ProxSetup(domain, "euclidean")


def entropy_setup(dim: int) -> ProxSetup:
    return ProxSetup(Simplex(dim), "entropy")


def bregman(setup: ProxSetup, z, v) -> np.ndarray | float:
    """``V_z(v) = omega(z) - omega(v) - <grad omega(v), z - v>``.

    Raises :class:`DomainViolation` when either point leaves the domain by more
    than ``DOMAIN_TOL``.
    """
    z = _as_float_array(z)
    v = _as_float_array(v)
    setup.domain.check(z, "z")
    setup.domain.check(v, "v")
    if setup.kind == "euclidean":
        out = 0.5 * np.sum((z - v) ** 2, axis=-1)
    else:
        zc = np.clip(z, 0.0, None)
        vc = np.maximum(v, MASS_FLOOR)
        safe = np.where(zc > 0, zc, 1.0)
        # KL(z || v) plus the mass mismatch term, which vanishes on the simplex
        out = np.sum(np.where(zc > 0, zc * np.log(safe / vc), 0.0) - zc + vc, axis=-1)
        out = np.maximum(out, 0.0)
    return float(out) if np.ndim(out) == 0 else out


def prox_step(setup: ProxSetup, z, g, gamma) -> np.ndarray:
    """Mirror step ``argmin_v { V(v; z) + <gamma g, v> }`` over the domain.

    ``gamma`` may be a scalar or a per-row array for batched ``z``.
    """
    z = _as_float_array(z)
    g = _as_float_array(g)
    gamma = np.asarray(gamma, dtype=float)
    if gamma.ndim == 1 and z.ndim == 2:
        gamma = gamma[:, None]
    if setup.kind == "euclidean":
        return setup.domain.project(z - gamma * g)
    with np.errstate(over="ignore", invalid="ignore"):
        logits = np.log(np.maximum(z, MASS_FLOOR)) - gamma * g
        logits = logits - np.max(logits, axis=-1, keepdims=True)
        w = np.exp(logits)
        total = np.sum(w, axis=-1, keepdims=True)
        out = w / total
    if not np.all(np.isfinite(out)):
        raise NumericalOverflow("entropy prox update overflowed")
    out = np.maximum(out, MASS_FLOOR)
    return out / np.sum(out, axis=-1, keepdims=True)


def diameter(setup: ProxSetup) -> float:
    """omega-diameter ``D = max sqrt(2 V_z(v))``.

    Euclidean: the largest distance between two points of the domain (2r for a
    ball).  Entropy on the d-simplex: the conventional bound ``sqrt(2 log d)``.
    """
    if setup.kind == "euclidean":
        return setup.domain.max_distance()
    return math.sqrt(2.0 * math.log(setup.dim))


# --------------------------------------------------------------------------- #
# product (joint) setup
# --------------------------------------------------------------------------- #


class ProductSetup:
    """Setup on ``Z = Z_1 x ... x Z_m`` with ``omega(z) = sum_b omega_b(z_b)``.

    The joint prox factorises over blocks, so the joint step coincides with
    one prox step per block taken with the same ``gamma``.
    """

    def __init__(self, blocks: Sequence):
        self.blocks = tuple(b for b in blocks if b is not None and b.dim > 0)
        if not self.blocks:
            raise ValueError("product setup needs at least one non-empty block")
        self.dims = tuple(b.dim for b in self.blocks)
        self.dim = sum(self.dims)
        ends = np.cumsum(self.dims)
        self._slices = [slice(int(e - n), int(e)) for e, n in zip(ends, self.dims)]

    def split(self, z):
        z = _as_float_array(z)
        return [z[..., sl] for sl in self._slices]

    @property
    def diameter(self) -> float:
        return math.sqrt(sum(b.diameter ** 2 for b in self.blocks))

    @property
    def p_norms(self) -> tuple:
        return tuple(getattr(b, "p_norm", 2) for b in self.blocks)

    def a_q_sq(self, d: int | None = None) -> float:
        d = self.dim if d is None else d
        return max(a_q_squared(p, d) for p in self.p_norms)

    def prox_center(self):
        return np.concatenate([b.prox_center() for b in self.blocks])

    def contains(self, z, tol=DOMAIN_TOL):
        parts = self.split(z)
        ok = [np.asarray(b.domain.contains(p, tol)) for b, p in zip(self.blocks, parts)]
        return np.logical_and.reduce(ok)

    def bregman(self, z, v):
        return sum(b.bregman(zb, vb) for b, zb, vb in zip(self.blocks, self.split(z), self.split(v)))

    def prox_step(self, z, g, gamma):
        if len(self.blocks) == 1:
            return self.blocks[0].prox_step(z, g, gamma)
        parts = [b.prox_step(z[..., sl], g[..., sl], gamma) for b, sl in zip(self.blocks, self._slices)]
        return np.concatenate(parts, axis=-1)


# --------------------------------------------------------------------------- #
# heavy-tail geometry
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class HeavyTailSetup:
    kappa: float
    q_exp: float = 2.0

    def __post_init__(self):
        if not (0.0 < self.kappa <= 1.0):
            raise ValueError("kappa must lie in (0, 1]")
        if not (self.q_exp >= 1.0 + self.kappa):
            raise ValueError("q must satisfy q >= 1 + kappa")

    @property
    def K_q(self) -> float:
        return 10.0 * max(1.0, (self.q_exp - 1.0) ** ((1.0 + self.kappa) / 2.0))

    @property
    def power(self) -> float:
        """Exponent ``(1 + kappa) / kappa`` of the norm in the prox-function."""
        return (1.0 + self.kappa) / self.kappa

    @property
    def coeff(self) -> float:
        return self.K_q ** (1.0 / self.kappa) * self.kappa / (1.0 + self.kappa)


def heavy_tail_prox_value(ht: HeavyTailSetup, setup: ProxSetup, x) -> np.ndarray | float:
    """Heavy-tail prox-function ``K_q^(1/k) k/(1+k) ||x||_p^((1+k)/k)``."""
    x = _as_float_array(x)
    if x.shape[-1] != setup.dim:
        raise DimensionMismatch("point and setup dimensions differ")
    out = ht.coeff * setup.norm(x) ** ht.power
    return float(out) if np.ndim(out) == 0 else out


class HeavyTailGeometry:
    """Heavy-tail prox-function on a product of Euclidean balls.

    ``omega(z) = c ||z - center||_2^s`` with ``c = K_q^(1/k) k/(1+k)`` and
    ``s = (1+k)/k``.  The prox map reduces to a scalar equation in the radius
    ``rho = ||v - center||`` which is solved by bisection; when no ball
    constraint binds the closed form is used directly.
    """

    p_norm = 2

    def __init__(self, ht: HeavyTailSetup, balls: Sequence[EuclideanBall], rtol: float = 1e-10):
        balls = tuple(b for b in balls if b is not None)
        if not balls or not all(isinstance(b, EuclideanBall) for b in balls):
            raise ValueError("heavy-tail geometry is implemented for Euclidean balls only")
        if ht.q_exp != 2.0:
            raise ValueError("heavy-tail prox map is implemented for q = p = 2 only")
        self.ht = ht
        self.balls = balls
        self.dims = tuple(b.dim for b in balls)
        self.dim = sum(self.dims)
        self._cuts = np.cumsum(self.dims)[:-1]
        self.radii = np.array([b.radius for b in balls])
        self._center = np.concatenate([b.center_ for b in balls])
        self.rtol = rtol
        self.c = ht.coeff
        self.s = ht.power

    def split(self, z):
        return np.split(_as_float_array(z), self._cuts, axis=-1)

    def prox_center(self):
        return self._center.copy()

    def contains(self, z, tol=DOMAIN_TOL):
        ok = [np.asarray(b.contains(p, tol)) for b, p in zip(self.balls, self.split(z))]
        return np.logical_and.reduce(ok)

    def omega(self, z):
        u = _as_float_array(z) - self._center
        return self.c * np.linalg.norm(u, axis=-1) ** self.s

    def grad_omega(self, z):
        u = _as_float_array(z) - self._center
        rho = np.linalg.norm(u, axis=-1, keepdims=True)
        return self.c * self.s * rho ** (self.s - 2.0) * u

    def bregman(self, z, v):
        z = _as_float_array(z)
        v = _as_float_array(v)
        for b, zb, vb in zip(self.balls, self.split(z), self.split(v)):
            b.check(zb, "z")
            b.check(vb, "v")
        out = self.omega(z) - self.omega(v) - np.sum(self.grad_omega(v) * (z - v), axis=-1)
        out = np.maximum(out, 0.0)
        return float(out) if np.ndim(out) == 0 else out

    @property
    def v0_bound(self) -> float:
        """Upper bound on the divergence between the center and any feasible point.

        Valid for both argument orders: ``c R^s`` one way, ``(s - 1) c R^s`` the other.
        """
        R = float(np.sqrt(np.sum(self.radii ** 2)))
        return self.c * max(1.0, self.s - 1.0) * R ** self.s

    @property
    def diameter(self) -> float:
        return math.sqrt(2.0 * self.v0_bound)

    def a_q_sq(self, d: int | None = None) -> float:
        return 1.0

    def prox_step(self, z, g, gamma):
        z = _as_float_array(z)
        g = _as_float_array(g)
        single = z.ndim == 1
        z2 = np.atleast_2d(z)
        g2 = np.atleast_2d(g)
        gam = np.asarray(gamma, dtype=float)
        gam = gam[:, None] if gam.ndim == 1 else gam
        w = self.grad_omega(z2) - gam * g2
        out = self._mirror_inverse(w)
        return out[0] if single else out

    def _radii_for(self, rho, norms):
        # per-block radius t_b(rho) = min(|w_b| / (c s rho^(s-2)), R_b)
        denom = self.c * self.s * np.power(rho, self.s - 2.0)[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(denom > 0, norms / denom, np.inf)
        t = np.where(norms > 0, t, 0.0)
        return np.minimum(t, self.radii[None, :])

    def _mirror_inverse(self, w):
        parts = self.split(w)
        norms = np.stack([np.linalg.norm(p, axis=-1) for p in parts], axis=-1)
        if self.s == 2.0:
            t = np.minimum(norms / (2.0 * self.c), self.radii[None, :])
        else:
            total = np.linalg.norm(norms, axis=-1)
            rho_free = np.power(total / (self.c * self.s), 1.0 / (self.s - 1.0))
            with np.errstate(divide="ignore", invalid="ignore"):
                uncapped = norms / (self.c * self.s * np.power(rho_free, self.s - 2.0))[:, None]
            binds = np.any(np.where(norms > 0, uncapped, 0.0) > self.radii[None, :], axis=-1)
            t = self._radii_for(rho_free, norms)
            if np.any(binds):
                t[binds] = self._bisect(norms[binds])
        v_parts = []
        for j, p in enumerate(parts):
            n = norms[:, j:j + 1]
            direction = np.where(n > 0, p / np.where(n > 0, n, 1.0), 0.0)
            v_parts.append(direction * t[:, j:j + 1])
        return self._center + np.concatenate(v_parts, axis=-1)

    def _bisect(self, norms):
        lo = np.zeros(norms.shape[0])
        hi = np.full(norms.shape[0], float(np.sqrt(np.sum(self.radii ** 2))))
        while True:
            mid = 0.5 * (lo + hi)
            resid = np.linalg.norm(self._radii_for(mid, norms), axis=-1) - mid
            lo = np.where(resid > 0, mid, lo)
            hi = np.where(resid > 0, hi, mid)
            if np.all(hi - lo <= self.rtol * np.maximum(hi, 1e-300)):
                break
        return self._radii_for(0.5 * (lo + hi), norms)
