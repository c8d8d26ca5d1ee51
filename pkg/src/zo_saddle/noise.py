"""Deterministic adversarial perturbations of the zeroth-order oracle.

The oracle returns ``phi(z, xi) = f(z, xi) + delta(z)`` where ``delta`` depends
on ``z`` only.  Two hostile shapes are provided:

* bounded:   ``delta(z) = Delta * sign(sin(<u, z> / h))`` (a square wave of
  wavelength ~ h along a unit direction ``u``), so ``|delta| <= Delta``;
* ramp:      ``delta(z) = Delta * clip(<u, z - anchor> / h, -1, 1)``, a bounded
  tilt of slope ``Delta / h`` around ``anchor`` that drags the saddle point;
* Lipschitz: ``delta(z) = M * sin(<u, z>)``, whose Lipschitz constant is
  exactly ``M``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .streams import derive_rng

KINDS = ("none", "bounded", "ramp", "lipschitz")
BOUNDED_KINDS = ("bounded", "ramp")


def _unit_direction(dim: int, seed: int) -> np.ndarray:
    rng = derive_rng(seed, "adversary-direction")
    u = rng.standard_normal(dim)
    return u / np.linalg.norm(u)


@dataclass(frozen=True, eq=False)
class NoiseModel:
    kind: str = "none"
    amplitude: float = 0.0
    dim: int = 1
    wavelength: float = 1.0
    seed: int = 0
    declared_bound: float | None = None
    direction: np.ndarray = field(default=None, repr=False)
    anchor: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.amplitude < 0:
            raise ValueError("noise amplitude must be non-negative")
        if self.wavelength <= 0:
            raise ValueError("wavelength must be positive")
        if self.direction is None:
            object.__setattr__(self, "direction", _unit_direction(self.dim, self.seed))
        else:
            u = np.asarray(self.direction, dtype=float)
            object.__setattr__(self, "direction", u / np.linalg.norm(u))
            object.__setattr__(self, "dim", u.size)
        if self.anchor is None:
            object.__setattr__(self, "anchor", np.zeros(self.dim))
        else:
            object.__setattr__(self, "anchor", np.asarray(self.anchor, dtype=float).reshape(self.dim))
        if self.declared_bound is None:
            object.__setattr__(self, "declared_bound", float(self.amplitude))

    @classmethod
    def none(cls, dim: int = 1) -> "NoiseModel":
        return cls("none", 0.0, dim)

    @classmethod
    def bounded(cls, delta_max: float, dim: int, wavelength: float = 1.0, seed: int = 0,
                declared_bound: float | None = None) -> "NoiseModel":
        return cls("bounded", delta_max, dim, wavelength, seed, declared_bound)

    @classmethod
    def ramp(cls, delta_max: float, dim: int, width: float, anchor=None, seed: int = 0,
             declared_bound: float | None = None) -> "NoiseModel":
        return cls("ramp", delta_max, dim, width, seed, declared_bound, anchor=anchor)

    @property
    def regime(self) -> str:
        """``"bounded"``, ``"lipschitz"`` or ``"none"``: which step rule the model calls for."""
        if self.kind in BOUNDED_KINDS:
            return "bounded"
        return self.kind

    @classmethod
    def lipschitz(cls, m2_delta: float, dim: int, seed: int = 0,
                  declared_bound: float | None = None) -> "NoiseModel":
        return cls("lipschitz", m2_delta, dim, 1.0, seed, declared_bound)

    @property
    def active(self) -> bool:
        return self.kind != "none" and self.amplitude > 0

    @property
    def delta_max(self) -> float:
        """Declared bound Delta (bounded regime); 0 otherwise."""
        return self.declared_bound if self.kind in BOUNDED_KINDS else 0.0

    @property
    def m2_delta(self) -> float:
        """Declared Lipschitz constant (Lipschitz regime); 0 otherwise."""
        return self.declared_bound if self.kind == "lipschitz" else 0.0

    def __call__(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if not self.active:
            return np.zeros(z.shape[:-1]) if z.ndim > 1 else 0.0
        if self.kind == "ramp":
            return self.amplitude * np.clip((z - self.anchor) @ self.direction / self.wavelength, -1.0, 1.0)
        proj = z @ self.direction
        if self.kind == "bounded":
            return self.amplitude * np.sign(np.sin(proj / self.wavelength))
        return self.amplitude * np.sin(proj)


def noisy_eval(problem, model: NoiseModel, z, xi=None):
    """Inexact oracle ``f(z, xi) + delta(z)``."""
    return problem.value(z, xi) + model(z)


def adversarial_bias_probe(model: NoiseModel, direction, tau: float, base=None,
                           n_scan: int = 257) -> float:
    """Largest ``|d (delta(z + tau e) - delta(z - tau e)) / (2 tau)|`` along a line.

    ``z`` scans ``base + t e`` for ``t`` in ``[-L, L]`` with ``L`` the larger of
    ``tau`` and the model's wavelength.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    e = np.asarray(direction, dtype=float)
    e = e / np.linalg.norm(e)
    d = e.size
    base = np.zeros(d) if base is None else np.asarray(base, dtype=float)
    reach = max(tau, model.wavelength)
    offsets = np.linspace(-reach, reach, n_scan)
    z = base + offsets[:, None] * e
    diff = model(z + tau * e) - model(z - tau * e)
    return float(np.max(np.abs(d * diff / (2.0 * tau))))
