"""Zeroth-order stochastic mirror descent for convex-concave saddle problems.

One iteration samples a sphere direction ``e`` and a payoff realisation ``xi``,
forms the two-point estimate ``g`` and takes a prox step ``z <- Prox_z(gamma g)``.
The output is the gamma-weighted average of ``z^1 .. z^N``.

:func:`solve_many` runs several seeds in lock-step as one vectorised batch.
Each seed owns its own direction and payoff streams (derived from the seed),
so a seed's trajectory does not depend on which other seeds share the batch
up to floating-point reassociation inside BLAS.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

import numpy as np

from .errors import ConfigError, DimensionMismatch
from .estimator import field_signs, sample_sphere
from .geometry import EuclideanBall, HeavyTailGeometry, HeavyTailSetup, ProductSetup, ProxSetup
from .noise import NoiseModel
from .problems import SaddleProblem, duality_gap
from .streams import derive_rng

BLOCK = 256


# --------------------------------------------------------------------------- #
# step-size rules
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class Case1:
    """Bounded-noise schedule; ``delta_max`` is the assumed noise bound."""

    delta_max: float = 0.0


@dataclass(frozen=True)
class Case2:
    """Lipschitz-noise schedule; ``m2_delta`` is the assumed noise Lipschitz constant."""

    m2_delta: float = 0.0


@dataclass(frozen=True)
class HeavyTail:
    kappa: float
    q_exp: float = 2.0
    v0: Optional[float] = None
    delta_max: float = 0.0
    m2_delta: float = 0.0

    @property
    def setup(self) -> HeavyTailSetup:
        return HeavyTailSetup(self.kappa, self.q_exp)


@dataclass(frozen=True)
class Manual:
    gamma: float


StepRule = Union[Case1, Case2, HeavyTail, Manual]


def m_case1(M2, d, a_q_sq, delta_max, tau, constant=1.0) -> float:
    return math.sqrt(constant * d * a_q_sq * M2 ** 2 + d ** 2 * a_q_sq * delta_max ** 2 / tau ** 2)


def m_case2(M2, d, a_q_sq, m2_delta, constant=1.0) -> float:
    return math.sqrt(constant * d * a_q_sq * (M2 ** 2 + m2_delta ** 2))


def step_size_case1(diameter, M2, d, a_q_sq, delta_max, tau, n_iters, constant=1.0) -> float:
    """``gamma = D / M_case1 * sqrt(2 / N)``."""
    M = m_case1(M2, d, a_q_sq, delta_max, tau, constant)
    return diameter / M * math.sqrt(2.0 / n_iters)


def step_size_case2(diameter, M2, d, a_q_sq, m2_delta, n_iters, constant=1.0) -> float:
    """``gamma = D / M_case2 * sqrt(2 / N)``."""
    M = m_case2(M2, d, a_q_sq, m2_delta, constant)
    return diameter / M * math.sqrt(2.0 / n_iters)


def heavy_tail_m_tilde(M2_tilde, d, a_q_sq, kappa, delta_max=0.0, tau=None, m2_delta=0.0,
                       constant=1.0) -> float:
    """``M~`` with ``M~^(1+k)`` bounding ``E ||g||_q^(1+k)``.

    Bounded noise adds ``2^(1+k) d^(1+k) a_q^2 Delta^2 / tau^2``; Lipschitz noise
    adds ``M_{2,delta}^(1+k)`` to the objective's moment.
    """
    p = 1.0 + kappa
    total = constant * a_q_sq * d ** (p / 2.0) * (M2_tilde ** p + m2_delta ** p)
    if delta_max > 0:
        if tau is None or tau <= 0:
            raise ValueError("tau is required with bounded noise")
        total += 2.0 ** p * d ** p * a_q_sq * delta_max ** 2 / tau ** 2
    return total ** (1.0 / p)


def step_size_heavy_tail(ht: HeavyTailSetup, M_tilde, V0, n_iters) -> float:
    """``((1+k) V0 / k)^(1/(1+k)) / M~ * N^(-1/(1+k))``."""
    k = ht.kappa
    return ((1.0 + k) * V0 / k) ** (1.0 / (1.0 + k)) / M_tilde * n_iters ** (-1.0 / (1.0 + k))


# --------------------------------------------------------------------------- #
# configuration and report
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class SolverConfig:
    n_iters: int
    tau: float
    step_rule: StepRule = field(default_factory=Case1)
    mode: str = "joint"
    record_trace: bool = False
    seed: int = 0
    constant: float = 1.0
    radius: Optional[float] = None
    m2: Optional[float] = None
    checkpoints: bool = True

    def __post_init__(self):
        if int(self.n_iters) < 1:
            raise ConfigError("n_iters must be >= 1")
        if not self.tau > 0:
            raise ConfigError("tau must be positive")
        if self.mode not in ("joint", "separated"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.constant <= 0:
            raise ConfigError("step constant must be positive")
        if isinstance(self.step_rule, Manual) and self.step_rule.gamma < 0:
            raise ConfigError("manual step must be non-negative")

    @staticmethod
    def tau_for_target(eps: float, M2: float) -> float:
        """Smoothing radius ``eps / (2 M2)`` tied to an accuracy target."""
        return eps / (2.0 * M2)


@dataclass
class RunReport:
    z_hat: np.ndarray
    final_gap: Optional[float]
    gap_series: list
    gamma: float
    n_iters: int
    tau: float
    seed: int
    wall_time: float
    oracle_calls: int
    z_last: np.ndarray
    trace: Optional[np.ndarray] = None
    stage_budgets: Optional[list] = None
    stage_gaps: Optional[list] = None

    @property
    def gammas(self) -> np.ndarray:
        return np.full(self.n_iters, self.gamma)


# --------------------------------------------------------------------------- #
# geometry assembly
# --------------------------------------------------------------------------- #


def _setups_for(problem, setup_x, setup_y):
    if setup_x is None or setup_x.dim != problem.dx:
        raise ConfigError("x setup does not match the problem's x-block")
    if problem.dy == 0:
        return setup_x, None
    if setup_y is None or setup_y.dim != problem.dy:
        raise ConfigError("y setup does not match the problem's y-block")
    return setup_x, setup_y


def build_geometry(problem, setup_x, setup_y, config: SolverConfig):
    """Return ``(blocks, joint)`` where ``blocks`` are the prox objects that step."""
    sx, sy = _setups_for(problem, setup_x, setup_y)
    if isinstance(config.step_rule, HeavyTail):
        ht = config.step_rule.setup
        balls = []
        for s in (sx, sy):
            if s is None:
                continue
            if not (isinstance(s, ProxSetup) and s.kind == "euclidean" and isinstance(s.domain, EuclideanBall)):
                raise ConfigError("heavy-tail mode needs Euclidean setups on balls")
            balls.append(s.domain)
        joint = HeavyTailGeometry(ht, balls)
        if config.mode == "joint":
            return [joint], joint
        return [HeavyTailGeometry(ht, [b]) for b in balls], joint
    joint = ProductSetup([sx, sy])
    if config.mode == "joint":
        if sy is not None and sx.kind != sy.kind:
            raise ConfigError("joint mode needs the same prox setup on X and Y; use mode='separated'")
        return [joint], joint
    return list(joint.blocks), joint


def compute_step(problem: SaddleProblem, model: NoiseModel, joint, config: SolverConfig) -> float:
    rule = config.step_rule
    d = problem.d
    N = int(config.n_iters)
    if isinstance(rule, Manual):
        return float(rule.gamma)
    a_sq = joint.a_q_sq(d)
    if isinstance(rule, HeavyTail):
        if model.regime == "bounded" and rule.m2_delta > 0 or model.regime == "lipschitz" and rule.delta_max > 0:
            raise ConfigError("heavy-tail step regime does not match the noise model")
        M_t = heavy_tail_m_tilde(problem.M2_tilde(rule.kappa), d, a_sq, rule.kappa,
                                 rule.delta_max, config.tau, rule.m2_delta, config.constant)
        V0 = joint.v0_bound if rule.v0 is None else rule.v0
        return step_size_heavy_tail(rule.setup, M_t, V0, N)
    D = joint.diameter if config.radius is None else config.radius
    M2 = problem.M2 if config.m2 is None else float(config.m2)
    if not math.isfinite(M2):
        raise ConfigError("the payoff noise has no finite second moment; set m2 or use heavy-tail steps")
    if isinstance(rule, Case1):
        if model.regime == "lipschitz":
            raise ConfigError("Case1 steps assume bounded noise; the model is Lipschitz")
        return step_size_case1(D, M2, d, a_sq, rule.delta_max, config.tau, N, config.constant)
    if isinstance(rule, Case2):
        if model.regime == "bounded":
            raise ConfigError("Case2 steps assume Lipschitz noise; the model is bounded")
        return step_size_case2(D, M2, d, a_sq, rule.m2_delta, N, config.constant)
    raise ConfigError(f"unknown step rule {rule!r}")


def checkpoint_schedule(n_iters: int) -> list:
    pts = []
    k = 1
    while k < n_iters:
        pts.append(k)
        k *= 2
    pts.append(n_iters)
    return pts


# --------------------------------------------------------------------------- #
# main loop
# --------------------------------------------------------------------------- #


def solve(problem: SaddleProblem, model: NoiseModel, setup_x, setup_y, config: SolverConfig,
          start=None) -> RunReport:
    """Run zeroth-order mirror descent for one seed (``config.seed``)."""
    return solve_many(problem, model, setup_x, setup_y, config, [config.seed],
                      None if start is None else np.atleast_2d(start))[0]


def solve_many(problem: SaddleProblem, model: NoiseModel, setup_x, setup_y, config: SolverConfig,
               seeds: Sequence[int] | None = None, start=None) -> list:
    """Run one independent chain per seed, vectorised across seeds."""
    seeds = [config.seed] if seeds is None else [int(s) for s in seeds]
    if not seeds:
        return []
    d, dx = problem.d, problem.dx
    if model.active and model.dim != d:
        raise DimensionMismatch(f"noise model has dimension {model.dim}, problem has {d}")
    blocks, joint = build_geometry(problem, setup_x, setup_y, config)
    gamma = compute_step(problem, model, joint, config)
    N = int(config.n_iters)
    S = len(seeds)
    tau = float(config.tau)

    if start is None:
        z = np.tile(joint.prox_center(), (S, 1))
    else:
        z = np.array(start, dtype=float).reshape(S, d)
        if not np.all(joint.contains(z)):
            raise ConfigError("start point lies outside the domain")
    z_first = z.copy()
    ends = np.cumsum([b.dim for b in blocks])
    slices = [slice(int(e - b.dim), int(e)) for e, b in zip(ends, blocks)]
    signs = field_signs(dx, problem.dy)
    scale = d / (2.0 * tau)
    use_xi = problem.xi_law.active
    noisy = model.active
    rng_e = [derive_rng(s, "directions") for s in seeds]
    rng_xi = [derive_rng(s, "payoff") for s in seeds] if use_xi else None
    has_gap = problem.gap_oracle is not None
    marks = set(checkpoint_schedule(N)) if (config.checkpoints and has_gap) else set()
    series = [[] for _ in range(S)]
    trace = np.empty((N, S, d)) if config.record_trace else None

    acc = np.zeros((S, d))
    weight = 0.0
    t0 = time.perf_counter()
    k = 0
    while k < N:
        m = min(BLOCK, N - k)
        E = np.stack([sample_sphere(d, r, m) for r in rng_e], axis=1)
        XI = np.stack([problem.sample_xi(r, m) for r in rng_xi], axis=1) if use_xi else None
        for j in range(m):
            e = E[j]
            both = np.concatenate([z + tau * e, z - tau * e])
            xi = None if XI is None else np.concatenate([XI[j], XI[j]])
            vals = problem.value(both, xi)
            if noisy:
                vals = vals + model(both)
            g = (scale * (vals[:S] - vals[S:]))[:, None] * e * signs
            if trace is not None:
                trace[k] = z
            acc += gamma * z
            weight += gamma
            k += 1
            if k in marks:
                avg = acc / weight if weight > 0 else z_first
                gaps = duality_gap(problem, avg)
                for i in range(S):
                    series[i].append((k, float(np.atleast_1d(gaps)[i])))
            if len(blocks) == 1:
                z = blocks[0].prox_step(z, g, gamma)
            else:
                z = np.concatenate([b.prox_step(z[:, sl], g[:, sl], gamma) for b, sl in zip(blocks, slices)], axis=1)
    wall = time.perf_counter() - t0

    # zero total weight only happens with gamma = 0, where every iterate equals z^1
    z_hat = acc / weight if weight > 0 else z_first
    finals = np.atleast_1d(duality_gap(problem, z_hat)) if has_gap else [None] * S
    reports = []
    for i, s in enumerate(seeds):
        reports.append(RunReport(
            z_hat=z_hat[i].copy(),
            final_gap=None if finals[i] is None else float(finals[i]),
            gap_series=series[i],
            gamma=gamma,
            n_iters=N,
            tau=tau,
            seed=s,
            wall_time=wall,
            oracle_calls=2 * N,
            z_last=z[i].copy(),
            trace=None if trace is None else trace[:, i, :].copy(),
        ))
    return reports


def with_overrides(config: SolverConfig, **kw) -> SolverConfig:
    return replace(config, **kw)
