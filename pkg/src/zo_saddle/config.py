"""Experiment configuration: a YAML file validated before anything runs.

Unknown keys are rejected at every level.  See ``docs/config.md`` for the
schema and examples.
"""

from __future__ import annotations

import hashlib
import json
import math
from typing import List, Literal, Optional, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .errors import ConfigError
from .geometry import entropy_setup, euclidean_setup
from .noise import NoiseModel
from .problems import (XiLaw, abs_problem_1d, bilinear_ball_game, linear_problem, matrix_game,
                       random_ball_game, random_matrix_game, strongly_monotone_ball_game)
from .solver import Case1, Case2, HeavyTail, Manual, SolverConfig


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class XiSpec(_Strict):
    kind: Literal["none", "uniform", "pareto"] = "none"
    amplitude: float = Field(0.0, ge=0)
    alpha: float = Field(2.0, gt=1)

    def build(self) -> XiLaw:
        return XiLaw(self.kind, self.amplitude, self.alpha)


ProblemKind = Literal["matching_pennies", "matrix_game", "random_matrix_game", "ball_game",
                      "random_ball_game", "strongly_monotone", "abs_1d", "linear"]


class ProblemSpec(_Strict):
    kind: ProblemKind
    matrix: Optional[List[List[float]]] = None
    dx: Optional[int] = Field(None, ge=1)
    dy: Optional[int] = Field(None, ge=1)
    seed: int = 0
    b: Optional[List[float]] = None
    c: Optional[List[float]] = None
    rx: float = Field(1.0, gt=0)
    ry: float = Field(1.0, gt=0)
    mu: float = Field(0.0, ge=0)
    x_star: Optional[List[float]] = None
    y_star: Optional[List[float]] = None
    coef: Optional[List[float]] = None
    radius: float = Field(1.0, gt=0)
    xi: XiSpec = XiSpec()

    def build(self, d: Optional[int] = None):
        """Instantiate the problem; ``d`` overrides the total dimension of random families."""
        xi = self.xi.build()
        k = self.kind
        if k == "matching_pennies":
            return matrix_game([[1.0, -1.0], [-1.0, 1.0]], xi, seed=self.seed)
        if k == "abs_1d":
            return abs_problem_1d()
        if k == "linear":
            if self.coef is None:
                raise ConfigError("problem.coef is required for a linear problem")
            return linear_problem(self.coef, self.radius)
        if k in ("random_matrix_game", "random_ball_game"):
            dx, dy = self.dx, self.dy
            if d is not None:
                dx, dy = d // 2, d - d // 2
            if dx is None or dy is None:
                raise ConfigError("problem.dx and problem.dy are required for random games")
            if k == "random_matrix_game":
                return random_matrix_game(dx, dy, self.seed, xi)
            return random_ball_game(dx, dy, self.seed, self.rx, self.ry, xi)
        if self.matrix is None:
            raise ConfigError(f"problem.matrix is required for {k}")
        A = np.asarray(self.matrix, dtype=float)
        if k == "matrix_game":
            return matrix_game(A, xi, seed=self.seed)
        if k == "ball_game":
            return bilinear_ball_game(A, self.b, self.c, self.rx, self.ry, self.mu, xi, seed=self.seed)
        if self.x_star is None or self.y_star is None:
            raise ConfigError("problem.x_star and problem.y_star are required for strongly_monotone")
        return strongly_monotone_ball_game(A, self.mu, self.x_star, self.y_star, self.rx, self.ry, xi,
                                           seed=self.seed)

    @property
    def has_dimension_family(self) -> bool:
        return self.kind in ("random_matrix_game", "random_ball_game")


class NoiseSpec(_Strict):
    kind: Literal["none", "bounded", "ramp", "lipschitz"] = "none"
    amplitude: float = Field(0.0, ge=0)
    declared_bound: Optional[float] = Field(None, ge=0)
    wavelength: float = Field(1.0, gt=0)
    seed: int = 0
    anchor: Union[Literal["center", "solution"], List[float]] = "center"

    def build(self, problem, joint, amplitude: Optional[float] = None) -> NoiseModel:
        amp = self.amplitude if amplitude is None else amplitude
        declared = self.declared_bound if amplitude is None else amplitude
        d = problem.d
        if self.kind == "none":
            return NoiseModel.none(d)
        if self.kind == "bounded":
            return NoiseModel.bounded(amp, d, self.wavelength, self.seed, declared)
        if self.kind == "lipschitz":
            return NoiseModel.lipschitz(amp, d, self.seed, declared)
        if self.anchor == "center":
            anchor = joint.prox_center()
        elif self.anchor == "solution":
            if problem.solution is None:
                raise ConfigError("noise.anchor=solution needs a problem with a known solution")
            anchor = problem.solution
        else:
            anchor = np.asarray(self.anchor, dtype=float)
            if anchor.size != d:
                raise ConfigError(f"noise.anchor has {anchor.size} entries, problem dimension is {d}")
        return NoiseModel.ramp(amp, d, self.wavelength, anchor, self.seed, declared)


class ProxSpec(_Strict):
    kind: Literal["euclidean", "entropy"] = "euclidean"
    mode: Literal["joint", "separated"] = "joint"

    def build(self, problem):
        def one(dom):
            if dom is None:
                return None
            if self.kind == "entropy":
                return entropy_setup(dom.dim)
            return euclidean_setup(dom)

        if self.kind == "entropy" and not all(
                type(dom).__name__ == "Simplex" for dom in (problem.x_domain, problem.y_domain) if dom is not None):
            raise ConfigError("prox.kind=entropy needs simplex domains")
        return one(problem.x_domain), one(problem.y_domain)


class StepSpec(_Strict):
    kind: Literal["case1", "case2", "heavy_tail", "manual"] = "case1"
    delta_max: Optional[float] = Field(None, ge=0)
    m2_delta: Optional[float] = Field(None, ge=0)
    kappa: float = Field(1.0, gt=0, le=1)
    v0: Optional[float] = Field(None, gt=0)
    gamma: Optional[float] = Field(None, ge=0)

    def build(self, model: NoiseModel, amplitude: Optional[float] = None):
        delta = self.delta_max if self.delta_max is not None else model.delta_max
        m2d = self.m2_delta if self.m2_delta is not None else model.m2_delta
        if amplitude is not None and model.regime == "bounded":
            delta = amplitude
        if amplitude is not None and model.regime == "lipschitz":
            m2d = amplitude
        if self.kind == "case1":
            return Case1(delta)
        if self.kind == "case2":
            return Case2(m2d)
        if self.kind == "heavy_tail":
            return HeavyTail(self.kappa, v0=self.v0,
                             delta_max=delta if model.regime == "bounded" else 0.0,
                             m2_delta=m2d if model.regime == "lipschitz" else 0.0)
        if self.gamma is None:
            raise ConfigError("solver.step_rule.gamma is required for manual steps")
        return Manual(self.gamma)


class SolverSpec(_Strict):
    n_iters: int = Field(1000, ge=1)
    tau: Optional[float] = Field(None, gt=0)
    eps_target: Optional[float] = Field(None, gt=0)
    step_rule: StepSpec = StepSpec()
    constant: float = Field(1.0, gt=0)
    m2: Optional[float] = Field(None, gt=0)

    def resolve_tau(self, problem) -> float:
        if self.tau is not None:
            return self.tau
        if self.eps_target is not None:
            if not math.isfinite(problem.M2):
                raise ConfigError("solver.eps_target needs a finite M2; give solver.tau instead")
            return SolverConfig.tau_for_target(self.eps_target, problem.M2 if self.m2 is None else self.m2)
        raise ConfigError("solver.tau or solver.eps_target must be given")


class RestartSpec(_Strict):
    enabled: bool = False
    eps: Optional[float] = Field(None, gt=0)
    stage_constant: float = Field(4.0, gt=0)
    R0: Optional[float] = Field(None, gt=0)
    compare_plain: bool = False


class SweepSpec(_Strict):
    seeds: List[int] = [0]
    n_ladder: Optional[List[int]] = None
    delta_grid: Optional[List[float]] = None
    d_grid: Optional[List[int]] = None
    eps_ladder: Optional[List[float]] = None
    target_gap: Optional[float] = Field(None, gt=0)

    @model_validator(mode="after")
    def _check(self):
        if not self.seeds:
            raise ValueError("sweep.seeds must not be empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("sweep.seeds must be distinct")
        for name in ("n_ladder", "d_grid"):
            vals = getattr(self, name)
            if vals is not None and any(v < 1 for v in vals):
                raise ValueError(f"sweep.{name} entries must be >= 1")
        return self


class ExperimentConfig(_Strict):
    problem: ProblemSpec
    noise: NoiseSpec = NoiseSpec()
    prox: ProxSpec = ProxSpec()
    solver: SolverSpec = SolverSpec()
    restart: RestartSpec = RestartSpec()
    sweep: SweepSpec = SweepSpec()
    output: str = "results"
    workers: int = Field(1, ge=1)
    record_timing: bool = False

    def config_hash(self) -> str:
        blob = json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _describe(err: ValidationError) -> str:
    parts = []
    for e in err.errors():
        loc = ".".join(str(x) for x in e["loc"])
        if e["type"] == "extra_forbidden":
            parts.append(f"unknown key '{loc}'")
        else:
            parts.append(f"{loc or '<root>'}: {e['msg']}")
    return "; ".join(parts)


def parse_config(data) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping at the top level")
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as err:
        raise ConfigError(_describe(err)) from None


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err.strerror}") from None
    except yaml.YAMLError as err:
        raise ConfigError(f"config {path} is not valid YAML: {err}") from None
    return parse_config(data)
