"""Zeroth-order stochastic mirror descent for convex-concave saddle-point problems."""

from .errors import (ConfigError, DegenerateSeries, DimensionMismatch, DomainViolation,
                     GrowthSpecMissing, NoGapOracle, NumericalOverflow, SeriesTooShort,
                     UnboundedDomain, ZoSaddleError)
from .estimator import estimate_gradient, sample_ball, sample_sphere, smooth_gradient_oracle, smooth_value, two_point_gradient
from .geometry import (Box, EuclideanBall, HeavyTailGeometry, HeavyTailSetup, ProductSetup, ProxSetup, Simplex,
                       a_q_squared, bregman, diameter, entropy_setup, euclidean_setup, prox_step)
from .metrics import RateFit, detect_plateau, fit_rate
from .noise import NoiseModel, noisy_eval
from .problems import (GrowthSpec, SaddleProblem, XiLaw, abs_problem_1d, bilinear_ball_game, duality_gap,
                       linear_problem, matrix_game, random_ball_game, random_matrix_game,
                       strongly_monotone_ball_game)
from .restarts import RestartSchedule, improved_noise_threshold, restart_solve, restart_solve_many
from .solver import (Case1, Case2, HeavyTail, Manual, RunReport, SolverConfig, heavy_tail_m_tilde, solve,
                     solve_many, step_size_case1, step_size_case2, step_size_heavy_tail)

__version__ = "0.1.0"
