import numpy as np
import pytest

from zo_saddle.noise import NoiseModel, adversarial_bias_probe, noisy_eval
from zo_saddle.problems import XiLaw, matrix_game


def test_no_noise_is_exact(rng):
    p = matrix_game([[1.0, -1.0], [-1.0, 1.0]], XiLaw("uniform", 1.0))
    z = p.sample_point(rng, 100)
    xi = p.sample_xi(rng, 100)
    assert np.array_equal(noisy_eval(p, NoiseModel.none(4), z, xi), p.value(z, xi))


@pytest.mark.parametrize("kind", ["bounded", "ramp"])
def test_bounded_shapes_respect_bound(kind, rng):
    delta = 0.3
    if kind == "bounded":
        m = NoiseModel.bounded(delta, 5, wavelength=0.01, seed=3)
    else:
        m = NoiseModel.ramp(delta, 5, width=0.1, seed=3)
    z = rng.uniform(-3, 3, (100_000, 5))
    vals = m(z)
    assert np.max(np.abs(vals)) <= delta
    assert np.max(np.abs(vals)) > 0.9 * delta


def test_lipschitz_shape_constant(rng):
    m = NoiseModel.lipschitz(0.7, 4, seed=1)
    z1 = rng.uniform(-2, 2, (100_000, 4))
    z2 = z1 + rng.standard_normal((100_000, 4)) * rng.uniform(1e-4, 1.0, (100_000, 1))
    ratio = np.abs(m(z1) - m(z2)) / np.linalg.norm(z1 - z2, axis=1)
    assert ratio.max() <= 0.7 * (1 + 1e-9)
    # attained along the adversary's direction near a zero of sin
    t = 1e-6
    assert abs(m(t * m.direction) - m(-t * m.direction)) / (2 * t) == pytest.approx(0.7, rel=1e-6)


def test_noise_is_deterministic(rng):
    m = NoiseModel.bounded(0.1, 3, wavelength=0.05, seed=8)
    z = rng.standard_normal((50, 3))
    assert np.array_equal(m(z), m(z.copy()))
    assert np.array_equal(m(z), NoiseModel.bounded(0.1, 3, wavelength=0.05, seed=8)(z))


def test_regimes_and_declared_bounds():
    assert NoiseModel.none(2).regime == "none"
    b = NoiseModel.bounded(0.2, 2, declared_bound=0.05)
    assert b.regime == "bounded" and b.delta_max == 0.05 and b.m2_delta == 0.0
    assert NoiseModel.ramp(0.2, 2, 0.1).delta_max == 0.2
    lip = NoiseModel.lipschitz(0.4, 2)
    assert lip.regime == "lipschitz" and lip.m2_delta == 0.4 and lip.delta_max == 0.0
    with pytest.raises(ValueError):
        NoiseModel("gaussian")
    with pytest.raises(ValueError):
        NoiseModel.bounded(-1.0, 2)


def test_bias_probe(rng):
    e = rng.standard_normal(6)
    assert adversarial_bias_probe(NoiseModel.none(6), e, 0.1) == 0.0
    tau, delta = 0.05, 0.02
    bounded = NoiseModel.bounded(delta, 6, wavelength=0.5 * tau, seed=2)
    assert adversarial_bias_probe(bounded, bounded.direction, tau) <= 6 * delta / tau + 1e-12
    lip = NoiseModel.lipschitz(0.3, 6, seed=2)
    for tau in (1e-3, 0.1, 2.0):
        assert adversarial_bias_probe(lip, e, tau) <= 6 * 0.3 + 1e-12
    assert adversarial_bias_probe(lip, lip.direction, 1e-4) == pytest.approx(6 * 0.3, rel=1e-6)
    with pytest.raises(ValueError):
        adversarial_bias_probe(lip, e, 0.0)
