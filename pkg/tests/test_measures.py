import math

import numpy as np
import pytest

from hitlaw.exc import InvalidInputError
from hitlaw.measures import (EmpiricalMeasure, GridDensity, Space,
                             circle_distance, density_sampler, integrate,
                             lip_norm, marginal, measure_from_json, w11_norm,
                             w_distance, w_distance_lp)


def test_circle_distance_wraps():
    assert circle_distance(0.1, 0.9) == pytest.approx(0.2)
    assert circle_distance(0.0, 0.5) == pytest.approx(0.5)


def test_solenoid_distance_is_max_of_components():
    a = Space.solenoid.coerce((0.1, (0.0, 0.0)))
    b = Space.solenoid.coerce([0.9, 0.3, 0.0])
    assert Space.solenoid.distance(a, b) == pytest.approx(0.3)


def test_solenoid_coerce_needs_three_coordinates():
    with pytest.raises(InvalidInputError):
        Space.solenoid.coerce([0.1, 0.2])


def test_coerce_rejects_nan():
    with pytest.raises(InvalidInputError):
        Space.circle.coerce([0.1, math.nan])


def test_point_outside_disc():
    with pytest.raises(InvalidInputError):
        Space.solenoid.point(0.2, (1.0, 1.0))


def test_lebesgue_density():
    f = GridDensity.lebesgue(64)
    assert f.is_probability()
    assert f.mass == 1.0
    assert f.cdf()[-1] == pytest.approx(1.0)


def test_density_arithmetic():
    f = GridDensity.lebesgue(8)
    g = GridDensity.from_function(lambda x: x, 8)
    assert np.allclose((f - g + g).values, f.values)
    assert np.allclose((2 * f).values, 2.0)
    assert np.allclose((-f).values, -1.0)


def test_density_grid_mismatch():
    with pytest.raises(InvalidInputError):
        GridDensity.lebesgue(8) - GridDensity.lebesgue(16)


def test_density_values_are_read_only():
    f = GridDensity.lebesgue(4)
    with pytest.raises(ValueError):
        f.values[0] = 2.0


def test_sample_lebesgue_density(rng):
    points = GridDensity.lebesgue(128).sample(rng, 20000)
    assert points.min() >= 0.0
    assert points.max() < 1.0
    assert points.mean() == pytest.approx(0.5, abs=0.01)


def test_density_sampler(rng):
    f = GridDensity.from_function(lambda x: 2 * x, 256)
    sampler = density_sampler(f)
    assert sampler.space is Space.circle
    points = sampler(rng, 40000)
    # E[x] = 2/3 under the density 2x.
    assert points.mean() == pytest.approx(2 / 3, abs=0.01)
    assert np.mean(points < 0.5) == pytest.approx(0.25, abs=0.01)


def test_sample_signed_density(rng):
    with pytest.raises(InvalidInputError):
        GridDensity.from_function(lambda x: x - 0.5, 8).sample(rng, 10)


def test_empirical_measure_weights():
    mu = EmpiricalMeasure.uniform([0.1, 0.2, 0.3, 0.4])
    assert mu.mass == pytest.approx(1.0)
    assert mu.n_points == 4
    with pytest.raises(InvalidInputError):
        EmpiricalMeasure([0.1, 0.2], [1.0, -0.5])
    with pytest.raises(InvalidInputError):
        EmpiricalMeasure([0.1, 0.2], [1.0])
    with pytest.raises(InvalidInputError):
        EmpiricalMeasure([0.1, 0.2], [0.5, 0.6], mass=1.0)


def test_json_envelope():
    mu = EmpiricalMeasure([[0.1, 0.0, 0.2], [0.7, 0.1, 0.0]], [0.25, 0.75],
                          space=Space.solenoid)
    back = measure_from_json(mu.to_json())
    assert back.space is Space.solenoid
    assert np.array_equal(back.points, mu.points)
    assert np.array_equal(back.weights, mu.weights)
    f = GridDensity.from_function(lambda x: 1 + x, 16)
    assert np.array_equal(measure_from_json(f.to_json()).values, f.values)


def test_marginal_of_solenoid_cloud():
    mu = EmpiricalMeasure([[0.1, 0.0, 0.2], [0.7, 0.1, 0.0]],
                          space=Space.solenoid)
    assert np.allclose(marginal(mu).points, [0.1, 0.7])


def test_integrate_midpoint_rule():
    f = GridDensity.lebesgue(1024)
    assert integrate(lambda x: x ** 2, f) == pytest.approx(1 / 3, abs=1e-6)
    mu = EmpiricalMeasure([0.25, 0.75], [0.5, 0.5])
    assert integrate(lambda x: np.sin(2 * np.pi * x), mu) == \
        pytest.approx(0.0, abs=1e-15)


def test_lip_norm():
    x = np.arange(1000) / 1000
    assert lip_norm(0.1 * np.sin(2 * np.pi * x)) == \
        pytest.approx(0.2 * np.pi, rel=1e-3)
    assert lip_norm(np.full(10, 0.5)) == 0.5


def test_lip_norm_of_distance_to_zero():
    x = np.arange(1024) / 1024
    assert lip_norm(np.minimum(x, 1 - x)) == pytest.approx(1.0, abs=2e-3)


def test_lip_norm_is_a_norm(rng):
    for _ in range(50):
        a, b = rng.normal(size=(2, 128))
        c = rng.normal()
        assert lip_norm(c * a) == pytest.approx(abs(c) * lip_norm(a),
                                                rel=1e-12)
        assert lip_norm(a + b) <= lip_norm(a) + lip_norm(b) + 1e-12
    assert lip_norm(np.zeros(16)) == 0.0


def test_lip_norm_needs_a_grid():
    with pytest.raises(InvalidInputError):
        lip_norm([1.0])


def test_w11_norm():
    assert w11_norm(GridDensity.lebesgue(16)) == 1.0
    f = GridDensity.from_function(lambda x: np.cos(2 * np.pi * x), 4096)
    assert w11_norm(f) == pytest.approx(2 / np.pi + 4, rel=1e-3)


def test_w_distance_diracs():
    a = EmpiricalMeasure.dirac(0.1)
    b = EmpiricalMeasure.dirac(0.35)
    assert w_distance(a, b) == pytest.approx(0.25, abs=1e-3)
    assert w_distance(EmpiricalMeasure.dirac(0.0),
                      EmpiricalMeasure.dirac(0.5)) == \
        pytest.approx(0.5, abs=1e-3)


def test_w_distance_dirac_lebesgue():
    assert w_distance(EmpiricalMeasure.dirac(0.0),
                      GridDensity.lebesgue(4096)) == \
        pytest.approx(0.25, abs=2e-3)


def test_w_distance_identical():
    f = GridDensity.from_function(lambda x: 1 + 0.5 * np.sin(2 * np.pi * x),
                                  256)
    assert w_distance(f, f) == 0.0


def test_w_distance_symmetric_exactly(rng):
    for _ in range(20):
        mu = EmpiricalMeasure.uniform(rng.random(15))
        nu = EmpiricalMeasure.uniform(rng.random(9))
        assert w_distance(mu, nu) == w_distance(nu, mu)


def test_w_distance_matches_lp(rng):
    for _ in range(5):
        mu = EmpiricalMeasure.uniform(rng.random(12))
        nu = EmpiricalMeasure.uniform(rng.random(7))
        assert w_distance(mu, nu, n_nodes=256) == \
            pytest.approx(w_distance_lp(mu, nu, n_nodes=256), abs=1e-7)


def test_w_distance_unbalanced():
    half = EmpiricalMeasure([0.0], [0.5])
    assert w_distance(half, EmpiricalMeasure.dirac(0.0)) == \
        pytest.approx(0.5, abs=1e-7)


def test_w_distance_rejects_solenoid():
    mu = EmpiricalMeasure.dirac((0.1, (0.0, 0.0)), space=Space.solenoid)
    with pytest.raises(InvalidInputError):
        w_distance(mu, mu)
    with pytest.raises(InvalidInputError):
        w_distance(mu, GridDensity.lebesgue(8))
