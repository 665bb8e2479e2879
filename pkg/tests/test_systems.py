import math

import numpy as np
import pytest

from hitlaw.exc import ConfigurationError, InvalidInputError
from hitlaw.measures import Space
from hitlaw.systems import (AlternatingFamily, ExpandingCircleMap, HitStatus,
                            RotationMap, SolenoidFamily, family_from_config,
                            hitting_time, hitting_times, orbit, step,
                            verify_assumptions, write_orbit_csv)


@pytest.mark.parametrize('q,epsilon', [(1, 0.0), (2.5, 0.0), (2, 0.2),
                                       (3, -0.35)])
def test_expanding_map_rejects(q, epsilon):
    with pytest.raises(ConfigurationError):
        ExpandingCircleMap(q, epsilon)


def test_expanding_map_step(doubling):
    assert doubling.step(1, 0.3) == pytest.approx(0.6, abs=1e-15)
    assert doubling.step(1, 0.75) == pytest.approx(0.5, abs=1e-15)
    assert isinstance(doubling.step(1, 0.3), float)


def test_expanding_map_lift_is_exact(doubling):
    assert doubling.lift(0.375) == 0.75
    assert doubling.affine
    assert not ExpandingCircleMap(2, 0.05).affine


def test_min_expansion(perturbed):
    assert perturbed.min_expansion == pytest.approx(2 - 0.1 * math.pi)
    x = np.linspace(0, 1, 101)
    assert np.all(perturbed.derivative(x) >= perturbed.min_expansion - 1e-12)


def test_long_doubling_orbit_does_not_collapse(doubling):
    values = [float(x) for x in orbit(doubling, 0.123, 500)]
    assert len(set(values)) > 450
    assert values[-1] != 0.0


def test_orbit_yields_start_point(doubling):
    points = list(orbit(doubling, 0.1, 2))
    assert points[0] == pytest.approx(0.1)
    assert points[2] == pytest.approx(0.4)


def test_orbit_negative_length(doubling):
    with pytest.raises(InvalidInputError):
        list(orbit(doubling, 0.1, -1))


def test_ensemble_step_keeps_shape(doubling, rng):
    x = rng.random(100)
    assert doubling.step(1, x).shape == (100,)


def test_alternating_family():
    family = AlternatingFamily([ExpandingCircleMap(2), ExpandingCircleMap(3)])
    points = list(orbit(family, 0.1, 3))
    assert points[1] == pytest.approx(0.2)
    assert points[2] == pytest.approx(0.6)
    assert points[3] == pytest.approx(0.2)
    assert family.cache_key(1) == family.cache_key(3) == 0
    assert family.marginal_map(2).q == 3


def test_rotation_is_affine():
    assert RotationMap(0.25).step(1, 0.9) == pytest.approx(0.15)
    assert RotationMap().affine


def test_solenoid_fibers_stay_in_disc(solenoid, rng):
    points = Space.solenoid.sample_lebesgue(rng, 2000)
    for i in range(1, 20):
        points = solenoid.step(i, points)
        assert np.all(np.hypot(points[:, 1], points[:, 2]) <= 1.0)


def test_solenoid_limit(solenoid):
    limit = solenoid.limit()
    assert limit.c == 0.0
    assert limit.amplitude(5) == 0.0
    assert solenoid.amplitude(0) == 0.0
    assert solenoid.amplitude(3) == pytest.approx(0.1 / 8)


def test_solenoid_stretched_decay():
    family = SolenoidFamily(decay='stretched')
    assert family.phi(4) == pytest.approx(math.exp(-2.0))


def test_solenoid_rejects_weak_contraction():
    with pytest.raises(ConfigurationError) as ctx:
        SolenoidFamily(lam=0.6, gamma=0.5, decay='cubic')
    assert len(ctx.value.errors) == 2


def test_step_accepts_tuple_points(solenoid):
    out = step(solenoid, 1, (0.25, (0.0, 0.0)))
    assert out.shape == (3,)
    assert out[0] == pytest.approx(0.5)


def test_slow_family(slow, rng):
    with pytest.raises(InvalidInputError):
        slow.step(0, (0.1, (0.0, 0.0)))
    points = Space.solenoid.sample_lebesgue(rng, 10)
    for i in range(1, 10):
        points = slow.step(i, points)
    assert np.all(points[:, 1] == 9 ** -0.5)
    assert np.all(points[:, 2] == 0.0)


def test_hitting_time_period_three_orbit(doubling):
    result = hitting_time(doubling, 1 / 7, 4 / 7, 0.01, 100)
    assert result.hit
    assert result.steps == 2


def test_hitting_time_whole_space(doubling):
    result = hitting_time(doubling, 0.1, 0.7, 0.5, 10)
    assert result.hit
    assert result.steps == 0


def test_hitting_time_start_in_ball(doubling):
    assert hitting_time(doubling, 0.3, 0.3, 1e-3, 10).steps == 0


def test_hitting_time_rotation():
    result = hitting_time(RotationMap(0.1), 0.0, 0.55, 0.06, 100)
    assert result.status is HitStatus.hit
    assert result.steps == 5


def test_hitting_time_censored():
    result = hitting_time(RotationMap(0.0), 0.1, 0.6, 0.1, 50)
    assert result.status is HitStatus.censored
    assert result.steps == 50
    assert not result.hit


def test_hitting_time_invalid(doubling):
    with pytest.raises(InvalidInputError):
        hitting_time(doubling, 0.1, 0.2, 0.0, 10)
    with pytest.raises(InvalidInputError):
        hitting_time(doubling, 0.1, 0.2, 0.1, 0)


def test_hitting_times_match_single_orbits(doubling, rng):
    x0 = rng.random(40)
    radii = [0.1, 0.02, 0.005]
    taus = hitting_times(doubling, x0, 0.618, radii, 5000)
    for row, x in zip(taus, x0):
        for tau, r in zip(row, radii):
            single = hitting_time(doubling, float(x), 0.618, r, 5000)
            assert tau == (single.steps if single.hit else -1)


def test_hitting_times_monotone_in_radius(solenoid, rng):
    x0 = Space.solenoid.sample_lebesgue(rng, 50)
    y = list(orbit(solenoid, (0.3, (0.0, 0.0)), 40))[-1]
    taus = hitting_times(solenoid, x0, y, [0.4, 0.2, 0.1], 100000)
    assert np.all(taus >= 0)
    assert np.all(np.diff(taus, axis=1) >= 0)


def test_verify_assumptions_default_solenoid(solenoid):
    report = verify_assumptions(solenoid, 2000, seed=1)
    assert report.passed
    assert report['contraction'].measured <= 0.25 + 1e-9
    assert report['x_derivative'].measured <= solenoid.x_derivative_bound
    assert len(report.decay) == 30
    assert report.to_json()['passed']


def test_verify_assumptions_needs_samples(solenoid):
    with pytest.raises(InvalidInputError):
        verify_assumptions(solenoid, 10)


def test_family_from_config():
    family = family_from_config({'family': 'solenoid', 'lambda': 0.3,
                                 'gamma': 0.4, 'decay': 'stretched'})
    assert family.lam == 0.3
    assert family.decay == 'stretched'
    alternating = family_from_config({'family': 'alternating',
                                      'degrees': [2, 3]})
    assert [m.q for m in alternating.maps] == [2, 3]


def test_family_from_config_rejects_unknown():
    with pytest.raises(ConfigurationError) as ctx:
        family_from_config({'family': 'expanding', 'q': 2, 'lam': 0.1})
    assert ctx.value.errors == ['family.lam']
    with pytest.raises(ConfigurationError):
        family_from_config({'family': 'tent'})


def test_write_orbit_csv(tmp_path, solenoid):
    path = tmp_path / 'orbit.csv'
    write_orbit_csv(str(path), solenoid, (0.1, (0.0, 0.0)), 3)
    lines = path.read_text().splitlines()
    assert lines[0].startswith('# solenoid')
    assert lines[1] == 'step,x,fiber1,fiber2'
    assert len(lines) == 6
