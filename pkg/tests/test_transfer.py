import math

import numpy as np
import pytest

from hitlaw.exc import InvalidInputError, NonConvergenceError
from hitlaw.measures import GridDensity, w_distance
from hitlaw.systems import AlternatingFamily, ExpandingCircleMap, RotationMap
from hitlaw.transfer import (ConvergenceCurve, Norm, SequentialOperator,
                             UlamMatrix, convergence_curve, equilibrium,
                             loss_of_memory, push, sequential_push,
                             stationary_density, ulam)


def _zero_mean(func, n_cells):
    return GridDensity.from_function(func, n_cells)


def test_ulam_rows_are_stochastic(perturbed):
    P = ulam(perturbed, 128).toarray()
    assert np.all(P >= 0)
    assert np.allclose(P.sum(axis=1), 1.0, atol=1e-12)


def test_ulam_doubling_entries(doubling):
    P = ulam(doubling, 4).toarray()
    expected = np.array([[0.5, 0.5, 0, 0],
                         [0, 0, 0.5, 0.5],
                         [0.5, 0.5, 0, 0],
                         [0, 0, 0.5, 0.5]])
    assert np.allclose(P, expected)


def test_ulam_identity():
    P = ulam(RotationMap(0.0), 16)
    assert np.array_equal(P.toarray(), np.eye(16))


def test_ulam_rotation_shifts_cells():
    P = ulam(RotationMap(1 / 8), 8).toarray()
    assert np.allclose(P, np.roll(np.eye(8), 1, axis=1))


def test_ulam_threads_agree(perturbed):
    one = ulam(perturbed, 200, 16).toarray()
    many = ulam(perturbed, 200, 16, threads=3).toarray()
    assert np.allclose(one, many, atol=1e-15)


@pytest.mark.parametrize('n_cells,samples', [(1, 4), (8, 0)])
def test_ulam_rejects(doubling, n_cells, samples):
    with pytest.raises(InvalidInputError):
        ulam(doubling, n_cells, samples)


def test_ulam_matrix_validates_rows():
    with pytest.raises(InvalidInputError):
        UlamMatrix(np.array([[0.5, 0.4], [0.0, 1.0]]))
    with pytest.raises(InvalidInputError):
        UlamMatrix(np.ones((2, 3)) / 3)


def test_lebesgue_is_invariant_under_doubling(doubling):
    f = push(ulam(doubling, 64), GridDensity.lebesgue(64))
    assert np.allclose(f.values, 1.0)


def test_push_dimension_mismatch(doubling):
    with pytest.raises(InvalidInputError):
        push(ulam(doubling, 8), GridDensity.lebesgue(16))


def test_push_keeps_mass(perturbed, cosine_density):
    f = push(ulam(perturbed, 256), cosine_density(256, 0.5))
    assert f.mass == pytest.approx(1.0, abs=1e-12)
    assert np.all(f.values >= 0)


def test_stationary_density_matches_equilibrium(perturbed):
    P = ulam(perturbed, 256)
    density = stationary_density(P)
    result = equilibrium(perturbed, 1e-12, n_cells=256)
    assert density.mass == pytest.approx(1.0)
    assert w_distance(density, result.density, n_nodes=256) < 1e-8
    assert result.residual < 1e-12


def test_equilibrium_step_cap(perturbed):
    with pytest.raises(NonConvergenceError) as ctx:
        equilibrium(perturbed, 1e-12, n_cells=64, max_steps=1)
    assert ctx.value.iterations == 1
    assert ctx.value.residual > 0


def test_equilibrium_rejects_tolerance(doubling):
    with pytest.raises(InvalidInputError):
        equilibrium(doubling, 0.0)


def test_sequential_push_alternating():
    maps = [ExpandingCircleMap(2), ExpandingCircleMap(3)]
    family = AlternatingFamily(maps)
    f = GridDensity.from_function(lambda x: 1 + 0.5 * np.sin(2 * np.pi * x),
                                  96)
    expected = push(ulam(maps[1], 96), push(ulam(maps[0], 96), f))
    result = sequential_push(family, 1, 2, f)
    assert np.allclose(result.values, expected.values, atol=1e-14)


def test_ulam_products_stay_stochastic(perturbed):
    maps = [perturbed, ExpandingCircleMap(3), RotationMap(0.3)]
    product = ulam(maps[0], 128)
    for circle_map in maps[1:] * 3:
        product = product @ ulam(circle_map, 128)
    assert isinstance(product, UlamMatrix)
    assert np.allclose(product.toarray().sum(axis=1), 1.0, atol=1e-8)


def test_ulam_product_matches_stepwise_push():
    family = AlternatingFamily([ExpandingCircleMap(2), ExpandingCircleMap(3)])
    operator = SequentialOperator(family, 96)
    f = GridDensity.from_function(lambda x: 1 + 0.5 * np.sin(2 * np.pi * x),
                                  96)
    product = operator.matrix(1)
    for i in range(2, 6):
        product = product @ operator.matrix(i)
    assert np.allclose(push(product, f).values,
                       sequential_push(family, 1, 5, f).values, atol=1e-13)


def test_sequential_push_doubling_cosine(doubling):
    f = GridDensity.from_function(lambda x: 1 + np.cos(2 * np.pi * x), 4096)
    result = sequential_push(doubling, 1, 10, f)
    assert np.mean(np.abs(result.values - 1.0)) < 2e-3
    assert result.mass == pytest.approx(1.0)


def test_sequential_operator_caches_by_key():
    family = AlternatingFamily([ExpandingCircleMap(2), ExpandingCircleMap(3)])
    operator = SequentialOperator(family, 32)
    assert operator.matrix(1) is operator.matrix(3)
    assert operator.matrix(2) is not operator.matrix(1)


def test_push_range_rejects_bad_range(doubling):
    operator = SequentialOperator(doubling, 16)
    with pytest.raises(InvalidInputError):
        operator.push_range(0, 3, GridDensity.lebesgue(16))
    with pytest.raises(InvalidInputError):
        operator.push_range(3, 2, GridDensity.lebesgue(16))


def test_convergence_curve_perturbed(perturbed, cosine_density):
    curve = convergence_curve(perturbed, cosine_density(256), 15)
    assert curve.norm is Norm.W
    assert curve.values[-1] < 1e-2 * curve.values[0]
    assert curve.rate > 0.3


def test_loss_of_memory_cosine_is_annihilated(doubling):
    g = _zero_mean(lambda x: np.cos(2 * np.pi * x), 256)
    curve = loss_of_memory(doubling, g, 6)
    assert curve.usable == 1
    assert curve.fit is None
    assert math.isinf(curve.rate)
    assert math.isnan(curve.r_squared)
    assert not curve.decreasing_tail()


def test_loss_of_memory_sawtooth(doubling):
    g = _zero_mean(lambda x: x - 0.5, 1024)
    curve = loss_of_memory(doubling, g, 8)
    assert curve.norm is Norm.W11
    assert curve.rate >= 0.5
    assert curve.decreasing_tail()


def test_loss_of_memory_sawtooth_is_fitted(doubling):
    # Blocks of 2**k cells are constant after k steps, 1024 cells vanish at
    # step 10.
    g = _zero_mean(lambda x: x - 0.5, 1024)
    curve = loss_of_memory(doubling, g, 30)
    assert curve.usable == 10
    assert curve.fit is not None
    assert 0.6 <= curve.rate <= 1.2
    assert curve.r_squared >= 0.95
    assert curve.decreasing_tail()


def test_loss_of_memory_alternating_sawtooth():
    family = AlternatingFamily([ExpandingCircleMap(2), ExpandingCircleMap(3)])
    g = _zero_mean(lambda x: x - 0.5, 1024)
    curve = loss_of_memory(family, g, 20)
    assert curve.usable >= 8
    assert curve.rate >= 0.4
    assert curve.r_squared >= 0.95
    assert curve.decreasing_tail()


def test_convergence_curve_sawtooth_density(doubling):
    f0 = GridDensity.from_function(lambda x: 1.0 + (x - 0.5), 1024)
    curve = convergence_curve(doubling, f0, 30)
    assert curve.usable == 10
    assert curve.ratio == pytest.approx(0.5, abs=0.1)
    assert curve.r_squared >= 0.95
    assert curve.decreasing_tail()


def test_loss_of_memory_needs_zero_mean(doubling, cosine_density):
    with pytest.raises(InvalidInputError):
        loss_of_memory(doubling, cosine_density(64), 3)


def test_curve_geometric_rate():
    steps = np.arange(11)
    curve = ConvergenceCurve(steps, 0.5 ** steps, 'W')
    assert curve.rate == pytest.approx(math.log(2))
    assert curve.ratio == pytest.approx(0.5)
    assert curve.r_squared == pytest.approx(1.0)
    assert curve.decreasing_tail()


def test_curve_drops_values_below_floor():
    curve = ConvergenceCurve(np.arange(5), [1.0, 0.5, 0.25, 1e-20, 0.0],
                             Norm.W)
    assert curve.usable == 3
    assert curve.rate == pytest.approx(math.log(2))


def test_curve_single_usable_point():
    curve = ConvergenceCurve([0, 1], [1.0, 0.0], Norm.W11)
    assert math.isinf(curve.rate)
    assert curve.ratio == 0.0
    assert math.isnan(curve.r_squared)
    assert not curve.decreasing_tail()


def test_curve_short_tail_is_not_decreasing():
    curve = ConvergenceCurve([0, 1, 2], [1.0, 0.5, 0.0], Norm.W)
    assert curve.usable == 2
    assert not curve.decreasing_tail()


@pytest.mark.parametrize('steps,values', [
    ([0, 1], [1.0]),
    ([0, 0], [1.0, 0.5]),
    ([0, 1], [1.0, -0.5]),
    ([0, 1], [1.0, math.nan]),
])
def test_curve_rejects(steps, values):
    with pytest.raises(InvalidInputError):
        ConvergenceCurve(steps, values, Norm.W)


def test_curve_csv(tmp_path):
    curve = ConvergenceCurve(np.arange(4), [1.0, 0.5, 0.25, 0.125], Norm.W)
    path = tmp_path / 'curve.csv'
    curve.write_csv(str(path))
    lines = path.read_text().splitlines()
    assert lines[0].startswith('# {')
    assert lines[1] == 'k,distance'
    assert lines[2] == '0,1.0'
