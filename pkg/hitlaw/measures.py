"""Phase spaces, measure representations and their norms.

Two phase spaces are supported: the unit circle ``S^1 = [0, 1)`` with the
geodesic distance, and the filled torus ``S^1 x D^2`` with the product
distance ``max(d_circle(x, x'), |u - u'|)``.  Points are numpy arrays: a
circle ensemble has shape ``(n,)``, a solenoid ensemble ``(n, 3)`` with
columns ``(base, fiber1, fiber2)``.

Measures are either a :class:`GridDensity`, a piecewise constant density on
a uniform partition of the circle, or an :class:`EmpiricalMeasure`, a
weighted point cloud.  Both are immutable once built.

"""

import collections
import enum
import math

import numpy as np
from scipy import optimize, sparse

from .exc import InvalidInputError

__all__ = ('Space', 'SolenoidPoint', 'GridDensity', 'EmpiricalMeasure',
           'circle_point', 'circle_distance', 'lip_norm', 'w_distance',
           'w_distance_lp', 'w11_norm', 'integrate', 'marginal',
           'lebesgue_sampler', 'density_sampler', 'measure_from_json',
           'DEFAULT_W_NODES')

DEFAULT_W_NODES = 4096

# The clip radius of the closed unit disc.
DISC_RADIUS = 1.0

SolenoidPoint = collections.namedtuple('SolenoidPoint', 'base fiber')


def wrap(x):
    """Reduce to ``[0, 1)``; ``-1e-20 % 1.0`` would otherwise give 1.0."""
    r = np.mod(x, 1.0)
    return np.where(r >= 1.0, 0.0, r)


def circle_point(x):
    return float(wrap(float(x)))


def circle_distance(a, b):
    d = np.mod(np.abs(np.asarray(a, dtype=float) -
                      np.asarray(b, dtype=float)), 1.0)
    return np.minimum(d, 1.0 - d)


class Space(enum.Enum):
    circle = 'circle'
    solenoid = 'solenoid'

    @property
    def dim(self):
        return 1 if self is Space.circle else 3

    @property
    def diameter(self):
        # Geodesic diameter of S^1 is 1/2; the disc has diameter 2.
        return 0.5 if self is Space.circle else 2.0

    def coerce(self, points):
        """Array form of a point or an ensemble.

        Solenoid points may be given as ``(base, (fiber1, fiber2))``.
        """
        if self is Space.solenoid and isinstance(points, tuple) \
                and len(points) == 2 and np.ndim(points[0]) == 0 \
                and np.ndim(points[1]) == 1:
            points = (points[0],) + tuple(points[1])
        arr = np.array(points, dtype=float)
        if self is Space.solenoid and arr.shape[-1:] != (3,):
            raise InvalidInputError(
                'Solenoid points need 3 coordinates, got shape {}'.format(
                    arr.shape))
        if not np.all(np.isfinite(arr)):
            raise InvalidInputError('Points should be finite')
        return self.reduce(arr)

    def reduce(self, points):
        if self is Space.circle:
            return wrap(points)
        out = np.array(points, dtype=float)
        out[..., 0] = wrap(out[..., 0])
        return out

    def distance(self, a, b):
        if self is Space.circle:
            return circle_distance(a, b)
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        base = circle_distance(a[..., 0], b[..., 0])
        fiber = np.hypot(a[..., 1] - b[..., 1], a[..., 2] - b[..., 2])
        return np.maximum(base, fiber)

    def sample_lebesgue(self, rng, n):
        """``n`` points from the normalized volume of the space."""
        if self is Space.circle:
            return rng.random(n)
        base = rng.random(n)
        radius = np.sqrt(rng.random(n))
        angle = 2 * np.pi * rng.random(n)
        return np.column_stack((base, radius * np.cos(angle),
                                radius * np.sin(angle)))

    def point(self, base, fiber=None):
        if self is Space.circle:
            return circle_point(base)
        if fiber is None:
            raise InvalidInputError('Solenoid points need a fiber')
        fiber = np.asarray(fiber, dtype=float)
        if fiber @ fiber > DISC_RADIUS + 1e-12:
            raise InvalidInputError(
                'Fiber {} is outside the unit disc'.format(fiber.tolist()))
        return np.array([circle_point(base), fiber[0], fiber[1]])


class GridDensity:
    """Piecewise constant signed density on ``n_cells`` equal circle cells."""

    __slots__ = ('_values',)

    def __init__(self, values):
        values = np.array(values, dtype=float)
        if values.ndim != 1 or values.size < 1:
            raise InvalidInputError('Density values should be a 1-d array')
        if not np.all(np.isfinite(values)):
            raise InvalidInputError('Density values should be finite')
        values.setflags(write=False)
        self._values = values

    @classmethod
    def lebesgue(cls, n_cells):
        return cls(np.ones(n_cells))

    @classmethod
    def from_function(cls, func, n_cells):
        """Sample ``func`` at cell midpoints."""
        mids = (np.arange(n_cells) + 0.5) / n_cells
        return cls(np.broadcast_to(np.asarray(func(mids), dtype=float),
                                   (n_cells,)))

    @classmethod
    def from_masses(cls, masses):
        masses = np.asarray(masses, dtype=float)
        return cls(masses * masses.size)

    @property
    def space(self):
        return Space.circle

    @property
    def n_cells(self):
        return self._values.size

    @property
    def width(self):
        return 1.0 / self._values.size

    @property
    def values(self):
        return self._values

    @property
    def masses(self):
        return self._values * self.width

    @property
    def mass(self):
        return float(np.mean(self._values))

    @property
    def midpoints(self):
        return (np.arange(self.n_cells) + 0.5) / self.n_cells

    @property
    def edges(self):
        return np.arange(self.n_cells + 1) / self.n_cells

    def is_probability(self, tol=1e-12):
        return bool(np.all(self._values >= 0) and
                    abs(self.mass - 1.0) <= tol)

    def normalized(self):
        mass = self.mass
        if mass == 0:
            raise InvalidInputError('Cannot normalize a zero mass density')
        return GridDensity(self._values / mass)

    def cdf(self):
        """Cumulative mass at the ``n_cells + 1`` cell edges."""
        return np.concatenate(([0.0], np.cumsum(self.masses)))

    def sample(self, rng, n):
        """Draw ``n`` points by inverting the piecewise linear CDF."""
        if np.any(self._values < 0):
            raise InvalidInputError('Cannot sample a signed density')
        cdf = self.cdf()
        u = rng.random(n) * cdf[-1]
        # np.interp needs strictly increasing abscissae; empty cells are
        # skipped by searching in the CDF instead.
        cell = np.clip(np.searchsorted(cdf, u, side='right') - 1,
                       0, self.n_cells - 1)
        masses = self.masses
        inside = np.divide(u - cdf[cell], masses[cell],
                           out=np.full(n, 0.5), where=masses[cell] > 0)
        return wrap((cell + inside) / self.n_cells)

    def _check_other(self, other):
        if not isinstance(other, GridDensity):
            return NotImplemented
        if other.n_cells != self.n_cells:
            raise InvalidInputError(
                'Grid mismatch: {} cells vs {} cells'.format(
                    self.n_cells, other.n_cells))
        return other

    def __add__(self, other):
        other = self._check_other(other)
        if other is NotImplemented:
            return other
        return GridDensity(self._values + other.values)

    def __sub__(self, other):
        other = self._check_other(other)
        if other is NotImplemented:
            return other
        return GridDensity(self._values - other.values)

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return GridDensity(self._values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return GridDensity(-self._values)

    def to_json(self):
        return {'space': self.space.value, 'n_cells': self.n_cells,
                'data': self._values.tolist()}

    def rows(self):
        return ((i, v) for i, v in enumerate(self._values))

    def __repr__(self):
        return '<{} n_cells={} mass={:.6g}>'.format(
            self.__class__.__name__, self.n_cells, self.mass)


class EmpiricalMeasure:
    """Weighted point cloud in a phase space."""

    __slots__ = ('_space', '_points', '_weights')

    def __init__(self, points, weights=None, *, space=Space.circle,
                 mass=None):
        space = Space(space)
        points = space.coerce(points)
        if space is Space.circle:
            points = np.atleast_1d(points)
        else:
            points = np.atleast_2d(points)
        n = points.shape[0]
        if n == 0:
            raise InvalidInputError('An empirical measure needs points')
        if weights is None:
            weights = np.full(n, (1.0 if mass is None else mass) / n)
        weights = np.array(weights, dtype=float)
        if weights.shape != (n,):
            raise InvalidInputError(
                'Expected {} weights, got shape {}'.format(n, weights.shape))
        if not np.all(np.isfinite(weights)):
            raise InvalidInputError('Weights should be finite')
        if np.any(weights < 0):
            raise InvalidInputError('Weights should be nonnegative')
        if mass is not None and abs(math.fsum(weights) - mass) > 1e-12:
            raise InvalidInputError(
                'Weights sum to {!r}, declared mass is {!r}'.format(
                    math.fsum(weights), mass))
        points.setflags(write=False)
        weights.setflags(write=False)
        self._space = space
        self._points = points
        self._weights = weights

    @classmethod
    def dirac(cls, point, space=Space.circle):
        space = Space(space)
        return cls(space.coerce(point)[np.newaxis, ...], [1.0], space=space)

    @classmethod
    def uniform(cls, points, space=Space.circle):
        return cls(points, space=space, mass=1.0)

    @property
    def space(self):
        return self._space

    @property
    def points(self):
        return self._points

    @property
    def weights(self):
        return self._weights

    @property
    def n_points(self):
        return self._points.shape[0]

    @property
    def mass(self):
        return math.fsum(self._weights)

    def to_json(self):
        data = np.column_stack((self._points, self._weights)).tolist()
        return {'space': self._space.value, 'n_points': self.n_points,
                'data': data}

    def rows(self):
        table = np.column_stack((self._points, self._weights))
        return (tuple(row) for row in table)

    def __repr__(self):
        return '<{} space={} n_points={} mass={:.6g}>'.format(
            self.__class__.__name__, self._space.value, self.n_points,
            self.mass)


def measure_from_json(payload):
    space = Space(payload['space'])
    if 'n_cells' in payload:
        density = GridDensity(payload['data'])
        if density.n_cells != payload['n_cells']:
            raise InvalidInputError('n_cells does not match the data')
        return density
    table = np.asarray(payload['data'], dtype=float)
    if table.shape[0] != payload['n_points']:
        raise InvalidInputError('n_points does not match the data')
    points = table[:, 0] if space is Space.circle else table[:, :3]
    return EmpiricalMeasure(points, table[:, -1], space=space)


def marginal(mu):
    """Circle marginal (base projection) of a solenoid measure."""
    if isinstance(mu, GridDensity) or mu.space is Space.circle:
        return mu
    return EmpiricalMeasure(mu.points[:, 0], mu.weights, space=Space.circle)


def lebesgue_sampler(space=Space.circle):
    space = Space(space)

    def sampler(rng, n):
        return space.sample_lebesgue(rng, n)

    sampler.space = space
    return sampler


def density_sampler(density):
    def sampler(rng, n):
        return density.sample(rng, n)

    sampler.space = Space.circle
    return sampler


def integrate(g, mu):
    """``∫ g dmu``; ``g`` is vectorized over point arrays."""
    if isinstance(mu, GridDensity):
        values = np.broadcast_to(
            np.asarray(g(mu.midpoints), dtype=float), (mu.n_cells,))
        return float(np.dot(values, mu.values) * mu.width)
    values = np.broadcast_to(np.asarray(g(mu.points), dtype=float),
                             mu.weights.shape)
    return float(np.dot(values, mu.weights))


def lip_norm(samples, *, period=1.0, wrap_around=True):
    """``max(Lip(g), sup|g|)`` of ``g`` sampled on a uniform grid."""
    g = np.asarray(samples, dtype=float)
    if g.ndim != 1 or g.size < 2:
        raise InvalidInputError('lip_norm needs a grid of at least 2 nodes')
    if not np.all(np.isfinite(g)):
        raise InvalidInputError('Samples should be finite')
    spacing = period / g.size if wrap_around else period / (g.size - 1)
    if wrap_around:
        diffs = np.diff(g, append=g[0])
    else:
        diffs = np.diff(g)
    return float(max(np.max(np.abs(g)), np.max(np.abs(diffs)) / spacing))


def w11_norm(f):
    """Discrete ``||f||_1 + ||f'||_1`` with wrap-around differences."""
    if f.n_cells < 2:
        raise InvalidInputError('w11_norm needs at least 2 cells')
    values = f.values
    return float(np.mean(np.abs(values)) +
                 np.sum(np.abs(np.diff(values, append=values[0]))))


def _node_weights(mu, n_nodes):
    """Deposit ``mu`` on the nodes ``i / n_nodes`` by linear interpolation.

    The deposit is exact for test functions that are linear between nodes:
    point masses split by their position, and each cell of a density, when
    cells and node intervals coincide, integrates to the trapezoid rule.
    """
    if isinstance(mu, GridDensity):
        positions = mu.midpoints
        masses = mu.masses
    else:
        if mu.space is not Space.circle:
            raise InvalidInputError(
                'w_distance works on circle measures; project solenoid '
                'measures with marginal() first')
        positions = mu.points
        masses = mu.weights
    if not np.all(np.isfinite(masses)):
        raise InvalidInputError('Measure weights should be finite')
    scaled = wrap(positions) * n_nodes
    left = np.floor(scaled).astype(np.int64)
    frac = scaled - left
    left %= n_nodes
    right = (left + 1) % n_nodes
    out = np.bincount(left, weights=masses * (1.0 - frac),
                      minlength=n_nodes)
    out += np.bincount(right, weights=masses * frac, minlength=n_nodes)
    return out


def _check_measures(mu, nu):
    for m in (mu, nu):
        if not isinstance(m, (GridDensity, EmpiricalMeasure)):
            raise InvalidInputError(
                'Expected a measure, got {!r}'.format(m))
    if mu.space is not nu.space:
        raise InvalidInputError('Measures live on different spaces: '
                                '{} vs {}'.format(mu.space.value,
                                                  nu.space.value))


def w_distance(mu, nu, n_nodes=DEFAULT_W_NODES):
    """Wasserstein-Kantorovich-like distance on the circle.

    ``sup |∫ g d(mu - nu)|`` over ``|g| <= 1`` with Lipschitz constant at
    most 1, with ``g`` linear between ``n_nodes`` equally spaced nodes.

    For balanced measures the box constraint is inactive (the circle has
    diameter 1/2) and the chain LP reduces to transport along the cycle:
    with ``F`` the cumulative node imbalance the optimum is
    ``h * sum |F - median(F)|``.  Unbalanced measures go through the LP.
    """
    _check_measures(mu, nu)
    if n_nodes < 2:
        raise InvalidInputError('n_nodes should be at least 2')
    w = _node_weights(mu, n_nodes) - _node_weights(nu, n_nodes)
    scale = max(abs(_total(mu)), abs(_total(nu)), 1.0)
    if abs(w.sum()) > 1e-12 * scale:
        return _w_lp(w)
    cumulative = np.cumsum(w)
    centre = np.median(cumulative)
    return float(np.sum(np.abs(cumulative - centre)) / n_nodes)


def w_distance_lp(mu, nu, n_nodes=256):
    """Same quantity as :func:`w_distance`, by a general LP solver."""
    _check_measures(mu, nu)
    return _w_lp(_node_weights(mu, n_nodes) - _node_weights(nu, n_nodes))


def _total(mu):
    return mu.mass


def _w_lp(w):
    n = w.size
    h = 1.0 / n
    rows = np.arange(n)
    diff = sparse.coo_matrix(
        (np.concatenate((np.ones(n), -np.ones(n))),
         (np.concatenate((rows, rows)),
          np.concatenate(((rows + 1) % n, rows)))),
        shape=(n, n)).tocsr()
    a_ub = sparse.vstack((diff, -diff)).tocsr()
    b_ub = np.full(2 * n, h)
    result = optimize.linprog(-w, A_ub=a_ub, b_ub=b_ub,
                              bounds=[(-1.0, 1.0)] * n, method='highs')
    if not result.success:
        raise InvalidInputError(
            'W distance LP failed: {}'.format(result.message))
    return float(abs(result.fun))
