"""Ulam discretization of transfer operators on the circle.

The transfer operator of a circle map acts on a :class:`GridDensity` through a
row-stochastic matrix ``P``: ``P[i, j]`` is the fraction of cell ``i`` mapped
into cell ``j`` and a density is pushed by ``P.T``.

"""

import collections
import enum
import json
import math

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as sparse_linalg

from .exc import InvalidInputError, NonConvergenceError
from .log import logger
from .measures import GridDensity, w11_norm, w_distance, wrap
from .utils import fit_line, parallel_map, to_jsonable, write_csv

__all__ = ('UlamMatrix', 'SequentialOperator', 'Norm', 'ConvergenceCurve',
           'Equilibrium', 'ulam', 'push', 'sequential_push', 'equilibrium',
           'stationary_density', 'convergence_curve', 'loss_of_memory',
           'DEFAULT_SAMPLES_PER_CELL', 'MAX_EQUILIBRIUM_STEPS')

DEFAULT_SAMPLES_PER_CELL = 64
MAX_EQUILIBRIUM_STEPS = 10 ** 4

# Curve values below this fraction of the curve's maximum are roundoff.
CURVE_FLOOR = 1e-13
CURVE_ABS_FLOOR = 1e-15
MIN_TAIL_POINTS = 5


class UlamMatrix:
    """Row-stochastic ``n_cells x n_cells`` matrix, immutable."""

    __slots__ = ('_matrix',)

    def __init__(self, matrix):
        matrix = sparse.csr_matrix(matrix, dtype=float)
        rows, cols = matrix.shape
        if rows != cols or rows < 1:
            raise InvalidInputError('An Ulam matrix should be square')
        data = matrix.data
        if data.size and (data.min() < 0 or data.max() > 1 + 1e-12):
            raise InvalidInputError('Ulam entries should lie in [0, 1]')
        sums = np.asarray(matrix.sum(axis=1)).ravel()
        if np.max(np.abs(sums - 1.0)) > 1e-9:
            raise InvalidInputError('Ulam rows should sum to 1')
        self._matrix = matrix

    @property
    def n_cells(self):
        return self._matrix.shape[0]

    @property
    def matrix(self):
        return self._matrix

    def toarray(self):
        return self._matrix.toarray()

    def __matmul__(self, other):
        """``self @ other`` is "apply ``self``, then ``other``"."""
        if not isinstance(other, UlamMatrix):
            return NotImplemented
        return UlamMatrix(self._matrix @ other.matrix)

    def rows(self):
        coo = self._matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        return zip(coo.row[order], coo.col[order], coo.data[order])

    def write_csv(self, path, *, timestamp=False):
        write_csv(path, ['i', 'j', 'p'], self.rows(), timestamp=timestamp)

    def __repr__(self):
        return '<{} n_cells={} nnz={}>'.format(
            self.__class__.__name__, self.n_cells, self._matrix.nnz)


def _exact_entries(circle_map, n_cells, cells):
    edges = np.arange(n_cells + 1) / n_cells
    lo = circle_map.lift(edges[cells]) * n_cells
    hi = circle_map.lift(edges[cells + 1]) * n_cells
    length = hi - lo
    first = np.floor(lo)
    span = int(np.max(np.ceil(hi) - first))
    rows, cols, vals = [], [], []
    for k in range(span):
        j = first + k
        overlap = np.minimum(hi, j + 1) - np.maximum(lo, j)
        keep = overlap > 1e-9 * length
        rows.append(cells[keep])
        cols.append(j[keep].astype(np.int64) % n_cells)
        vals.append(overlap[keep] / length[keep])
    return (np.concatenate(rows), np.concatenate(cols),
            np.concatenate(vals))


def _sampled_entries(circle_map, n_cells, cells, samples_per_cell):
    offsets = (np.arange(samples_per_cell) + 0.5) / samples_per_cell
    points = (cells[:, np.newaxis] + offsets[np.newaxis, :]) / n_cells
    images = wrap(circle_map.lift(points))
    cols = np.floor(images * n_cells).astype(np.int64) % n_cells
    rows = np.repeat(cells, samples_per_cell)
    vals = np.full(rows.size, 1.0 / samples_per_cell)
    return rows, cols.ravel(), vals


def ulam(circle_map, n_cells, samples_per_cell=DEFAULT_SAMPLES_PER_CELL, *,
         exact=None, threads=1):
    """Ulam matrix of ``circle_map`` on ``n_cells`` equal cells.

    Affine maps (``x -> q x``, rotations) get the exact interval-image
    fractions; other maps are estimated from ``samples_per_cell`` equally
    spaced points per cell.
    """
    if n_cells < 2:
        raise InvalidInputError('n_cells should be at least 2')
    if samples_per_cell < 1:
        raise InvalidInputError('samples_per_cell should be at least 1')
    if exact is None:
        exact = circle_map.affine

    def build(bounds):
        cells = np.arange(*bounds)
        if exact:
            return _exact_entries(circle_map, n_cells, cells)
        return _sampled_entries(circle_map, n_cells, cells, samples_per_cell)

    step = max(1, -(-n_cells // max(1, threads)))
    parts = parallel_map(build, [(s, min(s + step, n_cells))
                                 for s in range(0, n_cells, step)], threads)
    rows = np.concatenate([p[0] for p in parts])
    cols = np.concatenate([p[1] for p in parts])
    vals = np.concatenate([p[2] for p in parts])
    matrix = sparse.coo_matrix((vals, (rows, cols)),
                               shape=(n_cells, n_cells)).tocsr()
    matrix.sum_duplicates()
    sums = np.asarray(matrix.sum(axis=1)).ravel()
    matrix = sparse.diags(1.0 / sums) @ matrix
    return UlamMatrix(matrix)


def push(P, f):
    """Push the density ``f`` forward by the Ulam matrix ``P``."""
    if P.n_cells != f.n_cells:
        raise InvalidInputError(
            'Dimension mismatch: matrix has {} cells, density {}'.format(
                P.n_cells, f.n_cells))
    return GridDensity(P.matrix.T @ f.values)


class SequentialOperator:
    """Ulam matrices of a family's circle marginal, cached by index key."""

    __slots__ = ('_family', '_n_cells', '_samples', '_threads', '_cache')

    def __init__(self, family, n_cells,
                 samples_per_cell=DEFAULT_SAMPLES_PER_CELL, threads=1):
        self._family = family
        self._n_cells = n_cells
        self._samples = samples_per_cell
        self._threads = threads
        self._cache = {}

    @property
    def family(self):
        return self._family

    @property
    def n_cells(self):
        return self._n_cells

    def matrix(self, i):
        key = self._family.cache_key(i)
        P = self._cache.get(key)
        if P is None:
            P = ulam(self._family.marginal_map(i), self._n_cells,
                     self._samples, threads=self._threads)
            self._cache[key] = P
        return P

    def push(self, i, f):
        return push(self.matrix(i), f)

    def push_range(self, j, k, f):
        if j < self._family.first_index or k < j:
            raise InvalidInputError(
                'Invalid index range [{}, {}]'.format(j, k))
        for i in range(j, k + 1):
            f = self.push(i, f)
        return f

    def iterates(self, f, n):
        """Yield ``f, L^(1) f, ..., L^(n) f``."""
        yield f
        start = self._family.first_index
        for k in range(n):
            f = self.push(start + k, f)
            yield f


def sequential_push(family, j, k, f, *,
                    samples_per_cell=DEFAULT_SAMPLES_PER_CELL, operator=None):
    """``L^(j,k) f = L_{T_k} o ... o L_{T_j} f``."""
    if operator is None:
        operator = SequentialOperator(family, f.n_cells, samples_per_cell)
    return operator.push_range(j, k, f)


Equilibrium = collections.namedtuple('Equilibrium', 'density residual steps')


def equilibrium(family, tol=1e-10, *, n_cells=1024,
                samples_per_cell=DEFAULT_SAMPLES_PER_CELL,
                max_steps=MAX_EQUILIBRIUM_STEPS, operator=None):
    """Iterate from Lebesgue until successive W distances drop below tol."""
    if tol <= 0:
        raise InvalidInputError('tol should be positive')
    if operator is None:
        operator = SequentialOperator(family, n_cells, samples_per_cell)
    f = GridDensity.lebesgue(operator.n_cells)
    start = family.first_index
    residual = math.inf
    for k in range(max_steps):
        g = operator.push(start + k, f)
        residual = w_distance(g, f, n_nodes=operator.n_cells)
        f = g
        logger.debug('equilibrium step %d residual %.3e', k + 1, residual)
        if residual < tol:
            return Equilibrium(f, residual, k + 1)
    raise NonConvergenceError(
        'No equilibrium within {} steps, last residual {:.3e}'.format(
            max_steps, residual), residual, max_steps)


def stationary_density(P):
    """Leading eigenvector of ``P.T`` as a probability density."""
    _, vectors = sparse_linalg.eigs(P.matrix.T, k=1, which='LM')
    v = np.real(vectors[:, 0])
    v = v / v.sum()
    return GridDensity.from_masses(v)


class Norm(enum.Enum):
    W = 'W'
    W11 = 'W11'


class ConvergenceCurve:
    """Distances per step with a log-linear tail fit."""

    __slots__ = ('_steps', '_values', '_norm', '_fit', '_rate', '_notes',
                 '_usable')

    def __init__(self, steps, values, norm, notes=()):
        steps = np.asarray(steps, dtype=np.int64)
        values = np.asarray(values, dtype=float)
        if steps.shape != values.shape:
            raise InvalidInputError('steps and values should match')
        if np.any(np.diff(steps) <= 0):
            raise InvalidInputError('steps should be strictly increasing')
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise InvalidInputError('curve values should be finite and >= 0')
        self._steps = steps
        self._values = values
        self._norm = Norm(norm)
        self._notes = tuple(notes)
        self._usable = self._count_usable()
        self._fit, self._rate = self._fit_tail()

    def _count_usable(self):
        values = self._values
        if not values.size:
            return 0
        floor = max(CURVE_FLOOR * values.max(), CURVE_ABS_FLOOR)
        below = np.nonzero(values <= floor)[0]
        return int(below[0]) if below.size else values.size

    def _fit_tail(self):
        values = self._values
        usable = self._usable
        if usable == 0:
            return None, math.nan
        if usable == 1:
            # The input was annihilated after finitely many steps.
            return None, (math.inf if values.size > 1 else math.nan)
        start = min(usable // 2, max(usable - MIN_TAIL_POINTS, 0))
        if usable - start < MIN_TAIL_POINTS:
            logger.warning('Rate fitted on %d points only', usable - start)
        fit = fit_line(self._steps[start:usable],
                       np.log(values[start:usable]))
        return fit, -fit.slope

    @property
    def steps(self):
        return self._steps

    @property
    def values(self):
        return self._values

    distances = values

    @property
    def norm(self):
        return self._norm

    @property
    def notes(self):
        return self._notes

    @property
    def fit(self):
        return self._fit

    @property
    def usable(self):
        """Number of leading values above the roundoff floor."""
        return self._usable

    def decreasing_tail(self):
        """Whether the second half of the usable values strictly decreases.

        A tail of fewer than two values shows nothing and is ``False``.
        """
        tail = self._values[self._usable // 2:self._usable]
        if tail.size < 2:
            return False
        return bool(np.all(np.diff(tail) < 0))

    @property
    def rate(self):
        """Fitted exponential rate; ``inf`` once the curve hits roundoff."""
        return self._rate

    @property
    def ratio(self):
        """Per-step contraction factor ``exp(-rate)``."""
        return math.exp(-self._rate) if not math.isnan(self._rate) \
            else math.nan

    @property
    def r_squared(self):
        """``nan`` unless a tail line was fitted."""
        if self._fit is None:
            return math.nan
        return self._fit.r_squared

    def header(self):
        return {'norm': self._norm.value, 'rate': self._rate,
                'ratio': self.ratio, 'r_squared': self.r_squared,
                'notes': list(self._notes)}

    def rows(self):
        return zip(self._steps, self._values)

    def write_csv(self, path, *, timestamp=False):
        write_csv(path, ['k', 'distance'], self.rows(),
                  comments=[json.dumps(to_jsonable(self.header()),
                                       sort_keys=True)],
                  timestamp=timestamp)

    def __repr__(self):
        return '<{} norm={} points={} rate={:.4g}>'.format(
            self.__class__.__name__, self._norm.value, self._values.size,
            self._rate)


def convergence_curve(family, f0, n, *, equilibrium_density=None,
                      operator=None, tol=1e-12):
    """``||L^(k) f0 - mu||_W`` for ``k = 0..n``."""
    if operator is None:
        operator = SequentialOperator(family, f0.n_cells)
    if equilibrium_density is None:
        equilibrium_density = equilibrium(family, tol,
                                          operator=operator).density
    distances = [w_distance(f, equilibrium_density, n_nodes=f0.n_cells)
                 for f in operator.iterates(f0, n)]
    return ConvergenceCurve(np.arange(n + 1), distances, Norm.W)


def loss_of_memory(family, g, n, *, operator=None):
    """``w11_norm(L^(k) g)`` for ``k = 0..n`` of a zero-mean ``g``."""
    if abs(g.mass) > 1e-10:
        raise InvalidInputError(
            'loss_of_memory needs a zero-mean density, mass is {!r}'.format(
                g.mass))
    if operator is None:
        operator = SequentialOperator(family, g.n_cells)
    norms = [w11_norm(f) for f in operator.iterates(g, n)]
    return ConvergenceCurve(
        np.arange(n + 1), norms, Norm.W11,
        notes=['circle W^{1,1} proxy for the strong norm'])
