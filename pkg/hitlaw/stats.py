"""Scaling estimators: hitting-time exponents, local dimensions, the
logarithm-law verdict and the Borel–Cantelli ratio."""

import collections
import enum
import math

import numpy as np

from .exc import DegenerateTargetError, InsufficientDataError, \
    InsufficientHorizonError, InvalidInputError
from .log import logger
from .measures import EmpiricalMeasure, Space, lebesgue_sampler
from .systems import hitting_times
from .utils import CHUNK_SIZE, chunk_bounds, fit_line, make_rng, \
    parallel_map, write_csv

__all__ = ('RadiiSchedule', 'PowerRadii', 'ScalingPoint', 'ScalingFit',
           'Verdict', 'Comparison', 'BorelCantelliCurve', 'loglaw_exponent',
           'local_dimension', 'box_dimension', 'equilibrium_cloud',
           'product_cloud', 'borel_cantelli_ratio', 'compare',
           'MIN_UNCENSORED', 'MIN_BALL_POINTS', 'MIN_R_SQUARED')

# A radius enters the hitting-time regression only if this fraction of its
# samples hit within the horizon.
MIN_UNCENSORED = 0.95
MIN_BALL_POINTS = 50
MIN_DIMENSION_RADII = 3
MIN_CLOUD_POINTS = 10 ** 4
MIN_LOGLAW_SAMPLES = 30
MIN_R_SQUARED = 0.9


class RadiiSchedule:
    """Geometric radii ``r_k = r0 * ratio**k`` for ``k = 0 .. count - 1``."""

    __slots__ = ('_r0', '_ratio', '_count')

    def __init__(self, r0=2.0 ** -5, ratio=0.5, count=8):
        if not r0 > 0:
            raise InvalidInputError('r0 should be positive')
        if not 0 < ratio < 1:
            raise InvalidInputError('ratio should be in (0, 1)')
        if int(count) != count or count < 1:
            raise InvalidInputError('count should be a positive integer')
        self._r0 = float(r0)
        self._ratio = float(ratio)
        self._count = int(count)

    @property
    def r0(self):
        return self._r0

    @property
    def ratio(self):
        return self._ratio

    @property
    def count(self):
        return self._count

    def radius(self, k):
        return self._r0 * self._ratio ** k

    @property
    def radii(self):
        return self._r0 * self._ratio ** np.arange(self._count)

    def __len__(self):
        return self._count

    def __iter__(self):
        return iter(self.radii)

    def to_json(self):
        return {'r0': self._r0, 'ratio': self._ratio, 'count': self._count}

    def __repr__(self):
        return '<{} r0={!r} ratio={!r} count={}>'.format(
            self.__class__.__name__, self._r0, self._ratio, self._count)


class PowerRadii:
    """Shrinking targets ``r_k = k**-beta`` for ``k >= 1``."""

    __slots__ = ('_beta', '_count')

    def __init__(self, beta=0.5, count=None):
        if not beta > 0:
            raise InvalidInputError('beta should be positive')
        self._beta = float(beta)
        self._count = None if count is None else int(count)

    @property
    def beta(self):
        return self._beta

    @property
    def count(self):
        return self._count

    def radius(self, k):
        if k < 1:
            raise InvalidInputError('PowerRadii starts at k = 1')
        return float(k) ** -self._beta

    @property
    def radii(self):
        if self._count is None:
            raise InvalidInputError('PowerRadii without count is unbounded')
        return np.arange(1, self._count + 1, dtype=float) ** -self._beta

    def __len__(self):
        if self._count is None:
            raise TypeError('PowerRadii without count has no length')
        return self._count

    def to_json(self):
        return {'beta': self._beta, 'count': self._count}

    def __repr__(self):
        return '<{} beta={!r}>'.format(self.__class__.__name__, self._beta)


ScalingPoint = collections.namedtuple(
    'ScalingPoint', 'radius log_abscissa log_ordinate n censored')


class ScalingFit:
    """Least squares line through the usable points of a scaling law.

    ``dropped`` keeps the radii rejected by the estimator's rule so the
    censoring diagnostics travel with the fit.
    """

    __slots__ = ('_points', '_dropped', '_fit', '_meta')

    header = ('radius', 'log_abscissa', 'log_ordinate', 'n', 'censored',
              'used')

    def __init__(self, points, dropped=(), meta=None):
        self._points = tuple(ScalingPoint(*p) for p in points)
        self._dropped = tuple(ScalingPoint(*p) for p in dropped)
        if len(self._points) < 2:
            raise InsufficientDataError(
                'A scaling fit needs at least two points',
                self._points + self._dropped)
        self._fit = fit_line([p.log_abscissa for p in self._points],
                             [p.log_ordinate for p in self._points])
        self._meta = dict(meta or {})

    @property
    def slope(self):
        return self._fit.slope

    @property
    def intercept(self):
        return self._fit.intercept

    @property
    def r_squared(self):
        return self._fit.r_squared

    @property
    def points(self):
        return self._points

    @property
    def dropped(self):
        return self._dropped

    @property
    def meta(self):
        return self._meta

    def rows(self):
        used = [p + (1,) for p in self._points]
        dropped = [p + (0,) for p in self._dropped]
        return sorted(used + dropped, key=lambda row: -row[0])

    def write_csv(self, path, *, timestamp=False):
        write_csv(path, self.header, self.rows(), timestamp=timestamp)

    def to_json(self):
        payload = {'slope': self.slope, 'intercept': self.intercept,
                   'r2': self.r_squared, 'n_points': len(self._points),
                   'n_dropped': len(self._dropped)}
        payload.update(self._meta)
        return payload

    def __repr__(self):
        return '<{} slope={:.4f} r2={:.4f} points={}>'.format(
            self.__class__.__name__, self.slope, self.r_squared,
            len(self._points))


def _radii(schedule):
    radii = np.asarray(schedule.radii if hasattr(schedule, 'radii')
                       else schedule, dtype=float)
    if radii.ndim != 1 or radii.size < 1 or np.any(radii <= 0):
        raise InvalidInputError('radii should be a positive 1-d sequence')
    return radii


def loglaw_exponent(family, y, mu0_sampler, schedule, n_samples, n_max, *,
                    seed=0, threads=1):
    """Slope of ``mean log tau_r`` against ``-log r``.

    The same initial conditions serve every radius; a hit at step 0 counts
    as ``log 1``.
    """
    if n_samples < MIN_LOGLAW_SAMPLES:
        raise InvalidInputError('n_samples should be at least {}'.format(
            MIN_LOGLAW_SAMPLES))
    if n_max < 1:
        raise InvalidInputError('n_max should be at least 1')
    radii = _radii(schedule)
    target = family.space.coerce(y)
    chunks = chunk_bounds(n_samples, CHUNK_SIZE)

    def run_chunk(item):
        index, (start, stop) = item
        rng = make_rng(seed, index)
        points = mu0_sampler(rng, stop - start)
        return hitting_times(family, points, target, radii, n_max)

    taus = np.vstack(parallel_map(run_chunk, enumerate(chunks), threads))
    used, dropped = [], []
    for k, r in enumerate(radii):
        column = taus[:, k]
        hit = column >= 0
        n_hit = int(np.count_nonzero(hit))
        censored = n_samples - n_hit
        mean_log = (float(np.mean(np.log(np.maximum(column[hit], 1))))
                    if n_hit else math.nan)
        point = ScalingPoint(float(r), -math.log(r), mean_log, n_samples,
                             censored)
        if n_hit >= MIN_UNCENSORED * n_samples:
            used.append(point)
        else:
            dropped.append(point)
    if dropped:
        logger.warning('Dropped %d of %d radii with more than %d%% censored '
                       'orbits at horizon %d', len(dropped), radii.size,
                       round(100 * (1 - MIN_UNCENSORED)), n_max)
    if len(used) < 2:
        raise InsufficientHorizonError(
            'Only {} radii have {}% uncensored hitting times within '
            'horizon {}'.format(len(used), round(100 * MIN_UNCENSORED),
                                n_max), used + dropped)
    return ScalingFit(used, dropped, {'seed': seed, 'n_samples': n_samples,
                                      'horizon': n_max})


def local_dimension(cloud, y, schedule, *, min_cloud=MIN_CLOUD_POINTS):
    """Slope of ``log mu(B_r(y))`` against ``log r`` over radii holding at
    least ``MIN_BALL_POINTS`` cloud points."""
    if cloud.n_points < min_cloud:
        raise InvalidInputError('cloud should have at least {} points'.format(
            min_cloud))
    radii = _radii(schedule)
    dist = cloud.space.distance(cloud.points, cloud.space.coerce(y))
    used, dropped = [], []
    for r in radii:
        inside = dist < r
        count = int(np.count_nonzero(inside))
        mass = float(np.sum(cloud.weights[inside]))
        point = ScalingPoint(float(r), math.log(r),
                             math.log(mass) if mass > 0 else -math.inf,
                             count, 0)
        (used if count >= MIN_BALL_POINTS and mass > 0 else dropped).append(
            point)
    if len(used) < MIN_DIMENSION_RADII:
        raise InsufficientDataError(
            'Only {} radii contain {} cloud points'.format(
                len(used), MIN_BALL_POINTS), used + dropped)
    return ScalingFit(used, dropped, {'n_points': cloud.n_points})


def box_dimension(cloud, scales=None):
    """Box-counting dimension: slope of ``log N(eps)`` against ``-log eps``.

    Boxes are axis aligned cubes of side ``eps`` in the coordinates of the
    space.
    """
    if scales is None:
        scales = RadiiSchedule(0.25, 0.5, 6)
    scales = _radii(scales)
    points = np.asarray(cloud.points, dtype=float)
    if points.ndim == 1:
        points = points[:, np.newaxis]
    shifted = points - points.min(axis=0)
    fits = []
    for eps in scales:
        boxes = np.floor(shifted / eps).astype(np.int64)
        count = np.unique(boxes, axis=0).shape[0]
        fits.append(ScalingPoint(float(eps), -math.log(eps), math.log(count),
                                 count, 0))
    return ScalingFit(fits, meta={'n_points': cloud.n_points})


def equilibrium_cloud(family, n_points, burn_in, seed=0, *, threads=1):
    """Lebesgue-seeded points pushed ``burn_in`` steps through the family."""
    if burn_in < 1:
        raise InvalidInputError('burn_in should be at least 1')
    sampler = lebesgue_sampler(family.space)

    def run_chunk(item):
        index, (start, stop) = item
        state = sampler(make_rng(seed, index), stop - start)
        for k in range(burn_in):
            state = family.step(family.first_index + k, state)
        return state

    chunks = list(enumerate(chunk_bounds(n_points, 4 * CHUNK_SIZE)))
    parts = parallel_map(run_chunk, chunks, threads)
    points = np.concatenate(parts, axis=0)
    return EmpiricalMeasure.uniform(points, space=family.space)


class BorelCantelliCurve:
    """``E(Z_n)`` and the ratio ``Z_n / E(Z_n)`` of held-out orbits."""

    __slots__ = ('_expectation', '_counts')

    def __init__(self, expectation, counts):
        self._expectation = np.asarray(expectation, dtype=float)
        self._counts = np.atleast_2d(np.asarray(counts, dtype=float))

    @property
    def steps(self):
        return np.arange(1, self._expectation.size + 1)

    @property
    def expectation(self):
        return self._expectation

    @property
    def counts(self):
        """``Z_n`` per held-out orbit, shape ``(n_orbits, n_steps)``."""
        return self._counts

    @property
    def ratios(self):
        e = self._expectation
        return np.divide(self._counts, e, out=np.full(self._counts.shape,
                                                      np.nan),
                         where=e > 0)

    @property
    def final_ratios(self):
        return self.ratios[:, -1]

    def fraction_within(self, low=0.5, high=1.5):
        final = self.final_ratios
        return float(np.mean((final >= low) & (final <= high)))

    def rows(self):
        ratios = self.ratios
        median = np.median(ratios, axis=0)
        for j, n in enumerate(self.steps):
            yield (int(n), self._expectation[j], ratios[0, j], median[j])

    def write_csv(self, path, *, timestamp=False):
        write_csv(path, ['n', 'expectation', 'ratio', 'median_ratio'],
                  self.rows(), timestamp=timestamp)

    def __repr__(self):
        return '<{} n_steps={} n_orbits={}>'.format(
            self.__class__.__name__, self._expectation.size,
            self._counts.shape[0])


def _target_radii(schedule, n_steps):
    """``r_1 .. r_n`` of a shrinking target sequence."""
    if isinstance(schedule, PowerRadii):
        return np.arange(1, n_steps + 1, dtype=float) ** -schedule.beta
    radii = _radii(schedule)
    if radii.size < n_steps:
        raise InvalidInputError(
            'The schedule has {} radii for {} steps'.format(radii.size,
                                                          n_steps))
    return radii[:n_steps]


def _bumps(dist, k, radii):
    """``phi_k``: 1 on ``B(y, r_k)``, 0 outside ``B(y, r_{k-1})``, linear
    between; ``phi_1`` is the indicator of ``B(y, r_1)``."""
    inner = radii[k - 1]
    if k == 1:
        return (dist < inner).astype(float)
    outer = radii[k - 2]
    if outer <= inner:
        return (dist < inner).astype(float)
    return np.clip((outer - dist) / (outer - inner), 0.0, 1.0)


def borel_cantelli_ratio(family, y, schedule, n_samples, n_steps, seed=0, *,
                         n_orbits=1, iid=False, threads=1):
    """Running visit counts ``Z_n`` of held-out orbits over their Monte Carlo
    expectation.

    With ``iid`` the held-out values at each step are taken from randomly
    chosen members of the Monte Carlo ensemble, which keeps the marginals
    and drops the dynamical correlations.
    """
    if n_samples < 1 or n_steps < 1 or n_orbits < 1:
        raise InvalidInputError(
            'n_samples, n_steps and n_orbits should be positive')
    radii = _target_radii(schedule, n_steps)
    space = family.space
    if isinstance(schedule, PowerRadii) and space is Space.circle \
            and schedule.beta >= 1.0:
        logger.warning('Radii k**-%g violate beta * d < 1 for d = 1 on the '
                       'circle; Z_n / E(Z_n) need not tend to 1',
                       schedule.beta)
    target = space.coerce(y)
    sampler = lebesgue_sampler(space)
    chunks = chunk_bounds(n_samples, CHUNK_SIZE)

    def run_chunk(item):
        index, (start, stop) = item
        rng = make_rng(seed, 0, index)
        state = sampler(rng, stop - start)
        sums = np.empty(n_steps)
        picks = np.empty((n_orbits, n_steps)) if iid and index == 0 else None
        for k in range(1, n_steps + 1):
            state = family.step(family.first_index + k - 1, state)
            values = _bumps(space.distance(state, target), k, radii)
            sums[k - 1] = values.sum()
            if picks is not None:
                picks[:, k - 1] = values[rng.integers(values.size,
                                                      size=n_orbits)]
        return sums, picks

    results = parallel_map(run_chunk, enumerate(chunks), threads)
    expectation = np.cumsum(sum(r[0] for r in results)) / n_samples
    if not np.any(expectation > 0):
        raise DegenerateTargetError(
            'The target is never visited by {} sample orbits in {} steps'
            .format(n_samples, n_steps))
    if iid:
        counts = np.cumsum(results[0][1], axis=1)
    else:
        state = sampler(make_rng(seed, 1), n_orbits)
        values = np.empty((n_orbits, n_steps))
        for k in range(1, n_steps + 1):
            state = family.step(family.first_index + k - 1, state)
            values[:, k - 1] = _bumps(space.distance(state, target), k,
                                      radii)
        counts = np.cumsum(values, axis=1)
    return BorelCantelliCurve(expectation, counts)


class Verdict(enum.Enum):
    passed = 'pass'
    failed = 'fail'
    inconclusive = 'inconclusive'


class Comparison(collections.namedtuple(
        'Comparison', 'verdict difference tol loglaw dimension reasons')):
    """Logarithm law check: hitting-time exponent against local dimension."""

    __slots__ = ()

    def to_json(self):
        return {'verdict': self.verdict.value, 'difference': self.difference,
                'tol': self.tol, 'loglaw': self.loglaw.to_json(),
                'dimension': self.dimension.to_json(),
                'censoring': [p._asdict() for p in self.loglaw.dropped],
                'reasons': list(self.reasons)}


def compare(loglaw, dimension, tol=0.2):
    if tol < 0:
        raise InvalidInputError('tol should be zero or greater')
    difference = abs(loglaw.slope - dimension.slope)
    reasons = []
    for name, fit in (('loglaw', loglaw), ('dimension', dimension)):
        if not fit.r_squared >= MIN_R_SQUARED:
            reasons.append('{} fit r2={:.3f} below {}'.format(
                name, fit.r_squared, MIN_R_SQUARED))
    if reasons:
        verdict = Verdict.inconclusive
    elif difference <= tol:
        verdict = Verdict.passed
    else:
        verdict = Verdict.failed
        reasons.append('|{:.4f} - {:.4f}| = {:.4f} exceeds {}'.format(
            loglaw.slope, dimension.slope, difference, tol))
    return Comparison(verdict, difference, tol, loglaw, dimension,
                      tuple(reasons))


def product_cloud(n_points, fiber=(0.0, 0.0), seed=0):
    """Uniform base coordinates times an atom at ``fiber``: the limit
    measure of systems whose fibers collapse onto a single leaf."""
    base = make_rng(seed, 0).random(n_points)
    points = np.column_stack((base, np.full(n_points, float(fiber[0])),
                              np.full(n_points, float(fiber[1]))))
    return EmpiricalMeasure.uniform(points, space=Space.solenoid)
