"""Sequential map families, orbits and hitting times.

A family ``i -> T_i`` acts through the sequential composition
``T^(k) = T_k o ... o T_1``.  Every ``step`` is vectorized: it takes a single
point or a whole ensemble (``(n,)`` on the circle, ``(n, 3)`` on the
solenoid) and returns the images in the same shape.

"""

import collections
import enum
import math
from abc import ABC, abstractmethod

import numpy as np

from .exc import ConfigurationError, InvalidInputError
from .log import logger
from .measures import Space, wrap
from .utils import make_rng, write_csv

__all__ = ('MapFamily', 'CircleMap', 'ExpandingCircleMap', 'RotationMap',
           'AlternatingFamily', 'SolenoidFamily', 'SlowFamily', 'HitStatus',
           'HitResult', 'Check', 'AssumptionReport', 'step', 'orbit',
           'hitting_time', 'hitting_times', 'verify_assumptions',
           'family_from_config', 'write_orbit_csv')

# Orbits of circle maps with integer slope computed in floating point live
# on dyadic rationals and collapse onto 0 within ~53 steps.  A deterministic
# perturbation of at most one ulp, keyed on the point itself, restores
# generic roundoff so long orbits shadow true ones.
_DITHER_SCALE = 2.0 ** 20 * (math.sqrt(5.0) - 1.0) / 2.0
_ULP = float(np.spacing(1.0))

# Radial clip target when a perturbed fiber would leave the disc.
_CLIP_NORM = 1.0 - 1e-9


def _dither(x):
    return np.mod(x * _DITHER_SCALE, 1.0) * _ULP


def _like(template, result):
    if np.ndim(template) == 0:
        return float(result)
    return result


class MapFamily(ABC):
    """An indexed family of maps of a phase space."""

    space = Space.circle
    first_index = 1

    @abstractmethod
    def step(self, i, points):
        raise NotImplementedError('Please implement this method')

    @property
    @abstractmethod
    def descriptor(self):
        raise NotImplementedError('Please implement this method')

    @property
    def autonomous(self):
        return False

    def cache_key(self, i):
        """Indices with equal keys have equal circle marginal maps."""
        return i

    def marginal_map(self, i):
        """The circle map acting on base coordinates at index ``i``."""
        raise InvalidInputError(
            '{} has no circle marginal'.format(self.descriptor))

    def __repr__(self):
        return '<{} {}>'.format(self.__class__.__name__, self.descriptor)


class CircleMap(MapFamily):
    """An autonomous circle map given by a monotone increasing lift."""

    affine = False

    @abstractmethod
    def lift(self, x):
        raise NotImplementedError('Please implement this method')

    @property
    def autonomous(self):
        return True

    def cache_key(self, i):
        return 0

    def marginal_map(self, i):
        return self

    def step(self, i, points):
        x = np.asarray(points, dtype=float)
        return _like(points, wrap(self.lift(x)))


class ExpandingCircleMap(CircleMap):
    """``T(x) = q x + epsilon sin(2 pi x) mod 1``."""

    __slots__ = ('_q', '_epsilon')

    def __init__(self, q=2, epsilon=0.0):
        if int(q) != q or q < 2:
            raise ConfigurationError('q should be an integer >= 2')
        if 2 * math.pi * abs(epsilon) >= q - 1:
            raise ConfigurationError(
                'epsilon={!r} breaks expansion: 2*pi*|epsilon| should be '
                'below q - 1 = {}'.format(epsilon, q - 1))
        self._q = int(q)
        self._epsilon = float(epsilon)

    @property
    def q(self):
        return self._q

    @property
    def epsilon(self):
        return self._epsilon

    @property
    def affine(self):
        return self._epsilon == 0.0

    @property
    def min_expansion(self):
        return self._q - 2 * math.pi * abs(self._epsilon)

    @property
    def descriptor(self):
        if self._epsilon:
            return 'T(x) = {}x + {!r} sin(2 pi x)'.format(self._q,
                                                          self._epsilon)
        return 'T(x) = {}x'.format(self._q)

    def lift(self, x):
        y = self._q * x
        if self._epsilon:
            y = y + self._epsilon * np.sin(2 * np.pi * x)
        return y

    def derivative(self, x):
        return self._q + 2 * np.pi * self._epsilon * np.cos(2 * np.pi * x)

    def step(self, i, points):
        x = np.asarray(points, dtype=float)
        y = wrap(self.lift(x))
        return _like(points, wrap(y + _dither(x)))


class RotationMap(CircleMap):
    """``x -> x + alpha mod 1``; ``alpha = 0`` is the identity."""

    __slots__ = ('_alpha',)
    affine = True

    def __init__(self, alpha=0.0):
        self._alpha = float(alpha)

    @property
    def alpha(self):
        return self._alpha

    @property
    def descriptor(self):
        return 'R(x) = x + {!r}'.format(self._alpha)

    def lift(self, x):
        return x + self._alpha


class AlternatingFamily(MapFamily):
    """Circle family cycling through ``maps``: ``T_i = maps[(i-1) % m]``."""

    __slots__ = ('_maps',)

    def __init__(self, maps):
        maps = tuple(maps)
        if not maps:
            raise ConfigurationError('An alternating family needs maps')
        self._maps = maps

    @property
    def maps(self):
        return self._maps

    @property
    def descriptor(self):
        return 'cycle[{}]'.format('; '.join(m.descriptor for m in self._maps))

    def cache_key(self, i):
        return (i - 1) % len(self._maps)

    def marginal_map(self, i):
        return self._maps[self.cache_key(i)]

    def step(self, i, points):
        return self.marginal_map(i).step(i, points)


def _dyadic(i):
    return 2.0 ** -i


def _stretched(i):
    return math.exp(-math.sqrt(i))


DECAYS = {'dyadic': _dyadic, 'stretched': _stretched}


class SolenoidFamily(MapFamily):
    """Skew products ``F_i(x, y) = (T(x), G_i(x, y))`` on ``S^1 x D^2``.

    ``G_0(x, y) = lambda y + gamma (cos 2 pi x, sin 2 pi x)`` and
    ``G_i = G_0 + c Phi(i) (sin 2 pi x, cos 2 pi x)``.  Index 0 is the limit
    map ``F_0``.
    """

    __slots__ = ('_base', '_lam', '_gamma', '_c', '_decay')
    space = Space.solenoid

    def __init__(self, q=2, epsilon=0.0, lam=0.25, gamma=0.5, c=0.1,
                 decay='dyadic'):
        errors = []
        if not 0 < lam < 1:
            errors.append('lambda should be in (0, 1)')
        if lam + abs(gamma) > 1:
            errors.append('lambda + |gamma| should not exceed 1')
        if decay not in DECAYS:
            errors.append('decay should be one of {}'.format(sorted(DECAYS)))
        if errors:
            raise ConfigurationError('; '.join(errors), errors)
        self._base = ExpandingCircleMap(q, epsilon)
        self._lam = float(lam)
        self._gamma = float(gamma)
        self._c = float(c)
        self._decay = decay

    @property
    def base(self):
        return self._base

    @property
    def lam(self):
        return self._lam

    @property
    def gamma(self):
        return self._gamma

    @property
    def c(self):
        return self._c

    @property
    def decay(self):
        return self._decay

    @property
    def descriptor(self):
        return ('solenoid[{}; lambda={!r} gamma={!r} c={!r} '
                'decay={}]'.format(self._base.descriptor, self._lam,
                                   self._gamma, self._c, self._decay))

    def phi(self, i):
        return DECAYS[self._decay](i)

    def amplitude(self, i):
        """Perturbation size ``c Phi(i)``; zero at the limit index 0."""
        return 0.0 if i == 0 else self._c * self.phi(i)

    @property
    def contraction_bound(self):
        return self._lam

    @property
    def x_derivative_bound(self):
        return 2 * math.pi * (abs(self._gamma) + abs(self._c) * self.phi(1))

    def decay_bound(self, i):
        return abs(self._c) * math.sqrt(2.0) * self.phi(i)

    def limit(self):
        """The autonomous limit family ``F_0``."""
        return SolenoidFamily(self._base.q, self._base.epsilon, self._lam,
                              self._gamma, 0.0, self._decay)

    def cache_key(self, i):
        return 0

    def marginal_map(self, i):
        return self._base

    def fiber_map(self, i, x, fiber):
        """``G_i(x, y)`` for base coordinates ``x`` and fibers ``(..., 2)``."""
        x = np.asarray(x, dtype=float)
        fiber = np.asarray(fiber, dtype=float)
        angle = 2 * np.pi * x
        cos, sin = np.cos(angle), np.sin(angle)
        amp = self.amplitude(i)
        out = np.empty(np.broadcast(x, fiber[..., 0]).shape + (2,))
        out[..., 0] = self._lam * fiber[..., 0] + self._gamma * cos + amp * sin
        out[..., 1] = self._lam * fiber[..., 1] + self._gamma * sin + amp * cos
        norm = np.hypot(out[..., 0], out[..., 1])
        outside = norm > 1.0
        if np.any(outside):
            logger.debug('Clipping %d fibers back into the disc at index %d',
                         int(np.count_nonzero(outside)), i)
            scale = np.where(outside, _CLIP_NORM / np.maximum(norm, 1.0), 1.0)
            out *= scale[..., np.newaxis]
        return out

    def step(self, i, points):
        p = np.asarray(points, dtype=float)
        out = np.empty_like(p)
        out[..., 0] = self._base.step(i, p[..., 0])
        out[..., 1:] = self.fiber_map(i, p[..., 0], p[..., 1:])
        return out


class SlowFamily(MapFamily):
    """``F_i(x, y) = (2x mod 1, (i^-1/2, 0))`` for ``i >= 1``.

    Orbits approach the leaf ``S^1 x {(0, 0)}`` only like ``i^-1/2``.
    """

    __slots__ = ('_base',)
    space = Space.solenoid
    target_leaf = (0.0, 0.0)

    def __init__(self, q=2):
        self._base = ExpandingCircleMap(q, 0.0)

    @property
    def base(self):
        return self._base

    @property
    def descriptor(self):
        return 'slow[{}; fiber i^-1/2]'.format(self._base.descriptor)

    @staticmethod
    def fiber_distance(i):
        return i ** -0.5

    def cache_key(self, i):
        return 0

    def marginal_map(self, i):
        return self._base

    def step(self, i, points):
        if i < 1:
            raise InvalidInputError(
                'SlowFamily maps are defined for i >= 1, got {}'.format(i))
        p = np.asarray(points, dtype=float)
        out = np.empty_like(p)
        out[..., 0] = self._base.step(i, p[..., 0])
        out[..., 1] = self.fiber_distance(i)
        out[..., 2] = 0.0
        return out


def step(family, i, point):
    """Apply the single factor ``T_i``."""
    return family.step(i, family.space.coerce(point))


def orbit(family, x0, n):
    """Yield ``x0, T^(1)(x0), ..., T^(n)(x0)``.

    ``x0`` may be a single point or an ensemble; each yielded array is a new
    object.
    """
    if n < 0:
        raise InvalidInputError('n should be zero or greater')
    x = family.space.coerce(x0)
    yield _like(x0, x) if family.space is Space.circle else x
    for k in range(n):
        x = family.step(family.first_index + k, x)
        yield x


class HitStatus(enum.Enum):
    hit = 'hit'
    censored = 'censored'


class HitResult(collections.namedtuple('HitResult', 'status steps')):
    __slots__ = ()

    @property
    def hit(self):
        return self.status is HitStatus.hit


def hitting_time(family, x0, y, r, n_max):
    """First ``n <= n_max`` with ``d(T^(n)(x0), y) < r``."""
    if r <= 0:
        raise InvalidInputError('r should be positive')
    if n_max < 1:
        raise InvalidInputError('n_max should be at least 1')
    space = family.space
    target = space.coerce(y)
    if r >= space.diameter:
        return HitResult(HitStatus.hit, 0)
    for n, x in enumerate(orbit(family, x0, n_max)):
        if space.distance(x, target) < r:
            return HitResult(HitStatus.hit, n)
    return HitResult(HitStatus.censored, n_max)


def hitting_times(family, points, y, radii, n_max):
    """Hitting times of an ensemble for a whole radius schedule.

    Returns an integer array ``(n_points, n_radii)`` holding ``-1`` where the
    orbit is censored at ``n_max``.  One pass over the orbits serves every
    radius; finished orbits are dropped from the active set.
    """
    space = family.space
    state = space.coerce(points)
    if space is Space.circle:
        state = np.atleast_1d(state)
    else:
        state = np.atleast_2d(state)
    target = space.coerce(y)
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    if np.any(radii <= 0):
        raise InvalidInputError('radii should be positive')
    n = state.shape[0]
    taus = np.full((n, radii.size), -1, dtype=np.int64)
    taus[:, radii >= space.diameter] = 0
    active = np.arange(n)
    for k in range(n_max + 1):
        if k:
            state = family.step(family.first_index + k - 1, state)
        dist = space.distance(state, target)
        pending = taus[active] < 0
        newly = pending & (dist[:, np.newaxis] < radii[np.newaxis, :])
        if newly.any():
            rows, cols = np.nonzero(newly)
            taus[active[rows], cols] = k
            still = (taus[active] < 0).any(axis=1)
            active = active[still]
            state = state[still]
            if active.size == 0:
                break
    if active.size:
        logger.debug('%d of %d orbits censored at horizon %d',
                     active.size, n, n_max)
    return taus


Check = collections.namedtuple('Check', 'name measured bound passed')


class AssumptionReport:
    """Measured contraction, x-derivative and decay of a solenoid family."""

    __slots__ = ('_family', '_checks', '_decay', '_notes')

    def __init__(self, family, checks, decay, notes=()):
        self._family = family
        self._checks = tuple(checks)
        self._decay = tuple(decay)
        self._notes = tuple(notes)

    @property
    def checks(self):
        return self._checks

    @property
    def decay(self):
        """Per-index ``(i, measured sup|G_i - G_0|, bound)`` rows."""
        return self._decay

    @property
    def notes(self):
        return self._notes

    @property
    def passed(self):
        return all(check.passed for check in self._checks)

    def __getitem__(self, name):
        for check in self._checks:
            if check.name == name:
                return check
        raise KeyError(name)

    def to_json(self):
        return {
            'family': self._family.descriptor,
            'passed': self.passed,
            'checks': [check._asdict() for check in self._checks],
            'notes': list(self._notes),
        }

    def __repr__(self):
        return '<{} passed={}>'.format(self.__class__.__name__, self.passed)


def verify_assumptions(family, n_samples=10000, *, seed=0, max_index=30,
                       eta=1e-6):
    """Empirical check of the contraction, smoothness and decay assumptions.

    Samples ``(x, y1, y2, i)`` and compares the measured contraction ratio,
    the finite-difference sup of ``dG_i/dx`` and ``sup|G_i - G_0|`` with the
    constants the family declares.
    """
    if n_samples < 100:
        raise InvalidInputError('n_samples should be at least 100')
    rng = make_rng(seed)
    x = rng.random(n_samples)
    y1 = Space.solenoid.sample_lebesgue(rng, n_samples)[:, 1:]
    y2 = Space.solenoid.sample_lebesgue(rng, n_samples)[:, 1:]
    index = rng.integers(1, max_index + 1, n_samples)

    images = np.empty((n_samples, 2))
    slopes = np.empty((n_samples, 2))
    for i in np.unique(index):
        rows = index == i
        images[rows] = (family.fiber_map(i, x[rows], y1[rows]) -
                        family.fiber_map(i, x[rows], y2[rows]))
        forward = family.fiber_map(i, x[rows] + eta, y1[rows])
        backward = family.fiber_map(i, x[rows] - eta, y1[rows])
        slopes[rows] = (forward - backward) / (2 * eta)

    gap = np.hypot(*(y1 - y2).T)
    keep = gap > 1e-12
    ratio = np.zeros(n_samples)
    ratio[keep] = np.hypot(*images[keep].T) / gap[keep]
    contraction = float(ratio.max())
    derivative = float(np.max(np.hypot(*slopes.T)))

    limit = family.fiber_map(0, x, y1)
    decay = []
    for i in range(1, max_index + 1):
        measured = float(np.max(np.hypot(*(family.fiber_map(i, x, y1) -
                                           limit).T)))
        decay.append((i, measured, family.decay_bound(i)))

    checks = [
        Check('contraction', contraction, family.contraction_bound,
              contraction <= family.contraction_bound + 1e-9),
        Check('x_derivative', derivative, family.x_derivative_bound,
              derivative <= family.x_derivative_bound * (1 + 1e-6) + 1e-6),
        Check('decay', max(m / b if b else m for _, m, b in decay), 1.0,
              all(m <= b + 1e-12 for _, m, b in decay)),
    ]
    notes = ['Bounded Lipschitz multipliers is an analytical property and '
             'is not measured.']
    report = AssumptionReport(family, checks, decay, notes)
    logger.debug('Assumption report for %s: %s', family.descriptor,
                 [(c.name, c.measured, c.passed) for c in checks])
    return report


_FAMILY_KEYS = {
    'expanding': {'q', 'epsilon'},
    'rotation': {'alpha'},
    'alternating': {'degrees', 'epsilon'},
    'solenoid': {'q', 'epsilon', 'lambda', 'gamma', 'c', 'decay'},
    'slow': {'q'},
}


def family_from_config(cfg):
    """Build a circle or solenoid family from a JSON dict.

    Keys: ``family`` plus ``q``, ``epsilon``, ``lambda``, ``gamma``, ``c``,
    ``decay``, ``degrees`` or ``alpha`` depending on the kind.
    """
    kind = cfg.get('family')
    if kind not in _FAMILY_KEYS:
        raise ConfigurationError(
            'family should be one of {}, got {!r}'.format(
                sorted(_FAMILY_KEYS), kind), ['family'])
    unknown = sorted(set(cfg) - _FAMILY_KEYS[kind] - {'family'})
    if unknown:
        raise ConfigurationError(
            'Unknown keys for family {}: {}'.format(kind,
                                                    ', '.join(unknown)),
            ['family.{}'.format(k) for k in unknown])
    if kind == 'expanding':
        return ExpandingCircleMap(cfg.get('q', 2), cfg.get('epsilon', 0.0))
    if kind == 'rotation':
        return RotationMap(cfg.get('alpha', 0.0))
    if kind == 'alternating':
        eps = cfg.get('epsilon', 0.0)
        return AlternatingFamily(ExpandingCircleMap(q, eps)
                                 for q in cfg.get('degrees', (2, 3)))
    if kind == 'solenoid':
        return SolenoidFamily(q=cfg.get('q', 2),
                              epsilon=cfg.get('epsilon', 0.0),
                              lam=cfg.get('lambda', 0.25),
                              gamma=cfg.get('gamma', 0.5),
                              c=cfg.get('c', 0.1),
                              decay=cfg.get('decay', 'dyadic'))
    return SlowFamily(cfg.get('q', 2))


def write_orbit_csv(path, family, x0, n, *, timestamp=False):
    coords = (['x'] if family.space is Space.circle
              else ['x', 'fiber1', 'fiber2'])
    rows = ((k,) + tuple(np.atleast_1d(p))
            for k, p in enumerate(orbit(family, x0, n)))
    write_csv(path, ['step'] + coords, rows,
              comments=[family.descriptor], timestamp=timestamp)
