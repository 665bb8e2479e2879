"""Mean-field coupled expanding maps.

Every subsystem follows ``x -> Phi(T(x))`` where ``Phi`` displaces points by
``delta * ∫ h(x, y) dmu(y)``, ``mu`` being the distribution of the whole
population.  The global state is pushed by the self-consistent transfer
operator; observed along one coordinate the dynamics is the nonautonomous
family ``T_n = Phi_{delta, mu_n} o T``.

"""

import collections
import enum
import threading
from abc import ABC, abstractmethod

import numpy as np

from .exc import ConfigurationError, InvalidInputError, InversionError, \
    NonConvergenceError
from .log import logger
from .measures import EmpiricalMeasure, GridDensity, Space, \
    circle_distance, integrate, w11_norm, wrap
from .systems import CircleMap, ExpandingCircleMap, MapFamily
from .transfer import ConvergenceCurve, Norm, push, ulam
from .utils import make_rng

__all__ = ('Coupling', 'SineCoupling', 'KernelCoupling', 'Representation',
           'MeanFieldConfig', 'MeanFieldSystem', 'GlobalState',
           'CoupledMap', 'InducedFamily', 'FixedPointResult',
           'mean_displacement', 'phi', 'sct_step', 'fixed_point',
           'induced_family', 'initial_state', 'limit_map',
           'map_sup_distance',
           'MAX_FIXED_POINT_STEPS', 'MAX_KERNEL_PARTICLES')

MAX_FIXED_POINT_STEPS = 10 ** 4
# General kernels cost O(N^2) per step on particle ensembles.
MAX_KERNEL_PARTICLES = 5000
# Induced families stop extending their state sequence once successive
# states agree to this W^{1,1} distance, which sits just above the roundoff
# level of a 4096-cell density.
FREEZE_TOL = 1e-11
MAX_CACHED_STATES = 1000

_BISECTION_STEPS = 64
_KERNEL_CHUNK = 512


class Coupling(ABC):
    """Coupling kernel ``h(x, y)``: how a subsystem at ``y`` moves ``x``."""

    name = ''

    @abstractmethod
    def __call__(self, x, y):
        raise NotImplementedError('Please implement this method')

    @property
    @abstractmethod
    def dx_sup(self):
        """``sup |dh/dx|``."""

    @property
    @abstractmethod
    def sup(self):
        """``sup |h|``."""

    def displacement(self, measure):
        """``x -> ∫ h(x, y) dmeasure(y)`` as a vectorized callable."""
        if isinstance(measure, GridDensity):
            points, weights = measure.midpoints, measure.masses
        else:
            points, weights = measure.points, measure.weights

        def evaluate(x):
            x = np.asarray(x, dtype=float)
            flat = x.ravel()
            out = np.empty(flat.size)
            for start in range(0, flat.size, _KERNEL_CHUNK):
                chunk = flat[start:start + _KERNEL_CHUNK]
                out[start:start + _KERNEL_CHUNK] = \
                    self(chunk[:, np.newaxis], points[np.newaxis, :]) @ weights
            return out.reshape(x.shape)

        return evaluate

    def __repr__(self):
        return '<{} {}>'.format(self.__class__.__name__, self.name)


class SineCoupling(Coupling):
    """``h(x, y) = sin(2 pi (y - x))``.

    Since ``sin 2pi(y - x) = sin 2pi y cos 2pi x - cos 2pi y sin 2pi x`` the
    mean field needs only two averages of the state.
    """

    name = 'sin'

    def __call__(self, x, y):
        return np.sin(2 * np.pi * (y - x))

    @property
    def dx_sup(self):
        return 2 * np.pi

    @property
    def sup(self):
        return 1.0

    def displacement(self, measure):
        s = integrate(lambda y: np.sin(2 * np.pi * y), measure)
        c = integrate(lambda y: np.cos(2 * np.pi * y), measure)

        def evaluate(x):
            angle = 2 * np.pi * np.asarray(x, dtype=float)
            return s * np.cos(angle) - c * np.sin(angle)

        evaluate.coefficients = (s, c)
        return evaluate


class KernelCoupling(Coupling):
    """A user supplied smooth kernel with its declared bounds."""

    __slots__ = ('_func', '_dx_sup', '_sup', 'name')

    def __init__(self, func, dx_sup, sup, name='kernel'):
        self._func = func
        self._dx_sup = float(dx_sup)
        self._sup = float(sup)
        self.name = name

    def __call__(self, x, y):
        return self._func(x, y)

    @property
    def dx_sup(self):
        return self._dx_sup

    @property
    def sup(self):
        return self._sup


COUPLINGS = {'sin': SineCoupling}


class Representation(enum.Enum):
    density = 'density'
    particles = 'particles'


class MeanFieldConfig:
    """The system ``(S^1, T, delta, h)`` and how its state is represented."""

    __slots__ = ('_base', '_coupling', '_delta', '_representation',
                 '_n_cells', '_n_particles', '_seed')

    def __init__(self, base=None, coupling=None, delta=0.0, *,
                 representation=Representation.density, n_cells=4096,
                 n_particles=10 ** 5, seed=0):
        self._base = base if base is not None else ExpandingCircleMap(2)
        self._coupling = coupling if coupling is not None else SineCoupling()
        representation = Representation(representation)
        errors = []
        if delta < 0:
            errors.append('delta should be zero or greater')
        elif delta >= self.delta_max_of(self._coupling):
            errors.append(
                'coupling too strong: delta={!r} should be below '
                'delta_max={:.6g} = 1 / (2 sup|dh/dx|)'.format(
                    delta, self.delta_max_of(self._coupling)))
        if n_cells < 2:
            errors.append('n_cells should be at least 2')
        if n_particles < 1:
            errors.append('n_particles should be at least 1')
        if (representation is Representation.particles
                and not isinstance(self._coupling, SineCoupling)
                and n_particles > MAX_KERNEL_PARTICLES):
            errors.append('general kernels support at most {} particles'
                          .format(MAX_KERNEL_PARTICLES))
        if errors:
            raise ConfigurationError('; '.join(errors), errors)
        self._delta = float(delta)
        self._representation = representation
        self._n_cells = int(n_cells)
        self._n_particles = int(n_particles)
        self._seed = int(seed)

    @staticmethod
    def delta_max_of(coupling):
        return 1.0 / (2.0 * coupling.dx_sup)

    @classmethod
    def from_dict(cls, cfg):
        """Build from ``{base: {q, epsilon}, coupling, delta,
        representation, n_cells | n_particles, seed}``."""
        known = {'base', 'coupling', 'delta', 'representation', 'n_cells',
                 'n_particles', 'seed'}
        errors = ['meanfield.{}: unknown key'.format(k)
                  for k in sorted(set(cfg) - known)]
        base_cfg = cfg.get('base', {})
        errors += ['meanfield.base.{}: unknown key'.format(k)
                   for k in sorted(set(base_cfg) - {'q', 'epsilon'})]
        coupling = cfg.get('coupling', 'sin')
        if coupling not in COUPLINGS:
            errors.append('meanfield.coupling: should be one of {}'.format(
                sorted(COUPLINGS)))
        if errors:
            raise ConfigurationError('; '.join(errors), errors)
        return cls(ExpandingCircleMap(base_cfg.get('q', 2),
                                      base_cfg.get('epsilon', 0.0)),
                   COUPLINGS[coupling](), cfg.get('delta', 0.0),
                   representation=cfg.get('representation', 'density'),
                   n_cells=cfg.get('n_cells', 4096),
                   n_particles=cfg.get('n_particles', 10 ** 5),
                   seed=cfg.get('seed', 0))

    @property
    def base(self):
        return self._base

    @property
    def coupling(self):
        return self._coupling

    @property
    def delta(self):
        return self._delta

    @property
    def delta_max(self):
        return self.delta_max_of(self._coupling)

    @property
    def representation(self):
        return self._representation

    @property
    def n_cells(self):
        return self._n_cells

    @property
    def n_particles(self):
        return self._n_particles

    @property
    def seed(self):
        return self._seed

    def to_json(self):
        return {'base': {'q': self._base.q, 'epsilon': self._base.epsilon},
                'coupling': self._coupling.name, 'delta': self._delta,
                'representation': self._representation.value,
                'n_cells': self._n_cells, 'n_particles': self._n_particles,
                'seed': self._seed}

    def __repr__(self):
        return '<{} {} delta={!r} h={} {}>'.format(
            self.__class__.__name__, self._base.descriptor, self._delta,
            self._coupling.name, self._representation.value)


class GlobalState:
    """Distribution of the population at time ``t``."""

    __slots__ = ('_measure', '_t')

    def __init__(self, measure, t=0):
        if isinstance(measure, EmpiricalMeasure) \
                and measure.space is not Space.circle:
            raise InvalidInputError('Mean-field states live on the circle')
        if abs(measure.mass - 1.0) > 1e-9:
            raise InvalidInputError(
                'A global state should have mass 1, got {!r}'.format(
                    measure.mass))
        self._measure = measure
        self._t = int(t)

    @property
    def measure(self):
        return self._measure

    @property
    def t(self):
        return self._t

    @property
    def is_density(self):
        return isinstance(self._measure, GridDensity)

    def __repr__(self):
        return '<{} t={} {!r}>'.format(self.__class__.__name__, self._t,
                                       self._measure)


def initial_state(config, density=None, *, seed=None):
    """State at ``t = 0`` distributed like ``density`` (Lebesgue if None).

    Particle states draw ``n_particles`` points, i.e. ``M = {1..N}`` with
    uniform weights.
    """
    if density is None:
        density = GridDensity.lebesgue(config.n_cells)
    density = density.normalized()
    if config.representation is Representation.density:
        return GlobalState(density)
    rng = make_rng(config.seed if seed is None else seed, 0)
    return GlobalState(EmpiricalMeasure.uniform(
        density.sample(rng, config.n_particles)))


class MeanFieldSystem:
    """A config together with its cached base Ulam matrix."""

    __slots__ = ('_config', '_ulam', '_lock')

    def __init__(self, config):
        self._config = config
        self._ulam = None
        self._lock = threading.Lock()

    @property
    def config(self):
        return self._config

    def base_matrix(self, n_cells):
        with self._lock:
            if self._ulam is None or self._ulam.n_cells != n_cells:
                self._ulam = ulam(self._config.base, n_cells)
            return self._ulam

    def displacement(self, measure):
        """``x -> delta ∫ h(x, y) dmeasure(y)``."""
        delta = self._config.delta
        inner = self._config.coupling.displacement(measure)

        def evaluate(x):
            return delta * inner(x)

        evaluate.bound = delta * self._config.coupling.sup
        return evaluate

    def push_phi(self, f, displacement):
        """Push ``f`` by ``Phi(x) = x + D(x)`` through the pulled-back CDF.

        ``Phi^-1`` is found by bisection at the cell edges; each new cell
        receives ``F(Phi^-1(b_{j+1})) - F(Phi^-1(b_j))`` with ``F`` the
        lifted cumulative mass of ``f``, which is the change of variables
        ``f(Phi^-1) (Phi^-1)'`` integrated over the cell.
        """
        edges = f.edges
        bound = displacement.bound + 1e-12
        lo = edges - bound
        hi = edges + bound
        for _ in range(_BISECTION_STEPS):
            mid = 0.5 * (lo + hi)
            above = mid + displacement(mid) > edges
            hi = np.where(above, mid, hi)
            lo = np.where(above, lo, mid)
        z = 0.5 * (lo + hi)
        error = np.max(np.abs(z + displacement(z) - edges))
        if not error < 1e-9:
            raise InversionError(
                'Phi inversion failed, residual {!r}'.format(error),
                {'residual': float(error), 'delta': self._config.delta})
        cdf = f.cdf()
        whole = np.floor(z)
        lifted = whole * cdf[-1] + np.interp(z - whole, edges, cdf)
        masses = np.diff(lifted)
        if np.any(masses < -1e-12 * max(cdf[-1], 1.0)) \
                and np.all(f.values >= 0):
            raise InversionError('Phi is not monotone on the grid',
                                 {'min_mass': float(masses.min()),
                                  'delta': self._config.delta})
        g = GridDensity.from_masses(masses)
        if g.mass:
            g = g * (f.mass / g.mass)
        return g

    def step(self, state):
        measure = state.measure
        displacement = self.displacement(measure)
        base = self._config.base
        if isinstance(measure, GridDensity):
            pushed = push(self.base_matrix(measure.n_cells), measure)
            if self._config.delta:
                pushed = self.push_phi(pushed, displacement)
            return GlobalState(pushed, state.t + 1)
        images = base.step(state.t, measure.points)
        moved = wrap(images + displacement(images))
        return GlobalState(EmpiricalMeasure(moved, measure.weights),
                           state.t + 1)


def _coerce_state(state):
    if isinstance(state, GlobalState):
        return state
    return GlobalState(state)


def mean_displacement(x, state, config):
    """``delta ∫ h(x, y) dmu(y)``."""
    measure = _coerce_state(state).measure
    if np.ndim(x) == 0:
        return config.delta * integrate(
            lambda y: config.coupling(float(x), y), measure)
    return MeanFieldSystem(config).displacement(measure)(x)


def phi(x, state, config):
    """``Phi_{delta, mu}(x) = x + delta ∫ h(x, y) dmu(y) mod 1``."""
    shift = mean_displacement(x, state, config)
    out = wrap(np.asarray(x, dtype=float) + shift)
    return float(out) if np.ndim(x) == 0 else out


def sct_step(state, config, *, system=None):
    """One step of the self-consistent transfer operator."""
    if system is None:
        system = MeanFieldSystem(config)
    return system.step(_coerce_state(state))


class FixedPointResult(collections.namedtuple(
        'FixedPointResult', 'density residual iterations residuals')):
    __slots__ = ()

    @property
    def curve(self):
        """Residual history as a W^{1,1} convergence curve."""
        return ConvergenceCurve(np.arange(1, len(self.residuals) + 1),
                                self.residuals, Norm.W11)


def fixed_point(config, tol=1e-10, *, max_iter=MAX_FIXED_POINT_STEPS,
                initial=None, system=None):
    """Iterate the self-consistent operator from Lebesgue to its fixed point.

    Stops when ``w11_norm(f_{k+1} - f_k) < tol``.
    """
    if config.representation is not Representation.density:
        raise InvalidInputError('fixed_point needs the density representation')
    if tol <= 0:
        raise InvalidInputError('tol should be positive')
    if system is None:
        system = MeanFieldSystem(config)
    state = GlobalState(initial if initial is not None
                        else GridDensity.lebesgue(config.n_cells))
    residuals = []
    for k in range(1, max_iter + 1):
        nxt = system.step(state)
        residual = w11_norm(nxt.measure - state.measure)
        residuals.append(residual)
        state = nxt
        logger.debug('fixed point iteration %d residual %.3e', k, residual)
        if residual < tol:
            return FixedPointResult(state.measure, residual, k, residuals)
    raise NonConvergenceError(
        'Fixed point not reached in {} iterations, residual {:.3e}'.format(
            max_iter, residuals[-1]), residuals[-1], max_iter)


class CoupledMap(CircleMap):
    """``Phi o T`` for a frozen displacement ``D``: lift ``T(x) + D(T(x))``."""

    __slots__ = ('_base', '_displacement', '_label')

    def __init__(self, base, displacement, label=''):
        self._base = base
        self._displacement = displacement
        self._label = label

    @property
    def descriptor(self):
        return 'Phi{} o {}'.format(self._label, self._base.descriptor)

    def lift(self, x):
        y = self._base.lift(x)
        return y + self._displacement(y)

    def step(self, i, points):
        y = self._base.step(i, points)
        out = wrap(np.asarray(y) + self._displacement(y))
        return float(out) if np.ndim(points) == 0 else out


class InducedFamily(MapFamily):
    """The single-coordinate family ``T_n = Phi_{delta, mu_n} o T``.

    ``mu_n`` is the ``n``-th state from ``initial``; composition starts at
    index 0 so that ``x_1 = Phi_{delta, mu_0}(T(x_0))``.  States are computed
    once, in order, and only their displacement fields are kept; once two
    successive density states agree to ``FREEZE_TOL`` (or after
    ``MAX_CACHED_STATES``) the sequence is frozen at its last map.
    """

    first_index = 0

    def __init__(self, config, initial, *, max_states=MAX_CACHED_STATES):
        self._system = MeanFieldSystem(config)
        self._config = config
        self._state = _coerce_state(initial)
        self._maps = []
        self._frozen = config.delta == 0.0
        self._max_states = max_states
        self._lock = threading.Lock()

    @property
    def config(self):
        return self._config

    @property
    def descriptor(self):
        return 'induced[{} delta={!r} h={}]'.format(
            self._config.base.descriptor, self._config.delta,
            self._config.coupling.name)

    @property
    def frozen_index(self):
        """Index from which every map equals the last cached one."""
        if self._config.delta == 0.0:
            return 0
        with self._lock:
            return len(self._maps) - 1 if self._frozen else None

    def _extend(self, n):
        with self._lock:
            while len(self._maps) <= n and not self._frozen:
                k = len(self._maps)
                state = self._state
                self._maps.append(CoupledMap(
                    self._config.base,
                    self._system.displacement(state.measure),
                    '_{}'.format(k)))
                nxt = self._system.step(state)
                if state.is_density:
                    change = w11_norm(nxt.measure - state.measure)
                    if change < FREEZE_TOL:
                        logger.debug('Induced family frozen at index %d', k)
                        self._frozen = True
                if len(self._maps) >= self._max_states:
                    logger.warning('Induced family capped at %d states',
                                   self._max_states)
                    self._frozen = True
                self._state = nxt
            return min(n, len(self._maps) - 1)

    def cache_key(self, i):
        if self._config.delta == 0.0:
            return 0
        return self._extend(i)

    def marginal_map(self, i):
        if self._config.delta == 0.0:
            return self._config.base
        return self._maps[self._extend(i)]

    def step(self, i, points):
        return self.marginal_map(i).step(i, points)


def induced_family(config, initial):
    return InducedFamily(config, initial)


def map_sup_distance(a, b, n_grid=4096):
    """``sup_x d(a(x), b(x))`` over a uniform grid."""
    x = np.arange(n_grid) / n_grid
    return float(np.max(circle_distance(wrap(a.lift(x)), wrap(b.lift(x)))))


def limit_map(config, density):
    """``Phi_{delta, mu} o T`` for a fixed state density."""
    system = MeanFieldSystem(config)
    return CoupledMap(config.base, system.displacement(density), '_lim')

