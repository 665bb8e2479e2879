"""Experiment configuration: JSON files validated before any computation."""

import json
import math
import os

from .exc import ConfigurationError
from .meanfield import MeanFieldConfig
from .stats import PowerRadii, RadiiSchedule
from .systems import family_from_config

__all__ = ('ExperimentConfig', 'KINDS', 'STATUSES', 'load_config')

KINDS = ('loglaw', 'dimension', 'converge', 'lossmem',
         'meanfield-fixed-point', 'meanfield-loglaw', 'borel-cantelli',
         'verify-assumptions')

STATUSES = ('pass', 'fail', 'inconclusive', 'complete')

# Where hitting-time orbits of an induced mean-field family start.
START_POINTS = ('population', 'lebesgue')

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0

_COMMON = {'kind', 'name', 'description', 'seed', 'out', 'threads',
           'timestamp', 'accept', 'expect'}

_KIND_KEYS = {
    'loglaw': {'family', 'target', 'schedule', 'n_samples', 'horizon',
               'dimension', 'tol'},
    'dimension': {'family', 'cloud', 'target', 'schedule', 'box_scales'},
    'converge': {'family', 'initial', 'steps', 'n_cells'},
    'lossmem': {'family', 'observable', 'steps', 'n_cells'},
    'meanfield-fixed-point': {'meanfield', 'deltas', 'tol', 'max_iter',
                              'decay'},
    'meanfield-loglaw': {'meanfield', 'initial', 'start', 'target',
                         'schedule', 'n_samples', 'horizon'},
    'borel-cantelli': {'family', 'target', 'radii', 'n_samples', 'n_steps',
                       'n_orbits', 'iid'},
    'verify-assumptions': {'family', 'n_samples', 'max_index'},
}

_REQUIRED = {
    'loglaw': {'family'},
    'dimension': {'cloud'},
    'converge': {'family'},
    'lossmem': {'family'},
    'meanfield-fixed-point': {'meanfield'},
    'meanfield-loglaw': {'meanfield'},
    'borel-cantelli': {'family'},
    'verify-assumptions': {'family'},
}

_POSITIVE_INTS = ('n_samples', 'horizon', 'steps', 'n_cells', 'max_iter',
                  'n_steps', 'n_orbits', 'max_index')

_CLOUD_KINDS = ('equilibrium', 'lebesgue', 'product', 'atom')


def _is_int(value):
    return isinstance(value, int) and not isinstance(value, bool)


def _is_number(value):
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def schedule_from_config(cfg):
    """``{r0, ratio, count}`` or ``{beta, count}``."""
    if 'beta' in cfg:
        return PowerRadii(cfg['beta'], cfg.get('count'))
    return RadiiSchedule(cfg.get('r0', 2.0 ** -5), cfg.get('ratio', 0.5),
                         cfg.get('count', 8))


def target_from_config(value):
    """A point: a number, ``[base, fiber1, fiber2]`` or ``"golden"``.

    ``{"from_cloud": k}`` selects ``k`` targets from an equilibrium cloud
    and is resolved by the experiment.
    """
    if value == 'golden':
        return GOLDEN
    if isinstance(value, dict):
        return value
    if isinstance(value, list):
        return tuple(value)
    return value


class ExperimentConfig:
    """A validated experiment description.

    Overrides from the command line replace file values through
    :meth:`replace`.
    """

    __slots__ = ('_data', '_source')

    def __init__(self, data, source=None):
        self._data = dict(data)
        self._source = source

    @classmethod
    def from_dict(cls, data, source=None):
        errors = validate(data)
        if errors:
            raise ConfigurationError(
                'Invalid configuration{}:\n  {}'.format(
                    ' ' + source if source else '', '\n  '.join(errors)),
                errors)
        return cls(data, source)

    @classmethod
    def load(cls, path):
        try:
            with open(path) as f:
                data = json.load(f)
        except ValueError as exc:
            raise ConfigurationError(
                '{}: not valid JSON: {}'.format(path, exc), ['json'])
        except OSError as exc:
            raise ConfigurationError('{}: {}'.format(path, exc), ['path'])
        if not isinstance(data, dict):
            raise ConfigurationError('{}: top level should be an object'
                                     .format(path), ['json'])
        data.setdefault('name', os.path.splitext(os.path.basename(path))[0])
        return cls.from_dict(data, path)

    def replace(self, **overrides):
        data = dict(self._data)
        data.update((k, v) for k, v in overrides.items() if v is not None)
        return self.from_dict(data, self._source)

    def __getitem__(self, key):
        return self._data[key]

    def get(self, key, default=None):
        return self._data.get(key, default)

    @property
    def kind(self):
        return self._data['kind']

    @property
    def name(self):
        return self._data.get('name', self.kind)

    @property
    def description(self):
        return self._data.get('description', '')

    @property
    def seed(self):
        return self._data.get('seed', 0)

    @property
    def out(self):
        return self._data.get('out', os.path.join('runs', self.name))

    @property
    def threads(self):
        return self._data.get('threads', 1)

    @property
    def timestamp(self):
        return self._data.get('timestamp', True)

    @property
    def accept(self):
        return self._data.get('accept', {})

    @property
    def expect(self):
        return self._data.get('expect')

    @property
    def source(self):
        return self._source

    def family(self):
        return family_from_config(self._data['family'])

    def meanfield(self, delta=None):
        cfg = dict(self._data['meanfield'])
        cfg.setdefault('seed', self.seed)
        if delta is not None:
            cfg['delta'] = delta
        return MeanFieldConfig.from_dict(cfg)

    def schedule(self, key='schedule', default=None):
        cfg = self._data.get(key)
        if cfg is None:
            return default if default is not None else RadiiSchedule()
        return schedule_from_config(cfg)

    def to_json(self):
        return dict(self._data)

    def __repr__(self):
        return '<{} {} kind={}>'.format(self.__class__.__name__, self.name,
                                        self.kind)


def validate(data):
    """Every violated key of an experiment config, as ``key: message``."""
    errors = []
    kind = data.get('kind')
    if kind not in KINDS:
        return ['kind: should be one of {}, got {!r}'.format(
            ', '.join(KINDS), kind)]
    allowed = _COMMON | _KIND_KEYS[kind]
    for key in sorted(set(data) - allowed):
        errors.append('{}: unknown key for kind {}'.format(key, kind))
    for key in sorted(_REQUIRED[kind] - set(data)):
        errors.append('{}: required for kind {}'.format(key, kind))
    if not _is_int(data.get('seed', 0)) or data.get('seed', 0) < 0:
        errors.append('seed: should be a non-negative integer')
    if not _is_int(data.get('threads', 1)) or data.get('threads', 1) < 1:
        errors.append('threads: should be a positive integer')
    if not isinstance(data.get('timestamp', True), bool):
        errors.append('timestamp: should be true or false')
    if 'out' in data and not isinstance(data['out'], str):
        errors.append('out: should be a path')
    if data.get('expect') not in (None,) + STATUSES:
        errors.append('expect: should be one of {}'.format(
            ', '.join(STATUSES)))
    if not isinstance(data.get('accept', {}), dict):
        errors.append('accept: should be an object')
    for key in _POSITIVE_INTS:
        if key in data and (not _is_int(data[key]) or data[key] < 1):
            errors.append('{}: should be a positive integer'.format(key))
    if 'tol' in data and (not _is_number(data['tol']) or data['tol'] <= 0):
        errors.append('tol: should be positive')
    if data.get('start', 'population') not in START_POINTS:
        errors.append('start: should be one of {}'.format(
            ', '.join(START_POINTS)))
    if 'family' in data:
        errors += _nested('family', data['family'], family_from_config)
    if 'meanfield' in data:
        mf = data['meanfield']
        errors += _nested('meanfield', mf, MeanFieldConfig.from_dict)
        for delta in data.get('deltas', ()):
            if isinstance(mf, dict):
                errors += _nested('deltas', dict(mf, delta=delta),
                                  MeanFieldConfig.from_dict)
        if isinstance(mf, dict) and isinstance(data.get('decay'), dict):
            errors += _nested('decay', dict(mf, **data['decay']),
                              MeanFieldConfig.from_dict)
    for key in ('schedule', 'radii', 'box_scales'):
        if key in data:
            errors += _nested(key, data[key], _check_schedule)
    if 'target' in data:
        errors += _check_target(data['target'])
    if 'cloud' in data:
        errors += _check_cloud(data['cloud'])
        cloud_kind = data['cloud'].get('kind', 'equilibrium') \
            if isinstance(data['cloud'], dict) else None
        if cloud_kind == 'equilibrium' and 'family' not in data:
            errors.append('family: required for an equilibrium cloud')
    if kind == 'loglaw' and isinstance(data.get('target'), dict) \
            and 'dimension' not in data:
        errors.append('dimension: required when targets come from a cloud')
    if 'dimension' in data:
        dimension = data['dimension']
        if not isinstance(dimension, dict):
            errors.append('dimension: should be an object')
        else:
            errors += _check_cloud(dimension.get('cloud', {}),
                                   'dimension.cloud')
            if 'schedule' in dimension:
                errors += _nested('dimension.schedule',
                                  dimension['schedule'], _check_schedule)
    return errors


def _nested(key, cfg, build):
    if not isinstance(cfg, dict):
        return ['{}: should be an object'.format(key)]
    try:
        build(cfg)
    except ConfigurationError as exc:
        return ['{}: {}'.format(key, e) for e in exc.errors]
    except (TypeError, ValueError) as exc:
        return ['{}: {}'.format(key, exc)]
    return []


def _check_schedule(cfg):
    unknown = set(cfg) - {'r0', 'ratio', 'count', 'beta'}
    if unknown:
        raise ConfigurationError('unknown keys', sorted(
            '{} is unknown'.format(k) for k in unknown))
    schedule_from_config(cfg)


def _check_target(value):
    if value == 'golden' or _is_number(value):
        return []
    if isinstance(value, list) and len(value) in (2, 3):
        return []
    if isinstance(value, dict) and set(value) == {'from_cloud'} \
            and _is_int(value['from_cloud']) and value['from_cloud'] >= 1:
        return []
    return ['target: should be a number, "golden", [base, fiber1, fiber2] '
            'or {"from_cloud": k}']


def _check_cloud(cloud, key='cloud'):
    if not isinstance(cloud, dict):
        return ['{}: should be an object'.format(key)]
    errors = []
    kind = cloud.get('kind', 'equilibrium')
    if kind not in _CLOUD_KINDS:
        errors.append('{}.kind: should be one of {}'.format(
            key, ', '.join(_CLOUD_KINDS)))
    for name in sorted(set(cloud) - {'kind', 'n_points', 'burn_in',
                                     'fiber', 'point'}):
        errors.append('{}.{}: unknown key'.format(key, name))
    for name in ('n_points', 'burn_in'):
        if name in cloud and (not _is_int(cloud[name]) or cloud[name] < 1):
            errors.append('{}.{}: should be a positive integer'.format(
                key, name))
    return errors


def load_config(path, **overrides):
    config = ExperimentConfig.load(path)
    if any(v is not None for v in overrides.values()):
        config = config.replace(**overrides)
    return config
