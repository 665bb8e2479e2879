import json

import pytest

from hitlaw.config import GOLDEN, ExperimentConfig, load_config, validate
from hitlaw.exc import ConfigurationError
from hitlaw.meanfield import Representation
from hitlaw.stats import PowerRadii, RadiiSchedule


def _loglaw(**extra):
    data = {'kind': 'loglaw', 'family': {'family': 'expanding', 'q': 2}}
    data.update(extra)
    return data


def test_defaults():
    config = ExperimentConfig.from_dict(_loglaw(name='x'))
    assert config.seed == 0
    assert config.threads == 1
    assert config.timestamp is True
    assert config.accept == {}
    assert config.expect is None
    assert config.out.endswith('x')
    assert isinstance(config.schedule(), RadiiSchedule)


def test_unknown_kind():
    errors = validate({'kind': 'simulate'})
    assert len(errors) == 1
    assert errors[0].startswith('kind:')


def test_every_error_is_listed():
    errors = validate(_loglaw(seed=-1, threads=0, bogus=True,
                              family={'family': 'expanding', 'q': 1},
                              schedule={'r0': 0.1, 'ratio': 2.0},
                              expect='maybe'))
    keys = sorted(e.split(':')[0] for e in errors)
    assert keys == ['bogus', 'expect', 'family', 'schedule', 'seed',
                    'threads']


def test_required_keys():
    errors = validate({'kind': 'meanfield-fixed-point'})
    assert errors == ['meanfield: required for kind meanfield-fixed-point']


def test_coupling_too_strong_is_a_config_error():
    errors = validate({'kind': 'meanfield-fixed-point',
                       'meanfield': {'delta': 0.1}})
    assert len(errors) == 1
    assert 'coupling too strong' in errors[0]


def test_each_delta_is_checked():
    errors = validate({'kind': 'meanfield-fixed-point',
                       'meanfield': {'delta': 0.01},
                       'deltas': [0.0, 0.2]})
    assert len(errors) == 1
    assert errors[0].startswith('deltas:')


def test_meanfield_loglaw_start():
    data = {'kind': 'meanfield-loglaw', 'meanfield': {'delta': 0.05}}
    assert validate(dict(data, start='lebesgue')) == []
    errors = validate(dict(data, start='anywhere'))
    assert len(errors) == 1
    assert errors[0].startswith('start:')


def test_cloud_targets_need_dimension():
    errors = validate(_loglaw(target={'from_cloud': 3}))
    assert errors == ['dimension: required when targets come from a cloud']


@pytest.mark.parametrize('target', [[0.1], 'silver', {'from_cloud': 0}])
def test_bad_targets(target):
    assert validate(_loglaw(target=target))


def test_bad_cloud():
    errors = validate({'kind': 'dimension',
                       'cloud': {'kind': 'fractal', 'n_points': 0}})
    assert sorted(errors) == ['cloud.kind: should be one of equilibrium, '
                              'lebesgue, product, atom',
                              'cloud.n_points: should be a positive integer']


def test_replace_revalidates():
    config = ExperimentConfig.from_dict(_loglaw())
    assert config.replace(seed=5, out=None).seed == 5
    with pytest.raises(ConfigurationError):
        config.replace(threads=0)


def test_load(tmp_path):
    path = tmp_path / 'demo.json'
    path.write_text(json.dumps(_loglaw(target='golden')))
    config = load_config(str(path), seed=3)
    assert config.name == 'demo'
    assert config.seed == 3
    assert config.source == str(path)


def test_load_rejects_bad_json(tmp_path):
    path = tmp_path / 'broken.json'
    path.write_text('{"kind": ')
    with pytest.raises(ConfigurationError) as ctx:
        ExperimentConfig.load(str(path))
    assert ctx.value.errors == ['json']
    with pytest.raises(ConfigurationError):
        ExperimentConfig.load(str(tmp_path / 'missing.json'))


def test_meanfield_override():
    config = ExperimentConfig.from_dict({
        'kind': 'meanfield-loglaw', 'seed': 4,
        'meanfield': {'delta': 0.05, 'representation': 'particles',
                      'n_particles': 100}})
    mf = config.meanfield(0.01)
    assert mf.delta == 0.01
    assert mf.seed == 4
    assert mf.representation is Representation.particles


def test_power_schedule():
    config = ExperimentConfig.from_dict({
        'kind': 'borel-cantelli', 'family': {'family': 'expanding'},
        'radii': {'beta': 0.5}})
    radii = config.schedule('radii')
    assert isinstance(radii, PowerRadii)
    assert radii.beta == 0.5


def test_golden_target():
    assert GOLDEN == pytest.approx(0.6180339887)
