"""Experiment kinds: each runner computes, writes its data files and reports
a status with the acceptance checks it evaluated."""

import collections
import math
import os

import numpy as np

from .config import schedule_from_config, target_from_config
from .log import logger
from .meanfield import MeanFieldConfig, fixed_point, induced_family, \
    initial_state
from .measures import EmpiricalMeasure, GridDensity, Space, \
    density_sampler, lebesgue_sampler
from .stats import PowerRadii, RadiiSchedule, Verdict, borel_cantelli_ratio, \
    box_dimension, compare, equilibrium_cloud, local_dimension, \
    loglaw_exponent, product_cloud
from .systems import verify_assumptions
from .transfer import convergence_curve, loss_of_memory
from .utils import StagedOutput, make_rng, to_jsonable, write_csv, \
    write_json

__all__ = ('Outcome', 'run_experiment', 'exit_code', 'RUNNERS')

# Stream key of target selection; orbit streams use small chunk indices.
_TARGET_STREAM = 2 ** 31

Check = collections.namedtuple('Check', 'name value bound passed')


class Outcome(collections.namedtuple('Outcome',
                                     'status summary checks report')):
    __slots__ = ()

    @property
    def checks_passed(self):
        return all(check.passed for check in self.checks)


RUNNERS = {}


def runner(kind):
    def register(func):
        RUNNERS[kind] = func
        return func
    return register


class _Run:
    """What a runner needs: the config, the staging directory, checks."""

    __slots__ = ('config', 'stage', 'checks', 'lines')

    def __init__(self, config, stage):
        self.config = config
        self.stage = stage
        self.checks = []
        self.lines = []

    def data_path(self, name):
        return os.path.join(self.stage, 'data', name)

    def check(self, name, value, bound, passed):
        self.checks.append(Check(name, value, bound, bool(passed)))

    def within(self, name, value, bounds):
        low, high = bounds
        self.check(name, value, [low, high], low <= value <= high)

    def at_least(self, name, value, bound):
        self.check(name, value, bound, value >= bound)

    def at_most(self, name, value, bound):
        self.check(name, value, bound, value <= bound)

    def say(self, line, *args):
        self.lines.append(line.format(*args))

    @property
    def timestamp(self):
        return self.config.timestamp

    def status(self, verdicts=()):
        failed = any(not c.passed for c in self.checks)
        verdicts = list(verdicts)
        if failed or Verdict.failed in verdicts:
            return 'fail'
        if Verdict.inconclusive in verdicts:
            return 'inconclusive'
        if verdicts or self.checks:
            return 'pass'
        return 'complete'


def _initial_density(cfg, n_cells):
    amplitude = cfg.get('amplitude', 1.0)
    mode = cfg.get('mode', 1)
    if cfg.get('kind', 'cos') == 'sawtooth':
        return GridDensity.from_function(
            lambda x: 1.0 + amplitude * (x - 0.5), n_cells)
    return GridDensity.from_function(
        lambda x: 1.0 + amplitude * np.cos(2 * np.pi * mode * x), n_cells)


def _observable(cfg, n_cells):
    mode = cfg.get('mode', 1)
    if cfg.get('kind', 'cos') == 'sawtooth':
        return GridDensity.from_function(lambda x: x - 0.5, n_cells)
    return GridDensity.from_function(
        lambda x: np.cos(2 * np.pi * mode * x), n_cells)


def _cloud(run, cfg, family=None):
    kind = cfg.get('kind', 'equilibrium')
    n_points = cfg.get('n_points', 10 ** 5)
    seed = run.config.seed
    if kind == 'equilibrium':
        return equilibrium_cloud(family, n_points, cfg.get('burn_in', 50),
                                 seed, threads=run.config.threads)
    if kind == 'product':
        return product_cloud(n_points, cfg.get('fiber', (0.0, 0.0)), seed)
    if kind == 'atom':
        point = target_from_config(cfg.get('point', 0.5))
        if family is not None:
            space = family.space
        else:
            space = Space.circle if np.ndim(point) == 0 else Space.solenoid
        single = space.coerce(point)[np.newaxis, ...]
        return EmpiricalMeasure.uniform(np.repeat(single, n_points, axis=0),
                                        space=space)
    space = family.space if family is not None else Space.circle
    sampler = lebesgue_sampler(space)
    return EmpiricalMeasure.uniform(sampler(make_rng(seed, 0), n_points),
                                    space=space)


def _targets(run, value, cloud):
    value = target_from_config(value)
    if isinstance(value, dict):
        rng = make_rng(run.config.seed, _TARGET_STREAM)
        picks = rng.choice(cloud.n_points, size=value['from_cloud'],
                           replace=False)
        return [cloud.points[i] for i in sorted(picks)]
    return [value]


def _fit_summary(fit):
    summary = fit.to_json()
    summary['points'] = [p._asdict() for p in fit.points]
    return summary


@runner('loglaw')
def run_loglaw(run):
    config = run.config
    family = config.family()
    schedule = config.schedule()
    accept = config.accept
    dimension = config.get('dimension')
    cloud = None
    if dimension is not None:
        cloud = _cloud(run, dimension.get('cloud', {}), family)
    targets = _targets(run, config.get('target', 'golden'), cloud)
    sampler = lebesgue_sampler(family.space)
    results, verdicts = [], []
    box = None
    if dimension is not None and 'box_tol' in accept:
        box = box_dimension(cloud)
        box.write_csv(run.data_path('box.csv'), timestamp=run.timestamp)
        run.say('box-counting dimension {:.4f} (r2 {:.4f})', box.slope,
                box.r_squared)
    agree = 0
    for i, y in enumerate(targets):
        fit = loglaw_exponent(family, y, sampler, schedule,
                              config.get('n_samples', 200),
                              config.get('horizon', 10 ** 6),
                              seed=config.seed, threads=config.threads)
        fit.write_csv(run.data_path('loglaw_{}.csv'.format(i)),
                      timestamp=run.timestamp)
        entry = {'target': np.atleast_1d(y).tolist(),
                 'loglaw': _fit_summary(fit)}
        run.say('target {}: loglaw slope {:.4f} (r2 {:.4f})', i, fit.slope,
                fit.r_squared)
        if 'slope' in accept:
            run.within('loglaw[{}].slope'.format(i), fit.slope,
                       accept['slope'])
        if 'r2' in accept:
            run.at_least('loglaw[{}].r2'.format(i), fit.r_squared,
                         accept['r2'])
        if dimension is not None:
            dim_schedule = schedule_from_config(dimension['schedule']) \
                if 'schedule' in dimension else schedule
            dim = local_dimension(cloud, y, dim_schedule)
            dim.write_csv(run.data_path('dimension_{}.csv'.format(i)),
                          timestamp=run.timestamp)
            comparison = compare(fit, dim, config.get('tol', 0.2))
            verdicts.append(comparison.verdict)
            entry['dimension'] = _fit_summary(dim)
            entry['comparison'] = comparison.to_json()
            run.say('target {}: local dimension {:.4f} (r2 {:.4f}) -> {}',
                    i, dim.slope, dim.r_squared, comparison.verdict.value)
            if box is not None:
                agree += abs(dim.slope - box.slope) <= accept['box_tol']
        results.append(entry)
    if box is not None:
        run.at_least('box_agreement', agree,
                     accept.get('min_box_agree', len(targets)))
    summary = {'targets': results}
    if box is not None:
        summary['box_dimension'] = _fit_summary(box)
    return summary, verdicts


@runner('dimension')
def run_dimension(run):
    config = run.config
    family = config.family() if config.get('family') else None
    cloud = _cloud(run, config['cloud'], family)
    schedule = config.schedule()
    accept = config.accept
    targets = _targets(run, config.get('target', 0.5), cloud)
    box = box_dimension(cloud, config.schedule(
        'box_scales', RadiiSchedule(0.25, 0.5, 6)))
    box.write_csv(run.data_path('box.csv'), timestamp=run.timestamp)
    results = []
    for i, y in enumerate(targets):
        fit = local_dimension(cloud, y, schedule)
        fit.write_csv(run.data_path('dimension_{}.csv'.format(i)),
                      timestamp=run.timestamp)
        run.say('target {}: local dimension {:.4f} (r2 {:.4f})', i,
                fit.slope, fit.r_squared)
        if 'slope' in accept:
            run.within('dimension[{}].slope'.format(i), fit.slope,
                       accept['slope'])
        if 'box_tol' in accept:
            run.at_most('dimension[{}].box_gap'.format(i),
                        abs(fit.slope - box.slope), accept['box_tol'])
        results.append({'target': np.atleast_1d(y).tolist(),
                        'dimension': _fit_summary(fit)})
    run.say('box-counting dimension {:.4f}', box.slope)
    return {'targets': results, 'box_dimension': _fit_summary(box)}, ()


def _curve_checks(run, curve, accept):
    summary = dict(curve.header(), usable=curve.usable)
    run.say('{} curve: rate {:.4g}, ratio {:.4g}, r2 {:.4g} over {} usable '
            'values', curve.norm.value, curve.rate, curve.ratio,
            curve.r_squared, curve.usable)
    if 'min_usable' in accept:
        run.at_least('usable', curve.usable, accept['min_usable'])
    if accept.get('annihilated'):
        run.check('annihilated', curve.usable, 1,
                  curve.usable == 1 and math.isinf(curve.rate))
    if 'max_ratio' in accept:
        run.at_most('ratio', curve.ratio, accept['max_ratio'])
    if 'min_rate' in accept:
        run.at_least('rate', curve.rate, accept['min_rate'])
    if 'r2' in accept:
        run.at_least('r2', curve.r_squared, accept['r2'])
    if accept.get('decreasing'):
        run.check('decreasing_tail', curve.usable, None,
                  curve.decreasing_tail())
    return summary


@runner('converge')
def run_converge(run):
    config = run.config
    family = config.family()
    f0 = _initial_density(config.get('initial', {}),
                         config.get('n_cells', 1024)).normalized()
    curve = convergence_curve(family, f0, config.get('steps', 30))
    curve.write_csv(run.data_path('curve.csv'), timestamp=run.timestamp)
    return _curve_checks(run, curve, config.accept), ()


@runner('lossmem')
def run_lossmem(run):
    config = run.config
    family = config.family()
    g = _observable(config.get('observable', {}),
                    config.get('n_cells', 1024))
    curve = loss_of_memory(family, g, config.get('steps', 30))
    curve.write_csv(run.data_path('curve.csv'), timestamp=run.timestamp)
    return _curve_checks(run, curve, config.accept), ()


@runner('meanfield-fixed-point')
def run_meanfield_fixed_point(run):
    config = run.config
    accept = config.accept
    tol = config.get('tol', 1e-10)
    max_iter = config.get('max_iter', 10 ** 4)
    deltas = config.get('deltas') or [config.meanfield().delta]
    results = []
    for delta in deltas:
        mf = config.meanfield(delta)
        result = fixed_point(mf, tol, max_iter=max_iter)
        label = '{:g}'.format(delta)
        write_csv(run.data_path('fixed_point_{}.csv'.format(label)),
                  ['cell', 'density'], result.density.rows(),
                  timestamp=run.timestamp)
        result.curve.write_csv(run.data_path('residuals_{}.csv'.format(label)),
                               timestamp=run.timestamp)
        deviation = float(np.max(np.abs(result.density.values - 1.0)))
        run.say('delta {}: residual {:.3e} after {} iterations', label,
                result.residual, result.iterations)
        if 'max_iterations' in accept:
            run.at_most('iterations[{}]'.format(label), result.iterations,
                        accept['max_iterations'])
        if 'residual' in accept:
            run.at_most('residual[{}]'.format(label), result.residual,
                        accept['residual'])
        if delta == 0 and 'uncoupled_constant' in accept:
            run.at_most('uncoupled_deviation', deviation,
                        accept['uncoupled_constant'])
        results.append({'delta': delta, 'residual': result.residual,
                        'iterations': result.iterations,
                        'max_deviation_from_1': deviation,
                        'mass': result.density.mass})
    summary = {'fixed_points': results}
    if config.get('decay'):
        cfg = dict(config['meanfield'], **config['decay'])
        cfg.setdefault('seed', config.seed)
        result = fixed_point(MeanFieldConfig.from_dict(cfg),
                             accept.get('decay_tol', tol), max_iter=max_iter)
        curve = result.curve
        curve.write_csv(run.data_path('decay.csv'), timestamp=run.timestamp)
        fit = curve.fit
        slope = fit.slope if fit is not None else math.nan
        r2 = fit.r_squared if fit is not None else math.nan
        run.say('decay signature: slope {:.4g}, r2 {:.4g} over {} residuals',
                slope, r2, len(result.residuals))
        if 'decay_r2' in accept:
            run.check('decay_signature', r2, accept['decay_r2'],
                      slope < 0 and r2 >= accept['decay_r2'])
        summary['decay'] = {'slope': slope, 'r2': r2,
                            'iterations': result.iterations}
    return summary, ()


@runner('meanfield-loglaw')
def run_meanfield_loglaw(run):
    config = run.config
    mf = config.meanfield()
    initial = _initial_density(dict({'amplitude': 0.3},
                                   **config.get('initial', {})), mf.n_cells)
    family = induced_family(mf, initial_state(mf, initial))
    y = target_from_config(config.get('target', 'golden'))
    # A tagged particle starts distributed like the population.
    if config.get('start', 'population') == 'population':
        sampler = density_sampler(initial)
    else:
        sampler = lebesgue_sampler()
    fit = loglaw_exponent(family, y, sampler, config.schedule(),
                          config.get('n_samples', 200),
                          config.get('horizon', 10 ** 6), seed=config.seed,
                          threads=config.threads)
    fit.write_csv(run.data_path('loglaw.csv'), timestamp=run.timestamp)
    run.say('induced family {}: loglaw slope {:.4f} (r2 {:.4f})',
            family.descriptor, fit.slope, fit.r_squared)
    accept = config.accept
    if 'slope' in accept:
        run.within('slope', fit.slope, accept['slope'])
    if 'r2' in accept:
        run.at_least('r2', fit.r_squared, accept['r2'])
    return {'loglaw': _fit_summary(fit), 'meanfield': mf.to_json(),
            'start': config.get('start', 'population'),
            'frozen_index': family.frozen_index}, ()


@runner('borel-cantelli')
def run_borel_cantelli(run):
    config = run.config
    family = config.family()
    y = target_from_config(config.get('target', 'golden'))
    radii = config.schedule('radii', PowerRadii(0.5))
    curve = borel_cantelli_ratio(family, y, radii,
                                 config.get('n_samples', 1000),
                                 config.get('n_steps', 2 * 10 ** 4),
                                 config.seed,
                                 n_orbits=config.get('n_orbits', 50),
                                 iid=config.get('iid', False),
                                 threads=config.threads)
    curve.write_csv(run.data_path('ratio.csv'), timestamp=run.timestamp)
    write_csv(run.data_path('final.csv'), ['orbit', 'ratio'],
              enumerate(curve.final_ratios), timestamp=run.timestamp)
    accept = config.accept
    band = accept.get('band', [0.5, 1.5])
    within = curve.fraction_within(*band)
    run.say('{:.1%} of {} orbits end with Z_n/E(Z_n) in {}', within,
            curve.counts.shape[0], band)
    if 'fraction' in accept:
        run.at_least('fraction_within_band', within, accept['fraction'])
    return {'final_ratios': curve.final_ratios,
            'expectation': curve.expectation[-1],
            'fraction_within_band': within, 'band': band}, ()


@runner('verify-assumptions')
def run_verify_assumptions(run):
    config = run.config
    family = config.family()
    report = verify_assumptions(family, config.get('n_samples', 10000),
                                seed=config.seed,
                                max_index=config.get('max_index', 30))
    write_csv(run.data_path('checks.csv'), ['name', 'measured', 'bound',
                                            'passed'],
              ((c.name, c.measured, c.bound, int(c.passed))
               for c in report.checks), timestamp=run.timestamp)
    write_csv(run.data_path('decay.csv'), ['i', 'measured', 'bound'],
              report.decay, timestamp=run.timestamp)
    for c in report.checks:
        run.check(c.name, c.measured, c.bound, c.passed)
        run.say('{}: measured {:.6g}, bound {:.6g} -> {}', c.name,
                c.measured, c.bound, 'ok' if c.passed else 'VIOLATED')
    for note in report.notes:
        run.say('note: {}', note)
    return report.to_json(), ()


def _report(config, status, lines, checks):
    out = ['{} ({})'.format(config.name, config.kind)]
    if config.description:
        out.append(config.description)
    out.append('seed: {}'.format(config.seed))
    out.append('')
    out.extend(lines)
    if checks:
        out.append('')
        out.append('checks:')
        for c in checks:
            out.append('  [{}] {} = {} (bound {})'.format(
                'ok' if c.passed else 'FAIL', c.name,
                to_jsonable(c.value), to_jsonable(c.bound)))
    out.append('')
    out.append('status: {}'.format(status))
    if config.expect:
        out.append('expected: {}'.format(config.expect))
    return '\n'.join(out) + '\n'


def run_experiment(config):
    """Run ``config`` and write ``summary.json``, ``data/*.csv`` and
    ``report.txt`` under its output directory.

    Nothing is left behind if the run raises.
    """
    func = RUNNERS[config.kind]
    logger.info('Running %s (%s) into %s', config.name, config.kind,
                config.out)
    with StagedOutput(config.out) as stage:
        run = _Run(config, stage)
        results, verdicts = func(run)
        status = run.status(verdicts)
        summary = {'name': config.name, 'kind': config.kind,
                   'seed': config.seed, 'status': status,
                   'expect': config.expect,
                   'checks': [c._asdict() for c in run.checks],
                   'results': results, 'config': config.to_json()}
        write_json(os.path.join(stage, 'summary.json'), summary)
        report = _report(config, status, run.lines, run.checks)
        with open(os.path.join(stage, 'report.txt'), 'w') as f:
            f.write(report)
    return Outcome(status, summary, tuple(run.checks), report)


def exit_code(outcome, expect=None):
    """0 on pass or complete (or the expected status), 2 on inconclusive,
    1 otherwise.

    A failed acceptance check is an error even when ``fail`` is expected.
    """
    if isinstance(outcome, Outcome):
        if not outcome.checks_passed:
            return 1
        status = outcome.status
    else:
        status = outcome
    if expect is not None:
        if status == expect:
            return 0
        return 2 if status == 'inconclusive' else 1
    if status in ('pass', 'complete'):
        return 0
    if status == 'inconclusive':
        return 2
    return 1

