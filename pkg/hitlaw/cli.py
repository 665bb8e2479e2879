"""Command line entry point: ``hitlaw run|list|validate``."""

import argparse
import glob
import logging
import os
import sys

from .config import ExperimentConfig
from .exc import ConfigurationError, Error
from .experiments import exit_code, run_experiment
from .log import logger

__all__ = ('main', 'list_experiments', 'bundled_configs', 'resolve_config')

CONFIG_DIR = os.path.join(os.path.dirname(__file__), 'configs')


def bundled_configs():
    """Paths of the bundled configs, sorted by name."""
    return sorted(glob.glob(os.path.join(CONFIG_DIR, '*.json')))


def resolve_config(name):
    """A path, or the name of a bundled config with or without ``.json``."""
    if os.path.exists(name):
        return name
    base = name if name.endswith('.json') else name + '.json'
    bundled = os.path.join(CONFIG_DIR, base)
    if os.path.exists(bundled):
        return bundled
    return name


def list_experiments():
    """``(name, kind, description)`` of every bundled config."""
    catalog = []
    for path in bundled_configs():
        config = ExperimentConfig.load(path)
        catalog.append((config.name, config.kind, config.description))
    return catalog


def _cmd_list(args):
    for name, kind, description in list_experiments():
        print('{:<32} {:<22} {}'.format(name, kind, description))
    return 0


def _cmd_validate(args):
    path = resolve_config(args.config)
    try:
        config = ExperimentConfig.load(path)
    except ConfigurationError as exc:
        for error in exc.errors:
            print('{}: {}'.format(path, error), file=sys.stderr)
        return 1
    print('{}: ok ({})'.format(path, config.kind))
    return 0


def _cmd_run(args):
    path = resolve_config(args.config)
    try:
        config = ExperimentConfig.load(path)
        config = config.replace(
            seed=args.seed, out=args.out, threads=args.threads,
            timestamp=False if args.no_timestamp else None)
    except ConfigurationError as exc:
        for error in exc.errors:
            print('{}: {}'.format(path, error), file=sys.stderr)
        return 1
    try:
        outcome = run_experiment(config)
    except Error as exc:
        logger.error('%s failed: %s', config.name, exc)
        return 1
    sys.stdout.write(outcome.report)
    return exit_code(outcome, config.expect)


def build_parser():
    parser = argparse.ArgumentParser(
        prog='hitlaw',
        description='Hitting-time logarithm laws for sequential, solenoidal '
                    'and mean-field systems.')
    parser.add_argument('--verbose', '-v', action='store_true',
                        help='log progress at DEBUG level')
    commands = parser.add_subparsers(dest='command')
    commands.required = True

    run = commands.add_parser('run', help='run an experiment config')
    run.add_argument('config', help='config path or bundled config name')
    run.add_argument('--seed', type=int, help='override the master seed')
    run.add_argument('--out', help='override the output directory')
    run.add_argument('--threads', type=int, help='worker threads')
    run.add_argument('--no-timestamp', action='store_true',
                     help='omit the generated-at line from CSV outputs')
    run.set_defaults(func=_cmd_run)

    listing = commands.add_parser('list', help='list bundled configs')
    listing.set_defaults(func=_cmd_list)

    validate = commands.add_parser('validate', help='validate a config')
    validate.add_argument('config', help='config path or bundled config name')
    validate.set_defaults(func=_cmd_validate)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format='%(asctime)s %(name)s %(levelname)s %(message)s')
    return args.func(args)


if __name__ == '__main__':  # pragma: no cover
    sys.exit(main())
