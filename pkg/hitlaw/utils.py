import collections
import csv
import datetime
import json
import math
import os
import shutil
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy import stats as _stats

from .log import logger

# Work items are cut into chunks of this many orbits; the chunk index keys the
# random stream, so results never depend on the number of threads.
CHUNK_SIZE = 256

LineFit = collections.namedtuple('LineFit',
                                 'slope intercept r_squared n_points')


def make_rng(seed, *key):
    """Random generator for stream ``key`` of master ``seed``.

    Streams are split by counter: ``make_rng(seed, 3)`` is the same generator
    whichever worker asks for it.
    """
    sequence = np.random.SeedSequence(int(seed),
                                      spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(sequence))


def chunk_bounds(total, size=CHUNK_SIZE):
    return [(start, min(start + size, total))
            for start in range(0, total, size)]


def parallel_map(func, items, threads=1):
    """Map ``func`` over ``items``, preserving order."""
    items = list(items)
    if threads is None or threads <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))


def fit_line(x, y):
    """Least squares line through ``(x, y)``.

    Two points give an exact line with ``r_squared == 1``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2:
        raise ValueError('A line fit needs at least two points')
    if np.ptp(y) == 0.0:
        # linregress reports r = 0 for a flat response; the line is exact.
        slope = 0.0 if np.ptp(x) > 0 else math.nan
        return LineFit(slope, float(y[0]), 1.0, int(x.size))
    result = _stats.linregress(x, y)
    return LineFit(float(result.slope), float(result.intercept),
                   float(result.rvalue ** 2), int(x.size))


def timestamp_line():
    now = datetime.datetime.now(datetime.timezone.utc)
    return '# generated {}'.format(now.replace(microsecond=0).isoformat())


def format_value(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (np.integer,)):
        return str(int(value))
    return str(value)


def write_csv(path, header, rows, *, comments=(), timestamp=False):
    """Write ``rows`` under ``header``; comment lines start with ``#``."""
    with open(path, 'w', newline='') as f:
        if timestamp:
            f.write(timestamp_line() + '\n')
        for comment in comments:
            f.write('# {}\n'.format(comment))
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(v) for v in row])


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        if math.isnan(value):
            return None
        if math.isinf(value):
            return 'inf' if value > 0 else '-inf'
        return value
    return obj


def write_json(path, payload):
    with open(path, 'w') as f:
        json.dump(to_jsonable(payload), f, indent=2, sort_keys=True)
        f.write('\n')


class StagedOutput:
    """Context manager.

    Outputs are written into a staging directory next to ``path`` and moved
    into place on success; on failure the staging directory is removed so no
    partial outputs remain:

        with StagedOutput(out) as stage:
            write_csv(os.path.join(stage, 'data', 'fit.csv'), ...)
    """

    __slots__ = ('_path', '_stage')

    def __init__(self, path):
        self._path = os.path.abspath(path)
        self._stage = None

    @property
    def path(self):
        return self._path

    def __enter__(self):
        parent = os.path.dirname(self._path)
        os.makedirs(parent, exist_ok=True)
        self._stage = self._path + '.partial'
        if os.path.exists(self._stage):
            shutil.rmtree(self._stage)
        os.makedirs(os.path.join(self._stage, 'data'))
        return self._stage

    def __exit__(self, exc_type, exc, tb):
        try:
            if exc_type is not None:
                logger.debug('Discarding partial outputs in %s', self._stage)
                shutil.rmtree(self._stage, ignore_errors=True)
                return
            self._commit()
        finally:
            self._stage = None

    def _commit(self):
        os.makedirs(os.path.join(self._path, 'data'), exist_ok=True)
        for root, _dirs, files in os.walk(self._stage):
            rel = os.path.relpath(root, self._stage)
            target = os.path.normpath(os.path.join(self._path, rel))
            os.makedirs(target, exist_ok=True)
            for name in files:
                os.replace(os.path.join(root, name),
                           os.path.join(target, name))
        shutil.rmtree(self._stage, ignore_errors=True)

    def __repr__(self):
        return '<{} path={!r}>'.format(self.__class__.__name__, self._path)
