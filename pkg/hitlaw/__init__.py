import re
import sys
from collections import namedtuple

from .exc import (ConfigurationError, DegenerateTargetError, Error,
                  InsufficientDataError, InsufficientHorizonError,
                  InvalidInputError, InversionError, NonConvergenceError)
from .meanfield import (MeanFieldConfig, fixed_point, induced_family,
                        mean_displacement, phi, sct_step)
from .measures import (EmpiricalMeasure, GridDensity, Space, integrate,
                       lip_norm, w11_norm, w_distance)
from .stats import (RadiiSchedule, ScalingFit, Verdict, borel_cantelli_ratio,
                    compare, equilibrium_cloud, local_dimension,
                    loglaw_exponent)
from .systems import (AlternatingFamily, ExpandingCircleMap, SlowFamily,
                      SolenoidFamily, hitting_time, orbit, step,
                      verify_assumptions)
from .transfer import (convergence_curve, equilibrium, loss_of_memory,
                       sequential_push, ulam)

__all__ = ('Space', 'GridDensity', 'EmpiricalMeasure', 'integrate',
           'lip_norm', 'w11_norm', 'w_distance',
           'ExpandingCircleMap', 'AlternatingFamily', 'SolenoidFamily',
           'SlowFamily', 'step', 'orbit', 'hitting_time',
           'verify_assumptions',
           'ulam', 'sequential_push', 'equilibrium', 'convergence_curve',
           'loss_of_memory',
           'MeanFieldConfig', 'mean_displacement', 'phi', 'sct_step',
           'fixed_point', 'induced_family',
           'RadiiSchedule', 'ScalingFit', 'Verdict', 'loglaw_exponent',
           'local_dimension', 'equilibrium_cloud', 'borel_cantelli_ratio',
           'compare',
           'Error', 'InvalidInputError', 'ConfigurationError',
           'NonConvergenceError', 'InsufficientDataError',
           'InsufficientHorizonError', 'DegenerateTargetError',
           'InversionError', 'version', 'version_info')

__version__ = '0.1.0'

version = __version__ + ' , Python ' + sys.version

VersionInfo = namedtuple('VersionInfo',
                         'major minor micro releaselevel serial')


def _parse_version(ver):
    RE = (
        r'^'
        r'(?P<major>\d+)\.(?P<minor>\d+)\.(?P<micro>\d+)'
        r'((?P<releaselevel>[a-z]+)(?P<serial>\d+)?)?'
        r'$'
    )
    match = re.match(RE, ver)
    try:
        major = int(match.group('major'))
        minor = int(match.group('minor'))
        micro = int(match.group('micro'))
        levels = {'rc': 'candidate',
                  'a': 'alpha',
                  'b': 'beta',
                  None: 'final'}
        releaselevel = levels[match.group('releaselevel')]
        serial = int(match.group('serial')) if match.group('serial') else 0
        return VersionInfo(major, minor, micro, releaselevel, serial)
    except Exception as e:
        raise ImportError("Invalid package version {}".format(ver)) from e


version_info = _parse_version(__version__)
