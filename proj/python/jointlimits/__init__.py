"""Learned pose-dependent joint limits for articulated limbs."""

from ._jointlimits import *  # noqa: F401,F403
from ._jointlimits import __doc__  # noqa: F401
