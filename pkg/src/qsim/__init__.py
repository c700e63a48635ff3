"""Simulation of closed and open quantum systems on truncated Hilbert spaces."""

__version__ = "0.1.0"

from .core import *  # noqa: F401,F403
from .errors import *  # noqa: F401,F403
from .evolve import *  # noqa: F401,F403
from .factories import *  # noqa: F401,F403
from .superop import *  # noqa: F401,F403
from .trajectories import *  # noqa: F401,F403
from .steadystate import *  # noqa: F401,F403
from .dsf import *  # noqa: F401,F403
from .analysis import *  # noqa: F401,F403
