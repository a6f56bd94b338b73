"""Peer-to-peer training dynamics: simulator and analytic predictor.

The heavy lifting lives in the C++ extension; this package re-exports it.
"""

from peerdyn._core import *  # noqa: F401,F403
from peerdyn._core import __doc__, __version__  # noqa: F401
