"""Belief dynamics under p-hacking (Python bindings to the C++ core)."""

from ._phacklab import *  # noqa: F401,F403
from ._phacklab import __version__  # noqa: F401
