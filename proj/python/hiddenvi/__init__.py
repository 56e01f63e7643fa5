"""Surrogate-loss solvers for variational inequalities with hidden monotone structure."""

from hiddenvi._core import *  # noqa: F401,F403
from hiddenvi._core import __version__  # noqa: F401
