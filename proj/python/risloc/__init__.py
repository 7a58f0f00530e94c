"""Adaptive RIS localization toolkit.

Thin Python layer over the C++ core: Rician scene simulation, the recurrent
active-sensing policy, the non-adaptive baselines and the experiment harness.
"""

from ._core import *  # noqa: F401,F403
from ._core import __version__  # noqa: F401
