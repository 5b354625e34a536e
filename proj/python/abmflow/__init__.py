"""ODE integration for rectified-flow-style velocity fields.

A two-step Adams-Bashforth-Moulton predictor-corrector driver with RK2
bootstrapping, Euler/midpoint baselines, error-controlled adaptive step
sizes, and mask-guided feature blending over synthetic feature tensors.
"""

from ._core import *  # noqa: F401,F403
from ._core import __version__  # noqa: F401
