"""Averaged-model simulation and distributed nonlinear control of an AC-connected DC microgrid."""
from .controllers import (DEFAULT_GAINS, ControllerGains, ControllerState,
                          ReferenceSet, saturate)
from .errors import *  # noqa: F401,F403
from .plant import DEFAULT_PARAMS, Disturbances, GridParams, derivative

__version__ = "0.1.0"
