"""Statistical model of bubble-induced fading in underwater optical links."""

from .bubbles import BubbleEnvironment, FluidConstants
from .channel import CompositeChannelParams, SnrDistribution, average_ber, ergodic_capacity
from .geometry import BeamSpec, aperture_power, obstructed_power
from .modelfit import ObstructionModel, build_obstruction_model
from .simulator import EmpiricalDistribution, run_ensemble

__version__ = "0.1.0"

__all__ = [
    "BeamSpec",
    "BubbleEnvironment",
    "CompositeChannelParams",
    "EmpiricalDistribution",
    "FluidConstants",
    "ObstructionModel",
    "SnrDistribution",
    "aperture_power",
    "average_ber",
    "build_obstruction_model",
    "ergodic_capacity",
    "obstructed_power",
    "run_ensemble",
]
