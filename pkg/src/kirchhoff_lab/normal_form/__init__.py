"""The transformation chain from physical variables to normalized ones."""
from .chain import StageError, full_chain, nonlinear_part
from .coefficients import FAMILIES, coefficient_tensors, phi5_coefficient
from .linear import linear_stage
from .phi3 import Phi3Scalars, phi3, phi3_scalars
from .phi4 import OutsideBall, a12_c12_apply, phi4, x3plus
from .phi5 import calk_apply, calm_apply, phi5, residual_w7, w5

__all__ = [
    "FAMILIES", "OutsideBall", "Phi3Scalars", "StageError", "a12_c12_apply", "calk_apply",
    "calm_apply", "coefficient_tensors", "full_chain", "linear_stage", "nonlinear_part",
    "phi3", "phi3_scalars", "phi4", "phi5", "phi5_coefficient", "residual_w7", "w5", "x3plus",
]
