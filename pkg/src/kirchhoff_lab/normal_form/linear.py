"""The two linear stages.

Stage 1:  (a, b) = (Lambda^{-1/2} q, Lambda^{1/2} p)   (forward: (q,p) -> (a,b))
Stage 2:  (q, p) = ((f + g)/sqrt2, (f - g)/(i sqrt2))  (forward: (f,g) -> (q,p))

"forward" always points towards the physical variables.
"""
from __future__ import annotations

import numpy as np

from ..spectral import ConjugatePair, PhysicalState, SpectralField

SQRT2 = np.sqrt(2.0)


def stage1_arrays(idx, x, y, direction: str):
    lam = idx.mode_radius
    if direction == "forward":
        return x / np.sqrt(lam), y * np.sqrt(lam)
    if direction == "inverse":
        return x * np.sqrt(lam), y / np.sqrt(lam)
    raise ValueError(f"direction must be forward or inverse, got {direction!r}")


def stage2_arrays(x, y, direction: str):
    if direction == "forward":
        return (x + y) / SQRT2, (x - y) / (1j * SQRT2)
    if direction == "inverse":
        return (x + 1j * y) / SQRT2, (x - 1j * y) / SQRT2
    raise ValueError(f"direction must be forward or inverse, got {direction!r}")


def linear_stage(stage: int, direction: str, state):
    """Apply stage 1 or 2.  Real pairs are PhysicalState, complex ones ConjugatePair."""
    idx = state.index
    if stage == 1:
        x, y = stage1_arrays(idx, *state.arrays(), direction)
        return PhysicalState.from_arrays(idx, x, y)
    if stage == 2:
        x, y = stage2_arrays(*state.arrays(), direction)
        if direction == "forward":
            return PhysicalState.from_arrays(idx, x, y)
        return ConjugatePair(SpectralField(idx, x), SpectralField(idx, y))
    raise ValueError("linear stages are 1 and 2")
