"""Composition of the five stages.

forward:  normalized (u, v) -> (w, z) -> (eta, psi) -> (f, g) -> (q, p) -> physical (a, b)
inverse:  the same path backwards.
"""
from __future__ import annotations

from ..spectral import ConjugatePair, PhysicalState
from .linear import stage1_arrays, stage2_arrays
from .phi3 import phi3_arrays
from .phi4 import phi4_forward_arrays, phi4_inverse_arrays
from .phi5 import phi5_forward_arrays, phi5_inverse_arrays


class StageError(RuntimeError):
    def __init__(self, stage: int, direction: str, cause: Exception):
        super().__init__(f"stage {stage} ({direction}) failed: {cause}")
        self.stage = stage
        self.cause = cause


def _run(stage, direction, fn, *args):
    try:
        return fn(*args)
    except Exception as exc:  # annotate with the failing stage
        raise StageError(stage, direction, exc) from exc


def full_chain(direction: str, state):
    """forward: ConjugatePair (normalized) -> PhysicalState; inverse: the reverse."""
    idx = state.index
    x, y = state.arrays()
    if direction == "forward":
        x, y = _run(5, direction, phi5_forward_arrays, idx, x, y)
        x, y = _run(4, direction, phi4_forward_arrays, idx, x, y)
        x, y = _run(3, direction, phi3_arrays, idx, x, y, "forward")
        x, y = _run(2, direction, stage2_arrays, x, y, "forward")
        x, y = _run(1, direction, stage1_arrays, idx, x, y, "forward")
        return PhysicalState.from_arrays(idx, x, y)
    if direction == "inverse":
        x, y = _run(1, direction, stage1_arrays, idx, x, y, "inverse")
        x, y = _run(2, direction, stage2_arrays, x, y, "inverse")
        x, y = _run(3, direction, phi3_arrays, idx, x, y, "inverse")
        x, y = _run(4, direction, phi4_inverse_arrays, idx, x, y)
        x, y = _run(5, direction, phi5_inverse_arrays, idx, x, y)
        return ConjugatePair.from_arrays(idx, x, y)
    raise ValueError(f"direction must be forward or inverse, got {direction!r}")


def nonlinear_part(direction: str, pair: ConjugatePair) -> ConjugatePair:
    """Stages 3-5 only: (u, v) <-> (f, g)."""
    idx = pair.index
    x, y = pair.arrays()
    if direction == "forward":
        x, y = phi4_forward_arrays(idx, *phi5_forward_arrays(idx, x, y))
        x, y = phi3_arrays(idx, x, y, "forward")
    elif direction == "inverse":
        x, y = phi3_arrays(idx, x, y, "inverse")
        x, y = phi5_inverse_arrays(idx, *phi4_inverse_arrays(idx, x, y))
    else:
        raise ValueError(f"direction must be forward or inverse, got {direction!r}")
    return ConjugatePair.from_arrays(idx, x, y)
