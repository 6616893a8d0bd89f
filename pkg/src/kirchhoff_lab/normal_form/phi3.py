"""Third stage: removes Lambda from the off-diagonal terms.

    (f, g) = (eta + rho psi, rho eta + psi) / sqrt(1 - rho^2),
    rho = rho(P),  P = phi(Q(eta, psi)),  Q(eta, psi) = 1/4 <Lambda(eta+psi), eta+psi>,

where phi inverts x -> x sqrt(1 + 2x).  The inverse uses rho(Q(f, g)),
because Q(f, g) equals P(eta, psi).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..numerics import phi_inverse, rho_of
from ..spectral import ConjugatePair


@dataclass(frozen=True)
class Phi3Scalars:
    Q: float
    P: float
    rho: float
    calP: float


def q_functional(idx, x, y) -> float:
    s = x + y
    val = 0.25 * np.sum(idx.mode_radius * s * s[idx.neg])
    if abs(val.imag) > 1e-9 * max(abs(val.real), 1e-300) and abs(val.imag) > 1e-300:
        raise ValueError("Q is not real: input is not a conjugate pair")
    return float(val.real)


def scalars_from_q(Q: float) -> Phi3Scalars:
    P = float(phi_inverse(Q))
    return Phi3Scalars(Q=Q, P=P, rho=float(rho_of(P)), calP=math.sqrt(1.0 + 2.0 * P) - 1.0)


def phi3_scalars(pair: ConjugatePair) -> Phi3Scalars:
    """Q, P = phi(Q), rho(P) and calP = sqrt(1 + 2P) - 1 at (eta, psi) = pair."""
    return scalars_from_q(q_functional(pair.index, *pair.arrays()))


def phi3_arrays(idx, x, y, direction: str):
    Q = q_functional(idx, x, y)
    if direction == "forward":
        r = float(rho_of(phi_inverse(Q)))
    elif direction == "inverse":
        r = -float(rho_of(Q))
    else:
        raise ValueError(f"direction must be forward or inverse, got {direction!r}")
    c = 1.0 / math.sqrt(1.0 - r * r)
    return c * (x + r * y), c * (r * x + y)


def phi3(direction: str, pair: ConjugatePair) -> ConjugatePair:
    return ConjugatePair.from_arrays(pair.index, *phi3_arrays(pair.index, *pair.arrays(), direction))


# --- the equation in (eta, psi) -------------------------------------------


def lam2_pairing(idx, x) -> complex:
    """<Lambda x, Lambda x>."""
    return np.sum(idx.mode_radius**2 * x * x[idx.neg])


def field_x(idx, eta, psi):
    """Right-hand side of the diagonalized system in (eta, psi)."""
    P = float(phi_inverse(q_functional(idx, eta, psi)))
    s = math.sqrt(1.0 + 2.0 * P)
    lam = idx.mode_radius
    c = 1j / (4.0 * (1.0 + 2.0 * P)) * (lam2_pairing(idx, psi) - lam2_pairing(idx, eta))
    return -1j * s * lam * eta + c * psi, 1j * s * lam * psi + c * eta


def d1(idx, x, y):
    lam = idx.mode_radius
    return -1j * lam * x, 1j * lam * y


def b3(idx, x, y):
    c = 0.25j * (lam2_pairing(idx, y) - lam2_pairing(idx, x))
    return c * y, c * x
