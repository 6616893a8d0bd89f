"""Fourth stage: the cubic normal form step.

    (eta, psi) = (I + M(w, z)) (w, z),
    M(w, z) = [[0, A12[w,w] + C12[z,z]], [A12[z,z] + C12[w,w], 0]],

    A12[u, v] h_k = sum_{|j| != |k|} u_j v_{-j} |j|^2 / (8(|j| - |k|)) h_k,
    C12[u, v] h_k = sum_j            u_j v_{-j} |j|^2 / (8(|j| + |k|)) h_k.

Both are Fourier multipliers whose symbol depends on u, v only through the
per-shell sums p[lambda] = sum_{|j|=lambda} u_j v_{-j}.
"""
from __future__ import annotations

import numpy as np

from ..constants import BALL_RADIUS, FIXED_POINT_MAXITER, FIXED_POINT_TOL, M0
from ..numerics import FixedPointError, fixed_point
from ..spectral import ConjugatePair, SpectralField
from .phi3 import b3, d1, field_x, phi_inverse, q_functional


class OutsideBall(FixedPointError):
    pass


def _symbols(idx):
    cache = idx._cache
    if "a12c12" not in cache:
        lam = idx.radii
        J, K = lam[:, None], lam[None, :]
        same = np.eye(len(lam), dtype=bool)
        A = np.where(same, 0.0, J**2 / (8.0 * np.where(same, 1.0, J - K)))
        C = J**2 / (8.0 * (J + K))
        cache["a12c12"] = (A, C)
    return cache["a12c12"]


def a12_mult(idx, u, v):
    """Per-mode multiplier of A12[u, v]."""
    A, _ = _symbols(idx)
    return (idx.pair_sums(u, v) @ A)[idx.shell_of]


def c12_mult(idx, u, v):
    _, C = _symbols(idx)
    return (idx.pair_sums(u, v) @ C)[idx.shell_of]


def a12_c12_apply(which: str, u: SpectralField, v: SpectralField, h: SpectralField) -> SpectralField:
    idx = u.index
    if which == "A12":
        m = a12_mult(idx, u.coeffs, v.coeffs)
    elif which == "C12":
        m = c12_mult(idx, u.coeffs, v.coeffs)
    else:
        raise ValueError("which must be 'A12' or 'C12'")
    return SpectralField(idx, m * h.coeffs)


def m_apply(idx, w, z, alpha, beta):
    """M(w, z)(alpha, beta)."""
    top = a12_mult(idx, w, w) + c12_mult(idx, z, z)
    bot = a12_mult(idx, z, z) + c12_mult(idx, w, w)
    return top * beta, bot * alpha


def k_apply(idx, w, z, alpha, beta):
    """K(w, z)(alpha, beta) = (M + E)(w, z)(alpha, beta), the differential part."""
    m1, m2 = m_apply(idx, w, z, alpha, beta)
    e1 = 2.0 * (a12_mult(idx, w, alpha) + c12_mult(idx, z, beta)) * z
    e2 = 2.0 * (c12_mult(idx, w, alpha) + a12_mult(idx, z, beta)) * w
    return m1 + e1, m2 + e2


def _m0_norm(idx):
    lam = idx.mode_radius
    s = M0(idx.d)
    w = lam ** (2 * s)

    def norm(pair):
        return float(np.sqrt(np.sum(np.abs(pair[0]) ** 2 * w) + np.sum(np.abs(pair[1]) ** 2 * w)))

    return norm


def phi4_forward_arrays(idx, w, z):
    m1, m2 = m_apply(idx, w, z, w, z)
    return w + m1, z + m2


def phi4_inverse_arrays(idx, eta, psi, tol=FIXED_POINT_TOL, maxiter=FIXED_POINT_MAXITER, check_ball=True):
    if check_ball:
        r = float(np.sqrt(np.sum(np.abs(eta) ** 2 * idx.mode_radius ** (2 * M0(idx.d)))))
        if r > BALL_RADIUS:
            raise OutsideBall(f"stage 4 inverse needs ||eta||_m0 <= {BALL_RADIUS}, got {r:.4g}")

    def update(x):
        m1, m2 = m_apply(idx, x[0], x[1], x[0], x[1])
        return eta - m1, psi - m2

    (w, z), _ = fixed_point(update, (eta, psi), _m0_norm(idx), tol, maxiter, "stage 4 inverse")
    return w, z


def phi4(direction: str, pair: ConjugatePair, **kw) -> ConjugatePair:
    idx = pair.index
    if direction == "forward":
        out = phi4_forward_arrays(idx, *pair.arrays())
    elif direction == "inverse":
        out = phi4_inverse_arrays(idx, *pair.arrays(), **kw)
    else:
        raise ValueError(f"direction must be forward or inverse, got {direction!r}")
    return ConjugatePair.from_arrays(idx, *out)


def solve_identity_plus(apply, idx, rhs, tol=FIXED_POINT_TOL, maxiter=FIXED_POINT_MAXITER, what="(I+K)^-1"):
    """Solve (I + L) x = rhs by x <- rhs - L x, L given by apply(alpha, beta)."""
    def update(x):
        l1, l2 = apply(x[0], x[1])
        return rhs[0] - l1, rhs[1] - l2

    def norm(pair):
        return float(np.sqrt(np.sum(np.abs(pair[0]) ** 2) + np.sum(np.abs(pair[1]) ** 2)))

    x, _ = fixed_point(update, rhs, norm, tol, maxiter, what)
    return x


# --- vector fields in (w, z) ------------------------------------------------


def x3plus_arrays(idx, w, z):
    lam2 = idx.radii**2
    tw = (lam2 * idx.pair_sums(w, w))[idx.shell_of]
    tz = (lam2 * idx.pair_sums(z, z))[idx.shell_of]
    return -0.25j * tw * z, 0.25j * tz * w


def x3plus(pair: ConjugatePair) -> ConjugatePair:
    """Cubic resonant part left after the fourth stage."""
    return ConjugatePair.from_arrays(pair.index, *x3plus_arrays(pair.index, *pair.arrays()))


def calp_arrays(idx, w, z):
    """calP(w, z) = sqrt(1 + 2 P(Phi4(w, z))) - 1."""
    eta, psi = phi4_forward_arrays(idx, w, z)
    P = float(phi_inverse(q_functional(idx, eta, psi)))
    return float(np.sqrt(1.0 + 2.0 * P) - 1.0)


def x_plus_arrays(idx, w, z, tol=0.0, maxiter=200):
    """Pushed-forward field (I + K(w,z))^{-1} X(Phi4(w, z))."""
    eta, psi = phi4_forward_arrays(idx, w, z)
    rhs = field_x(idx, eta, psi)
    return solve_identity_plus(lambda a, b: k_apply(idx, w, z, a, b), idx, rhs, tol, maxiter, "(I+K)^-1")


def x5plus_arrays(idx, w, z):
    """Quintic part of the pushed-forward field: B3'(w,z) M(w,z)(w,z) - K X3+ - 3 Q B3."""
    mw, mz = m_apply(idx, w, z, w, z)
    lam2 = idx.mode_radius**2
    # derivative of B3 at (w, z) in the direction (mw, mz)
    dc = 0.25j * 2.0 * (np.sum(lam2 * z * mz[idx.neg]) - np.sum(lam2 * w * mw[idx.neg]))
    c = 0.25j * (np.sum(lam2 * z * z[idx.neg]) - np.sum(lam2 * w * w[idx.neg]))
    db1, db2 = dc * z + c * mz, dc * w + c * mw
    kx1, kx2 = k_apply(idx, w, z, *x3plus_arrays(idx, w, z))
    Q = q_functional(idx, w, z)
    bb1, bb2 = b3(idx, w, z)
    return db1 - kx1 - 3 * Q * bb1, db2 - kx2 - 3 * Q * bb2


__all__ = [
    "a12_c12_apply", "phi4", "x3plus", "k_apply", "m_apply", "x_plus_arrays", "calp_arrays",
    "d1", "OutsideBall",
]
