"""Coefficients of the fifth stage as functions of the radii |j|, |l|, |k|.

Each coefficient g(|j|, |l|, |k|) multiplies x1_j x2_{-j} x3_l x4_{-l} h_k.
Kronecker deltas are decided on integer shell keys (and on squarefree
classes for |k| = |j| + |l|), and any 0/0 fraction is zero.
"""
from __future__ import annotations

import numpy as np

from ..lattice import squarefree_decompose

FAMILIES = ("a11", "b11", "c11", "d11", "f11", "a12", "b12", "c12", "d12", "f12")


def _frac(num, den, zero):
    """num/den, forced to 0 where the guard `zero` holds (the 0/0 convention)."""
    return np.where(zero, 0.0, num / np.where(zero, 1.0, den))


def evaluate(family, J, L, K, eJL, eJK, eLK, sum_k, sum_j):
    """Vectorized coefficient.

    eXY are the exact equalities |x| = |y|; sum_k is |k| = |j| + |l| and
    sum_j is |j| = |k| + |l| (that is |k| = |j| - |l|).
    """
    dJL, dJK, dLK = (e.astype(float) for e in (eJL, eJK, eLK))
    if family in ("b11", "d11"):
        return np.zeros(np.broadcast(J, L, K).shape)
    if family == "a11":
        return J**2 * L**2 / (128.0 * (J + L)) * (1.0 / (J + K) + 1.0 / (L + K))
    if family == "c11":
        inner = -dLK * _frac(1.0, J - K, eJK) + 1.0 / (J + K) - _frac(1.0, L - K, eLK)
        return J**2 * L**2 / 64.0 * inner * _frac(1.0, L - J, eJL)
    if family == "f11":
        inner = -(dLK + dJK) / (J + L) + _frac(1.0, J - K, eJK) + _frac(1.0, L - K, eLK)
        return inner * J**2 * L**2 / (128.0 * (J + L))
    if family == "a12":
        return 3.0 / 64.0 * J * L * (J + L) * _frac(1.0, K - J - L, sum_k)
    if family == "b12":
        inner = L * dJL * _frac(1.0, L - K, eLK) + 6.0 + L / (L + J) + L * _frac(1.0, L - J, eJL)
        return J**2 * L / 32.0 * inner * _frac(1.0, K - J, eJK)
    if family == "c12":
        return 3.0 / 32.0 * J * L * (J - L) * _frac(1.0, K - J + L, sum_j)
    if family == "d12":
        inner = -J * dJL / (J + K) - 6.0 + J * _frac(1.0, L - J, eJL) - J / (L + J)
        return J * L**2 / (32.0 * (K + L)) * inner
    if family == "f12":
        return -3.0 * J * L * (J + L) / (64.0 * (K + J + L))
    raise ValueError(f"unknown coefficient family {family!r}")


def phi5_coefficient(family: str, nj: int, nl: int, nk: int) -> float:
    """Coefficient at shells with |j|^2 = nj, |l|^2 = nl, |k|^2 = nk."""
    (mj, pj), (ml, pl), (mk, pk) = (squarefree_decompose(n) for n in (nj, nl, nk))
    J, L, K = (m * np.sqrt(float(p)) for m, p in ((mj, pj), (ml, pl), (mk, pk)))
    sum_k = pj == pl == pk and mj + ml == mk
    sum_j = pj == pl == pk and mk + ml == mj
    return float(evaluate(family, np.float64(J), np.float64(L), np.float64(K),
                          np.bool_(nj == nl), np.bool_(nj == nk), np.bool_(nl == nk),
                          np.bool_(sum_k), np.bool_(sum_j)))


def sum_resonance(idx) -> np.ndarray:
    """R[a, b, c] is True when lambda_a + lambda_b = lambda_c exactly."""
    cache = idx._cache
    if "sum_res" not in cache:
        m, p = idx.classes_m, idx.classes_p
        same = (p[:, None, None] == p[None, :, None]) & (p[None, :, None] == p[None, None, :])
        cache["sum_res"] = same & (m[:, None, None] + m[None, :, None] == m[None, None, :])
    return cache["sum_res"]


def coefficient_tensors(idx) -> dict:
    """All families as (shells, shells, shells) arrays indexed [j, l, k]."""
    cache = idx._cache
    if "phi5_tensors" not in cache:
        lam = idx.radii
        J, L, K = lam[:, None, None], lam[None, :, None], lam[None, None, :]
        n = idx.n_shells
        eye = np.eye(n, dtype=bool)
        eJL, eJK, eLK = eye[:, :, None], eye[:, None, :], eye[None, :, :]
        R = sum_resonance(idx)
        sum_k = R  # [j, l, k]: lambda_j + lambda_l = lambda_k
        sum_j = np.transpose(R, (2, 1, 0))  # [j, l, k]: lambda_k + lambda_l = lambda_j
        with np.errstate(divide="ignore", invalid="ignore"):
            cache["phi5_tensors"] = {
                f: np.ascontiguousarray(np.broadcast_to(
                    evaluate(f, J, L, K, eJL, eJK, eLK, sum_k, sum_j), (n, n, n)))
                for f in FAMILIES
            }
    return cache["phi5_tensors"]
