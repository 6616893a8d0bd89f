"""Fifth stage: the quintic normal form step and the resulting field.

    (w, z) = (I + calM(u, v)) (u, v),
    calM = A[uuuu] + B[uuuv] + C[uuvv] + D[uvvv] + F[vvvv].

Each operator G[x1, x2, x3, x4] acts on h as the Fourier multiplier

    k -> sum_{a, b shells} p(x1, x2)[a] p(x3, x4)[b] g(a, b, |k|),

so it costs O(shells^3 + modes) rather than O(modes^3).  Only the first row
of every operator is tabulated: by the real structure the second component
of each map is the first one with the roles of (u, v) exchanged.
"""
from __future__ import annotations

import numpy as np

from ..constants import FIXED_POINT_MAXITER, FIXED_POINT_TOL, M1, PHI5_BALL
from ..numerics import fixed_point
from ..spectral import ConjugatePair
from .coefficients import coefficient_tensors, sum_resonance
from .phi3 import d1
from .phi4 import OutsideBall, calp_arrays, solve_identity_plus, x3plus_arrays, x_plus_arrays

# family letter -> argument slots of calM in terms of (u, v)
_M_ARGS = {"a": "uuuu", "b": "uuuv", "c": "uuvv", "d": "uvvv", "f": "vvvv"}

# terms of E(u,v)(alpha, beta): (weight, family, slots); '1' = alpha, '2' = beta
_E_TERMS = (
    (2, "a", "u1uu"), (2, "a", "uuu1"),
    (2, "b", "u1uv"), (1, "b", "uu1v"), (1, "b", "uuu2"),
    (2, "c", "u1vv"), (2, "c", "uuv2"),
    (1, "d", "1vvv"), (1, "d", "u2vv"), (2, "d", "uvv2"),
    (2, "f", "v2vv"), (2, "f", "vvv2"),
)


def _contract(idx, fam, p1, p2):
    """Per-shell multipliers (row 1, on u) and (row 1, on v) of family `fam`."""
    T = coefficient_tensors(idx)
    out = []
    for col in ("11", "12"):
        G = T[fam + col]
        if fam in ("b", "d") and col == "11":
            out.append(None)
            continue
        n = G.shape[0]
        out.append(p2 @ (p1 @ G.reshape(n, n * n)).reshape(n, n))
    return out


def _pair_sums_for(idx, slots, vals):
    x1, x2, x3, x4 = (vals[c] for c in slots)
    return idx.pair_sums(x1, x2), idx.pair_sums(x3, x4)


def _row1_op(idx, fam, slots, vals, h1, h2):
    p1, p2 = _pair_sums_for(idx, slots, vals)
    t11, t12 = _contract(idx, fam, p1, p2)
    out = t12[idx.shell_of] * h2
    if t11 is not None:
        out = out + t11[idx.shell_of] * h1
    return out


def calm_row1(idx, u, v, h1, h2):
    """First component of calM(u, v)(h1, h2)."""
    vals = {"u": u, "v": v}
    return sum(_row1_op(idx, fam, slots, vals, h1, h2) for fam, slots in _M_ARGS.items())


def calm_apply(idx, u, v, h1, h2):
    return calm_row1(idx, u, v, h1, h2), calm_row1(idx, v, u, h2, h1)


def cale_row1(idx, u, v, alpha, beta):
    vals = {"u": u, "v": v, "1": alpha, "2": beta}
    return sum(wt * _row1_op(idx, fam, slots, vals, u, v) for wt, fam, slots in _E_TERMS)


def calk_apply(idx, u, v, alpha, beta):
    """calK(u,v)(alpha, beta) = (calM + calE)(u,v)(alpha, beta)."""
    r1 = calm_row1(idx, u, v, alpha, beta) + cale_row1(idx, u, v, alpha, beta)
    r2 = calm_row1(idx, v, u, beta, alpha) + cale_row1(idx, v, u, beta, alpha)
    return r1, r2


def phi5_forward_arrays(idx, u, v):
    m1, m2 = calm_apply(idx, u, v, u, v)
    return u + m1, v + m2


def _m1_norm(idx):
    wt = idx.mode_radius ** (2 * M1(idx.d))

    def norm(pair):
        return float(np.sqrt(np.sum(np.abs(pair[0]) ** 2 * wt) + np.sum(np.abs(pair[1]) ** 2 * wt)))

    return norm


def phi5_inverse_arrays(idx, w, z, tol=FIXED_POINT_TOL, maxiter=FIXED_POINT_MAXITER, check_ball=True):
    if check_ball:
        r = float(np.sqrt(np.sum(np.abs(w) ** 2 * idx.mode_radius ** (2 * M1(idx.d)))))
        if r > PHI5_BALL:
            raise OutsideBall(f"stage 5 inverse needs ||w||_m1 <= {PHI5_BALL}, got {r:.4g}")

    def update(x):
        m1, m2 = calm_apply(idx, x[0], x[1], x[0], x[1])
        return w - m1, z - m2

    (u, v), _ = fixed_point(update, (w, z), _m1_norm(idx), tol, maxiter, "stage 5 inverse")
    return u, v


def phi5(direction: str, pair: ConjugatePair, **kw) -> ConjugatePair:
    idx = pair.index
    if direction == "forward":
        out = phi5_forward_arrays(idx, *pair.arrays())
    elif direction == "inverse":
        out = phi5_inverse_arrays(idx, *pair.arrays(), **kw)
    else:
        raise ValueError(f"direction must be forward or inverse, got {direction!r}")
    return ConjugatePair.from_arrays(idx, *out)


# --- the field after the fifth stage ---------------------------------------


def _w5_symbols(idx):
    cache = idx._cache
    if "w5" not in cache:
        lam = idx.radii
        n = len(lam)
        a, k = lam[:, None], lam[None, :]
        same = np.eye(n, dtype=bool)
        # term with |j| = |l| = a acting on u_k
        S1 = a**4 * (1.0 / (a + k) - np.where(same, 0.0, 1.0 / np.where(same, 1.0, a - k)))
        # term with |j| = |k|: weight of p(u, v)[b] for output shell k
        b = lam[:, None]
        S3 = b * (6.0 + b / (b + k) + np.where(same, 0.0, b / np.where(same, 1.0, b - k)))
        R = sum_resonance(idx)
        prod = lam[:, None, None] * lam[None, :, None] * lam[None, None, :]
        S2 = np.where(R, prod, 0.0)  # [a, b, k]: lambda_a + lambda_b = lambda_k
        S4 = np.where(np.transpose(R, (2, 1, 0)), prod, 0.0)  # lambda_a = lambda_k + lambda_b
        cache["w5"] = (S1, S2, S3, S4)
    return cache["w5"]


def _w5_row1(idx, u, v):
    S1, S2, S3, S4 = _w5_symbols(idx)
    n = idx.n_shells
    puu, pvv, puv = idx.pair_sums(u, u), idx.pair_sums(v, v), idx.pair_sums(u, v)
    lam2 = idx.radii**2
    t1 = (puu * pvv) @ S1
    t2 = puu @ (puu @ S2.reshape(n, n * n)).reshape(n, n)
    t3 = puu * lam2 * (puv @ S3)
    t4 = pvv @ (puu @ S4.reshape(n, n * n)).reshape(n, n)
    on_u = (1j / 32) * t1
    on_v = (3j / 32) * t2 + (1j / 16) * t3 + (3j / 16) * t4
    return on_u[idx.shell_of] * u + on_v[idx.shell_of] * v


def w5_arrays(idx, u, v):
    return _w5_row1(idx, u, v), -_w5_row1(idx, v, u)


def w5(pair: ConjugatePair) -> ConjugatePair:
    """Quintic part of the field after the fifth stage."""
    return ConjugatePair.from_arrays(pair.index, *w5_arrays(pair.index, *pair.arrays()))


def field_w_arrays(idx, u, v, tol=0.0, maxiter=200):
    """W(u, v) = (I + calK(u, v))^{-1} X+(Phi5(u, v))."""
    w, z = phi5_forward_arrays(idx, u, v)
    rhs = x_plus_arrays(idx, w, z, tol, maxiter)
    return solve_identity_plus(lambda a, b: calk_apply(idx, u, v, a, b), idx, rhs, tol, maxiter,
                               "(I+calK)^-1")


def normal_form_part(idx, u, v):
    """(1 + calP(Phi5(u,v))) (D1 + X3+)(u, v) + W5(u, v)."""
    w, z = phi5_forward_arrays(idx, u, v)
    cp = calp_arrays(idx, w, z)
    d_1, d_2 = d1(idx, u, v)
    x_1, x_2 = x3plus_arrays(idx, u, v)
    w_1, w_2 = w5_arrays(idx, u, v)
    return (1 + cp) * (d_1 + x_1) + w_1, (1 + cp) * (d_2 + x_2) + w_2


def residual_arrays(idx, u, v):
    W1, W2 = field_w_arrays(idx, u, v)
    N1, N2 = normal_form_part(idx, u, v)
    return W1 - N1, W2 - N2


def residual_w7(pair: ConjugatePair, amplitudes=(1e-2, 5e-3), s: float = 0.0):
    """Remainder of order >= 7 of the transformed field.

    Returns the residual at `pair` and a report holding the residual
    H^s-norms after rescaling the direction of `pair` to each amplitude
    (measured in ||u||_{m1}) together with the least-squares slope of
    log(norm) against log(amplitude).
    """
    idx = pair.index
    u, v = pair.arrays()
    r1, r2 = residual_arrays(idx, u, v)
    wt = idx.mode_radius ** (2 * s)
    base = float(np.sqrt(np.sum(np.abs(u) ** 2 * idx.mode_radius ** (2 * M1(idx.d)))))
    report = {"amplitudes": [], "norms": [], "exponent": None, "s": s}
    if base > 0 and amplitudes:
        for eps in amplitudes:
            c = eps / base
            q1, _ = residual_arrays(idx, c * u, c * v)
            report["amplitudes"].append(float(eps))
            report["norms"].append(float(np.sqrt(np.sum(np.abs(q1) ** 2 * wt))))
        if len(amplitudes) >= 2 and min(report["norms"]) > 0:
            x, y = np.log(report["amplitudes"]), np.log(report["norms"])
            report["exponent"] = float(np.polyfit(x, y, 1)[0])
    return ConjugatePair.from_arrays(idx, r1, r2), report
