"""Truncated dynamics of the shell variables S_lambda, B_lambda.

    S_l' = -3/16 sum_{a+b=l} theta_{abl} a b l + 3/8 sum_{b+l=a} theta_{bla} a b l,
    B_l' = -2i (1 + calP) (l + l^2 S_l / 4) B_l,

with theta_{abl} = Im(B_a B_b conj(B_l)).  Sums run over ordered pairs; each
stored triple (x <= y, x + y = z) is visited once and its contributions are
distributed with the right multiplicity, so that sum_l l S_l' = 0 exactly.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np

from .lattice import TripleSet, triples_for_keys
from .numerics import phi_inverse

CLOSURES = ("full-P", "zero-P")


class NegativeSuperaction(FloatingPointError):
    def __init__(self, step: int, value: float):
        super().__init__(f"S dropped to {value:.3e} at step {step}")
        self.step = step
        self.value = value


@dataclass
class EffectiveState:
    keys: np.ndarray
    S: np.ndarray
    B: np.ndarray
    closure: str = "full-P"
    _triples: TripleSet | None = field(default=None, repr=False)

    def __post_init__(self):
        self.keys = np.asarray(self.keys, dtype=np.int64)
        self.S = np.asarray(self.S, dtype=float)
        self.B = np.asarray(self.B, dtype=complex)
        if self.closure not in CLOSURES:
            raise ValueError(f"closure must be one of {CLOSURES}")
        if np.any(np.diff(self.keys) <= 0):
            raise ValueError("shell keys must be strictly increasing")

    @property
    def radii(self) -> np.ndarray:
        return np.sqrt(self.keys.astype(float))

    @property
    def triples(self) -> TripleSet:
        if self._triples is None:
            self._triples = triples_for_keys(self.keys)
        return self._triples

    @classmethod
    def from_pair(cls, pair, closure: str = "full-P", drop_empty: bool = False) -> "EffectiveState":
        """Shell variables of a conjugate pair (u, v)."""
        idx = pair.index
        u, _ = pair.arrays()
        S = idx.shell_sum(np.abs(u) ** 2)
        B = idx.pair_sums(u, u)
        keys = idx.keys
        if drop_empty:
            keep = S > 0
            keys, S, B = keys[keep], S[keep], B[keep]
        return cls(keys.copy(), S, B, closure)

    def calP(self) -> float:
        return _calp(self.radii, self.S, self.B, self.closure == "full-P")


@dataclass(frozen=True)
class TripleDiagnostics:
    omega: float
    Omega: float
    Z: complex
    theta: float


def _triple_positions(state: EffectiveState, triples: TripleSet | None) -> np.ndarray:
    if triples is None:
        return state.triples.pos
    pos = np.searchsorted(state.keys, triples.keys)
    if len(pos) and (np.any(pos >= len(state.keys)) or np.any(state.keys[np.minimum(pos, len(state.keys) - 1)] != triples.keys)):
        raise ValueError("triple set refers to shells missing from the state")
    return pos.reshape(-1, 3).astype(np.int64)


@numba.njit(cache=True)
def _calp(lam, S, B, full):
    if not full:
        return 0.0
    Q = 0.0
    for i in range(lam.shape[0]):
        Q += 0.5 * lam[i] * (S[i] + B[i].real)
    P = phi_inverse(Q)
    return math.sqrt(1.0 + 2.0 * P) - 1.0


@numba.njit(cache=True)
def _sdot(lam, B, tp, out):
    for i in range(out.shape[0]):
        out[i] = 0.0
    for t in range(tp.shape[0]):
        x, y, z = tp[t, 0], tp[t, 1], tp[t, 2]
        Zc = B[x] * B[y] * np.conj(B[z])
        w = Zc.imag * lam[x] * lam[y] * lam[z]
        if x == y:
            out[x] += 0.375 * w
            out[z] -= 0.1875 * w
        else:
            out[x] += 0.375 * w
            out[y] += 0.375 * w
            out[z] -= 0.375 * w


@numba.njit(cache=True)
def _rates(lam, S, calp, out):
    for i in range(lam.shape[0]):
        out[i] = -2.0 * (1.0 + calp) * (lam[i] + 0.25 * lam[i] * lam[i] * S[i])


def effective_rhs(state: EffectiveState, triples: TripleSet | None = None):
    """(S', B') of the truncated system."""
    lam = state.radii
    tp = _triple_positions(state, triples)
    sdot = np.zeros(len(lam))
    _sdot(lam, state.B, tp, sdot)
    rate = np.zeros(len(lam))
    _rates(lam, state.S, state.calP(), rate)
    return sdot, 1j * rate * state.B


def triple_diagnostics(state: EffectiveState, triple) -> TripleDiagnostics:
    """omega, Omega, Z, theta on the triple of shell keys (n_a, n_b, n_l)."""
    ia, ib, il = (int(np.searchsorted(state.keys, n)) for n in triple)
    for i, n in zip((ia, ib, il), triple):
        if i >= len(state.keys) or state.keys[i] != n:
            raise KeyError(f"shell {n} not present")
    n = state.keys.astype(float)
    Sa, Sb, Sl = state.S[ia], state.S[ib], state.S[il]
    omega = n[ia] * Sa + n[ib] * Sb - n[il] * Sl
    Omega = n[ia] * Sa + n[ib] * Sb + n[il] * Sl
    Z = state.B[ia] * state.B[ib] * np.conj(state.B[il])
    return TripleDiagnostics(float(omega), float(Omega), complex(Z), float(Z.imag))


# --- integration ------------------------------------------------------------


@numba.njit(cache=True)
def _rotframe(lam, S, B, tp, full, dt, nsteps, stride):
    n = lam.shape[0]
    nsnap = nsteps // stride + 1
    So = np.empty((nsnap, n))
    Bo = np.empty((nsnap, n), dtype=np.complex128)
    Po = np.empty(nsnap)
    S = S.copy()
    B = B.copy()
    F = np.empty(n)
    rate = np.empty(n)
    Sh = np.empty(n)
    Bh = np.empty(n, dtype=np.complex128)
    So[0] = S
    Bo[0] = B
    Po[0] = _calp(lam, S, B, full)
    j = 1
    for step in range(1, nsteps + 1):
        cp = _calp(lam, S, B, full)
        _sdot(lam, B, tp, F)
        _rates(lam, S, cp, rate)
        for i in range(n):
            Sh[i] = S[i] + 0.5 * dt * F[i]
            Bh[i] = B[i] * np.exp(1j * rate[i] * 0.5 * dt)
        cph = _calp(lam, Sh, Bh, full)
        _sdot(lam, Bh, tp, F)
        _rates(lam, Sh, cph, rate)
        worst = 0.0
        for i in range(n):
            S[i] = S[i] + dt * F[i]
            B[i] = B[i] * np.exp(1j * rate[i] * dt)
            if not (S[i] >= worst):
                worst = S[i]
        if not np.isfinite(worst) or worst < -1e-12:
            return So, Bo, Po, step, worst
        if worst < 0.0:
            for i in range(n):
                if S[i] < 0.0:
                    S[i] = 0.0
        if step % stride == 0:
            So[j] = S
            Bo[j] = B
            Po[j] = _calp(lam, S, B, full)
            j += 1
    return So, Bo, Po, -1, 0.0


@numba.njit(cache=True)
def _deriv(lam, S, B, tp, full, dS, dB, rate):
    cp = _calp(lam, S, B, full)
    _sdot(lam, B, tp, dS)
    _rates(lam, S, cp, rate)
    for i in range(lam.shape[0]):
        dB[i] = 1j * rate[i] * B[i]


@numba.njit(cache=True)
def _rk4(lam, S, B, tp, full, dt, nsteps, stride):
    n = lam.shape[0]
    nsnap = nsteps // stride + 1
    So = np.empty((nsnap, n))
    Bo = np.empty((nsnap, n), dtype=np.complex128)
    Po = np.empty(nsnap)
    S = S.copy()
    B = B.copy()
    So[0] = S
    Bo[0] = B
    Po[0] = _calp(lam, S, B, full)
    k1s, k2s, k3s, k4s = np.empty(n), np.empty(n), np.empty(n), np.empty(n)
    k1b = np.empty(n, dtype=np.complex128)
    k2b, k3b, k4b = k1b.copy(), k1b.copy(), k1b.copy()
    rate = np.empty(n)
    j = 1
    for step in range(1, nsteps + 1):
        _deriv(lam, S, B, tp, full, k1s, k1b, rate)
        _deriv(lam, S + 0.5 * dt * k1s, B + 0.5 * dt * k1b, tp, full, k2s, k2b, rate)
        _deriv(lam, S + 0.5 * dt * k2s, B + 0.5 * dt * k2b, tp, full, k3s, k3b, rate)
        _deriv(lam, S + dt * k3s, B + dt * k3b, tp, full, k4s, k4b, rate)
        S = S + dt / 6.0 * (k1s + 2.0 * k2s + 2.0 * k3s + k4s)
        B = B + dt / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b)
        worst = S.min() if n else 0.0
        if not np.isfinite(worst) or worst < -1e-12:
            return So, Bo, Po, step, worst
        if worst < 0.0:
            S = np.maximum(S, 0.0)
        if step % stride == 0:
            So[j] = S
            Bo[j] = B
            Po[j] = _calp(lam, S, B, full)
            j += 1
    return So, Bo, Po, -1, 0.0


@dataclass
class EffectiveTrajectory:
    keys: np.ndarray
    times: np.ndarray
    S: np.ndarray  # (snapshots, shells)
    B: np.ndarray
    calP: np.ndarray
    triples: TripleSet
    dt: float
    scheme: str
    closure: str = "full-P"

    def __len__(self) -> int:
        return len(self.times)

    def state(self, i: int) -> EffectiveState:
        return EffectiveState(self.keys, self.S[i], self.B[i], self.closure, self.triples)

    @property
    def B_excess(self) -> np.ndarray:
        """max over shells of |B| - S per snapshot (positive means |B| <= S is violated)."""
        return np.max(np.abs(self.B) - self.S, axis=1)

    def write_csv(self, path) -> Path:
        path = Path(path)
        names = self.keys.tolist()
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "P"] + [f"S_{n}" for n in names] + [f"absB_{n}" for n in names]
                       + [f"argB_{n}" for n in names])
            for i, t in enumerate(self.times):
                row = [t, self.calP[i], *self.S[i], *np.abs(self.B[i]), *np.angle(self.B[i])]
                w.writerow([repr(float(x)) for x in row])
        return path

    def margins(self) -> np.ndarray:
        """(snapshots, triples, 3) array of omega, Omega, theta."""
        tp = self.triples.pos
        if len(tp) == 0:
            return np.zeros((len(self), 0, 3))
        n = self.keys.astype(float)
        a, b, c = tp[:, 0], tp[:, 1], tp[:, 2]
        Sa, Sb, Sc = self.S[:, a], self.S[:, b], self.S[:, c]
        omega = n[a] * Sa + n[b] * Sb - n[c] * Sc
        Omega = n[a] * Sa + n[b] * Sb + n[c] * Sc
        theta = np.imag(self.B[:, a] * self.B[:, b] * np.conj(self.B[:, c]))
        return np.stack([omega, Omega, theta], axis=-1)

    def write_margin_csv(self, path) -> Path:
        path = Path(path)
        m = self.margins()
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "n_a", "n_b", "n_l", "omega", "Omega", "theta"])
            for i, t in enumerate(self.times):
                for q, (na, nb, nl) in enumerate(self.triples.keys.tolist()):
                    w.writerow([repr(float(t)), na, nb, nl] + [repr(float(x)) for x in m[i, q]])
        return path


def max_rk4_dt(state: EffectiveState) -> float:
    return 0.1 / (float(state.radii.max()) * (1.0 + state.calP()))


def integrate_effective(state: EffectiveState, dt: float, T: float, scheme: str = "rotframe",
                        stride: int = 1, triples: TripleSet | None = None) -> EffectiveTrajectory:
    """Fixed-step integration on [0, T]; dt is shrunk so that T is a multiple of it.

    rotframe rotates every B_lambda exactly over the step with S frozen at the
    start (half step) or midpoint (full step) and advances S by the explicit
    midpoint rule, so |B_lambda| is kept to roundoff.
    """
    if dt <= 0 or T < 0 or stride < 1:
        raise ValueError("need dt > 0, T >= 0 and stride >= 1")
    if scheme == "rk4":
        guard = max_rk4_dt(state)
        if dt > guard * (1 + 1e-12):
            from .kirchhoff import CFLViolation

            raise CFLViolation(f"dt={dt:g} exceeds the rk4 guard {guard:g}")
        kernel = _rk4
    elif scheme == "rotframe":
        kernel = _rotframe
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    tp = _triple_positions(state, triples)
    tset = state.triples if triples is None else triples
    nsteps = int(math.ceil(T / dt - 1e-9)) if T > 0 else 0
    h = T / nsteps if nsteps else dt
    So, Bo, Po, bad, val = kernel(state.radii, state.S.astype(float), state.B.astype(complex),
                                  np.ascontiguousarray(tp), state.closure == "full-P", h, nsteps, stride)
    if bad >= 0:
        raise NegativeSuperaction(int(bad), float(val))
    times = np.arange(So.shape[0]) * (h * stride)
    return EffectiveTrajectory(state.keys.copy(), times, So, Bo, Po, tset, h, scheme, state.closure)


# --- reports ----------------------------------------------------------------


@dataclass
class GrowthReport:
    keys: np.ndarray  # shells of Gamma_1
    growth: np.ndarray  # max_t |S(t)/S(0) - 1| per shell
    max_growth: float
    worst_margin: float | None  # min over time and triples of |omega|/Omega
    worst_triple: tuple | None
    gamma0: list

    def as_dict(self) -> dict:
        return {
            "shells": self.keys.tolist(),
            "growth": self.growth.tolist(),
            "max_growth": self.max_growth,
            "worst_margin": self.worst_margin,
            "worst_triple": None if self.worst_triple is None else list(self.worst_triple),
            "gamma0": self.gamma0,
        }


def growth_report(traj) -> GrowthReport:
    """Growth factors of the populated shells and the worst nonresonance margin.

    Accepts an EffectiveTrajectory or anything with keys, S (snapshots x
    shells) and triples attributes.
    """
    if len(traj.times) < 2:
        raise ValueError("growth report needs at least two snapshots")
    S = np.asarray(traj.S)
    S0 = S[0]
    pop = S0 > 0
    growth = np.max(np.abs(S[:, pop] / S0[pop] - 1.0), axis=0) if pop.any() else np.zeros(0)
    worst, worst_t = None, None
    tp = traj.triples.pos
    if len(tp):
        live = pop[tp].all(axis=1)
        if live.any():
            n = traj.keys.astype(float)
            a, b, c = tp[live, 0], tp[live, 1], tp[live, 2]
            om = n[a] * S[:, a] + n[b] * S[:, b] - n[c] * S[:, c]
            Om = n[a] * S[:, a] + n[b] * S[:, b] + n[c] * S[:, c]
            ratio = np.abs(om) / np.where(Om > 0, Om, np.inf)
            per_triple = ratio.min(axis=0)
            q = int(np.argmin(per_triple))
            worst = float(per_triple[q])
            worst_t = tuple(int(x) for x in traj.triples.keys[live][q])
    return GrowthReport(
        keys=traj.keys[pop],
        growth=growth,
        max_growth=float(growth.max()) if growth.size else 0.0,
        worst_margin=worst,
        worst_triple=worst_t,
        gamma0=traj.keys[~pop].tolist(),
    )


def fit_exponent(eps, values) -> float:
    """Least-squares slope of log(values) against log(eps)."""
    x, y = np.log(np.asarray(eps, float)), np.log(np.asarray(values, float))
    return float(np.polyfit(x, y, 1)[0])
