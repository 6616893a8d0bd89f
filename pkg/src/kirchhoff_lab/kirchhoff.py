"""Spectral form of the Kirchhoff equation and its time integration.

    a_k' = b_k,   b_k' = -|k|^2 (1 + P) a_k,   P = sum_j |j|^2 a_j a_{-j},
    H = 1/2 <b, b> + 1/2 P + 1/4 P^2.

The Hamiltonian is separable, so Stormer-Verlet (kick-drift-kick) is
symplectic and needs one force evaluation per step.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numba
import numpy as np

from .constants import M1
from .lattice import ShellIndex
from .spectral import PhysicalState, u_lambda_array


class CFLViolation(ValueError):
    pass


class NumericAbort(FloatingPointError):
    def __init__(self, step: int, what: str = "state"):
        super().__init__(f"non-finite {what} at step {step}")
        self.step = step


def potential_p(index: ShellIndex, a: np.ndarray) -> float:
    """P = <Lambda a, Lambda a>; real for real states."""
    k2 = index.mode_radius**2
    return float(np.real(np.sum(k2 * a * a[index.neg])))


def kirchhoff_rhs(state: PhysicalState) -> PhysicalState:
    idx = state.index
    a, b = state.arrays()
    k2 = idx.mode_radius**2
    P = potential_p(idx, a)
    return PhysicalState.from_arrays(idx, b.copy(), -k2 * (1.0 + P) * a)


def hamiltonian(state: PhysicalState) -> float:
    idx = state.index
    a, b = state.arrays()
    kin = float(np.real(np.sum(b * b[idx.neg])))
    P = potential_p(idx, a)
    return 0.5 * kin + 0.5 * P + 0.25 * P * P


def max_stable_dt(state: PhysicalState) -> float:
    """The CFL guard: 0.2 / (lambda_max sqrt(1 + P(0)))."""
    lam_max = float(state.index.radii.max())
    return 0.2 / (lam_max * math.sqrt(1.0 + max(potential_p(state.index, state.a.coeffs), 0.0)))


def default_dt(state: PhysicalState) -> float:
    """Heuristic step 0.1 / (lambda_max sqrt(1 + P(0))), half the guard."""
    return 0.5 * max_stable_dt(state)


# --- kernels ----------------------------------------------------------------


@numba.njit(cache=True)
def _p_of(a, k2):
    # reality gives a_{-k} = conj(a_k), so P = sum |k|^2 |a_k|^2
    s = 0.0
    for i in range(a.shape[0]):
        s += k2[i] * (a[i].real * a[i].real + a[i].imag * a[i].imag)
    return s


@numba.njit(cache=True)
def _leapfrog(a, b, k2, dt, nsteps, stride):
    nsnap = nsteps // stride + 1
    A = np.empty((nsnap, a.shape[0]), dtype=np.complex128)
    Bv = np.empty((nsnap, a.shape[0]), dtype=np.complex128)
    a = a.copy()
    b = b.copy()
    A[0] = a
    Bv[0] = b
    P = _p_of(a, k2)
    j = 1
    for step in range(1, nsteps + 1):
        for i in range(a.shape[0]):
            b[i] -= 0.5 * dt * k2[i] * (1.0 + P) * a[i]
        for i in range(a.shape[0]):
            a[i] += dt * b[i]
        P = _p_of(a, k2)
        if not np.isfinite(P):
            return A, Bv, step
        for i in range(a.shape[0]):
            b[i] -= 0.5 * dt * k2[i] * (1.0 + P) * a[i]
        if step % stride == 0:
            A[j] = a
            Bv[j] = b
            j += 1
    return A, Bv, -1


@numba.njit(cache=True)
def _rk4(a, b, k2, dt, nsteps, stride):
    nsnap = nsteps // stride + 1
    n = a.shape[0]
    A = np.empty((nsnap, n), dtype=np.complex128)
    Bv = np.empty((nsnap, n), dtype=np.complex128)
    a = a.copy()
    b = b.copy()
    A[0] = a
    Bv[0] = b
    j = 1
    for step in range(1, nsteps + 1):
        P1 = _p_of(a, k2)
        ka1 = b.copy()
        kb1 = -k2 * (1.0 + P1) * a
        a2 = a + 0.5 * dt * ka1
        b2 = b + 0.5 * dt * kb1
        P2 = _p_of(a2, k2)
        ka2 = b2
        kb2 = -k2 * (1.0 + P2) * a2
        a3 = a + 0.5 * dt * ka2
        b3 = b + 0.5 * dt * kb2
        P3 = _p_of(a3, k2)
        ka3 = b3
        kb3 = -k2 * (1.0 + P3) * a3
        a4 = a + dt * ka3
        b4 = b + dt * kb3
        P4 = _p_of(a4, k2)
        ka4 = b4
        kb4 = -k2 * (1.0 + P4) * a4
        a = a + dt / 6.0 * (ka1 + 2.0 * ka2 + 2.0 * ka3 + ka4)
        b = b + dt / 6.0 * (kb1 + 2.0 * kb2 + 2.0 * kb3 + kb4)
        if not np.isfinite(_p_of(a, k2)):
            return A, Bv, step
        if step % stride == 0:
            A[j] = a
            Bv[j] = b
            j += 1
    return A, Bv, -1


# --- trajectories -----------------------------------------------------------


@dataclass
class Trajectory:
    index: ShellIndex
    times: np.ndarray
    a: np.ndarray  # (snapshots, N)
    b: np.ndarray
    dt: float
    scheme: str

    def __len__(self) -> int:
        return len(self.times)

    def state(self, i: int) -> PhysicalState:
        return PhysicalState.from_arrays(self.index, self.a[i], self.b[i])

    @property
    def states(self) -> list:
        return [self.state(i) for i in range(len(self))]

    @property
    def energy(self) -> np.ndarray:
        idx = self.index
        k2 = idx.mode_radius**2
        kin = np.sum(np.abs(self.b) ** 2, axis=1)
        P = np.sum(k2 * np.abs(self.a) ** 2, axis=1)
        return 0.5 * kin + 0.5 * P + 0.25 * P**2

    @property
    def norm(self) -> np.ndarray:
        """||a||_{m1+1/2} + ||b||_{m1-1/2} along the trajectory."""
        lam = self.index.mode_radius
        m1 = M1(self.index.d)
        na = np.sqrt(np.sum(np.abs(self.a) ** 2 * lam ** (2 * m1 + 1), axis=1))
        nb = np.sqrt(np.sum(np.abs(self.b) ** 2 * lam ** (2 * m1 - 1), axis=1))
        return na + nb

    @property
    def U(self) -> np.ndarray:
        """(snapshots, shells) array of U_lambda."""
        return np.array([u_lambda_array(self.index, a, b) for a, b in zip(self.a, self.b)])

    def write_csv(self, path) -> Path:
        path = Path(path)
        H, nrm, U = self.energy, self.norm, self.U
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "H", "norm_m1"] + [f"U_{n}" for n in self.index.keys.tolist()])
            for i, t in enumerate(self.times):
                w.writerow([repr(float(t)), repr(float(H[i])), repr(float(nrm[i]))]
                           + [repr(float(x)) for x in U[i]])
        return path


def integrate_physical(state: PhysicalState, dt: float, T: float, scheme: str = "leapfrog",
                       stride: int = 1) -> Trajectory:
    """Integrate on [0, T] with a fixed step.

    The step is shrunk so that T is an exact multiple of it.  Raises
    CFLViolation when dt exceeds max_stable_dt and NumericAbort (carrying the
    step index) when the state stops being finite.
    """
    if dt <= 0 or T < 0:
        raise ValueError("need dt > 0 and T >= 0")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    guard = max_stable_dt(state)
    if dt > guard * (1 + 1e-12):
        raise CFLViolation(f"dt={dt:g} exceeds the stability guard {guard:g}")
    nsteps = int(math.ceil(T / dt - 1e-9)) if T > 0 else 0
    h = T / nsteps if nsteps else dt
    idx = state.index
    k2 = (idx.mode_radius**2).astype(np.float64)
    a0, b0 = (np.ascontiguousarray(x, dtype=np.complex128) for x in state.arrays())
    kernel = {"leapfrog": _leapfrog, "rk4": _rk4}.get(scheme)
    if kernel is None:
        raise ValueError(f"unknown scheme {scheme!r}")
    A, Bv, bad = kernel(a0, b0, k2, h, nsteps, stride)
    if bad >= 0:
        raise NumericAbort(int(bad))
    times = np.arange(A.shape[0]) * (h * stride)
    return Trajectory(idx, times, A, Bv, h, scheme)
