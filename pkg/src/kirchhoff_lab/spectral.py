"""Fourier coefficient fields on a lattice truncation, norms and shell sums.

Coefficients live in dense complex arrays indexed by lattice point position.
The pairing is <w, h> = sum_j w_j h_{-j} with no volume factor, so all
"integrals" of the equation are evaluated exactly through it.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .lattice import ShellIndex, build_lattice


class LatticeMismatch(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SpectralField:
    index: ShellIndex
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != (self.index.size,):
            raise ValueError(f"expected {self.index.size} coefficients, got {c.shape}")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, index: ShellIndex) -> "SpectralField":
        return cls(index, np.zeros(index.size, complex))

    @classmethod
    def from_modes(cls, index: ShellIndex, modes: dict) -> "SpectralField":
        """Build from {k: value}, k an int (d=1) or a tuple."""
        c = np.zeros(index.size, complex)
        for k, val in modes.items():
            key = (k,) if np.isscalar(k) else tuple(k)
            c[index.point_position(key)] = val
        return cls(index, c)

    def reflect(self) -> "SpectralField":
        """(Rf)_k = conj(f_{-k})."""
        return SpectralField(self.index, np.conj(self.coeffs[self.index.neg]))

    def __add__(self, other: "SpectralField") -> "SpectralField":
        _same(self, other)
        return SpectralField(self.index, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        _same(self, other)
        return SpectralField(self.index, self.coeffs - other.coeffs)

    def __mul__(self, scalar) -> "SpectralField":
        return SpectralField(self.index, self.coeffs * scalar)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class ConjugatePair:
    """(u, v) with v_k = conj(u_{-k}) expected; not enforced, see is_conjugate."""

    u: SpectralField
    v: SpectralField

    @property
    def index(self) -> ShellIndex:
        return self.u.index

    @classmethod
    def from_u(cls, u: SpectralField) -> "ConjugatePair":
        return cls(u, u.reflect())

    @classmethod
    def from_arrays(cls, index: ShellIndex, u, v) -> "ConjugatePair":
        return cls(SpectralField(index, u), SpectralField(index, v))

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return self.u.coeffs, self.v.coeffs

    def conjugacy_defect(self) -> float:
        return float(np.max(np.abs(self.v.coeffs - self.u.reflect().coeffs), initial=0.0))

    def is_conjugate(self, tol: float = 1e-12) -> bool:
        scale = max(1.0, float(np.max(np.abs(self.u.coeffs), initial=0.0)))
        return self.conjugacy_defect() <= tol * scale


@dataclass(frozen=True, eq=False)
class PhysicalState:
    """Position a and velocity b of a real solution, stored spectrally."""

    a: SpectralField
    b: SpectralField

    @property
    def index(self) -> ShellIndex:
        return self.a.index

    @classmethod
    def from_arrays(cls, index: ShellIndex, a, b) -> "PhysicalState":
        return cls(SpectralField(index, a), SpectralField(index, b))

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return self.a.coeffs, self.b.coeffs

    def reality_defect(self) -> float:
        da = np.abs(self.a.coeffs - self.a.reflect().coeffs)
        db = np.abs(self.b.coeffs - self.b.reflect().coeffs)
        return float(max(np.max(da, initial=0.0), np.max(db, initial=0.0)))


@dataclass(frozen=True)
class ShellObservables:
    keys: np.ndarray
    S: np.ndarray
    B: np.ndarray
    U: np.ndarray | None = None

    def as_dict(self, name: str) -> dict:
        return dict(zip(self.keys.tolist(), getattr(self, name).tolist()))


def _same(f: SpectralField, g: SpectralField):
    if f.index is not g.index:
        raise LatticeMismatch("fields live on different lattices")


def sobolev_norm(f: SpectralField, s: float) -> float:
    if s < 0:
        raise ValueError("only s >= 0 is supported")
    w = f.index.mode_radius ** (2 * s)
    return float(np.sqrt(np.sum(np.abs(f.coeffs) ** 2 * w)))


def pairing(w: SpectralField, h: SpectralField) -> complex:
    """<w, h> = sum_j w_j h_{-j}."""
    _same(w, h)
    return complex(np.sum(w.coeffs * h.coeffs[w.index.neg]))


def shell_observables(pair: ConjugatePair) -> ShellObservables:
    idx = pair.index
    u, v = pair.arrays()
    S = idx.shell_sum(np.abs(u) ** 2)
    B = idx.pair_sums(u, u)
    return ShellObservables(keys=idx.keys.copy(), S=S, B=B)


def u_lambda_array(index: ShellIndex, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    lam = index.radii
    return lam**3 * index.shell_sum(np.abs(a) ** 2) + lam * index.shell_sum(np.abs(b) ** 2)


def u_lambda(state: PhysicalState) -> dict:
    """U_lambda = sum_{|k|=lambda} lambda^3 |a_k|^2 + lambda |b_k|^2, keyed by n."""
    U = u_lambda_array(state.index, *state.arrays())
    return dict(zip(state.index.keys.tolist(), U.tolist()))


def data_norm(state: PhysicalState, s: float) -> float:
    """||a||_{s+1/2} + ||b||_{s-1/2}, the size of Cauchy data at regularity s."""
    return sobolev_norm(state.a, s + 0.5) + sobolev_norm(state.b, s - 0.5)


def _targets_array(index: ShellIndex, targets: dict) -> np.ndarray:
    t = np.zeros(index.n_shells)
    for n, val in targets.items():
        if val < 0:
            raise ValueError(f"negative target on shell {n}")
        t[index.position(int(n))] = float(val)
    return t


def _phases(index: ShellIndex, phase_policy, seed) -> np.ndarray:
    """Unit phases e^{i theta_k}, real-symmetric: phase_{-k} = conj(phase_k)."""
    if phase_policy == "zero":
        return np.ones(index.size, complex)
    if phase_policy != "seeded-random":
        raise ValueError(f"unknown phase policy {phase_policy!r}")
    rng = np.random.default_rng(seed)
    theta = rng.uniform(0.0, 2 * np.pi, index.size)
    pos = np.arange(index.size)
    rep = pos < index.neg  # one representative per +-k pair
    theta = np.where(rep, theta, -theta[index.neg])
    return np.exp(1j * theta)


def synth_from_targets(targets: dict, meaning: str, index: ShellIndex,
                       phase_policy: str = "zero", seed=None):
    """Data whose shell profile (U or S) equals `targets`, mass split evenly.

    meaning="U" returns a PhysicalState with b = 0; meaning="S" returns a
    ConjugatePair.  Random phases are real-symmetric, so for "S" the output
    is also the image of a real function.
    """
    t = _targets_array(index, targets)
    counts = np.bincount(index.shell_of, minlength=index.n_shells)
    phase = _phases(index, phase_policy, seed)
    lam = index.radii
    if meaning == "U":
        amp = np.sqrt(t / (lam**3 * counts))[index.shell_of]
        return PhysicalState.from_arrays(index, amp * phase, np.zeros(index.size, complex))
    if meaning == "S":
        amp = np.sqrt(t / counts)[index.shell_of]
        return ConjugatePair.from_u(SpectralField(index, amp * phase))
    raise ValueError("meaning must be 'U' or 'S'")


# --- text snapshots -------------------------------------------------------

_KIND_COMPONENTS = {"physical": ("a", "b"), "pair": ("u", "v"), "field": ("f",)}


def save_state(obj, path, index: ShellIndex | None = None) -> Path:
    """Write a PhysicalState, ConjugatePair or SpectralField as text."""
    if isinstance(obj, PhysicalState):
        kind, fields = "physical", (obj.a, obj.b)
    elif isinstance(obj, ConjugatePair):
        kind, fields = "pair", (obj.u, obj.v)
    elif isinstance(obj, SpectralField):
        kind, fields = "field", (obj,)
    else:
        raise TypeError(type(obj))
    idx = fields[0].index
    path = Path(path)
    lines = ["# kirchhoff-lab state v1", f"# d {idx.d}", f"# n_max {idx.spec.n_max}", f"# kind {kind}"]
    for tag, f in zip(_KIND_COMPONENTS[kind], fields):
        lines.append(f"# component {tag}")
        for k, c in zip(idx.spec.points.tolist(), f.coeffs):
            lines.append(" ".join(str(x) for x in k) + f" {float(c.real)!r} {float(c.imag)!r}")
    path.write_text("\n".join(lines) + "\n")
    return path


def load_state(path, index: ShellIndex | None = None):
    """Inverse of save_state.  Builds the lattice from the header if needed."""
    header, comps, current = {}, {}, None
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if len(parts) == 2 and parts[0] in ("d", "n_max", "kind"):
                header[parts[0]] = parts[1]
            elif len(parts) == 2 and parts[0] == "component":
                current = parts[1]
                comps[current] = []
            continue
        if current is None:
            raise ValueError("coefficient line before any component header")
        comps[current].append(line.split())
    try:
        d, n_max, kind = int(header["d"]), int(header["n_max"]), header["kind"]
    except KeyError as exc:
        raise ValueError(f"state file missing header field {exc}") from None
    if index is None:
        _, index = build_lattice(d, n_max)
    elif index.d != d or index.spec.n_max != n_max:
        raise LatticeMismatch("state file lattice differs from the supplied one")
    fields = []
    for tag in _KIND_COMPONENTS[kind]:
        c = np.zeros(index.size, complex)
        for row in comps.get(tag, []):
            k = tuple(int(x) for x in row[:d])
            c[index.point_position(k)] = complex(float(row[d]), float(row[d + 1]))
        fields.append(SpectralField(index, c))
    if kind == "physical":
        return PhysicalState(*fields)
    if kind == "pair":
        return ConjugatePair(*fields)
    return fields[0]
