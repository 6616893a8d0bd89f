"""Integer lattice truncations of Z^d, grouped into spheres of equal norm.

A shell is the set of lattice points k with |k|^2 = n.  Its radius sqrt(n)
is written uniquely as m*sqrt(p) with p squarefree; (m, p) is the shell's
class.  Exact resonances sqrt(n_a) + sqrt(n_b) = sqrt(n_c) are detected by
integer arithmetic on classes, never by floating point comparison.
"""
from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


def squarefree_decompose(n: int) -> tuple[int, int]:
    """Return (m, p) with n = m^2 p and p squarefree (trial division)."""
    if n < 1:
        raise ValueError(f"shell key must be positive, got {n}")
    m, p, rest = 1, 1, int(n)
    f = 2
    while f * f <= rest:
        e = 0
        while rest % f == 0:
            rest //= f
            e += 1
        m *= f ** (e // 2)
        if e % 2:
            p *= f
        f += 1
    p *= rest
    return m, p


@dataclass(frozen=True)
class Shell:
    n: int
    m: int
    p: int
    members: np.ndarray  # positions into LatticeSpec.points

    @property
    def radius(self) -> float:
        return float(self.m) * np.sqrt(float(self.p))


@dataclass(frozen=True)
class LatticeSpec:
    d: int
    n_max: int
    points: np.ndarray  # (N, d) int64, sorted by |k|^2 then lexicographically

    @property
    def size(self) -> int:
        return len(self.points)


@dataclass(eq=False)
class ShellIndex:
    """Shell decomposition of a lattice truncation plus the derived lookups.

    Attributes
    ----------
    keys, radii, classes_m, classes_p : per-shell arrays, keys increasing
    shell_of : shell position of each lattice point
    neg : position of -k for each lattice point k
    """

    spec: LatticeSpec
    shells: tuple
    keys: np.ndarray
    radii: np.ndarray
    classes_m: np.ndarray
    classes_p: np.ndarray
    shell_of: np.ndarray
    neg: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def d(self) -> int:
        return self.spec.d

    @property
    def n_shells(self) -> int:
        return len(self.keys)

    @property
    def size(self) -> int:
        return self.spec.size

    @property
    def mode_radius(self) -> np.ndarray:
        """|k| for every lattice point."""
        return self.radii[self.shell_of]

    def position(self, key: int) -> int:
        """Shell position of key n; KeyError if n is not a shell."""
        i = int(np.searchsorted(self.keys, key))
        if i >= len(self.keys) or self.keys[i] != key:
            raise KeyError(f"no shell with |k|^2 = {key}")
        return i

    def point_position(self, k) -> int:
        lookup = self._cache.get("point_lookup")
        if lookup is None:
            lookup = {tuple(int(c) for c in pt): i for i, pt in enumerate(self.spec.points)}
            self._cache["point_lookup"] = lookup
        return lookup[tuple(int(c) for c in k)]

    def pair_sums(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Per-shell sums  sum_{|j|=lambda} x_j y_{-j}."""
        return self.shell_sum(x * y[self.neg])

    def shell_sum(self, values: np.ndarray) -> np.ndarray:
        """Sum a per-point array over each shell."""
        nsh = len(self.keys)
        if np.iscomplexobj(values):
            re = np.bincount(self.shell_of, weights=values.real, minlength=nsh)
            im = np.bincount(self.shell_of, weights=values.imag, minlength=nsh)
            return re + 1j * im
        return np.bincount(self.shell_of, weights=values, minlength=nsh)


def build_lattice(d: int, n_max: int) -> tuple[LatticeSpec, ShellIndex]:
    """All k in Z^d with 0 < |k|^2 <= n_max, grouped into shells."""
    if d < 1:
        raise ValueError("dimension must be >= 1")
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    r = int(np.floor(np.sqrt(n_max)))
    axis = np.arange(-r, r + 1, dtype=np.int64)
    grid = np.array(list(itertools.product(axis, repeat=d)), dtype=np.int64).reshape(-1, d)
    n2 = (grid**2).sum(axis=1)
    keep = (n2 > 0) & (n2 <= n_max)
    grid, n2 = grid[keep], n2[keep]
    order = np.lexsort(tuple(grid[:, c] for c in reversed(range(d))) + (n2,))
    points, n2 = grid[order], n2[order]
    spec = LatticeSpec(d=d, n_max=int(n_max), points=points)

    keys, shell_of = np.unique(n2, return_inverse=True)
    lookup = {tuple(pt): i for i, pt in enumerate(points.tolist())}
    neg = np.array([lookup[tuple(-c for c in pt)] for pt in points.tolist()], dtype=np.int64)

    bounds = np.searchsorted(n2, np.append(keys, n_max + 1))
    shells, ms, ps = [], [], []
    for s, key in enumerate(keys.tolist()):
        m, p = squarefree_decompose(key)
        ms.append(m)
        ps.append(p)
        shells.append(Shell(n=key, m=m, p=p, members=np.arange(bounds[s], bounds[s + 1])))
    ms = np.array(ms, dtype=np.int64)
    ps = np.array(ps, dtype=np.int64)
    index = ShellIndex(
        spec=spec,
        shells=tuple(shells),
        keys=keys.astype(np.int64),
        radii=ms * np.sqrt(ps.astype(float)),
        classes_m=ms,
        classes_p=ps,
        shell_of=shell_of.astype(np.int64),
        neg=neg,
    )
    return spec, index


@dataclass(frozen=True)
class TripleSet:
    """Resonant triples sqrt(n_a) + sqrt(n_b) = sqrt(n_l) with n_a <= n_b.

    Stored both as shell keys and as shell positions of the owning index.
    """

    keys: np.ndarray  # (T, 3) int64: n_a, n_b, n_l
    pos: np.ndarray  # (T, 3) int64 positions into ShellIndex arrays

    def __len__(self) -> int:
        return len(self.keys)

    def as_set(self) -> set:
        return {tuple(int(x) for x in row) for row in self.keys}


def resonant_triples(index: ShellIndex, support=None) -> TripleSet:
    """Exact resonant triples among the shells of `index`.

    `support`, if given, is an iterable of shell keys to restrict to (for
    instance the shells where a datum is nonzero).
    """
    return triples_for_keys(index.keys, support, classes=(index.classes_m, index.classes_p))


def triples_for_keys(keys, support=None, classes=None) -> TripleSet:
    """Resonant triples among an increasing array of shell keys.

    Positions in the result refer to `keys`.  Triples are found per
    squarefree class by integer addition of the m-parts.
    """
    keys = np.asarray(keys, dtype=np.int64)
    if classes is None:
        mp = [squarefree_decompose(int(n)) for n in keys]
        classes = (np.array([m for m, _ in mp], dtype=np.int64), np.array([p for _, p in mp], dtype=np.int64))
    ms, ps = classes
    allowed = None if support is None else {int(n) for n in support}
    by_class: dict[int, dict[int, int]] = {}
    for s in range(len(keys)):
        if allowed is not None and int(keys[s]) not in allowed:
            continue
        by_class.setdefault(int(ps[s]), {})[int(ms[s])] = s
    rows = []
    for mset in by_class.values():
        mlist = sorted(mset)
        for ia, ma in enumerate(mlist):
            for mb in mlist[ia:]:
                if ma + mb in mset:
                    rows.append((mset[ma], mset[mb], mset[ma + mb]))
    rows.sort(key=lambda r: (keys[r[2]], keys[r[0]]))
    pos = np.array(rows, dtype=np.int64).reshape(-1, 3)
    return TripleSet(keys=keys[pos] if len(pos) else np.zeros((0, 3), np.int64), pos=pos)


def write_shell_table(index: ShellIndex, path) -> Path:
    """CSV with one row per shell: n, m, p, member_count."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "m", "p", "member_count"])
        for sh in index.shells:
            w.writerow([sh.n, sh.m, sh.p, len(sh.members)])
    return path
