import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from kirchhoff_lab.lattice import build_lattice  # noqa: E402
from kirchhoff_lab.spectral import ConjugatePair, SpectralField  # noqa: E402


@pytest.fixture(scope="session")
def lat():
    """Cached lattices keyed by (d, n_max)."""
    cache = {}

    def get(d, n_max):
        if (d, n_max) not in cache:
            cache[d, n_max] = build_lattice(d, n_max)[1]
        return cache[d, n_max]

    return get


def random_pair(idx, rng, size=0.05, decay=2.0, s=None):
    """Random conjugate pair with ||u||_s = size (s defaults to m1)."""
    from kirchhoff_lab.constants import M1

    s = M1(idx.d) if s is None else s
    u = (rng.normal(size=idx.size) + 1j * rng.normal(size=idx.size)) * idx.mode_radius ** (-decay)
    u *= size / np.sqrt(np.sum(np.abs(u) ** 2 * idx.mode_radius ** (2 * s)))
    return ConjugatePair.from_u(SpectralField(idx, u))


def random_real(idx, rng, decay=2.0):
    """Random coefficient vector of a real function (c_{-k} = conj c_k)."""
    c = (rng.normal(size=idx.size) + 1j * rng.normal(size=idx.size)) * idx.mode_radius ** (-decay)
    return 0.5 * (c + np.conj(c[idx.neg]))


# --- acceptance report ----------------------------------------------------------

ACCEPTANCE: dict = {}


def record(n: int, ok: bool, detail: str) -> bool:
    """Store one acceptance verdict; printed in the terminal summary."""
    ACCEPTANCE[n] = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
