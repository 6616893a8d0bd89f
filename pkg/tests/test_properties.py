"""Randomized properties across modules (hypothesis drives the seeds)."""
import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_pair, random_real
from kirchhoff_lab.constants import M1
from kirchhoff_lab.kirchhoff import kirchhoff_rhs, potential_p
from kirchhoff_lab.lattice import build_lattice, resonant_triples, squarefree_decompose
from kirchhoff_lab.normal_form import full_chain, w5, x3plus
from kirchhoff_lab.spectral import (
    ConjugatePair, PhysicalState, load_state, save_state, sobolev_norm,
)
from oracles import brute_force_triples

seeds = st.integers(0, 2**32 - 1)
_LATTICES = {}


def lattice(d, n_max):
    if (d, n_max) not in _LATTICES:
        _LATTICES[d, n_max] = build_lattice(d, n_max)[1]
    return _LATTICES[d, n_max]


@given(st.integers(1, 3), st.integers(1, 150))
@settings(max_examples=40, deadline=None)
def test_triples_equal_brute_force(d, n_max):
    idx = lattice(d, n_max)
    got = {tuple(int(x) for x in t) for t in resonant_triples(idx).keys}
    assert got == brute_force_triples(idx.keys)


@given(st.integers(1, 10**6))
def test_squarefree_reconstructs(n):
    m, p = squarefree_decompose(n)
    assert m * m * p == n
    assert all(p % (q * q) for q in range(2, math.isqrt(p) + 1))


@given(seeds, st.sampled_from([(1, 32), (2, 10)]))
@settings(max_examples=20, deadline=None)
def test_state_file_round_trip(tmp_path_factory, seed, dn):
    idx = lattice(*dn)
    rng = np.random.default_rng(seed)
    st_ = PhysicalState.from_arrays(idx, random_real(idx, rng), random_real(idx, rng))
    path = save_state(st_, tmp_path_factory.mktemp("s") / "x.state")
    back = load_state(path)
    assert np.array_equal(back.a.coeffs, st_.a.coeffs) and np.array_equal(back.b.coeffs, st_.b.coeffs)


@given(seeds)
@settings(max_examples=30, deadline=None)
def test_energy_is_constant_along_the_field(seed):
    idx = lattice(2, 20)
    rng = np.random.default_rng(seed)
    s = PhysicalState.from_arrays(idx, random_real(idx, rng), random_real(idx, rng))
    r = kirchhoff_rhs(s)
    a, b = s.arrays()
    k2 = idx.mode_radius**2
    P = potential_p(idx, a)
    kin = np.sum(b * r.b.coeffs[idx.neg])
    pot = (1 + P) * np.sum(k2 * r.a.coeffs * a[idx.neg])
    assert abs(kin + pot) <= 1e-13 * (abs(kin) + abs(pot))


@given(seeds, st.sampled_from([(1, 64), (2, 25)]), st.floats(0.001, 0.08), st.floats(1.5, 4.0))
@settings(max_examples=25, deadline=None)
def test_chain_round_trip(seed, dn, size, decay):
    idx = lattice(*dn)
    p = random_pair(idx, np.random.default_rng(seed), size, decay)
    x = full_chain("forward", p)
    assert x.reality_defect() <= 1e-15 * max(np.max(np.abs(x.a.coeffs)), 1e-300)
    back = full_chain("inverse", x)
    err = math.hypot(sobolev_norm(back.u - p.u, M1(idx.d)), sobolev_norm(back.v - p.v, M1(idx.d)))
    assert err <= 1e-12 * size
    assert back.is_conjugate()


@given(seeds, st.floats(1e-3, 10.0))
@settings(max_examples=25, deadline=None)
def test_fields_are_homogeneous(seed, c):
    idx = lattice(1, 36)
    p = random_pair(idx, np.random.default_rng(seed), 0.3)
    q = ConjugatePair(p.u * c, p.v * c)
    for field, k in ((x3plus, 3), (w5, 5)):
        a, b = field(p).u.coeffs, field(q).u.coeffs
        assert np.max(np.abs(b - c**k * a)) <= 1e-12 * c**k * np.max(np.abs(a))


@given(seeds)
@settings(max_examples=20, deadline=None)
def test_fields_preserve_conjugacy(seed):
    idx = lattice(2, 18)
    p = random_pair(idx, np.random.default_rng(seed), 0.2)
    assert x3plus(p).is_conjugate() and w5(p).is_conjugate()
