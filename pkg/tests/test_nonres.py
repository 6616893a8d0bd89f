import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_real
from kirchhoff_lab.constants import M1
from kirchhoff_lab.nonres import (
    Infeasible, check_melnikov, check_nonres, make_nonresonant, perturbation_margin,
    sequential_profile,
)
from kirchhoff_lab.spectral import PhysicalState, SpectralField, data_norm, u_lambda
from oracles import brute_force_triples

D1_KEYS = [n * n for n in range(1, 9)]


def test_decreasing_profile_passes_at_one_third():
    trip = brute_force_triples(D1_KEYS)
    U = {n: Fraction(1, n) for n in D1_KEYS}
    rep = check_nonres(U, trip, Fraction(1, 3))
    assert rep.passed and rep.worst_margin >= Fraction(1, 3)
    assert rep.checked == len(trip)
    # any strictly decreasing profile, not just 1/n
    U = {n: Fraction(100 - i, 7) for i, n in enumerate(D1_KEYS)}
    assert check_nonres(U, trip, Fraction(1, 3)).passed


def test_flat_profile_margin():
    trip = brute_force_triples([1, 4, 9])
    assert trip == {(1, 1, 4), (1, 4, 9)}
    U = {1: 2, 4: 2, 9: 2}
    rep = check_nonres(U, trip, Fraction(1, 3))
    assert rep.worst_margin == Fraction(1, 3) and rep.passed
    rep = check_nonres(U, trip, Fraction(1, 3) + Fraction(1, 10**9))
    assert not rep.passed and set(rep.violations) == trip


def test_odd_support_is_vacuous():
    U = {n: Fraction(1, n) for n in (1, 9, 25, 49)}
    trip = brute_force_triples(D1_KEYS)
    rep = check_nonres(U, trip, 1)
    assert rep.passed and rep.checked == 0 and rep.worst_margin is None


def test_s_form_weights():
    trip = [(1, 1, 4)]
    S = {1: 1.0, 4: 0.5}  # n S = (1, 1, 2): resonant
    assert check_nonres(S, trip, 0.1, "S-form").worst_margin == 0
    assert check_nonres(S, trip, 0.1, "U-form").worst_margin == pytest.approx(1.5 / 2.5)


def test_parameter_errors():
    with pytest.raises(ValueError):
        check_nonres({}, [], 0)
    with pytest.raises(ValueError):
        check_nonres({}, [], 1.5)
    with pytest.raises(ValueError):
        check_nonres({}, [], 0.5, "V-form")
    with pytest.raises(ValueError):
        check_melnikov({}, [], 0.1, 0)
    with pytest.raises(ValueError):
        check_melnikov({}, [], -1, 1)


def test_melnikov_examples():
    trip = brute_force_triples(D1_KEYS)
    assert check_melnikov({}, trip, 0.1, 2).passed
    U = {n: n ** -3.0 for n in D1_KEYS}  # lambda^-6
    rep = check_melnikov(U, trip, 0.1, 2)
    bad = {t for t in trip if abs(U[t[0]] + U[t[1]] - U[t[2]]) < 0.1 / min(t)}
    assert set(rep.violations) == bad
    assert rep.passed == (not bad)
    # chaining at reported margins
    nr = check_nonres(U, trip, 0.01)
    c1 = min(nr.worst_margin * (U[a] + U[b] + U[l]) * math.sqrt(min(a, b, l)) ** 2 for a, b, l in trip)
    assert check_melnikov(U, trip, c1 * (1 - 1e-12), 2).passed


@given(st.lists(st.integers(1, 10**6), min_size=8, max_size=8), st.fractions(Fraction(1, 1000), 1000))
@settings(max_examples=60, deadline=None)
def test_scale_invariance(vals, t):
    trip = brute_force_triples(D1_KEYS)
    U = dict(zip(D1_KEYS, (Fraction(v) for v in vals)))
    c0 = Fraction(1, 5)
    r1 = check_nonres(U, trip, c0)
    r2 = check_nonres({n: t * v for n, v in U.items()}, trip, c0)
    assert (r1.passed, r1.worst_margin, r1.worst_triple) == (r2.passed, r2.worst_margin, r2.worst_triple)


def test_power_decay_certificate(lat):
    idx = lat(1, 64)
    data = make_nonresonant("power-decay", idx, 0.05, sigma=3)
    cert = data.certificate
    assert cert.c0 == Fraction(1, 3) and cert.verified
    assert cert.worst_margin >= Fraction(1, 3)
    assert cert.profile[4] == Fraction(1, 64)
    assert data_norm(data.state, M1(1)) == pytest.approx(0.05, rel=1e-12)
    assert not data.state.b.coeffs.any()
    with pytest.raises(Infeasible):
        make_nonresonant("power-decay", idx, 0.05, sigma=1)


def test_decreasing_certificate(lat):
    for d, n_max in ((1, 64), (2, 25)):
        data = make_nonresonant("decreasing", lat(d, n_max), 0.1)
        assert data.certificate.c0 == Fraction(1, 3)
        assert data.certificate.worst_margin >= Fraction(1, 3)


def test_sequential_construction():
    c0 = Fraction(1, 9)
    keys = list(range(1, 60))
    sigma, info = sequential_profile(keys, c0)
    assert (info["theta1"], info["theta2"]) == (Fraction(8, 10), Fraction(10, 8))
    for n, ivs in info["intervals"].items():
        assert all(not (lo < sigma[n] < hi) for lo, hi in ivs)
    trip = brute_force_triples(keys)
    assert trip and check_nonres(sigma, trip, c0).passed
    assert all(isinstance(v, Fraction) for v in sigma.values())


def test_sequential_make(lat):
    data = make_nonresonant("sequential", lat(2, 50), 0.05, c0=Fraction(1, 9))
    assert data.certificate.c0 == Fraction(1, 9)
    assert data.certificate.worst_margin >= Fraction(1, 9)
    assert data.certificate.details["theta1"] == "4/5"


def test_odd_support_and_primes(lat):
    data = make_nonresonant("odd-support", lat(1, 64), 0.05)
    assert data.certificate.c0 == 1 and data.certificate.triples == 0
    assert all(math.isqrt(n) % 2 == 1 for n in data.certificate.profile)
    data = make_nonresonant("primes-pattern", lat(2, 40), 0.05)
    assert data.certificate.c0 == 1 and data.certificate.verified


def test_unknown_kind(lat):
    with pytest.raises(ValueError):
        make_nonresonant("increasing", lat(1, 16), 0.05)


def test_perturbation_examples(lat):
    base = {n: Fraction(1, n) for n in D1_KEYS}
    pm = perturbation_margin(base, {}, Fraction(1, 3))
    assert pm.mu == 0 and pm.c0_new == Fraction(1, 3)

    pert = {n: v / 576 for n, v in base.items()}
    pm = perturbation_margin(base, pert, Fraction(1, 3))
    assert pm.mu == Fraction(1, 24) and pm.c0_new == Fraction(1, 6)

    pm = perturbation_margin({1: 1, 4: 1}, {9: Fraction(1, 10**6)}, Fraction(1, 3))
    assert pm.mu == math.inf and pm.shell == 9 and pm.c0_new == 0

    pm = perturbation_margin(base, {n: v for n, v in base.items()}, Fraction(1, 3))
    assert pm.mu == 1 and pm.c0_new == 0


def test_perturbation_needs_certificate(lat):
    data = make_nonresonant("decreasing", lat(1, 16), 0.05)
    assert perturbation_margin(data, data.state).mu == pytest.approx(1)
    with pytest.raises(ValueError):
        perturbation_margin(data.state, data.state)


@given(st.integers(0, 2**32 - 1), st.floats(0.001, 0.08))
@settings(max_examples=40, deadline=None)
def test_perturbation_soundness(seed, mu):
    from kirchhoff_lab.lattice import build_lattice

    idx = build_lattice(1, 49)[1]
    rng = np.random.default_rng(seed)
    data = make_nonresonant("decreasing", idx, 0.05, phase_policy="seeded-random", seed=seed)
    f, g = random_real(idx, rng), random_real(idx, rng)
    Up = np.array(list(u_lambda(PhysicalState(SpectralField(idx, f), SpectralField(idx, g))).values()))
    ub = np.array(list(u_lambda(data.state).values()))
    scale = mu * np.sqrt(ub / Up) * rng.uniform(0.5, 1.0, len(ub))
    f, g = f * scale[idx.shell_of], g * scale[idx.shell_of]
    pert = PhysicalState(SpectralField(idx, f), SpectralField(idx, g))
    pm = perturbation_margin(data, pert)
    assert pm.mu <= mu * (1 + 1e-12)
    both = PhysicalState(data.state.a + pert.a, data.state.b + pert.b)
    rep = check_nonres(u_lambda(both), brute_force_triples(idx.keys), 1e-9)
    assert rep.worst_margin >= float(pm.c0_new) - 1e-12
