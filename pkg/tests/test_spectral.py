import math

import numpy as np
import pytest

from conftest import random_real
from kirchhoff_lab.kirchhoff import hamiltonian
from kirchhoff_lab.lattice import build_lattice
from kirchhoff_lab.normal_form import linear_stage
from kirchhoff_lab.spectral import (
    ConjugatePair, LatticeMismatch, PhysicalState, SpectralField, data_norm, load_state, pairing,
    save_state, shell_observables, sobolev_norm, synth_from_targets, u_lambda,
)


def test_sobolev_examples(lat):
    idx = lat(1, 16)
    f = SpectralField.from_modes(idx, {1: 1.0})
    for s in (0, 0.5, 1, 3):
        assert sobolev_norm(f, s) == pytest.approx(1.0)
    g = SpectralField.from_modes(idx, {1: 1.0, 2: 1.0})
    assert sobolev_norm(g, 1) == pytest.approx(math.sqrt(5))
    i2 = lat(2, 4)
    h = SpectralField.from_modes(i2, {(1, 0): 1, (-1, 0): 1, (0, 1): 1, (0, -1): 1})
    assert sobolev_norm(h, 0) == pytest.approx(2.0)


def test_sobolev_rejects_negative(lat):
    with pytest.raises(ValueError):
        sobolev_norm(SpectralField.zeros(lat(1, 4)), -1)


def test_pairing_examples(lat):
    idx = lat(1, 16)
    e_p = SpectralField.from_modes(idx, {1: 1})
    e_m = SpectralField.from_modes(idx, {-1: 1})
    assert pairing(e_p, e_m) == 1
    assert pairing(e_p, e_p) == 0
    c = SpectralField.from_modes(idx, {1: 0.5, -1: 0.5})
    assert pairing(c, c) == pytest.approx(0.5)


def test_pairing_lattice_mismatch():
    _, a = build_lattice(1, 4)
    _, b = build_lattice(1, 4)
    with pytest.raises(LatticeMismatch):
        pairing(SpectralField.zeros(a), SpectralField.zeros(b))


def test_pairing_symmetric_bilinear(lat):
    idx = lat(2, 10)
    rng = np.random.default_rng(0)
    w, h, g = (SpectralField(idx, rng.normal(size=idx.size) + 1j * rng.normal(size=idx.size)) for _ in range(3))
    assert pairing(w, h) == pytest.approx(pairing(h, w))
    assert pairing(w + 2 * g, h) == pytest.approx(pairing(w, h) + 2 * pairing(g, h))


def test_shell_observables_examples(lat):
    idx = lat(1, 4)
    for modes, S1, B1 in (({1: 1}, 1, 0), ({1: 1, -1: 1}, 2, 2), ({1: 1, -1: 1j}, 2, 2j)):
        u = SpectralField.from_modes(idx, modes)
        obs = shell_observables(ConjugatePair.from_u(u))
        assert obs.S[0] == pytest.approx(S1)
        assert obs.B[0] == pytest.approx(B1)


def test_parseval_and_b_bound(lat):
    rng = np.random.default_rng(3)
    for d, n in ((1, 64), (2, 30), (3, 12)):
        idx = lat(d, n)
        u = SpectralField(idx, rng.normal(size=idx.size) + 1j * rng.normal(size=idx.size))
        obs = shell_observables(ConjugatePair.from_u(u))
        assert np.all(np.abs(obs.B) <= obs.S * (1 + 1e-14))
        for s in (0, 0.5, 1, 2):
            lhs = np.sum(idx.radii ** (2 * s) * obs.S)
            assert lhs == pytest.approx(sobolev_norm(u, s) ** 2, rel=1e-12)


def test_u_lambda_examples(lat):
    idx = lat(1, 9)
    a = SpectralField.from_modes(idx, {1: 1, -1: 1})
    st = PhysicalState(a, SpectralField.zeros(idx))
    assert u_lambda(st)[1] == pytest.approx(2)
    b = SpectralField.from_modes(idx, {2: 1, -2: 1})
    assert u_lambda(PhysicalState(SpectralField.zeros(idx), b))[4] == pytest.approx(4)
    prof = {n: n ** (-3.0) for n in idx.keys.tolist()}  # lambda^{-2 sigma}, sigma = 3
    U = u_lambda(synth_from_targets(prof, "U", idx))
    assert [U[n] for n in (1, 4, 9)] == pytest.approx([1, 2**-6, 3**-6], rel=1e-12)


def test_synth_examples(lat):
    idx = lat(1, 9)
    st = synth_from_targets({1: 2.0}, "U", idx)
    a, b = st.arrays()
    assert a[idx.point_position((1,))] == pytest.approx(1) and a[idx.point_position((-1,))] == pytest.approx(1)
    assert np.all(b == 0)
    z = synth_from_targets({}, "U", idx)
    assert np.all(z.a.coeffs == 0)
    i2 = lat(2, 4)
    p = synth_from_targets({1: 1.0}, "S", i2)
    assert np.abs(p.u.coeffs[i2.shell_of == 0]) ** 2 == pytest.approx(np.full(4, 0.25))


@pytest.mark.parametrize("policy", ["zero", "seeded-random"])
def test_synth_round_trip(lat, policy):
    idx = lat(2, 40)
    rng = np.random.default_rng(5)
    targets = {n: float(rng.uniform(0.1, 2)) for n in idx.keys.tolist()}
    st = synth_from_targets(targets, "U", idx, policy, seed=11)
    assert st.reality_defect() < 1e-15
    U = u_lambda(st)
    assert [U[n] for n in targets] == pytest.approx(list(targets.values()), rel=1e-12)
    pr = synth_from_targets(targets, "S", idx, policy, seed=11)
    assert pr.is_conjugate()
    assert shell_observables(pr).S == pytest.approx(list(targets.values()), rel=1e-12)


def test_synth_errors(lat):
    idx = lat(1, 9)
    with pytest.raises((KeyError, ValueError)):
        synth_from_targets({2: 1.0}, "U", idx)
    with pytest.raises(ValueError):
        synth_from_targets({1: -1.0}, "U", idx)


def test_seeded_phases_reproducible(lat):
    idx = lat(2, 20)
    a = synth_from_targets({1: 1, 5: 2}, "U", idx, "seeded-random", seed=4).a.coeffs
    b = synth_from_targets({1: 1, 5: 2}, "U", idx, "seeded-random", seed=4).a.coeffs
    assert np.array_equal(a, b)


def test_linear_stage_identity(lat):
    """U_lambda(a, b) = 2 lambda^2 S_lambda(f) with f the image under the two linear stages."""
    rng = np.random.default_rng(8)
    for d, n in ((1, 50), (2, 25)):
        idx = lat(d, n)
        for _ in range(5):
            st = PhysicalState.from_arrays(idx, random_real(idx, rng), random_real(idx, rng))
            qp = linear_stage(1, "inverse", st)
            fg = linear_stage(2, "inverse", qp)
            S = shell_observables(fg).S
            U = np.array([u_lambda(st)[n] for n in idx.keys.tolist()])
            assert U == pytest.approx(2 * idx.radii**2 * S, rel=1e-12)


def test_data_norm(lat):
    idx = lat(1, 9)
    st = PhysicalState(SpectralField.from_modes(idx, {2: 1}), SpectralField.from_modes(idx, {1: 1}))
    assert data_norm(st, 1) == pytest.approx(2**1.5 + 1)


@pytest.mark.parametrize("kind", ["physical", "pair", "field"])
def test_state_file_round_trip(tmp_path, lat, kind):
    idx = lat(2, 10)
    rng = np.random.default_rng(1)
    a, b = random_real(idx, rng), random_real(idx, rng)
    obj = {"physical": PhysicalState.from_arrays(idx, a, b),
           "pair": ConjugatePair.from_arrays(idx, a + 1j * b, a - 1j * b),
           "field": SpectralField(idx, a)}[kind]
    p = save_state(obj, tmp_path / "s.txt")
    text = p.read_text().splitlines()
    assert text[0].startswith("# kirchhoff-lab state") and "# d 2" in text
    back = load_state(p)
    ref = obj.arrays() if kind != "field" else (obj.coeffs,)
    got = back.arrays() if kind != "field" else (back.coeffs,)
    for x, y in zip(ref, got):
        assert np.array_equal(x, y)
    assert hamiltonian(PhysicalState.from_arrays(idx, a, b)) >= 0
