import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_pair
from kirchhoff_lab.effective import (
    EffectiveState, NegativeSuperaction, effective_rhs, growth_report, integrate_effective,
    max_rk4_dt, triple_diagnostics,
)
from kirchhoff_lab.kirchhoff import CFLViolation
from kirchhoff_lab.nonres import make_nonresonant
from kirchhoff_lab.normal_form import full_chain
from oracles import Dense, dense_sdot_by_degree


def _random_state(rng, keys, closure="full-P", size=0.05, zero=()):
    keys = np.asarray(keys)
    S = size * rng.uniform(0.2, 1.0, len(keys)) / keys
    B = S * rng.uniform(0, 1, len(keys)) * np.exp(2j * np.pi * rng.uniform(size=len(keys)))
    for n in zero:
        i = int(np.searchsorted(keys, n))
        S[i], B[i] = 0.0, 0.0
    return EffectiveState(keys, S, B, closure)


def test_rhs_examples():
    one = EffectiveState([4], [0.3], [0.2 + 0.1j])
    sd, bd = effective_rhs(one)
    assert sd[0] == 0
    assert bd[0] / one.B[0] == pytest.approx(-2j * (1 + one.calP()) * (2 + 0.25 * 4 * 0.3))

    real = EffectiveState([1, 4, 9, 16], [0.1, 0.05, 0.02, 0.01], [0.05, -0.03, 0.01, 0.004])
    assert not effective_rhs(real)[0].any()

    r, s = 0.3, 0.2
    hand = EffectiveState([1, 4], [r, s], [r, 1j * s])
    sd, _ = effective_rhs(hand)
    assert sd[1] == pytest.approx(3 / 8 * r * r * s, rel=1e-14)
    assert sd[0] == pytest.approx(-3 / 4 * r * r * s, rel=1e-14)
    assert 1 * sd[0] + 2 * sd[1] == pytest.approx(0, abs=1e-16)


def test_diagnostics_examples():
    s = EffectiveState([1, 4], [1.0, 1.0], [0.5, 0.5j])
    t = triple_diagnostics(s, (1, 1, 4))
    assert (t.omega, t.Omega) == (-2.0, 6.0)
    assert t.theta == t.Z.imag
    off = EffectiveState([1, 4], [1.0, 1.0], [0.0, 0.5j])
    t = triple_diagnostics(off, (1, 1, 4))
    assert t.Z == 0 and t.theta == 0
    with pytest.raises(KeyError):
        triple_diagnostics(s, (1, 4, 9))


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_diagnostic_bounds(seed):
    rng = np.random.default_rng(seed)
    s = _random_state(rng, [1, 4, 9, 16, 25])
    for tri in s.triples.keys:
        t = triple_diagnostics(s, tuple(tri))
        assert abs(t.omega) <= t.Omega
        i = np.searchsorted(s.keys, tri)
        assert abs(t.Z) <= np.prod(s.S[i]) * (1 + 1e-12)


@given(st.integers(0, 2**32 - 1), st.sampled_from(["full-P", "zero-P"]))
@settings(max_examples=40, deadline=None)
def test_conservation_identity(seed, closure):
    rng = np.random.default_rng(seed)
    keys = [1, 2, 4, 5, 8, 9, 10, 13, 16, 18] if seed % 2 else [1, 4, 9, 16, 25, 36, 49]
    s = _random_state(rng, keys, closure)
    sd, _ = effective_rhs(s)
    lam = s.radii
    assert abs(lam @ sd) <= 1e-14 * (lam @ np.abs(sd))


def test_nonresonant_margin_of_power_decay(lat):
    idx = lat(1, 64)
    data = make_nonresonant("power-decay", idx, 0.05, sigma=3)
    s = EffectiveState.from_pair(full_chain("inverse", data.state))
    for tri in s.triples.keys:
        t = triple_diagnostics(s, tuple(tri))
        assert abs(t.omega) >= t.Omega / 3


def test_single_shell_rotation():
    s0 = EffectiveState([9], [0.02], [0.01 + 0.005j], "zero-P")
    T = 3.7
    tr = integrate_effective(s0, 1e-3, T)
    assert np.all(tr.S[:, 0] == s0.S[0])
    assert np.max(np.abs(np.abs(tr.B[:, 0]) - abs(s0.B[0]))) <= 1e-15
    expect = s0.B[0] * np.exp(-2j * (3 + 0.25 * 9 * 0.02) * T)
    assert abs(tr.B[-1, 0] - expect) <= 1e-12 * abs(expect)

    full = EffectiveState([9], [0.02], [0.01 + 0.005j], "full-P")
    tr = integrate_effective(full, 1e-3, T)
    assert np.all(tr.S[:, 0] == full.S[0])


def test_rotframe_invariants():
    rng = np.random.default_rng(7)
    s = _random_state(rng, [1, 2, 4, 5, 8, 9, 10, 13], size=0.2, zero=(5, 10))
    tr = integrate_effective(s, 1e-2, 50.0, stride=50)
    lam = s.radii
    I = tr.S @ lam
    assert np.max(np.abs(I - I[0])) <= 1e-12 * I[0]
    assert np.max(np.abs(np.abs(tr.B) - np.abs(s.B))) <= 1e-12 * np.max(np.abs(s.B))
    dead = np.isin(s.keys, [5, 10])
    assert not tr.S[:, dead].any() and not tr.B[:, dead].any()


def test_rk4_agrees_and_is_guarded():
    rng = np.random.default_rng(3)
    s = _random_state(rng, [1, 4, 9, 16], size=0.3)
    dt = max_rk4_dt(s)
    with pytest.raises(CFLViolation):
        integrate_effective(s, 2 * dt, 1.0, scheme="rk4")
    a = integrate_effective(s, dt / 4, 2.0, scheme="rk4")
    b = integrate_effective(s, dt / 4, 2.0, scheme="rotframe")
    assert np.max(np.abs(a.S[-1] - b.S[-1])) <= 1e-6 * np.max(s.S)
    assert np.max(np.abs(a.B[-1] - b.B[-1])) <= 1e-5 * np.max(np.abs(s.B))


def test_negative_superaction_aborts():
    s = EffectiveState([1, 4], [1e-6, 1.0], [1.0, 1j])
    with pytest.raises(NegativeSuperaction) as err:
        integrate_effective(s, 0.01, 1.0)
    assert err.value.step == 1 and err.value.value < 0


def test_z_phase_law():
    rng = np.random.default_rng(11)
    for closure in ("full-P", "zero-P"):
        s = _random_state(rng, [1, 4, 9], closure=closure, size=0.3)
        d0 = triple_diagnostics(s, (1, 4, 9))
        h = 1e-3
        tr = integrate_effective(s, 1e-5, h)
        d1 = triple_diagnostics(tr.state(len(tr) - 1), (1, 4, 9))
        rate = np.angle(d1.Z / d0.Z) / h
        expect = -(1 + s.calP()) * d0.omega / 2
        assert rate == pytest.approx(expect, rel=1e-2)


def test_growth_report_examples():
    s = EffectiveState([1, 4, 9], [0.1, 0.05, 0.0], [0.1, 0.05, 0.0])  # real B: constant S
    rep = growth_report(integrate_effective(s, 0.01, 1.0))
    assert rep.max_growth == 0 and not rep.growth.any()
    assert rep.gamma0 == [9] and rep.keys.tolist() == [1, 4]
    # (1,4,9) touches Gamma_0; the live (1,1,4) is exactly resonant here
    assert rep.worst_triple == (1, 1, 4) and rep.worst_margin == 0

    rep = growth_report(integrate_effective(EffectiveState([4], [0.1], [0.05j]), 0.01, 1.0))
    assert rep.max_growth == 0 and rep.worst_margin is None
    with pytest.raises(ValueError):
        growth_report(integrate_effective(s, 0.01, 0.0))


def test_growth_report_margin():
    s = EffectiveState([1, 4], [1.0, 1.0], [0.5, 0.5j])
    rep = growth_report(integrate_effective(s, 1e-3, 0.01))
    assert rep.worst_triple == (1, 1, 4)
    assert rep.worst_margin == pytest.approx(1 / 3, rel=1e-2)


def test_csv_outputs(tmp_path):
    s = EffectiveState([1, 4], [0.1, 0.05], [0.05, 0.02j])
    tr = integrate_effective(s, 0.01, 0.1, stride=5)
    with tr.write_csv(tmp_path / "e.csv").open() as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "P", "S_1", "S_4", "absB_1", "absB_4", "argB_1", "argB_4"]
    assert len(rows) == 1 + len(tr) == 4
    with tr.write_margin_csv(tmp_path / "m.csv").open() as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "n_a", "n_b", "n_l", "omega", "Omega", "theta"]
    assert rows[1][1:4] == ["1", "1", "4"]


def test_from_pair_matches_oracle_sdot(lat):
    rng = np.random.default_rng(5)
    for d, n_max in ((1, 16), (2, 5)):
        idx = lat(d, n_max)
        D = Dense(idx.spec.points)
        for _ in range(3):
            p = random_pair(idx, rng)
            u, v = p.arrays()
            parts = dense_sdot_by_degree(D, u, v, calP=0.2)
            s = EffectiveState.from_pair(p)
            sd, _ = effective_rhs(s)
            ref = np.array([parts[5][0][int(n)] for n in s.keys])
            assert np.max(np.abs(ref.imag)) <= 1e-14 * np.max(np.abs(ref))
            assert np.max(np.abs(sd - ref.real)) <= 1e-12 * np.max(np.abs(ref))
            for deg in (1, 3):
                vals, scale = parts[deg]
                assert all(abs(vals[n]) <= 1e-14 * scale[n] for n in vals)


def test_bad_state():
    with pytest.raises(ValueError):
        EffectiveState([4, 1], [0.1, 0.1], [0, 0])
    with pytest.raises(ValueError):
        EffectiveState([1], [0.1], [0], closure="half-P")
