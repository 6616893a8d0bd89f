"""Nonresonance conditions on shell profiles and data that satisfy them.

A profile is a map  shell key n -> value  (U_lambda, or S_lambda).  Values
may be Fractions, in which case every comparison below is exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from .constants import M1
from .lattice import ShellIndex, TripleSet, resonant_triples, triples_for_keys
from .spectral import PhysicalState, data_norm, synth_from_targets, u_lambda

KINDS = ("decreasing", "power-decay", "sequential", "odd-support", "primes-pattern")


class Infeasible(ValueError):
    pass


@dataclass
class NonresReport:
    passed: bool
    c0: object
    form: str
    worst_margin: object  # None when no triple lies in Gamma_1
    worst_triple: tuple | None
    violations: list = field(default_factory=list)
    checked: int = 0
    tau: float | None = None

    def as_dict(self) -> dict:
        def num(x):
            return None if x is None else (str(x) if isinstance(x, Fraction) else float(x))

        return {
            "passed": self.passed,
            "c0": num(self.c0),
            "form": self.form,
            "worst_margin": num(self.worst_margin),
            "worst_triple": None if self.worst_triple is None else list(self.worst_triple),
            "violations": [list(v) for v in self.violations],
            "checked": self.checked,
            "tau": self.tau,
        }


def _check_c0(c0):
    if not (0 < c0 <= 1):
        raise ValueError(f"c0 must lie in (0, 1], got {c0}")


def _triples_of(triples) -> list:
    if isinstance(triples, TripleSet):
        return [tuple(int(x) for x in row) for row in triples.keys]
    return [tuple(int(x) for x in t) for t in triples]


def _exact(x):
    # ints stay exact; floats (including numpy scalars) stay floats
    return Fraction(x) if isinstance(x, (int, np.integer)) and not isinstance(x, bool) else x


def _scaled(values: dict, form: str) -> dict:
    if form == "U-form":
        return {n: _exact(val) for n, val in values.items()}
    if form == "S-form":
        return {n: int(n) * _exact(val) for n, val in values.items()}  # lambda^2 = n exactly
    raise ValueError("form must be 'U-form' or 'S-form'")


def check_nonres(values: dict, triples, c0, form: str = "U-form") -> NonresReport:
    """|x_a + x_b - x_l| >= c0 (x_a + x_b + x_l) on every triple inside Gamma_1."""
    _check_c0(c0)
    x = _scaled(values, form)
    worst, worst_t, bad, checked = None, None, [], 0
    for t in _triples_of(triples):
        xa, xb, xl = (x.get(n, 0) for n in t)
        if not (xa > 0 and xb > 0 and xl > 0):
            continue  # touches Gamma_0
        checked += 1
        margin = abs(xa + xb - xl) / (xa + xb + xl)
        if worst is None or margin < worst:
            worst, worst_t = margin, t
        if margin < c0:
            bad.append(t)
    return NonresReport(not bad, c0, form, worst, worst_t, bad, checked)


def check_melnikov(values: dict, triples, c0, tau: float, form: str = "U-form") -> NonresReport:
    """|x_a + x_b - x_l| >= c0 / min(a, b, l)^tau on every triple inside Gamma_1.

    The reported worst margin is the largest c0 that would pass.
    """
    if not c0 > 0 or not tau > 0:
        raise ValueError("need c0 > 0 and tau > 0")
    x = _scaled(values, form)
    worst, worst_t, bad, checked = None, None, [], 0
    for t in _triples_of(triples):
        xa, xb, xl = (x.get(n, 0) for n in t)
        if not (xa > 0 and xb > 0 and xl > 0):
            continue
        checked += 1
        rmin = math.sqrt(min(t))
        margin = float(abs(xa + xb - xl)) * rmin**tau
        if worst is None or margin < worst:
            worst, worst_t = margin, t
        if margin < c0:
            bad.append(t)
    return NonresReport(not bad, c0, form, worst, worst_t, bad, checked, tau)


# --- constructions -----------------------------------------------------------


@dataclass
class Certificate:
    kind: str
    c0: object  # the constant certified (exact when possible)
    worst_margin: object  # measured on the exact profile
    triples: int  # number of Gamma_1 triples
    profile: dict  # shell key -> U value (exact)
    verified: bool
    details: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        def num(x):
            return None if x is None else (str(x) if isinstance(x, Fraction) else float(x))

        return {
            "kind": self.kind,
            "c0": num(self.c0),
            "c0_float": None if self.c0 is None else float(self.c0),
            "worst_margin": num(self.worst_margin),
            "triples": self.triples,
            "verified": self.verified,
            "profile": {str(k): num(v) for k, v in self.profile.items()},
            **self.details,
        }


class CertifiedData(NamedTuple):
    state: PhysicalState
    certificate: Certificate


def _power(n: int, sigma) -> object:
    """n^{-sigma}, exact when sigma is an integer."""
    if float(sigma).is_integer():
        return Fraction(1, n ** int(sigma))
    return float(n) ** (-float(sigma))


def sequential_profile(keys, c0, policy: str = "lower", start=Fraction(1)) -> tuple[dict, dict]:
    """Greedy choice of sigma_lambda avoiding the open intervals I_ab.

    Shells are processed by increasing key.  With theta1 = (1-c0)/(1+c0) and
    theta2 = (1+c0)/(1-c0), the forbidden set for lambda lies in (x1, x2),
    x1 = theta1 min(s_a + s_b), x2 = theta2 max(s_a + s_b); the lower policy
    picks x1/2, the upper one 2 x2, unconstrained shells get `start`.
    """
    c0 = Fraction(c0)
    if not 0 < c0 < 1:
        raise ValueError("sequential construction needs 0 < c0 < 1")
    th1, th2 = (1 - c0) / (1 + c0), (1 + c0) / (1 - c0)
    keys = sorted(int(n) for n in keys)
    trip = resonant_from_keys(keys)
    feeding: dict[int, list] = {}
    for a, b, l in trip:
        feeding.setdefault(l, []).append((a, b))
    sigma: dict[int, Fraction] = {}
    intervals: dict[int, list] = {}
    for n in keys:
        sums = [sigma[a] + sigma[b] for a, b in feeding.get(n, [])]
        if not sums:
            sigma[n] = Fraction(start)
            continue
        intervals[n] = [(th1 * s, th2 * s) for s in sums]
        x1, x2 = th1 * min(sums), th2 * max(sums)
        sigma[n] = x1 / 2 if policy == "lower" else 2 * x2
    return sigma, {"theta1": th1, "theta2": th2, "intervals": intervals}


def resonant_from_keys(keys) -> list:
    return [tuple(int(x) for x in row) for row in triples_for_keys(np.asarray(sorted(keys))).keys]


def _profile(kind: str, index: ShellIndex, sigma, c0) -> tuple[dict, object, dict]:
    keys = [int(n) for n in index.keys]
    details: dict = {}
    if kind == "decreasing":
        return {n: Fraction(1, n) for n in keys}, Fraction(1, 3), details
    if kind == "power-decay":
        if not sigma > M1(index.d):
            raise Infeasible(f"power decay needs sigma > m1 = {M1(index.d)}, got {sigma}")
        return {n: _power(n, sigma) for n in keys}, Fraction(1, 3), details
    if kind == "sequential":
        prof, info = sequential_profile(keys, c0)
        details = {"theta1": str(info["theta1"]), "theta2": str(info["theta2"])}
        return prof, Fraction(c0), details
    if kind == "odd-support":
        sup = [n for n, m, p in zip(keys, index.classes_m, index.classes_p) if p == 1 and m % 2 == 1]
    elif kind == "primes-pattern":
        sup = [n for n, m in zip(keys, index.classes_m) if m % 2 == 1]
    else:
        raise ValueError(f"unknown kind {kind!r}; expected one of {KINDS}")
    if not sup:
        raise Infeasible(f"{kind} has no admissible shell on this lattice")
    return {n: _power(n, sigma) for n in sup}, Fraction(1), details


def make_nonresonant(kind: str, index: ShellIndex, eps: float, sigma=3, c0=Fraction(1, 9),
                     phase_policy: str = "zero", seed=None) -> CertifiedData:
    """Data with ||a||_{m1+1/2} + ||b||_{m1-1/2} = eps and a verified certificate.

    The profile is realized with b = 0.  The certificate is checked twice:
    exactly on the rational profile, and in floating point on the realized
    state (with a 1e-12 relative allowance for roundoff).
    """
    prof, cert_c0, details = _profile(kind, index, sigma, c0)
    trip = resonant_triples(index, support=[n for n, v in prof.items() if v > 0])
    exact = check_nonres(prof, trip, cert_c0)
    unit = synth_from_targets({n: float(v) for n, v in prof.items()}, "U", index, phase_policy, seed)
    nrm = data_norm(unit, M1(index.d))
    state = PhysicalState(unit.a * (eps / nrm), unit.b * (eps / nrm)) if eps > 0 else unit
    realized = check_nonres({n: v for n, v in u_lambda(state).items() if v > 0}, trip,
                            float(cert_c0) * (1 - 1e-12))
    verified = exact.passed and realized.passed
    if not verified:
        raise Infeasible(f"{kind}: constructed profile fails its own certificate")
    cert = Certificate(kind, cert_c0, exact.worst_margin, exact.checked, prof, verified,
                       {**details, "eps": eps, "realized_worst_margin": realized.worst_margin})
    return CertifiedData(state, cert)


def _exact_sqrt(x):
    if isinstance(x, Fraction) and x >= 0:
        rn, rd = math.isqrt(x.numerator), math.isqrt(x.denominator)
        if rn * rn == x.numerator and rd * rd == x.denominator:
            return Fraction(rn, rd)
    return math.sqrt(x)


def _profile_of(obj) -> dict:
    if isinstance(obj, CertifiedData):
        obj = obj.state
    if isinstance(obj, PhysicalState):
        return u_lambda(obj)
    return dict(obj)


class PerturbationMargin(NamedTuple):
    mu: object
    c0_new: object
    shell: int | None  # a shell where domination fails, if any


def perturbation_margin(base, pert, c0=None) -> PerturbationMargin:
    """Smallest mu with U(pert) <= mu^2 U(base) on every shell, and c0 - 4 mu.

    `base` is a CertifiedData (its certificate supplies c0) or a state/profile
    together with an explicit c0.  mu is infinite, and the offending shell is
    reported, when pert carries data on a shell where base has none.
    """
    if c0 is None:
        if not isinstance(base, CertifiedData):
            raise ValueError("base has no certificate: pass c0 explicitly")
        c0 = base.certificate.c0
    ub, up = _profile_of(base), _profile_of(pert)
    mu2 = Fraction(0)
    for n, val in up.items():
        if val <= 0:
            continue
        b = _exact(ub.get(n, 0))
        if b <= 0:
            return PerturbationMargin(math.inf, 0, n)
        r = _exact(val) / b
        if r > mu2:
            mu2 = r
    mu = _exact_sqrt(mu2)
    c_new = c0 - 4 * mu
    return PerturbationMargin(mu, c_new if c_new > 0 else 0 * c_new, None)
