"""Configuration-driven experiments with CSV, JSON and PNG outputs.

Config grammar: one `key = value` per line, `#` starts a comment, blank lines
ignored.  Keys carry a section prefix (lattice., data., run.); unknown keys
and malformed values are errors.  Lists are comma separated; rationals may
be written as p/q.
"""
from __future__ import annotations

import hashlib
import json
import math
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .constants import M1
from .effective import EffectiveState, growth_report, integrate_effective
from .kirchhoff import default_dt, integrate_physical
from .lattice import build_lattice
from .nonres import make_nonresonant
from .normal_form import full_chain


class ConfigError(ValueError):
    pass


class CertificationError(RuntimeError):
    pass


def _frac(s: str):
    return Fraction(s.strip())


def _floats(s: str):
    return [float(x) for x in s.split(",") if x.strip()]


def _bool(s: str):
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _choice(*opts):
    def parse(s: str):
        v = s.strip()
        if v not in opts:
            raise ValueError(f"expected one of {opts}, got {v!r}")
        return v

    return parse


def _opt_float(s: str):
    return None if s.strip().lower() in ("", "none", "auto") else float(s)


def _opt_int(s: str):
    return None if s.strip().lower() in ("", "none", "auto") else int(s)


# key -> (parser, default)
SCHEMA = {
    "lattice.d": (int, 1),
    "lattice.n_max": (int, 64),
    "data.kind": (_choice("decreasing", "power-decay", "sequential", "odd-support", "primes-pattern"),
                  "power-decay"),
    "data.sigma": (float, 3.0),
    "data.c0": (_frac, Fraction(1, 3)),
    "data.phases": (_choice("zero", "seeded-random"), "zero"),
    "data.eps": (_floats, [0.05]),
    "run.dynamics": (_choice("physical", "effective", "both"), "effective"),
    "run.experiment": (_choice("plain", "averaging", "lifespan-scaling"), "plain"),
    "run.horizon_A": (float, 1.0),
    "run.horizon_p": (int, 4),
    "run.T": (_opt_float, None),
    "run.dt": (_opt_float, None),
    "run.dt_effective": (_opt_float, None),
    "run.scheme": (_choice("leapfrog", "rk4"), "leapfrog"),
    "run.effective_scheme": (_choice("rotframe", "rk4"), "rotframe"),
    "run.snapshots": (int, 200),
    "run.stride": (_opt_int, None),
    "run.closure": (_choice("full-P", "zero-P"), "full-P"),
    "run.seed": (int, 0),
    "run.plots": (_bool, True),
}


@dataclass
class ExperimentConfig:
    values: dict
    text: str  # canonical form, hashed into the manifest

    def __getitem__(self, key):
        return self.values[key]

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.text.encode()).hexdigest()

    def horizon(self, eps: float) -> float:
        if self["run.T"] is not None:
            return self["run.T"]
        return self["run.horizon_A"] * float(self["data.c0"]) * eps ** (-self["run.horizon_p"])


def _canonical(values: dict) -> str:
    def fmt(v):
        if isinstance(v, list):
            return ", ".join(repr(x) for x in v)
        if isinstance(v, float):
            return repr(v)
        return str(v)

    return "\n".join(f"{k} = {fmt(values[k])}" for k in sorted(values)) + "\n"


def parse_config(text: str, overrides: dict | None = None) -> ExperimentConfig:
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, val = (x.strip() for x in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = val
    for key, val in (overrides or {}).items():
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}")
        raw[key] = str(val)
    values = {}
    for key, (parse, default) in SCHEMA.items():
        if key in raw:
            try:
                values[key] = parse(raw[key])
            except (ValueError, ZeroDivisionError) as exc:
                raise ConfigError(f"{key}: {exc}") from None
        else:
            values[key] = default
    _validate(values)
    return ExperimentConfig(values, _canonical(values))


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return parse_config(text, overrides)


def _validate(v: dict):
    eps = v["data.eps"]
    if not eps or any(e <= 0 for e in eps):
        raise ConfigError("data.eps must be a nonempty list of positive numbers")
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ConfigError("data.eps must be strictly decreasing")
    if v["run.horizon_p"] not in (0, 2, 4, 6):
        raise ConfigError("run.horizon_p must be 0, 2, 4 or 6")
    if v["lattice.d"] < 1 or v["lattice.n_max"] < 1:
        raise ConfigError("lattice.d and lattice.n_max must be >= 1")
    if not 0 < v["data.c0"] <= 1:
        raise ConfigError("data.c0 must lie in (0, 1]")
    if v["run.experiment"] == "lifespan-scaling" and len(eps) < 2:
        raise ConfigError("lifespan-scaling needs at least two values in data.eps")
    if v["run.experiment"] != "plain" and v["run.dynamics"] == "physical":
        raise ConfigError(f"{v['run.experiment']} runs the effective dynamics")
    if v["run.snapshots"] < 1:
        raise ConfigError("run.snapshots must be >= 1")


# --- runs ---------------------------------------------------------------------


def fit_scaling(series) -> tuple[float, float]:
    """Log-log least squares slope and its standard error (0 for two points)."""
    pts = [(float(e), float(q)) for e, q in series]
    if len(pts) < 2:
        raise ValueError("need at least two points")
    if any(e <= 0 or q <= 0 for e, q in pts):
        raise ValueError("fit_scaling needs positive values")
    x = np.log([e for e, _ in pts])
    y = np.log([q for _, q in pts])
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    width = 0.0
    if len(pts) > 2:
        resid = y - A @ coef
        s2 = float(resid @ resid) / (len(pts) - 2)
        width = math.sqrt(s2 / float(((x - x.mean()) ** 2).sum()))
    return float(coef[0]), width


def resonant_companion(state: EffectiveState, d: int = 1) -> EffectiveState:
    """Same size as `state`, tuned so that omega = 0 and theta is extremal on one triple.

    The first triple of populated shells gets S_l = (a^2 S_a + b^2 S_b) / l^2,
    B_a = S_a, B_b = S_b, B_l = i S_l; the whole profile is then rescaled to
    the original value of sum_l l^{2 m1} S_l.
    """
    S, B = state.S.copy(), state.B.astype(complex).copy()
    pop = S > 0
    live = [t for t in state.triples.pos if pop[t].all()]
    if not live:
        raise CertificationError("no populated resonant triple to tune")
    a, b, c = live[0]
    n = state.keys.astype(float)
    S[c] = (n[a] * S[a] + n[b] * S[b]) / n[c]
    B[a], B[b], B[c] = S[a], S[b], 1j * S[c]
    weight = n ** M1(d)
    scale = float(weight @ state.S) / float(weight @ S)
    return EffectiveState(state.keys, S * scale, B * scale, state.closure)


def _tag(eps: float) -> str:
    return f"eps{eps:g}"


def _stride(nsteps: int, cfg: ExperimentConfig) -> int:
    if cfg["run.stride"] is not None:
        return max(1, cfg["run.stride"])
    return max(1, nsteps // cfg["run.snapshots"])


def _slow_dt(state: EffectiveState) -> float:
    """1% of the fastest slow time scale 1/max(lambda^2 S)."""
    scale = float(np.max(state.keys * state.S)) * (1.0 + state.calP())
    return 0.01 / scale if scale > 0 else 1.0


def run_single(cfg: ExperimentConfig, eps: float, out: Path) -> dict:
    """One member of the epsilon grid; returns a JSON-able summary."""
    d, n_max = cfg["lattice.d"], cfg["lattice.n_max"]
    _, idx = build_lattice(d, n_max)
    seed = cfg["run.seed"]
    try:
        data = make_nonresonant(cfg["data.kind"], idx, eps, sigma=cfg["data.sigma"], c0=cfg["data.c0"],
                                phase_policy=cfg["data.phases"], seed=seed)
    except ValueError as exc:
        raise CertificationError(str(exc)) from exc
    cert = data.certificate
    if cert.c0 < cfg["data.c0"]:
        raise CertificationError(f"certified c0 = {cert.c0} is below the requested {cfg['data.c0']}")
    tag = _tag(eps)
    summary = {"eps": eps, "T": cfg.horizon(eps), "certificate": cert.as_dict(), "outputs": []}
    (out / f"certificate_{tag}.json").write_text(json.dumps(cert.as_dict(), indent=2) + "\n")
    summary["outputs"].append(f"certificate_{tag}.json")
    T = cfg.horizon(eps)

    if cfg["run.dynamics"] in ("physical", "both"):
        dt = cfg["run.dt"] or default_dt(data.state)
        nsteps = max(1, int(math.ceil(T / dt)))
        tr = integrate_physical(data.state, dt, T, cfg["run.scheme"], _stride(nsteps, cfg))
        tr.write_csv(out / f"physical_{tag}.csv")
        H = tr.energy
        U = tr.U
        pop = U[0] > 0
        summary["physical"] = {
            "dt": tr.dt,
            "energy_drift": float(np.max(np.abs(H - H[0])) / H[0]) if H[0] > 0 else 0.0,
            "max_U_change": float(np.max(np.abs(U[:, pop] / U[0, pop] - 1.0))) if pop.any() else 0.0,
        }
        summary["outputs"].append(f"physical_{tag}.csv")

    if cfg["run.dynamics"] in ("effective", "both"):
        pair = full_chain("inverse", data.state)
        st = EffectiveState.from_pair(pair, closure=cfg["run.closure"])
        runs = [("effective", st)]
        if cfg["run.experiment"] == "averaging":
            runs.append(("resonant", resonant_companion(st, d)))
        for name, s0 in runs:
            dt = cfg["run.dt_effective"] or _slow_dt(s0)
            nsteps = max(1, int(math.ceil(T / dt)))
            tr = integrate_effective(s0, dt, T, cfg["run.effective_scheme"], _stride(nsteps, cfg))
            tr.write_csv(out / f"{name}_{tag}.csv")
            tr.write_margin_csv(out / f"margins_{name}_{tag}.csv")
            rep = growth_report(tr)
            summary[name] = {"dt": tr.dt, "growth": rep.as_dict(),
                             "B_excess_max": float(np.max(tr.B_excess))}
            summary["outputs"] += [f"{name}_{tag}.csv", f"margins_{name}_{tag}.csv"]
    return summary


def _run_single_star(args):
    return run_single(*args)


def run_experiment(cfg: ExperimentConfig, out, threads: int = 1) -> dict:
    """Run every epsilon of the grid and write summary.json and manifest.json."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    jobs = [(cfg, eps, out) for eps in cfg["data.eps"]]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            runs = list(pool.map(_run_single_star, jobs))
    else:
        runs = [run_single(*j) for j in jobs]
    summary = {"runs": runs}
    if len(runs) >= 2:
        for name in ("effective", "resonant"):
            pts = [(r["eps"], r[name]["growth"]["max_growth"]) for r in runs if name in r]
            if len(pts) >= 2 and all(q > 0 for _, q in pts):
                slope, width = fit_scaling(pts)
                summary[f"{name}_growth_exponent"] = {"exponent": slope, "width": width}
    outputs = [o for r in runs for o in r["outputs"]]
    if cfg["run.plots"]:
        from .plotting import plot_experiment

        outputs += plot_experiment(out, runs, summary)
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    outputs.append("summary.json")
    manifest = {
        "config_sha256": cfg.digest,
        "config": cfg.text,
        "seed": cfg["run.seed"],
        "versions": {"kirchhoff_lab": __version__, "numpy": np.__version__,
                     "python": platform.python_version()},
        "wall_time_s": time.perf_counter() - t0,
        "outputs": outputs,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return summary
