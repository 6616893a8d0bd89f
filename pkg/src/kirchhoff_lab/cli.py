"""Command line entry point.

    kirchhoff-lab [--config PATH] [--out DIR] [--seed N] [--threads N] VERB ...

Exit codes: 0 success, 2 configuration or input error, 3 certification
failure, 4 numeric abort.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .constants import M1
from .effective import EffectiveState, NegativeSuperaction, growth_report, integrate_effective
from .experiments import CertificationError, ConfigError, load_config, run_experiment
from .kirchhoff import CFLViolation, NumericAbort, default_dt, integrate_physical
from .lattice import build_lattice, resonant_triples
from .nonres import Infeasible, check_melnikov, check_nonres, make_nonresonant
from .normal_form import StageError, full_chain
from .normal_form.linear import stage1_arrays, stage2_arrays
from .normal_form.phi3 import phi3_arrays, scalars_from_q, q_functional
from .normal_form.phi4 import phi4_forward_arrays, phi4_inverse_arrays
from .normal_form.phi5 import phi5_forward_arrays, phi5_inverse_arrays
from .numerics import FixedPointError
from .spectral import ConjugatePair, PhysicalState, load_state, save_state, u_lambda

EXIT_OK, EXIT_CONFIG, EXIT_CERT, EXIT_NUMERIC = 0, 2, 3, 4

# stage -> (forward, inverse), each (idx, x, y) -> (x, y); forward points to the physical side
STAGES = {
    1: (lambda i, x, y: stage1_arrays(i, x, y, "forward"), lambda i, x, y: stage1_arrays(i, x, y, "inverse")),
    2: (lambda i, x, y: stage2_arrays(x, y, "forward"), lambda i, x, y: stage2_arrays(x, y, "inverse")),
    3: (lambda i, x, y: phi3_arrays(i, x, y, "forward"), lambda i, x, y: phi3_arrays(i, x, y, "inverse")),
    4: (phi4_forward_arrays, phi4_inverse_arrays),
    5: (phi5_forward_arrays, phi5_inverse_arrays),
}


def _common(parser, suppress: bool):
    d = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", metavar="PATH", default=d, help="experiment config file")
    parser.add_argument("--out", metavar="DIR", default=d, help="output directory")
    parser.add_argument("--seed", type=int, metavar="N", default=d, help="override run.seed")
    parser.add_argument("--threads", type=int, metavar="N", default=d, help="worker processes")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kirchhoff-lab", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    _common(p, suppress=False)
    sub = p.add_subparsers(dest="verb", required=True)

    s = sub.add_parser("simulate", help="integrate the physical system")
    _common(s, suppress=True)
    s.add_argument("--state", help="physical state file (otherwise config-driven)")
    s.add_argument("--T", type=float, help="horizon for --state runs")
    s.add_argument("--dt", type=float, help="step (default: half the stability guard)")
    s.add_argument("--scheme", choices=("leapfrog", "rk4"), default="leapfrog")
    s.add_argument("--stride", type=int, default=1)

    t = sub.add_parser("transform", help="apply one stage or the full chain to a state file")
    _common(t, suppress=True)
    t.add_argument("state")
    t.add_argument("--stage", choices=("1", "2", "3", "4", "5", "full"), default="full")
    t.add_argument("--direction", choices=("forward", "inverse"), required=True)

    e = sub.add_parser("effective", help="integrate the effective shell equations")
    _common(e, suppress=True)
    e.add_argument("--state", help="state file: pair (normalized) or physical (mapped through the chain)")
    e.add_argument("--T", type=float)
    e.add_argument("--dt", type=float)
    e.add_argument("--scheme", choices=("rotframe", "rk4"), default="rotframe")
    e.add_argument("--stride", type=int, default=1)
    e.add_argument("--closure", choices=("full-P", "zero-P"), default="full-P")

    n = sub.add_parser("nonres", help="check or construct nonresonant data")
    _common(n, suppress=True)
    nsub = n.add_subparsers(dest="action", required=True)
    c = nsub.add_parser("check", help="check a state file, print a JSON report")
    _common(c, suppress=True)
    c.add_argument("state")
    c.add_argument("--c0", default="1/9")
    c.add_argument("--tau", type=float, help="use the Melnikov-type condition with this exponent")
    m = nsub.add_parser("make", help="construct certified data")
    _common(m, suppress=True)
    m.add_argument("--kind", default="power-decay",
                   choices=("decreasing", "power-decay", "sequential", "odd-support", "primes-pattern"))
    m.add_argument("--d", type=int, default=1)
    m.add_argument("--n-max", type=int, default=64)
    m.add_argument("--eps", type=float, default=0.05)
    m.add_argument("--sigma", type=float, default=3.0)
    m.add_argument("--c0", default="1/9")
    m.add_argument("--phases", choices=("zero", "seeded-random"), default="zero")

    x = sub.add_parser("experiment", help="run a config-driven experiment")
    _common(x, suppress=True)
    return p


def _out(args) -> Path:
    out = Path(args.out or "out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, obj) -> Path:
    path.write_text(json.dumps(obj, indent=2, default=str) + "\n")
    return path


def _manifest(out: Path, args, t0: float, outputs: list, extra: dict | None = None):
    src = {}
    state = getattr(args, "state", None)
    if state:
        src["state_sha256"] = hashlib.sha256(Path(state).read_bytes()).hexdigest()
    _write_json(out / "manifest.json", {
        "verb": args.verb, "argv": sys.argv[1:], "seed": args.seed, **src,
        "versions": {"kirchhoff_lab": __version__, "numpy": np.__version__},
        "wall_time_s": time.perf_counter() - t0, "outputs": outputs, **(extra or {}),
    })


def _config_run(args, dynamics: str) -> int:
    if not args.config:
        raise ConfigError(f"{args.verb} needs --state or --config")
    over = {"run.dynamics": dynamics}
    if args.seed is not None:
        over["run.seed"] = args.seed
    cfg = load_config(args.config, over)
    summary = run_experiment(cfg, _out(args), threads=args.threads or 1)
    print(json.dumps({k: v for k, v in summary.items() if k != "runs"}, indent=2))
    return EXIT_OK


def cmd_simulate(args) -> int:
    if not args.state:
        return _config_run(args, "physical")
    t0 = time.perf_counter()
    st = _load(args.state)
    if not isinstance(st, PhysicalState):
        raise ConfigError("simulate needs a physical state file")
    if args.T is None:
        raise ConfigError("--T is required with --state")
    tr = integrate_physical(st, args.dt or default_dt(st), args.T, args.scheme, args.stride)
    out = _out(args)
    tr.write_csv(out / "physical.csv")
    from .plotting import plot_physical_csv

    plot_physical_csv(out / "physical.csv", out / "physical.png")
    H = tr.energy
    _manifest(out, args, t0, ["physical.csv", "physical.png"],
              {"dt": tr.dt, "energy_drift": float(np.max(np.abs(H - H[0])) / H[0]) if H[0] else 0.0})
    return EXIT_OK


def cmd_effective(args) -> int:
    if not args.state:
        return _config_run(args, "effective")
    t0 = time.perf_counter()
    st = _load(args.state)
    pair = full_chain("inverse", st) if isinstance(st, PhysicalState) else st
    if not isinstance(pair, ConjugatePair):
        raise ConfigError("effective needs a pair or physical state file")
    if args.T is None:
        raise ConfigError("--T is required with --state")
    es = EffectiveState.from_pair(pair, closure=args.closure)
    dt = args.dt or args.T / 10000 or 1.0
    tr = integrate_effective(es, dt, args.T, args.scheme, args.stride)
    out = _out(args)
    tr.write_csv(out / "effective.csv")
    tr.write_margin_csv(out / "margins_effective.csv")
    from .plotting import plot_effective_csv

    plot_effective_csv(out / "effective.csv", out / "effective.png")
    rep = growth_report(tr) if len(tr) > 1 else None
    _manifest(out, args, t0, ["effective.csv", "margins_effective.csv", "effective.png"],
              {"dt": tr.dt, "growth": rep.as_dict() if rep else None})
    return EXIT_OK


def apply_transform(state, stage: str, direction: str):
    """Returns (output state, round-trip error, (eta, psi) scalars or None)."""
    fwd = direction == "forward"
    # real pairs enter stage 1 forward and stages 1, 2 (and the full chain) inverse
    want_real = (fwd and stage == "1") or (not fwd and stage in ("full", "1", "2"))
    if want_real != isinstance(state, PhysicalState):
        kind = "a physical (real) state" if want_real else "a conjugate pair"
        raise ConfigError(f"stage {stage} {direction} expects {kind}")
    idx = state.index
    x0, y0 = state.arrays()
    order = [5, 4, 3, 2, 1] if stage == "full" else [int(stage)]
    if direction == "inverse":
        order = order[::-1]
    x, y = x0, y0
    scalars = None
    for k in order:
        if k == 3 and fwd:
            scalars = scalars_from_q(q_functional(idx, x, y))
        try:
            x, y = STAGES[k][0 if fwd else 1](idx, x, y)
        except Exception as exc:
            raise StageError(k, direction, exc) from exc
        if k == 3 and not fwd:
            scalars = scalars_from_q(q_functional(idx, x, y))
    bx, by = x, y
    for k in order[::-1]:
        bx, by = STAGES[k][1 if fwd else 0](idx, bx, by)
    scale = max(float(np.max(np.abs(x0), initial=0)), float(np.max(np.abs(y0), initial=0)), 1e-300)
    err = max(float(np.max(np.abs(bx - x0), initial=0)), float(np.max(np.abs(by - y0), initial=0))) / scale
    real_out = (fwd and order[-1] in (1, 2)) or (not fwd and order[-1] == 1)
    out = PhysicalState.from_arrays(idx, x, y) if real_out else ConjugatePair.from_arrays(idx, x, y)
    return out, err, scalars


def cmd_transform(args) -> int:
    t0 = time.perf_counter()
    st = _load(args.state)
    res, err, sc = apply_transform(st, args.stage, args.direction)
    out = _out(args)
    save_state(res, out / "transformed.state")
    report = {"stage": args.stage, "direction": args.direction, "round_trip_error": err,
              "scalars": None if sc is None else {"Q": sc.Q, "P": sc.P, "rho": sc.rho, "calP": sc.calP}}
    _write_json(out / "transform.json", report)
    print(json.dumps(report, indent=2))
    _manifest(out, args, t0, ["transformed.state", "transform.json"])
    return EXIT_OK


def cmd_nonres(args) -> int:
    try:
        c0 = Fraction(args.c0)
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"bad --c0 {args.c0!r}") from None
    if args.action == "check":
        st = _load(args.state)
        idx = st.index
        if isinstance(st, PhysicalState):
            prof, form = u_lambda(st), "U-form"
        else:
            u, _ = st.arrays()
            prof, form = dict(zip(idx.keys.tolist(), idx.shell_sum(np.abs(u) ** 2).tolist())), "S-form"
        prof = {n: v for n, v in prof.items() if v > 0}
        trip = resonant_triples(idx, support=list(prof))
        if args.tau is not None:
            rep = check_melnikov(prof, trip, float(c0), args.tau, form)
        else:
            rep = check_nonres(prof, trip, float(c0), form)
        print(json.dumps(rep.as_dict(), indent=2))
        return EXIT_OK if rep.passed else EXIT_CERT
    _, idx = build_lattice(args.d, args.n_max)
    seed = args.seed if args.seed is not None else 0
    data = make_nonresonant(args.kind, idx, args.eps, sigma=args.sigma, c0=c0,
                            phase_policy=args.phases, seed=seed)
    if data.certificate.c0 < c0:
        raise CertificationError(f"certified c0 = {data.certificate.c0} below requested {c0}")
    out = _out(args)
    save_state(data.state, out / "data.state")
    cert = data.certificate.as_dict()
    cert.update(seed=seed, d=args.d, n_max=args.n_max, m1=M1(args.d))
    _write_json(out / "certificate.json", cert)
    print(json.dumps({"state": str(out / "data.state"), "c0": cert["c0"], "triples": cert["triples"]}))
    return EXIT_OK


def cmd_experiment(args) -> int:
    if not args.config:
        raise ConfigError("experiment needs --config")
    over = {"run.seed": args.seed} if args.seed is not None else None
    cfg = load_config(args.config, over)
    summary = run_experiment(cfg, _out(args), threads=args.threads or 1)
    print(json.dumps({k: v for k, v in summary.items() if k != "runs"}, indent=2))
    return EXIT_OK


def _load(path):
    try:
        return load_state(path)
    except (OSError, ValueError, KeyError, IndexError) as exc:
        raise ConfigError(f"cannot read state file {path}: {exc}") from None


COMMANDS = {"simulate": cmd_simulate, "transform": cmd_transform, "effective": cmd_effective,
            "nonres": cmd_nonres, "experiment": cmd_experiment}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.verb](args)
    except (CertificationError, Infeasible) as exc:
        print(f"certification failure: {exc}", file=sys.stderr)
        return EXIT_CERT
    except (NumericAbort, NegativeSuperaction, StageError, FixedPointError) as exc:
        print(f"numeric abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, CFLViolation, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
