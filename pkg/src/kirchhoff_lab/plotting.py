"""Figures written next to the CSV outputs (Agg backend, no display needed)."""
from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _read_csv(path) -> tuple[list, np.ndarray]:
    with Path(path).open() as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float).reshape(len(rows) - 1, len(rows[0]))


def plot_shell_growth(times, S, keys, path, title="") -> Path:
    """S_lambda(t)/S_lambda(0) - 1 for the populated shells (at most 12 drawn)."""
    S = np.asarray(S)
    pop = np.flatnonzero(S[0] > 0)[:12]
    fig, ax = plt.subplots(figsize=(6, 4))
    for i in pop:
        ax.plot(times, S[:, i] / S[0, i] - 1.0, lw=1, label=f"n={keys[i]}")
    ax.set_xlabel("t")
    ax.set_ylabel("S(t)/S(0) - 1")
    ax.set_title(title)
    if len(pop):
        ax.legend(fontsize=7, ncol=2)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return Path(path)


def plot_energy(times, H, path, title="") -> Path:
    H = np.asarray(H)
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(times, (H - H[0]) / (H[0] if H[0] else 1.0), lw=1)
    ax.set_xlabel("t")
    ax.set_ylabel("relative energy error")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return Path(path)


def plot_scaling(series: dict, path) -> Path:
    """Log-log plot of {label: [(eps, value), ...]}."""
    fig, ax = plt.subplots(figsize=(5, 4))
    for label, pts in series.items():
        e, q = zip(*sorted(pts))
        ax.loglog(e, q, "o-", label=label)
    ax.set_xlabel("eps")
    ax.set_ylabel("max_lambda |S(t)/S(0) - 1|")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return Path(path)


def plot_physical_csv(csv_path, png_path) -> Path:
    head, data = _read_csv(csv_path)
    return plot_energy(data[:, 0], data[:, head.index("H")], png_path, Path(csv_path).stem)


def plot_effective_csv(csv_path, png_path) -> Path:
    head, data = _read_csv(csv_path)
    cols = [i for i, h in enumerate(head) if h.startswith("S_")]
    keys = [int(head[i][2:]) for i in cols]
    return plot_shell_growth(data[:, 0], data[:, cols], keys, png_path, Path(csv_path).stem)


def plot_experiment(out, runs: list, summary: dict) -> list:
    """One PNG per trajectory CSV plus a scaling plot; returns file names."""
    out = Path(out)
    made = []
    for r in runs:
        for name in r["outputs"]:
            if not name.endswith(".csv") or name.startswith("margins_"):
                continue
            png = name[:-4] + ".png"
            if name.startswith("physical_"):
                plot_physical_csv(out / name, out / png)
            else:
                plot_effective_csv(out / name, out / png)
            made.append(png)
    series = {}
    for name in ("effective", "resonant"):
        pts = [(r["eps"], r[name]["growth"]["max_growth"]) for r in runs if name in r]
        pts = [p for p in pts if p[1] > 0]
        if len(pts) >= 2:
            series[name] = pts
    if series:
        plot_scaling(series, out / "scaling.png")
        made.append("scaling.png")
    return made
