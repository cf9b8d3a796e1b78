#!/usr/bin/env python3
"""Draw section portraits and entropy-curve families from an artifact dir.

Documentation-level helper, not part of the package:

    python scripts/plot_results.py runs/regular --out figs/
"""

import argparse
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def load_table(path):
    return np.loadtxt(path)


def plot_poincare(path, out):
    data = load_table(path)
    if data.size == 0:
        return
    fig, ax = plt.subplots(figsize=(5, 5))
    for idx in np.unique(data[:, 0]):
        rows = data[data[:, 0] == idx]
        ax.plot(rows[:, 2], rows[:, 3], ".", ms=1.2)
    ax.set_xlabel("q1")
    ax.set_ylabel("p1")
    ax.set_title(path.parent.name)
    fig.tight_layout()
    fig.savefig(out / "poincare.png", dpi=160)
    plt.close(fig)


def plot_curves(paths, label_key, out, name):
    if not paths:
        return
    fig, ax = plt.subplots(figsize=(6, 4))
    for path in sorted(paths):
        header = {}
        for line in path.read_text().splitlines():
            if line.startswith("#") and "=" in line:
                k, _, v = line[1:].partition("=")
                header[k.strip()] = v.strip()
        data = load_table(path)
        ax.plot(data[:, 0], data[:, 1], lw=1.0,
                label=f"{label_key}={float(header.get(label_key, 'nan')):g}")
    ax.set_xlabel("t")
    ax.set_ylabel("S")
    ax.set_xscale("log")
    ax.legend(fontsize=8)
    ax.set_title(f"{name} ({paths[0].parent.name})")
    fig.tight_layout()
    fig.savefig(out / f"{name}.png", dpi=160)
    plt.close(fig)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("artifacts", type=Path)
    ap.add_argument("--out", type=Path, default=Path("figs"))
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    poincare = args.artifacts / "poincare.txt"
    if poincare.exists():
        plot_poincare(poincare, args.out)
    plot_curves([p for p in args.artifacts.glob("classical_delta_*.txt")
                 if not p.name.endswith("_seedcheck.txt")],
                "delta", args.out, "classical_entropy")
    plot_curves(list(args.artifacts.glob("quantum_hbar_*.txt")),
                "hbar", args.out, "quantum_entropy")
    print(f"figures in {args.out}")


if __name__ == "__main__":
    main()
