#!/usr/bin/env python3
"""Plot the CSV tables written by `wtdp analyze` and `wtdp simulate`.

The last sweep axis goes on the x axis; every other axis combination becomes
one curve. Simulated metrics get 1.96-stderr error bars.

    python3 scripts/plot.py results/        # every *.csv in the directory
    python3 scripts/plot.py a.csv b.csv -o plots/
"""

import argparse
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

ANALYSIS = ["q_star", "e_t_star", "e_t_suc_star"]
SIMULATION = [
    "nd_success",
    "nd_mean_time",
    "nd_ttfs_seq",
    "inaug_success",
    "inaug_mean_time",
    "inaug_ttfs_seq",
]


def axes_of(df):
    stop = "q_star" if "q_star" in df.columns else "trials"
    return list(df.columns[: df.columns.get_loc(stop)])


def plot_table(path, out_dir):
    df = pd.read_csv(path)
    axes = axes_of(df)
    if not axes:
        return []
    x, groups = axes[-1], axes[:-1]
    metrics = [m for m in ANALYSIS + SIMULATION if m in df.columns and df[m].notna().any()]
    written = []
    for metric in metrics:
        fig, ax = plt.subplots(figsize=(6, 4))
        parts = df.groupby(groups) if groups else [((), df)]
        for key, part in parts:
            key = key if isinstance(key, tuple) else (key,)
            label = ", ".join(f"{g}={v:g}" for g, v in zip(groups, key)) or None
            part = part.sort_values(x)
            err = part.get(f"{metric}_se")
            ax.errorbar(
                part[x],
                part[metric],
                yerr=None if err is None else 1.96 * err,
                marker="o",
                ms=3,
                capsize=2,
                label=label,
            )
        ax.set_xlabel(x)
        ax.set_ylabel(metric)
        ax.grid(alpha=0.3)
        if groups:
            ax.legend(fontsize=7)
        fig.tight_layout()
        target = out_dir / f"{path.stem}_{metric}.png"
        fig.savefig(target, dpi=120)
        plt.close(fig)
        written.append(target)
    return written


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("inputs", nargs="+", type=Path, help="CSV files or directories")
    ap.add_argument("-o", "--out", type=Path, help="output directory (default: next to each CSV)")
    args = ap.parse_args()

    paths = []
    for p in args.inputs:
        paths.extend(sorted(p.glob("*.csv")) if p.is_dir() else [p])
    for path in paths:
        out_dir = args.out or path.parent
        out_dir.mkdir(parents=True, exist_ok=True)
        for target in plot_table(path, out_dir):
            print(target)


if __name__ == "__main__":
    main()
