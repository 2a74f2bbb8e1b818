#!/usr/bin/env python3
"""Render a run directory's plot-data CSVs to PNGs: per-year directional
accuracy by model, ensemble weight paths by window, the threshold scatter of
realized returns when the ensemble predicted a large gain, and yearly
sentiment-slope estimates."""

import argparse
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd


def plot_da_by_year(run: Path, out: Path) -> None:
    path = run / "plotdata" / "da_by_year.csv"
    if not path.exists():
        return
    frame = pd.read_csv(path)
    frame = frame[frame["scope"] == "all_stocks"]
    fig, ax = plt.subplots(figsize=(8, 4.5))
    for model, g in frame.groupby("model_id"):
        style = {"linewidth": 2.5} if model == "ensemble" else {"alpha": 0.7}
        ax.plot(g["period"].astype(int), g["da"], marker="o", label=model, **style)
    ax.set_xlabel("year")
    ax.set_ylabel("directional accuracy")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out / "da_by_year.png", dpi=150)
    plt.close(fig)


def plot_weight_paths(run: Path, out: Path) -> None:
    path = run / "ensemble_weights.csv"
    if not path.exists():
        return
    frame = pd.read_csv(path, parse_dates=["window_end"])
    frame = frame[frame["scope"] == "pooled"] if (frame["scope"] == "pooled").any() else frame
    fig, ax = plt.subplots(figsize=(8, 4.5))
    for model, g in frame.groupby("model_id"):
        ax.plot(g["window_end"], g["weight"], marker="s", label=model)
    ax.set_xlabel("fit window end")
    ax.set_ylabel("NNLS weight")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out / "weight_paths.png", dpi=150)
    plt.close(fig)


def plot_threshold_scatter(run: Path, out: Path) -> None:
    path = run / "plotdata" / "threshold_scatter.csv"
    if not path.exists():
        return
    frame = pd.read_csv(path, parse_dates=["week_end"])
    if frame.empty:
        return
    fig, ax = plt.subplots(figsize=(8, 4.5))
    ax.scatter(frame["week_end"], frame["realized"], s=8, alpha=0.5)
    ax.axhline(frame["realized"].mean(), color="red", linestyle="--",
               label=f"mean realized {frame['realized'].mean():+.2%}")
    ax.set_xlabel("week")
    ax.set_ylabel("realized return given a large predicted gain")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out / "threshold_scatter.png", dpi=150)
    plt.close(fig)


def plot_sentiment_slopes(run: Path, out: Path) -> None:
    path = run / "plotdata" / "sentiment_slopes_by_year.csv"
    if not path.exists():
        return
    frame = pd.read_csv(path)
    if frame.empty:
        return
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.bar(frame["group"].astype(int), frame["slope"])
    ax.axhline(0.0, color="black", linewidth=0.8)
    ax.set_xlabel("year")
    ax.set_ylabel("slope of next-week return on sentiment")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out / "sentiment_slopes.png", dpi=150)
    plt.close(fig)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("run_dir")
    parser.add_argument("--out", default=None, help="output directory (default: <run_dir>/plots)")
    args = parser.parse_args()
    run = Path(args.run_dir)
    if not run.exists():
        print(f"error: run directory not found: {run}", file=sys.stderr)
        return 1
    out = Path(args.out) if args.out else run / "plots"
    out.mkdir(parents=True, exist_ok=True)
    plot_da_by_year(run, out)
    plot_weight_paths(run, out)
    plot_threshold_scatter(run, out)
    plot_sentiment_slopes(run, out)
    print(f"plots written to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
