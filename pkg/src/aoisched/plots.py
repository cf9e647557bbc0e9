"""Render sweep and training figures next to their CSV files."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

_STYLES = {"rr": "o-", "pf": "s-", "ppo": "^-", "oracle": "d--", "random": "x:"}


def save_sweep_figures(report, csv_path) -> list:
    """Mean age and throughput vs sweep rate, one line per scheduler."""
    stem = Path(csv_path).with_suffix("")
    agg = report.aggregate()
    schedulers = []
    for row in report.rows:
        if row.scheduler not in schedulers:
            schedulers.append(row.scheduler)
    rates = sorted({row.sweep_rate_hz for row in report.rows})

    written = []
    for metric, se_key, ylabel, suffix in (
        ("mean_aoi", "mean_aoi_se", "Mean AoI (slots)", "_aoi.png"),
        ("throughput", "throughput_se", "Throughput (packets/slot)", "_throughput.png"),
    ):
        fig, ax = plt.subplots(figsize=(6, 4))
        for name in schedulers:
            ys = [agg[(rate, name)][metric] for rate in rates]
            errs = [agg[(rate, name)][se_key] for rate in rates]
            ax.errorbar(rates, ys, yerr=errs, fmt=_STYLES.get(name, "o-"), capsize=3, label=name)
        ax.set_xlabel("Mean packet generation rate (Hz)")
        ax.set_ylabel(ylabel)
        ax.grid(True, alpha=0.4)
        ax.legend()
        fig.tight_layout()
        out = Path(str(stem) + suffix)
        fig.savefig(out, dpi=120)
        plt.close(fig)
        written.append(out)
    return written


def save_training_figure(curve, path) -> Path:
    """Per-iteration mean reward with the mean age on a twin axis."""
    iterations = [row["iteration"] for row in curve]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(iterations, [row["mean_reward"] for row in curve], "b-", label="mean reward")
    ax.set_xlabel("Iteration")
    ax.set_ylabel("Mean reward", color="b")
    ax.grid(True, alpha=0.4)
    ax2 = ax.twinx()
    ax2.plot(iterations, [row["mean_aoi"] for row in curve], "r--", label="mean AoI")
    ax2.set_ylabel("Mean AoI (slots)", color="r")
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return out
