"""Report figures rendered next to the delimited outputs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def save_mse_figure(rows, path) -> None:
    """Error against sample size, one line per (estimator, steps, choices)."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    series: dict[tuple, list] = {}
    for row in rows:
        series.setdefault((row.estimator, row.s, row.d), []).append((row.n, row.mse_mean))
    for (estimator, s, d), points in sorted(series.items()):
        points.sort()
        label = f"{estimator}, S={s}, d={d}" if estimator != "mle" else f"mle, d={d}"
        ax.plot([n for n, _ in points], [m for _, m in points], marker="o", label=label)
    ax.set_xlabel("sample size n")
    ax.set_ylabel("mean squared error")
    ax.set_yscale("log")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_size_power_figure(rows, path) -> None:
    """Rejection rate against the true deviation from the null."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    points = sorted((row.deviation, row.rejection_rate) for row in rows)
    ax.plot([d for d, _ in points], [r for _, r in points], marker="o")
    ax.axhline(0.05, color="grey", linestyle="--", linewidth=1, label="nominal 5%")
    ax.set_xlabel("deviation of the tested coefficient")
    ax.set_ylabel("rejection rate")
    ax.set_ylim(0, 1)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_bench_figure(rows, path) -> None:
    """Wall time against the number of choices."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    points = sorted((row.d, row.seconds) for row in rows)
    ax.plot([d for d, _ in points], [t for _, t in points], marker="o")
    ax.set_xlabel("number of choices d")
    ax.set_ylabel("seconds per fit")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
