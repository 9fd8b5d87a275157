"""Static matplotlib figures written next to the CSV outputs."""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.dpi": 100,
    "savefig.dpi": 150,
    # fixed element ids keep SVG output byte-identical between runs
    "svg.hashsalt": "pdnet",
}


def _save(fig, path):
    path = Path(path)
    fmt = path.suffix.lstrip(".") or "png"
    meta = {"svg": {"Date": None}, "pdf": {"CreationDate": None}}.get(fmt, {"Software": None})
    fig.savefig(path, format=fmt, metadata=meta, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_density_grid(grid, path, title=None, decades=12):
    """Filled log-density contours of the slice with the ranked mode markers.

    Trained mixtures are sharply peaked, so the colour scale spans the top
    ``decades`` orders of magnitude.
    """
    with np.errstate(divide="ignore"):
        logd = np.log10(grid.density)
    top = np.max(logd) if np.isfinite(np.max(logd)) else 0.0
    logd = np.clip(logd, top - decades, top)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.2, 3.6))
        mesh = ax.contourf(grid.u, grid.v, logd, levels=24, cmap="viridis")
        ax.contour(grid.u, grid.v, logd, levels=8, colors="w", linewidths=0.3)
        fig.colorbar(mesh, ax=ax, label="log10 density")
        for label, u, v in grid.markers:
            ax.plot(u, v, "r^", ms=6, mec="k", mew=0.5)
            ax.annotate(label, (u, v), xytext=(4, 4), textcoords="offset points",
                        color="w", fontsize=8, weight="bold")
        ax.set_xlabel("PC 1")
        ax.set_ylabel("PC 2")
        if title:
            ax.set_title(title)
        return _save(fig, path)


def plot_verification(freqs, target, predicted, labels, path):
    """Target against each design's oracle spectrum, one panel per design."""
    n = max(len(predicted), 1)
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(n, 1, figsize=(4.5, 1.4 * n + 0.6), sharex=True, squeeze=False)
        for ax, spectrum, label in zip(axes[:, 0], predicted, labels):
            ax.plot(freqs, target, "r--", lw=1.0, label="target")
            ax.plot(freqs, spectrum, "b-", lw=1.0, label="predicted")
            ax.set_ylim(-0.05, 1.05)
            ax.set_ylabel("T")
            ax.text(0.02, 0.1, label, transform=ax.transAxes, fontsize=8)
        axes[0, 0].legend(loc="upper right", frameon=False)
        axes[-1, 0].set_xlabel("frequency (Hz)")
        return _save(fig, path)


def plot_loss(losses, path, ylabel="loss"):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4, 2.8))
        ax.plot(np.arange(1, len(losses) + 1), losses, "k-", lw=1)
        ax.set_xlabel("epoch")
        ax.set_ylabel(ylabel)
        ax.grid(alpha=0.3)
        return _save(fig, path)


def plot_report(report, path):
    """Bars of test error and output variety per model."""
    rows = [r for r in report.rows if r.status == "ok"]
    kinds = [r.kind.upper() for r in rows]
    with plt.rc_context(STYLE):
        fig, (left, right) = plt.subplots(1, 2, figsize=(5.5, 2.6))
        x = np.arange(len(rows))
        left.bar(x - 0.2, [r.train_error for r in rows], 0.4, label="train", color="0.6")
        left.bar(x + 0.2, [r.test_error for r in rows], 0.4, label="test", color="C0")
        left.set_xticks(x, kinds)
        left.set_ylabel("mean error")
        left.legend(frameon=False)
        right.bar(x, [r.variety_mean for r in rows], 0.5, color="C2")
        right.set_xticks(x, kinds)
        right.set_ylabel("designs per target")
        fig.tight_layout()
        return _save(fig, path)
