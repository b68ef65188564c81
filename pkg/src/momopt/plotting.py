"""Figures for a run report, written as PNG files."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .moments import hankel_matrix  # noqa: E402


def plot_order_trace(report, path) -> Path:
    """Relaxation values per order."""
    fig, ax = plt.subplots(figsize=(5, 3.5))
    rows = [t for t in report.trace if t.v_mom is not None]
    if rows:
        ks = [t.order for t in rows]
        ax.plot(ks, [t.v_mom for t in rows], "o-", label="moment value")
        sos = [(t.order, t.v_sos) for t in rows if t.v_sos is not None]
        if sos:
            ax.plot(*zip(*sos), "s--", label="SoS bound")
        ax.legend()
    ax.set_xlabel("order")
    ax.set_ylabel("value")
    ax.set_title("relaxation values")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def plot_singular_values(sigma, path) -> Path:
    """Singular values of every Hankel matrix ``H^t`` on a log scale."""
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for t in range(1, sigma.max_degree // 2 + 1):
        s = np.linalg.svd(hankel_matrix(sigma, t).matrix, compute_uv=False)
        s = np.maximum(s, 1e-18)
        ax.semilogy(np.arange(1, len(s) + 1), s, "o-", ms=3, label=f"t = {t}")
    ax.set_xlabel("index")
    ax.set_ylabel("singular value")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def plot_minimizers(report, path) -> Path:
    """Extracted points (first two coordinates); marker area follows weight."""
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    m = report.minimizers
    names = report.vars.names if report.vars is not None else ()
    if m is not None and len(m):
        pts = np.asarray(m.points)
        x = pts[:, 0]
        y = pts[:, 1] if pts.shape[1] > 1 else np.zeros_like(x)
        w = np.asarray(m.weights)
        ax.scatter(x, y, s=40 + 400 * w / w.max(), alpha=0.7)
    ax.set_xlabel(names[0] if names else "x1")
    ax.set_ylabel(names[1] if len(names) > 1 else "")
    ax.set_title("extracted minimizers")
    ax.set_aspect("equal", adjustable="datalim")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def write_figures(report, directory) -> list[str]:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    files = [plot_order_trace(report, out / "values.png")]
    if report.sigma is not None:
        files.append(plot_singular_values(report.sigma, out / "singular_values.png"))
    if report.minimizers is not None:
        files.append(plot_minimizers(report, out / "minimizers.png"))
    return [str(f) for f in files]
