"""Matplotlib figures written as deterministic SVG files."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_BAND = "#c6dbef"
_POLE = "#6baed6"


def save_svg(fig, path) -> None:
    """Save ``fig`` with fixed ids and no timestamp, then close it."""
    with matplotlib.rc_context({"svg.hashsalt": "stochhom", "svg.fonttype": "none"}):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _shade_bands(ax, bands, poles, vertical=True):
    for (a, b), pole in zip(bands, poles):
        color = _POLE if pole else _BAND
        if b - a <= 0:
            (ax.axhline if vertical else ax.axvline)(a, color=color, lw=1.2)
        else:
            (ax.axhspan if vertical else ax.axvspan)(a, b, color=color, alpha=0.6, lw=0)


def plot_beta(path, zf, structure, mu=(), rows=None) -> None:
    """``beta`` on every gap with bands shaded and the levels ``mu_k`` drawn."""
    from .zhikov import beta_samples

    rows = rows if rows is not None else beta_samples(zf, structure)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    _shade_bands(ax, structure.bands, structure.poles, vertical=False)
    for j in sorted({r["gap"] for r in rows}):
        sel = [r for r in rows if r["gap"] == j]
        ax.plot([r["lambda"] for r in sel], [r["beta"] for r in sel], color="k", lw=1)
    for m in mu:
        ax.axhline(m, color="#d62728", lw=0.5, ls="--")
    finite = np.array([r["beta"] for r in rows])
    if finite.size:
        span = np.percentile(np.abs(finite), 90)
        ax.set_ylim(-2 * span, 2 * span)
    ax.set_xlim(0, structure.cutoff)
    ax.set_xlabel(r"$\lambda$")
    ax.set_ylabel(r"$\beta(\lambda)$")
    save_svg(fig, path)


def plot_convergence(path, report) -> None:
    """Computed eigenvalues against ``eps`` over the limit spectrum."""
    fig, ax = plt.subplots(figsize=(6, 5))
    st = report.limit["structure"]
    _shade_bands(ax, st["bands"], st["poles"], vertical=True)
    for p in report.limit["points"]:
        ax.axhline(p["lambda"], color="#2ca02c", lw=0.5)
    for row in report.rows:
        ev = np.asarray(row["eigenvalues"])
        ax.scatter(np.full(ev.size, 1.0 / row["eps"]), ev, s=4, color="k")
    ax.set_xscale("log", base=2)
    ax.set_ylim(0, report.cutoff)
    ax.set_xlabel(r"$1/\varepsilon$")
    ax.set_ylabel("eigenvalue")
    save_svg(fig, path)
