"""Figures for reports (matplotlib, non-interactive backend)."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .bounds import BoundsReport  # noqa: E402


def plot_bounds(rep: BoundsReport, path: str | Path) -> Path:
    """Lower and upper bound against depth (full enumeration, then tree levels)."""
    fig, ax = plt.subplots(figsize=(6, 4))
    if rep.per_depth:
        n = [r.n for r in rep.per_depth]
        ax.plot(n, [r.lower for r in rep.per_depth], "o-", label="max rho(A(w))^(1/n)")
        ax.plot(n, [r.upper for r in rep.per_depth], "s-", label="max ||A(w)||^(1/n)")
    if rep.tree:
        m = [r.level for r in rep.tree]
        ax.plot(m, [r.upper for r in rep.tree], "^--", label="tree upper")
    if math.isfinite(rep.lower):
        ax.axhline(rep.lower, color="k", lw=0.8, ls=":", label=f"lower = {rep.lower:.10g}")
    ax.set_xlabel("depth")
    ax.set_ylabel("bound")
    ax.set_title(f"gap = {rep.gap:.3g}")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def plot_unit_ball(approx, path: str | Path) -> Path:
    """Unit sphere of the approximate extremal norm."""
    theta = np.concatenate([approx.angles, approx.angles + math.pi, approx.angles[:1]])
    v = np.concatenate([approx.values, approx.values, approx.values[:1]])
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.plot(np.cos(theta) / v, np.sin(theta) / v, lw=1.2)
    ax.set_aspect("equal")
    ax.set_title(f"extremal norm unit ball, N = {approx.grid_size}, rho ~ {approx.rho_hat:.8g}")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    return _save(fig, path)


def plot_frequency(seq, burn_in: int, path: str | Path, target: float | None = None) -> Path:
    """Running mean of the switching index after burn-in."""
    tail = np.asarray(seq[burn_in:], dtype=float)
    steps = np.arange(1, len(tail) + 1)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogx(steps, np.cumsum(tail) / steps, lw=1)
    if target is not None:
        ax.axhline(target, color="k", ls=":", lw=0.8, label=f"p/q = {target:.6g}")
        ax.legend(fontsize=8)
    ax.set_xlabel("steps after burn-in")
    ax.set_ylabel("running switching frequency")
    ax.set_ylim(-0.02, 1.02)
    fig.tight_layout()
    return _save(fig, path)


def plot_bracket(history, path: str | Path) -> Path:
    """Collatz-Wielandt bracket width per sweep."""
    h = np.asarray(history, dtype=float)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(np.arange(1, len(h) + 1), h[:, 1] / h[:, 0] - 1.0 + 1e-17)
    ax.set_xlabel("sweep")
    ax.set_ylabel("max(Tv/v) / min(Tv/v) - 1")
    fig.tight_layout()
    return _save(fig, path)


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path
