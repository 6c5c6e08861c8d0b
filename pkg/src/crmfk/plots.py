"""Figure rendering for the command-line reports.

Everything draws through the Agg backend straight to a file; nothing
here opens a window.  Each function renders one figure and closes it,
so repeated calls cannot leak state between reports.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["trajectory_plot", "truncation_curve_plot", "truncation_grid_plot",
           "posterior_curves_plot", "tail_bounds_plot", "mixture_plot",
           "trend_plot"]

_JUMP_FLOOR = 1e-300


def _save(fig, path):
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)


def trajectory_plot(ensemble, path, max_shown: int = 8) -> None:
    """Decreasing jump profiles for the first few trajectories."""
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    idx = np.arange(1, ensemble.M + 1)
    for traj in ensemble.trajectories[:max_shown]:
        ax.semilogy(idx, np.maximum(traj.jumps, _JUMP_FLOOR),
                    drawstyle="steps-post", alpha=0.7, lw=1.0)
    ax.set_xlabel("jump index")
    ax.set_ylabel("jump size")
    ax.set_title(f"{ensemble.spec.family}: {min(len(ensemble.trajectories), max_shown)}"
                 f" of {len(ensemble.trajectories)} trajectories")
    _save(fig, path)


def truncation_curve_plot(report, path) -> None:
    """Moment-match index and relative-error index against the cutoff."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.0, 3.6))
    ax1.semilogy(report.M_grid, report.ell, lw=1.2)
    ax1.axhline(report.ell_target, color="crimson", ls="--", lw=0.9)
    if report.resolved_M is not None:
        ax1.axvline(report.resolved_M, color="crimson", ls=":", lw=0.9)
    ax1.set_xlabel("M")
    ax1.set_ylabel("moment distance")
    ax2.semilogy(report.M_grid, report.e, lw=1.2, color="darkgreen")
    ax2.set_xlabel("M")
    ax2.set_ylabel("mean last-jump share")
    fig.suptitle(f"{report.spec.family}: truncation diagnostics")
    _save(fig, path)


def truncation_grid_plot(p1_name, p2_name, p1_values, p2_values, M, path) -> None:
    """Required cutoff over a two-parameter grid, as a heatmap."""
    fig, ax = plt.subplots(figsize=(5.4, 4.2))
    m = ax.pcolormesh(p1_values, p2_values, np.asarray(M, dtype=float).T,
                      shading="nearest", cmap="viridis")
    fig.colorbar(m, ax=ax, label="required M")
    ax.set_xlabel(p1_name)
    ax.set_ylabel(p2_name)
    _save(fig, path)


def posterior_curves_plot(M_grid, curves, path, ylabel="moment distance") -> None:
    """Prior-versus-posterior distance curves on one set of axes.

    ``curves`` maps a legend label to a vector over ``M_grid``.
    """
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for label, values in curves.items():
        ax.semilogy(M_grid, values, lw=1.2, label=label)
    ax.set_xlabel("M")
    ax.set_ylabel(ylabel)
    ax.legend(fontsize=8)
    _save(fig, path)


def tail_bounds_plot(Ms, analytic, sharp, path, title="") -> None:
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.semilogy(Ms, analytic, "o-", lw=1.2, label="analytic bound")
    ax.semilogy(Ms, np.maximum(np.asarray(sharp, dtype=float), _JUMP_FLOOR),
                "s--", lw=1.2, label="quantile sum")
    ax.set_xlabel("M")
    ax.set_ylabel("tail mass bound")
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8)
    _save(fig, path)


def trend_plot(es, rows_by_gamma, path) -> None:
    """Distance between truncation rules against the rule level.

    ``rows_by_gamma`` maps a stability index to its distances over ``es``.
    """
    fig, ax = plt.subplots(figsize=(5.6, 4.0))
    for g, dks in sorted(rows_by_gamma.items()):
        ax.semilogy(es, dks, "o-", lw=1.2, label=f"gamma={g}")
    ax.set_xlabel("relative-error level e")
    ax.set_ylabel("distance between rules")
    ax.invert_xaxis()
    ax.legend(fontsize=8)
    _save(fig, path)


def mixture_plot(estimate, data, path, title="") -> None:
    """Predictive density with the observations as a rug."""
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.plot(estimate.grid, estimate.pdf, lw=1.4)
    y = np.asarray(data, dtype=float)
    ax.plot(y, np.full_like(y, -0.002), "|", color="black",
            markersize=7, alpha=0.6)
    ax.set_xlabel("velocity")
    ax.set_ylabel("predictive density")
    if title:
        ax.set_title(title)
    _save(fig, path)
