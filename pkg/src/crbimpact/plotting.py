"""Figure rendering for the CLI report paths (headless Agg backend)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_PNG_META = {"Software": "crbimpact"}

_METHOD_COLORS = {"crb": "#1f77b4", "classical": "#2ca02c", "gm": "#17becf"}


def save_error_figure(report, path) -> None:
    """Grouped bar chart of per-configuration average errors by method."""
    fig, ax = plt.subplots(figsize=(max(6.0, 0.9 * len(report.groups) + 2.0), 4.0))
    configs = [g.config_id for g in report.groups]
    methods = list(report.methods)
    if configs and methods:
        x = np.arange(len(configs), dtype=float)
        width = 0.8 / len(methods)
        for i, m in enumerate(methods):
            vals = [g.results[m].average_error for g in report.groups]
            ax.bar(
                x + (i - (len(methods) - 1) / 2.0) * width,
                vals,
                width,
                label=m,
                color=_METHOD_COLORS.get(m),
            )
        ax.set_xticks(x)
        ax.set_xticklabels(configs, rotation=45, ha="right", fontsize=8)
        ax.legend()
    else:
        ax.text(0.5, 0.5, "no evaluated groups", ha="center", va="center")
    ax.set_ylabel("average prediction error [rad/s]")
    ax.set_xlabel("configuration")
    fig.tight_layout()
    fig.savefig(path, dpi=150, metadata=_PNG_META)
    plt.close(fig)


def save_phase_figure(field, path) -> None:
    """Quiver plot of the tangential sliding flow with invariant rays."""
    fig, ax = plt.subplots(figsize=(5.5, 5.5))
    pts = field.points
    dirs = field.directions
    norms = np.linalg.norm(dirs, axis=1)
    norms[norms == 0.0] = 1.0
    unit = dirs / norms[:, None]
    ax.quiver(
        pts[:, 0], pts[:, 1], unit[:, 0], unit[:, 1],
        angles="xy", scale_units="xy", scale=24.0, width=0.0035, color="0.45",
    )
    radius = float(np.max(np.abs(pts))) if len(pts) else 1.0
    for inv in field.invariant_directions:
        d = inv.direction * radius
        color = "#d62728" if inv.converging else "#17becf"
        label = "converging" if inv.converging else "diverging"
        ax.annotate(
            "",
            xy=(d[0], d[1]),
            xytext=(0.0, 0.0),
            arrowprops=dict(arrowstyle="-|>", color=color, lw=2.0),
        )
        ax.plot([], [], color=color, lw=2.0, label=label)
    if field.isotropic:
        ax.set_title("isotropic flow: every direction invariant")
    else:
        ax.set_title(
            f"mu = {field.friction:g}, stick coefficient = {field.stick_coefficient:.4g}, "
            f"origin {'stable' if field.origin_stable else 'unstable'}"
        )
    handles, labels = ax.get_legend_handles_labels()
    if handles:
        seen = dict(zip(labels, handles))
        ax.legend(seen.values(), seen.keys(), loc="upper right", fontsize=8)
    ax.set_xlabel("tangential velocity x [m/s]")
    ax.set_ylabel("tangential velocity y [m/s]")
    ax.set_aspect("equal")
    fig.tight_layout()
    fig.savefig(path, dpi=150, metadata=_PNG_META)
    plt.close(fig)
