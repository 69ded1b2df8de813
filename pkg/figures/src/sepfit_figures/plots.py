"""Contour and convergence figures over the fitting CLI's CSV artifacts.

The landscape view draws level sets of log10(loss) over a 2-d parameter
slice and overlays each optimizer run projected onto the slice axes, with
a cross at its start and a dot at its end.  The convergence view plots
loss against iteration for each run on a log scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .io import LandscapeGrid, Trajectory, load_landscape, load_trajectory

DEFAULT_COLORS = {"ID": "lime", "SD": "cyan", "NCG": "magenta"}
_FALLBACK_CYCLE = ("tab:orange", "tab:red", "tab:purple", "tab:brown", "tab:pink")


@dataclass(frozen=True)
class FigureSpec:
    """Inputs for one batch of figures.

    ``trajectories`` pairs display names with CSV paths; ``colors`` maps
    display names to matplotlib colors, on top of the defaults (ID lime,
    SD cyan, NCG magenta).  ``dims`` is only needed when axis names carry
    a dimension suffix.
    """

    landscapes: tuple = ()
    trajectories: tuple = ()  # ((name, path), ...)
    out_dir: Path = Path("figures_out")
    log_scale: bool = True
    colors: dict = field(default_factory=dict)
    dims: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "out_dir", Path(self.out_dir))
        object.__setattr__(
            self, "landscapes", tuple(Path(p) for p in self.landscapes)
        )
        object.__setattr__(
            self,
            "trajectories",
            tuple((str(n), Path(p)) for n, p in self.trajectories),
        )
        for path in list(self.landscapes) + [p for _, p in self.trajectories]:
            if not path.exists():
                raise FileNotFoundError(f"input file not found: {path}")

    def color_for(self, name: str, position: int) -> str:
        merged = {**DEFAULT_COLORS, **self.colors}
        if name in merged:
            return merged[name]
        return _FALLBACK_CYCLE[position % len(_FALLBACK_CYCLE)]

    def load_trajectories(self) -> list[Trajectory]:
        return [load_trajectory(name, path) for name, path in self.trajectories]


def _loss_for_display(values: np.ndarray, log_scale: bool) -> np.ndarray:
    """Overflow sentinels (and, on a log axis, zeros) become masked cells."""
    masked = np.ma.masked_invalid(values)
    if log_scale:
        return np.ma.log10(np.ma.masked_less_equal(masked, 0.0))
    return masked


def _render_landscape(
    grid: LandscapeGrid, trajectories, spec: FigureSpec
) -> plt.Figure:
    fig, ax = plt.subplots(figsize=(6.0, 4.8))
    Z = _loss_for_display(grid.values, spec.log_scale)
    cs = ax.contourf(grid.grid1, grid.grid2, Z.T, levels=30, cmap="viridis")
    fig.colorbar(cs, ax=ax, label="log10(loss)" if spec.log_scale else "loss")
    for position, traj in enumerate(trajectories):
        xy = traj.project(grid.axis1, grid.axis2, spec.dims)
        color = spec.color_for(traj.name, position)
        ax.plot(xy[:, 0], xy[:, 1], color=color, linewidth=1.6, label=traj.name)
        ax.plot(
            xy[0, 0], xy[0, 1], marker="x", color=color, markersize=10,
            markeredgewidth=2.2, linestyle="none",
        )
        ax.plot(
            xy[-1, 0], xy[-1, 1], marker="o", color=color, markersize=5,
            linestyle="none",
        )
    ax.set_xlabel(grid.axis1)
    ax.set_ylabel(grid.axis2)
    ax.set_title(f"{grid.axis1} x {grid.axis2}")
    if trajectories:
        ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    return fig


def plot_landscape(spec: FigureSpec) -> list[Path]:
    """Write one contour image per landscape CSV; returns the image paths."""
    if not spec.landscapes:
        raise ValueError("the figure spec names no landscape files")
    trajectories = spec.load_trajectories()
    spec.out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for path in spec.landscapes:
        grid = load_landscape(path)
        fig = _render_landscape(grid, trajectories, spec)
        target = spec.out_dir / (path.stem + ".png")
        fig.savefig(target, dpi=150)
        plt.close(fig)
        written.append(target)
    return written


def _render_convergence(trajectories, spec: FigureSpec) -> plt.Figure:
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    for position, traj in enumerate(trajectories):
        color = spec.color_for(traj.name, position)
        # a lone iterate still deserves a visible mark
        marker = "o" if len(traj.iters) == 1 else None
        ax.plot(traj.iters, traj.loss, color=color, label=traj.name, marker=marker)
    if spec.log_scale:
        ax.set_yscale("log")
    ax.set_xlabel("iteration")
    ax.set_ylabel("loss")
    ax.set_title("loss vs iteration")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    return fig


def plot_convergence(spec: FigureSpec) -> Path:
    """Write the loss-vs-iteration comparison; returns the image path."""
    trajectories = spec.load_trajectories()
    if not trajectories:
        raise ValueError("the figure spec names no trajectory files")
    spec.out_dir.mkdir(parents=True, exist_ok=True)
    fig = _render_convergence(trajectories, spec)
    target = spec.out_dir / "convergence.png"
    fig.savefig(target, dpi=150)
    plt.close(fig)
    return target
