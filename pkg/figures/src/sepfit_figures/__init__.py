"""Figure rendering for the separable-fit CSV artifacts."""

from .io import LandscapeGrid, Trajectory, load_landscape, load_trajectory, param_index
from .plots import DEFAULT_COLORS, FigureSpec, plot_convergence, plot_landscape

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_COLORS",
    "FigureSpec",
    "LandscapeGrid",
    "Trajectory",
    "load_landscape",
    "load_trajectory",
    "param_index",
    "plot_convergence",
    "plot_landscape",
    "__version__",
]
