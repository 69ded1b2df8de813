"""Readers for the CSV artifacts the fitting CLI emits.

Two file shapes are understood.  A landscape slice::

    <axis1>,<axis2>,loss
    -1.0,-3.14,61.64
    ...

is a row-major scan with the first axis varying slowest, where a literal
``inf`` marks cells whose evaluation overflowed.  A trajectory::

    iter,loss,grad_inf_norm,p0,...,p{K-1}

records one optimizer run, one row per iterate, with the flat parameter
vector inlined per row.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

_KIND_OFFSETS = {"A": 0, "alpha": 1, "omega": 2, "phi": 3}


@dataclass(frozen=True)
class LandscapeGrid:
    """One 2-d loss slice: ``values[i, j]`` belongs to grid1[i] x grid2[j]."""

    axis1: str
    axis2: str
    grid1: np.ndarray
    grid2: np.ndarray
    values: np.ndarray  # (len(grid1), len(grid2)), +inf for overflow cells


@dataclass(frozen=True)
class Trajectory:
    """One optimizer run as recorded in a trajectory CSV."""

    name: str
    iters: np.ndarray
    loss: np.ndarray
    grad_inf_norm: np.ndarray
    params: np.ndarray  # (T, K) flat parameter snapshots

    def project(self, axis1: str, axis2: str, dims: int | None = None) -> np.ndarray:
        """(T, 2) projection of the parameter snapshots onto two named axes."""
        cols = (param_index(axis1, dims), param_index(axis2, dims))
        width = self.params.shape[1]
        for name, col in zip((axis1, axis2), cols):
            if col >= width:
                raise ValueError(
                    f"axis '{name}' needs parameter column p{col}, "
                    f"but '{self.name}' only has {width}"
                )
        return self.params[:, cols]


def param_index(name: str, dims: int | None = None) -> int:
    """Flat parameter column for an axis name like ``alpha_2``.

    Names follow ``<kind>_<rank>`` for models whose ranks share one atom
    across dimensions (the demo's shape) and ``<kind>_<rank>_<dim>`` when
    each dimension has its own atom, in which case the caller must say how
    many dimensions there are.
    """
    parts = name.split("_")
    kind = parts[0]
    if kind not in _KIND_OFFSETS or len(parts) not in (2, 3):
        raise ValueError(f"unknown parameter axis '{name}'")
    try:
        indices = [int(p) for p in parts[1:]]
    except ValueError:
        raise ValueError(f"unknown parameter axis '{name}'") from None
    if any(i < 1 for i in indices):
        raise ValueError(f"unknown parameter axis '{name}'")
    rank = indices[0]
    if len(indices) == 1:
        return (rank - 1) * 4 + _KIND_OFFSETS[kind]
    if dims is None:
        raise ValueError(
            f"axis '{name}' carries a dimension suffix; pass the model dimension"
        )
    dim = indices[1]
    if dim > dims:
        raise ValueError(f"axis '{name}' exceeds the stated dimension {dims}")
    return ((rank - 1) * dims + (dim - 1)) * 4 + _KIND_OFFSETS[kind]


def _read_rows(path: Path) -> list[list[str]]:
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if not rows:
        raise ValueError(f"{path}: file is empty")
    return rows


def load_landscape(path) -> LandscapeGrid:
    """Read one landscape CSV back into its 2-d grid form."""
    path = Path(path)
    rows = _read_rows(path)
    header = rows[0]
    if len(header) != 3 or header[2] != "loss":
        raise ValueError(f"{path}: expected header <axis1>,<axis2>,loss, got {header}")
    if len(rows) < 2:
        raise ValueError(f"{path}: no grid cells after the header")
    try:
        table = np.array([[float(v) for v in row] for row in rows[1:]])
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None
    # row-major scan: axis1 varies slowest, so its unique values appear in
    # contiguous runs while axis2 cycles through its full grid each run
    grid1 = _stable_unique(table[:, 0])
    grid2 = _stable_unique(table[:, 1])
    n1, n2 = len(grid1), len(grid2)
    if n1 * n2 != len(table):
        raise ValueError(
            f"{path}: {len(table)} cells do not tile a {n1} x {n2} grid"
        )
    values = table[:, 2].reshape(n1, n2)
    return LandscapeGrid(
        axis1=header[0], axis2=header[1], grid1=grid1, grid2=grid2, values=values
    )


def _stable_unique(column: np.ndarray) -> np.ndarray:
    seen = {}
    for v in column:
        seen.setdefault(float(v), None)
    return np.array(list(seen))


def load_trajectory(name: str, path) -> Trajectory:
    """Read one trajectory CSV, keeping the run's display name with it."""
    path = Path(path)
    rows = _read_rows(path)
    header = rows[0]
    if header[:3] != ["iter", "loss", "grad_inf_norm"]:
        raise ValueError(
            f"{path}: expected header iter,loss,grad_inf_norm,p0,..., got {header[:3]}"
        )
    width = len(header)
    if header[3:] != [f"p{k}" for k in range(width - 3)]:
        raise ValueError(f"{path}: parameter columns must be p0,...,p{width - 4}")
    if len(rows) < 2:
        raise ValueError(f"{path}: no iterates after the header")
    try:
        table = np.array([[float(v) for v in row] for row in rows[1:]])
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None
    if table.shape[1] != width:
        raise ValueError(f"{path}: ragged rows")
    return Trajectory(
        name=name,
        iters=table[:, 0].astype(int),
        loss=table[:, 1],
        grad_inf_norm=table[:, 2],
        params=table[:, 3:],
    )
