"""On-disk artifact formats shared by the harness and the CLI.

Reals are serialized with ``repr`` (shortest round-trip decimal), final
losses in 17-significant-digit scientific notation; either way the written
text parses back to the exact double.  Landscape cells that overflowed are
written as the literal ``inf`` sentinel.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .model import Dataset

TABLE1_NAME = "table1.csv"
TABLE1_HEADER = ("method", "iterations", "walltime_ms", "final_loss")
TRAJECTORY_HEADER_PREFIX = ("iter", "loss", "grad_inf_norm")
LANDSCAPE_VALUE_COLUMN = "loss"
REPORT_NAME = "report.json"


def format_real(x: float) -> str:
    return repr(float(x))


def format_loss(x: float) -> str:
    return f"{float(x):.16e}"


def trajectory_name(method: str) -> str:
    return f"trajectory_{method}.csv"


def landscape_name(axis1: str, axis2: str) -> str:
    return f"landscape_{axis1}_{axis2}.csv"


def write_table1(path, rows) -> None:
    """rows: iterable of (method, iterations, walltime_ms, final_loss)."""
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(TABLE1_HEADER)
        for method, iterations, walltime_ms, final_loss in rows:
            out.writerow(
                [method, str(int(iterations)), format_real(walltime_ms), format_loss(final_loss)]
            )


def write_trajectory(path, report) -> None:
    """One row per iterate: iter, loss, grad_inf_norm, p0..p{K-1}."""
    k = len(report.trajectory[0])
    header = list(TRAJECTORY_HEADER_PREFIX) + [f"p{i}" for i in range(k)]
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(header)
        for it, (lval, gval, params) in enumerate(
            zip(report.loss_trace, report.grad_norm_trace, report.trajectory)
        ):
            row = [str(it), format_real(lval), format_real(gval)]
            row.extend(format_real(p) for p in params)
            out.writerow(row)


def write_landscape(path, slc) -> None:
    """Row-major (grid1 outer, grid2 inner) cells: ax1, ax2, loss."""
    name1, _ = slc.axis1
    name2, _ = slc.axis2
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow([name1, name2, LANDSCAPE_VALUE_COLUMN])
        for a, v1 in enumerate(slc.grid1):
            for b, v2 in enumerate(slc.grid2):
                cell = slc.loss_values[a, b]
                text = "inf" if math.isinf(cell) else format_real(cell)
                out.writerow([format_real(v1), format_real(v2), text])


def write_report_json(path, report) -> None:
    payload = {
        "method": report.method,
        "termination": report.termination,
        "reason": report.reason,
        "outer_iterations": report.outer_iterations,
        "inner_iterations": report.inner_iterations,
        "final_loss": report.final_loss,
        "final_params": [float(p) for p in report.final_params],
        "walltime_ms": report.walltime_ms,
        "loss_trace": [float(v) for v in report.loss_trace],
        "grad_norm_trace": [float(v) for v in report.grad_norm_trace],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def write_dataset_csv(path, data: Dataset) -> None:
    """Header x1..xd, y; one sample per row."""
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow([f"x{i + 1}" for i in range(data.dim)] + ["y"])
        for row, target in zip(data.x, data.y):
            out.writerow([format_real(v) for v in row] + [format_real(target)])


def read_dataset_csv(path) -> Dataset:
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ConfigError(f"{path}: dataset file is empty")
    header = rows[0]
    if len(header) < 2 or header[-1] != "y" or header[:-1] != [
        f"x{i + 1}" for i in range(len(header) - 1)
    ]:
        raise ConfigError(f"{path}: expected header x1,...,xd,y, got {header}")
    if len(rows) < 2:
        raise ConfigError(f"{path}: no data rows after the header")
    dim = len(header) - 1
    points = np.empty((len(rows) - 1, dim))
    targets = np.empty(len(rows) - 1)
    for idx, row in enumerate(rows[1:], start=2):
        if len(row) != dim + 1:
            raise ConfigError(f"{path}: line {idx} has {len(row)} fields, expected {dim + 1}")
        try:
            points[idx - 2] = [float(v) for v in row[:-1]]
            targets[idx - 2] = float(row[-1])
        except ValueError as exc:
            raise ConfigError(f"{path}: line {idx}: {exc}") from None
    return Dataset(points, targets)
