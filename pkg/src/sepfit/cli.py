"""Command-line interface and the plain-text run-configuration format.

Config files are flat ``key = value`` lines; ``#`` starts a comment and
blank lines are ignored.  Recognized keys (defaults in brackets):

    model.rank            [2]     model.dim    [2]
    model.terms           [1]     model.tied   [true]

    init.values           flat parameter list, canonical order
    init.seed             draw the start uniformly at random instead
    init.range.A          "lo, hi" per-kind draw ranges for seeded inits
    init.range.alpha / init.range.omega / init.range.phi
        exactly one of init.values / init.seed must be given

    data.kind             [grid]  grid | csv_file
    data.points_per_axis  [25]    data.domain  [0, 1]   data.target [cos_pi_diff]
    data.path             sample file for kind=csv_file (header x1..xd,y)

    solver.method         [ID]    ID | SD | NCG
    solver.id_inner_tol / id_max_inner / id_max_outer / id_jacobian /
    solver.id_levenberg_init / id_backtrack_factor / id_max_halvings
    solver.sd_max_iters / sd_c1 / sd_rho / sd_step0
    solver.ncg_max_iters / ncg_loss_tol / ncg_cg_tol

    output.directory      [out]
    output.emit_trajectory  [true]
    output.emit_landscape   [false]
    output.landscape.<k>.axis1 / axis2     parameter axis names (k = 1, 2, ...)
    output.landscape.<k>.grid1 / grid2     "lo, hi, points"

Parameter axes are named ``A_j``, ``alpha_j``, ``omega_j``, ``phi_j`` with
j the 1-based rank; untied models append the 1-based dimension (``A_j_i``)
and multi-component atoms a final component index.

Artifacts: ``report.json`` plus ``trajectory_<method>.csv`` with header
``iter,loss,grad_inf_norm,p0,...,p{K-1}``; landscape slices go to
``landscape_<ax1>_<ax2>.csv`` with header ``<ax1>,<ax2>,loss``, row-major
with grid1 outermost and ``inf`` marking overflowed cells; ``table1.csv``
(demo) has header ``method,iterations,walltime_ms,final_loss``.  All reals
are written in round-trip precision.

Exit codes: 0 Converged, 2 Stalled or MaxIters, 1 any error.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import formats
from .errors import ConfigError, SepfitError
from .harness import landscape_slice, make_grid_dataset, run_demo, verify_suite
from .model import Layout, ModelParams, unflatten
from .solvers import SolverConfig, infinite_descent, newton_cg, steepest_descent

_SOLVERS = {"ID": infinite_descent, "SD": steepest_descent, "NCG": newton_cg}

_DEFAULT_INIT_RANGES = {
    "A": (0.5, 1.5),
    "alpha": (-0.5, 0.5),
    "omega": (1.0, 5.0),
    "phi": (-math.pi, math.pi),
}


@dataclass(frozen=True)
class ModelBlock:
    rank: int = 2
    dim: int = 2
    terms: int = 1
    tied: bool = True


@dataclass(frozen=True)
class InitBlock:
    values: tuple[float, ...] | None = None
    seed: int | None = None
    ranges: tuple[tuple[str, tuple[float, float]], ...] = ()


@dataclass(frozen=True)
class DataBlock:
    kind: str = "grid"
    points_per_axis: int = 25
    domain: tuple[float, float] = (0.0, 1.0)
    target: str = "cos_pi_diff"
    path: str | None = None


@dataclass(frozen=True)
class LandscapeSpec:
    axis1: str
    axis2: str
    grid1: tuple[float, float, int]
    grid2: tuple[float, float, int]


@dataclass(frozen=True)
class OutputBlock:
    directory: str = "out"
    emit_trajectory: bool = True
    emit_landscape: bool = False
    landscapes: tuple[LandscapeSpec, ...] = ()


@dataclass(frozen=True)
class RunConfig:
    model: ModelBlock
    init: InitBlock
    data: DataBlock
    solver: SolverConfig
    output: OutputBlock


def _parse_lines(text: str) -> dict[str, tuple[str, int]]:
    entries: dict[str, tuple[str, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got '{raw.strip()}'")
        key, value = line.split("=", 1)
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in entries:
            raise ConfigError(f"line {lineno}: duplicate key '{key}'")
        entries[key] = (value, lineno)
    return entries


class _Entries:
    """Typed access to parsed key/value pairs with line-aware errors."""

    def __init__(self, entries: dict[str, tuple[str, int]]):
        self.entries = dict(entries)
        self.used: set[str] = set()

    def has(self, key: str) -> bool:
        return key in self.entries

    def raw(self, key: str):
        self.used.add(key)
        return self.entries[key][0]

    def _convert(self, key: str, conv, describe: str):
        value, lineno = self.entries[key]
        self.used.add(key)
        try:
            return conv(value)
        except (ValueError, TypeError):
            raise ConfigError(f"line {lineno}: {key} must be {describe}, got '{value}'") from None

    def get_int(self, key: str, default: int) -> int:
        return self._convert(key, int, "an integer") if self.has(key) else default

    def get_float(self, key: str, default: float) -> float:
        return self._convert(key, float, "a real number") if self.has(key) else default

    def get_bool(self, key: str, default: bool) -> bool:
        if not self.has(key):
            return default

        def conv(v: str) -> bool:
            low = v.lower()
            if low in ("true", "false"):
                return low == "true"
            raise ValueError(low)

        return self._convert(key, conv, "true or false")

    def get_str(self, key: str, default: str | None) -> str | None:
        return self.raw(key) if self.has(key) else default

    def get_floats(self, key: str, count: int | None = None) -> tuple[float, ...]:
        def conv(v: str) -> tuple[float, ...]:
            parts = [p.strip() for p in v.split(",") if p.strip()]
            vals = tuple(float(p) for p in parts)
            if count is not None and len(vals) != count:
                raise ValueError(v)
            return vals

        need = f"{count} comma-separated reals" if count else "comma-separated reals"
        return self._convert(key, conv, need)

    def error(self, key: str, message: str):
        lineno = self.entries[key][1] if key in self.entries else 0
        where = f"line {lineno}: " if lineno else ""
        raise ConfigError(f"{where}{key} {message}")

    def leftovers(self) -> list[str]:
        return sorted(set(self.entries) - self.used)


def parse_config_text(text: str) -> RunConfig:
    """Parse run-config text into a RunConfig, validating as it goes."""
    e = _Entries(_parse_lines(text))

    model = ModelBlock(
        rank=e.get_int("model.rank", 2),
        dim=e.get_int("model.dim", 2),
        terms=e.get_int("model.terms", 1),
        tied=e.get_bool("model.tied", True),
    )
    for key, value in (("model.rank", model.rank), ("model.dim", model.dim), ("model.terms", model.terms)):
        if value < 1:
            e.error(key, f"must be at least 1, got {value}")

    has_values = e.has("init.values")
    has_seed = e.has("init.seed")
    if has_values == has_seed:
        raise ConfigError("exactly one of init.values / init.seed must be given")
    values = e.get_floats("init.values") if has_values else None
    seed = e.get_int("init.seed", 0) if has_seed else None
    ranges = []
    for kind in ("A", "alpha", "omega", "phi"):
        key = f"init.range.{kind}"
        if e.has(key):
            if not has_seed:
                e.error(key, "only applies to seeded inits")
            lo, hi = e.get_floats(key, 2)
            if not lo < hi:
                e.error(key, f"needs lo < hi, got {lo}, {hi}")
            ranges.append((kind, (lo, hi)))
    init = InitBlock(values=values, seed=seed, ranges=tuple(ranges))
    layout = Layout(model.rank, model.dim, model.terms, model.tied)
    if values is not None and len(values) != layout.size:
        e.error("init.values", f"has {len(values)} entries, layout needs {layout.size}")

    kind = e.get_str("data.kind", "grid")
    if kind not in ("grid", "csv_file"):
        e.error("data.kind", f"must be grid or csv_file, got '{kind}'")
    if kind == "grid":
        for key in ("data.path",):
            if e.has(key):
                e.error(key, "only applies to data.kind = csv_file")
        data = DataBlock(
            kind="grid",
            points_per_axis=e.get_int("data.points_per_axis", 25),
            domain=tuple(e.get_floats("data.domain", 2)) if e.has("data.domain") else (0.0, 1.0),
            target=e.get_str("data.target", "cos_pi_diff"),
        )
        if data.points_per_axis < 2:
            e.error("data.points_per_axis", "must be at least 2")
    else:
        for key in ("data.points_per_axis", "data.domain", "data.target"):
            if e.has(key):
                e.error(key, "only applies to data.kind = grid")
        if not e.has("data.path"):
            raise ConfigError("data.kind = csv_file requires data.path")
        data = DataBlock(kind="csv_file", path=e.get_str("data.path", None))

    defaults = SolverConfig()
    try:
        solver = SolverConfig(
            method=e.get_str("solver.method", defaults.method),
            id_inner_tol=e.get_float("solver.id_inner_tol", defaults.id_inner_tol),
            id_max_inner=e.get_int("solver.id_max_inner", defaults.id_max_inner),
            id_max_outer=e.get_int("solver.id_max_outer", defaults.id_max_outer),
            id_jacobian=e.get_str("solver.id_jacobian", defaults.id_jacobian),
            id_levenberg_init=e.get_float("solver.id_levenberg_init", defaults.id_levenberg_init),
            id_backtrack_factor=e.get_float(
                "solver.id_backtrack_factor", defaults.id_backtrack_factor
            ),
            id_max_halvings=e.get_int("solver.id_max_halvings", defaults.id_max_halvings),
            sd_max_iters=e.get_int("solver.sd_max_iters", defaults.sd_max_iters),
            sd_c1=e.get_float("solver.sd_c1", defaults.sd_c1),
            sd_rho=e.get_float("solver.sd_rho", defaults.sd_rho),
            sd_step0=e.get_float("solver.sd_step0", defaults.sd_step0),
            ncg_max_iters=e.get_int("solver.ncg_max_iters", defaults.ncg_max_iters),
            ncg_loss_tol=e.get_float("solver.ncg_loss_tol", defaults.ncg_loss_tol),
            ncg_cg_tol=e.get_float("solver.ncg_cg_tol", 0.0) if e.has("solver.ncg_cg_tol") else None,
        )
    except ValueError as exc:
        raise ConfigError(f"solver settings: {exc}") from None

    landscapes = []
    index = 1
    while e.has(f"output.landscape.{index}.axis1"):
        prefix = f"output.landscape.{index}"
        axis1 = e.get_str(f"{prefix}.axis1", None)
        axis2 = e.get_str(f"{prefix}.axis2", None)
        if axis2 is None:
            raise ConfigError(f"{prefix}.axis2 is required")
        g1 = e.get_floats(f"{prefix}.grid1", 3) if e.has(f"{prefix}.grid1") else (-1.0, 1.0, 41)
        g2 = e.get_floats(f"{prefix}.grid2", 3) if e.has(f"{prefix}.grid2") else (-1.0, 1.0, 41)
        for key, grid in ((f"{prefix}.grid1", g1), (f"{prefix}.grid2", g2)):
            if grid[2] != int(grid[2]) or int(grid[2]) < 1:
                e.error(key, "needs an integer point count of at least 1")
        landscapes.append(
            LandscapeSpec(
                axis1=axis1,
                axis2=axis2,
                grid1=(g1[0], g1[1], int(g1[2])),
                grid2=(g2[0], g2[1], int(g2[2])),
            )
        )
        index += 1
    output = OutputBlock(
        directory=e.get_str("output.directory", "out"),
        emit_trajectory=e.get_bool("output.emit_trajectory", True),
        emit_landscape=e.get_bool("output.emit_landscape", False),
        landscapes=tuple(landscapes),
    )

    stray = e.leftovers()
    if stray:
        lineno = e.entries[stray[0]][1]
        raise ConfigError(f"line {lineno}: unknown key '{stray[0]}'")
    return RunConfig(model=model, init=init, data=data, solver=solver, output=output)


def parse_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config '{path}': {exc}") from None
    return parse_config_text(text)


def serialize_config(cfg: RunConfig) -> str:
    """Write a RunConfig back out as config text (parse round-trips exactly)."""
    lines = []
    m = cfg.model
    lines += [
        f"model.rank = {m.rank}",
        f"model.dim = {m.dim}",
        f"model.terms = {m.terms}",
        f"model.tied = {str(m.tied).lower()}",
    ]
    if cfg.init.values is not None:
        lines.append("init.values = " + ", ".join(formats.format_real(v) for v in cfg.init.values))
    else:
        lines.append(f"init.seed = {cfg.init.seed}")
        for kind, (lo, hi) in cfg.init.ranges:
            lines.append(
                f"init.range.{kind} = {formats.format_real(lo)}, {formats.format_real(hi)}"
            )
    d = cfg.data
    lines.append(f"data.kind = {d.kind}")
    if d.kind == "grid":
        lines += [
            f"data.points_per_axis = {d.points_per_axis}",
            f"data.domain = {formats.format_real(d.domain[0])}, {formats.format_real(d.domain[1])}",
            f"data.target = {d.target}",
        ]
    else:
        lines.append(f"data.path = {d.path}")
    s = cfg.solver
    defaults = SolverConfig()
    lines.append(f"solver.method = {s.method}")
    for f in dataclasses.fields(SolverConfig):
        if f.name == "method":
            continue
        value = getattr(s, f.name)
        if value == getattr(defaults, f.name):
            continue
        if isinstance(value, float):
            lines.append(f"solver.{f.name} = {formats.format_real(value)}")
        else:
            lines.append(f"solver.{f.name} = {value}")
    o = cfg.output
    lines += [
        f"output.directory = {o.directory}",
        f"output.emit_trajectory = {str(o.emit_trajectory).lower()}",
        f"output.emit_landscape = {str(o.emit_landscape).lower()}",
    ]
    for idx, spec in enumerate(o.landscapes, start=1):
        prefix = f"output.landscape.{idx}"
        lines += [
            f"{prefix}.axis1 = {spec.axis1}",
            f"{prefix}.axis2 = {spec.axis2}",
            f"{prefix}.grid1 = "
            + ", ".join([formats.format_real(spec.grid1[0]), formats.format_real(spec.grid1[1]), str(spec.grid1[2])]),
            f"{prefix}.grid2 = "
            + ", ".join([formats.format_real(spec.grid2[0]), formats.format_real(spec.grid2[1]), str(spec.grid2[2])]),
        ]
    return "\n".join(lines) + "\n"


def _model_from_config(cfg: RunConfig) -> ModelParams:
    layout = Layout(cfg.model.rank, cfg.model.dim, cfg.model.terms, cfg.model.tied)
    if cfg.init.values is not None:
        return unflatten(np.asarray(cfg.init.values), layout)
    rng = np.random.default_rng(cfg.init.seed)
    ranges = dict(_DEFAULT_INIT_RANGES)
    ranges.update(dict(cfg.init.ranges))
    vec = np.empty(layout.size)
    for idx, name in enumerate(layout.axis_names()):
        kind = name.split("_", 1)[0]
        lo, hi = ranges[kind]
        vec[idx] = rng.uniform(lo, hi)
    return unflatten(vec, layout)


def _dataset_from_config(cfg: RunConfig):
    if cfg.data.kind == "grid":
        return make_grid_dataset(
            cfg.data.points_per_axis, cfg.data.domain, cfg.model.dim, cfg.data.target
        )
    return formats.read_dataset_csv(cfg.data.path)


_EXIT_BY_TERMINATION = {"Converged": 0, "Stalled": 2, "MaxIters": 2}


def cmd_fit(config_path) -> int:
    """Fit per a config file; artifacts go to the configured output directory."""
    try:
        cfg = parse_config(config_path)
        model = _model_from_config(cfg)
        data = _dataset_from_config(cfg)
        report = _SOLVERS[cfg.solver.method](model, data, cfg.solver)
        out = Path(cfg.output.directory)
        out.mkdir(parents=True, exist_ok=True)
        formats.write_report_json(out / formats.REPORT_NAME, report)
        if cfg.output.emit_trajectory:
            formats.write_trajectory(out / formats.trajectory_name(report.method), report)
        if cfg.output.emit_landscape:
            final_model = unflatten(report.final_params, model.layout)
            _write_landscapes(cfg, final_model, data, {report.method: np.stack(report.trajectory)})
    except (SepfitError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    detail = f" ({report.reason})" if report.reason else ""
    print(
        f"{report.method}: {report.termination}{detail} "
        f"iterations={report.outer_iterations} final_loss={report.final_loss:.6e}"
    )
    if report.termination == "Error":
        print(f"error: {report.reason}", file=sys.stderr)
        return 1
    return _EXIT_BY_TERMINATION.get(report.termination, 1)


def _write_landscapes(cfg: RunConfig, model_ref: ModelParams, data, trajectories) -> None:
    out = Path(cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    if not cfg.output.landscapes:
        raise ConfigError("no output.landscape.<k> blocks configured")
    for spec in cfg.output.landscapes:
        slc = landscape_slice(
            model_ref,
            spec.axis1,
            spec.axis2,
            np.linspace(spec.grid1[0], spec.grid1[1], spec.grid1[2]),
            np.linspace(spec.grid2[0], spec.grid2[1], spec.grid2[2]),
            data,
            trajectories,
        )
        formats.write_landscape(out / formats.landscape_name(spec.axis1, spec.axis2), slc)


def cmd_landscape(config_path) -> int:
    """Write the configured landscape slices, frozen at the config's init."""
    try:
        cfg = parse_config(config_path)
        model = _model_from_config(cfg)
        data = _dataset_from_config(cfg)
        _write_landscapes(cfg, model, data, {})
    except (SepfitError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def cmd_demo(out_dir) -> int:
    """Run the three-solver comparison and print its summary table."""
    try:
        result = run_demo(out_dir)
    except (SepfitError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"{'method':<8}{'iterations':>12}{'walltime_ms':>14}{'final_loss':>16}  termination")
    for method, iterations, walltime_ms, final_loss, termination in result.rows:
        print(
            f"{method:<8}{iterations:>12}{walltime_ms:>14.1f}{final_loss:>16.3e}  {termination}"
        )
    print(f"artifacts written to {Path(out_dir)}")
    return 0


def cmd_verify(seed: int, trials: int, corrupt_gradient: bool = False) -> int:
    """Run the randomized self checks and print one line per property."""
    try:
        report = verify_suite(seed=seed, trials=trials, corrupt_gradient=corrupt_gradient)
    except SepfitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for check in report.checks:
        status = "PASS" if check.passed else "FAIL"
        print(
            f"{status} {check.name}: max_err={check.max_err:.3e} tol={check.tol:.1e} "
            f"({check.trials} trials)"
        )
    return 0 if report.passed else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="sepfit",
        description="Separable exponential-trigonometric least-squares fitting.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit a model per a run-config file")
    p_fit.add_argument("config", help="path to the config file")

    p_demo = sub.add_parser("demo", help="run the three-solver comparison")
    p_demo.add_argument("--out", default="demo_out", help="output directory")

    p_verify = sub.add_parser("verify", help="run the randomized self checks")
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.add_argument("--trials", type=int, default=100)
    p_verify.add_argument(
        "--corrupt-gradient", action="store_true", help=argparse.SUPPRESS
    )

    p_land = sub.add_parser("landscape", help="write loss-landscape slices")
    p_land.add_argument("config", help="path to the config file")

    args = parser.parse_args(argv)
    if args.command == "fit":
        return cmd_fit(args.config)
    if args.command == "demo":
        return cmd_demo(args.out)
    if args.command == "verify":
        return cmd_verify(args.seed, args.trials, args.corrupt_gradient)
    return cmd_landscape(args.config)
