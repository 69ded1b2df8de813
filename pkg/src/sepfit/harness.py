"""Toy-problem construction, the three-solver comparison run, and self checks."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import formats
from .calculus import (
    build_ledger,
    eval_F_direct,
    eval_F_ledger,
    gradient,
    hessian,
    value_gradient_batch,
    value_hessian,
)
from .errors import DimensionMismatch, ExponentOverflow, UnknownTarget
from .model import (
    AtomParams,
    Dataset,
    ModelParams,
    eval_atom,
    eval_model,
    flatten,
    loss,
    unflatten,
)
from .solvers import SolveReport, SolverConfig, infinite_descent, newton_cg, steepest_descent


def _target_cos_pi_diff(X: np.ndarray) -> np.ndarray:
    return np.cos(np.pi * (X[:, 0] - X[:, 1]))


def _target_one(X: np.ndarray) -> np.ndarray:
    return np.ones(X.shape[0])


# name -> (required dimension or None, vectorized target)
TARGETS = {
    "cos_pi_diff": (2, _target_cos_pi_diff),
    "one": (None, _target_one),
}


def make_grid_dataset(points_per_axis: int, domain, dim: int, target: str) -> Dataset:
    """Uniform inclusive grid over domain^dim with targets from the registry.

    Rows are ordered lexicographically by axis (first coordinate slowest).
    """
    if points_per_axis < 2:
        raise ValueError("points_per_axis must be at least 2")
    if target not in TARGETS:
        raise UnknownTarget(f"unknown target function '{target}'")
    want_dim, fn = TARGETS[target]
    if want_dim is not None and want_dim != dim:
        raise DimensionMismatch(f"target '{target}' requires dimension {want_dim}, got {dim}")
    lo, hi = float(domain[0]), float(domain[1])
    axis = np.linspace(lo, hi, points_per_axis)
    grids = np.meshgrid(*([axis] * dim), indexing="ij")
    X = np.stack([g.ravel() for g in grids], axis=-1)
    return Dataset(X, fn(X))


# shared start for the comparison run: close enough to the representable
# optimum that all three methods have something meaningful to do
DEMO_INIT_RANK1 = (1.2, 0.1, 3.0, 0.2)
DEMO_INIT_RANK2 = (0.8, -0.1, 3.3, -1.4)


def demo_init() -> ModelParams:
    """Documented default start: tied, rank 2, one component per atom."""
    atoms = tuple(
        AtomParams([a], [al], [om], [ph]) for a, al, om, ph in (DEMO_INIT_RANK1, DEMO_INIT_RANK2)
    )
    return ModelParams(rank=2, dim=2, terms=1, tied=True, atoms=atoms)


def demo_dataset() -> Dataset:
    """25 x 25 inclusive grid on the unit square, target cos(pi*(x - y))."""
    return make_grid_dataset(25, (0.0, 1.0), 2, "cos_pi_diff")


def exact_demo_params() -> ModelParams:
    """Tied rank-2 parameters reproducing the demo target exactly.

    cos(pi*x)cos(pi*y) + cos(pi*x - pi/2)cos(pi*y - pi/2) = cos(pi*(x-y)).
    """
    atoms = (
        AtomParams([1.0], [0.0], [math.pi], [0.0]),
        AtomParams([1.0], [0.0], [math.pi], [-math.pi / 2]),
    )
    return ModelParams(rank=2, dim=2, terms=1, tied=True, atoms=atoms)


@dataclass(frozen=True, eq=False)
class LandscapeSlice:
    """Loss over a 2-d parameter slice, other coordinates frozen.

    ``axis1``/``axis2`` are (name, flat index) pairs; ``loss_values`` is
    indexed [grid1, grid2] with +inf marking overflowed cells;
    ``trajectories`` maps run names to (T, 2) projections onto the axes.
    """

    axis1: tuple[str, int]
    axis2: tuple[str, int]
    grid1: np.ndarray
    grid2: np.ndarray
    loss_values: np.ndarray
    trajectories: dict


def landscape_slice(
    model_ref: ModelParams,
    axis1: str,
    axis2: str,
    grid1,
    grid2,
    data: Dataset,
    trajectories: dict | None = None,
) -> LandscapeSlice:
    """Loss over the (axis1, axis2) grid around ``model_ref``.

    Cells whose evaluation overflows (or goes non-finite) are recorded as
    the +inf sentinel rather than poisoning neighbours.
    """
    lay = model_ref.layout
    i1 = lay.axis_index(axis1)
    i2 = lay.axis_index(axis2)
    if i1 == i2:
        raise ValueError(f"landscape axes must be distinct, got '{axis1}' twice")
    grid1 = np.asarray(grid1, dtype=float)
    grid2 = np.asarray(grid2, dtype=float)
    base = flatten(model_ref)
    values = np.empty((grid1.size, grid2.size))
    for a, v1 in enumerate(grid1):
        vec = base.copy()
        vec[i1] = v1
        for b, v2 in enumerate(grid2):
            vec[i2] = v2
            try:
                cell = loss(unflatten(vec, lay), data)
            except ExponentOverflow:
                cell = math.inf
            values[a, b] = cell if math.isfinite(cell) else math.inf
    projected = {
        name: np.stack([np.asarray(traj)[:, i1], np.asarray(traj)[:, i2]], axis=-1)
        for name, traj in (trajectories or {}).items()
    }
    return LandscapeSlice((axis1, i1), (axis2, i2), grid1, grid2, values, projected)


# landscape frames for the demo artifacts; chosen to contain both the start
# and the representable optimum with margin
DEMO_LANDSCAPES = (
    ("alpha_1", "phi_1", (-1.0, 1.0), (-math.pi, math.pi)),
    ("A_1", "omega_1", (0.0, 2.0), (1.0, 5.0)),
)


@dataclass
class DemoResult:
    rows: list  # (method, iterations, walltime_ms, final_loss, termination)
    reports: dict  # method -> SolveReport
    files: list  # written paths


def run_demo(out_dir, landscape_points: int = 61) -> DemoResult:
    """Run SD, NCG and ID from the shared start and write the CSV artifacts.

    Produces table1.csv, one trajectory_<method>.csv per solver that ran,
    and the two demo landscape slices frozen at the ID optimum.  A solver
    failure is recorded in its table row without aborting the others.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    data = demo_dataset()
    init = demo_init()
    runs = (
        ("SD", steepest_descent),
        ("NCG", newton_cg),
        ("ID", infinite_descent),
    )
    rows = []
    reports: dict[str, SolveReport] = {}
    for name, solver in runs:
        try:
            rep = solver(init, data, SolverConfig(method=name))
        except Exception as exc:  # per-row failure, keep the rest of the table
            rows.append((name, 0, 0.0, math.nan, f"Error: {exc}"))
            continue
        reports[name] = rep
        rows.append((name, rep.outer_iterations, rep.walltime_ms, rep.final_loss, rep.termination))
    files = []
    table_path = out / formats.TABLE1_NAME
    formats.write_table1(table_path, [r[:4] for r in rows])
    files.append(table_path)
    for name, rep in reports.items():
        path = out / formats.trajectory_name(name)
        formats.write_trajectory(path, rep)
        files.append(path)
    ref_vec = reports["ID"].final_params if "ID" in reports else flatten(init)
    ref_model = unflatten(ref_vec, init.layout)
    trajs = {name: np.stack(rep.trajectory) for name, rep in reports.items()}
    for axis1, axis2, (lo1, hi1), (lo2, hi2) in DEMO_LANDSCAPES:
        slc = landscape_slice(
            ref_model,
            axis1,
            axis2,
            np.linspace(lo1, hi1, landscape_points),
            np.linspace(lo2, hi2, landscape_points),
            data,
            trajs,
        )
        path = out / formats.landscape_name(axis1, axis2)
        formats.write_landscape(path, slc)
        files.append(path)
    return DemoResult(rows=rows, reports=reports, files=files)


# ---------------------------------------------------------------------------
# self-check suite


@dataclass
class PropertyCheck:
    name: str
    trials: int
    max_err: float
    tol: float
    passed: bool


@dataclass
class VerifyReport:
    seed: int
    trials: int
    checks: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def _random_model(rng, rank=None, dim=None, terms=None, tied=None) -> ModelParams:
    rank = int(rng.integers(1, 4)) if rank is None else rank
    dim = int(rng.integers(1, 4)) if dim is None else dim
    terms = int(rng.integers(1, 3)) if terms is None else terms
    tied = bool(rng.integers(0, 2)) if tied is None else tied
    count = rank if tied else rank * dim
    atoms = tuple(
        AtomParams(
            rng.uniform(-2.0, 2.0, terms),
            rng.uniform(-1.0, 1.0, terms),
            rng.uniform(-4.0, 4.0, terms),
            rng.uniform(-math.pi, math.pi, terms),
        )
        for _ in range(count)
    )
    return ModelParams(rank, dim, terms, tied, atoms)


def _random_dataset(rng, dim: int, n: int = 6) -> Dataset:
    return Dataset(rng.uniform(-1.0, 1.0, (n, dim)), rng.uniform(-2.0, 2.0, n))


def _fd_loss_gradient(model, data, step=1e-6) -> np.ndarray:
    base = flatten(model)
    lay = model.layout
    out = np.empty(lay.size)
    for k in range(lay.size):
        hi = base.copy()
        lo = base.copy()
        hi[k] += step
        lo[k] -= step
        out[k] = (loss(unflatten(hi, lay), data) - loss(unflatten(lo, lay), data)) / (2 * step)
    return out


def _fd_gradient_jacobian(model, data, step=1e-5) -> np.ndarray:
    base = flatten(model)
    lay = model.layout
    out = np.empty((lay.size, lay.size))
    for k in range(lay.size):
        hi = base.copy()
        lo = base.copy()
        hi[k] += step
        lo[k] -= step
        out[:, k] = (
            gradient(unflatten(hi, lay), data) - gradient(unflatten(lo, lay), data)
        ) / (2 * step)
    return out


def _fd_value_gradient_jacobian(model, x, step=1e-5) -> np.ndarray:
    base = flatten(model)
    lay = model.layout
    out = np.empty((lay.size, lay.size))
    for k in range(lay.size):
        hi = base.copy()
        lo = base.copy()
        hi[k] += step
        lo[k] -= step
        ghi = value_gradient_batch(unflatten(hi, lay), x[None, :])[0]
        glo = value_gradient_batch(unflatten(lo, lay), x[None, :])[0]
        out[:, k] = (ghi - glo) / (2 * step)
    return out


def _cross_rank_max(M: np.ndarray, layout) -> float:
    worst = 0.0
    for j1 in range(layout.rank):
        for j2 in range(layout.rank):
            if j1 == j2:
                continue
            block = M[layout.rank_slice(j1), layout.rank_slice(j2)]
            if block.size:
                worst = max(worst, float(np.max(np.abs(block))))
    return worst


def verify_suite(seed: int = 0, trials: int = 100, corrupt_gradient: bool = False) -> VerifyReport:
    """Randomized re-checks of the package's core identities.

    ``corrupt_gradient`` is a negative-control hook: it flips the sign of
    one analytic gradient entry before the finite-difference comparison, so
    a healthy suite must report a failure.
    """
    rng = np.random.default_rng(seed)
    checks = []

    def run(name, tol, fn):
        worst = 0.0
        for _ in range(trials):
            worst = max(worst, fn())
        checks.append(PropertyCheck(name, trials, worst, tol, worst <= tol))

    def grad_check():
        m = _random_model(rng)
        d = _random_dataset(rng, m.dim)
        g = gradient(m, d)
        if corrupt_gradient:
            g = g.copy()
            g[0] = -g[0] - 1.0
        fd = _fd_loss_gradient(m, d)
        return float(np.max(np.abs(g - fd))) / (1.0 + float(np.max(np.abs(g))))

    run("gradient_vs_central_fd", 1e-6, grad_check)

    def hessian_check():
        m = _random_model(rng)
        d = _random_dataset(rng, m.dim)
        H = hessian(m, d)
        fd = _fd_gradient_jacobian(m, d)
        return float(np.max(np.abs(H - fd))) / (1.0 + float(np.max(np.abs(H))))

    run("hessian_vs_fd_of_gradient", 1e-5, hessian_check)

    def symmetry_check():
        m = _random_model(rng)
        d = _random_dataset(rng, m.dim)
        H = hessian(m, d)
        return float(np.max(np.abs(H - H.T)))

    run("hessian_exact_symmetry", 0.0, symmetry_check)

    def resummation_check():
        m = _random_model(rng)
        d = _random_dataset(rng, m.dim)
        delta = rng.uniform(-0.5, 0.5, m.layout.size)
        led = eval_F_ledger(build_ledger(m, d), delta)
        direct = eval_F_direct(m, delta, d)
        return float(np.max(np.abs(led - direct))) / (1.0 + float(np.max(np.abs(direct))))

    run("resummation_vs_direct", 1e-10, resummation_check)

    def closure_check():
        a = rng.uniform(-2.0, 2.0)
        al = rng.uniform(-1.0, 1.0)
        om = rng.uniform(0.3, 4.0) * (1 if rng.integers(0, 2) else -1)
        ph = rng.uniform(-math.pi, math.pi)
        x = rng.uniform(-2.0, 2.0)
        h = 1e-6
        src = AtomParams([a], [al], [om], [ph])
        fd = (eval_atom(src, x + h) - eval_atom(src, x - h)) / (2 * h)
        mapped = AtomParams(
            [a * math.hypot(al, om)], [al], [om], [ph + math.atan2(om, al)]
        )
        exact = eval_atom(mapped, x)
        return abs(fd - exact) / (1.0 + abs(exact))

    run("atom_derivative_closure", 1e-6, closure_check)

    def decoupling_check():
        # cross-rank blocks of the model Hessian are structurally zero; the
        # finite-difference probe of the model gradient must agree
        m = _random_model(rng, rank=int(rng.integers(2, 4)))
        x = rng.uniform(-1.0, 1.0, m.dim)
        lay = m.layout
        Hf = value_hessian(m, x)
        if _cross_rank_max(Hf, lay) != 0.0:
            return math.inf
        fd = _cross_rank_max(_fd_value_gradient_jacobian(m, x), lay)
        return fd / (1.0 + float(np.max(np.abs(Hf))))

    run("cross_rank_decoupling", 1e-5, decoupling_check)

    def roundtrip_check():
        m = _random_model(rng)
        vec = rng.uniform(-3.0, 3.0, m.layout.size)
        back = flatten(unflatten(vec, m.layout))
        return 0.0 if back.tobytes() == vec.tobytes() else math.inf

    run("flatten_unflatten_roundtrip", 0.0, roundtrip_check)

    def periodicity_check():
        m = _random_model(rng, rank=1, dim=1)
        atom = m.atoms[0]
        x = rng.uniform(-2.0, 2.0)
        v1 = eval_atom(atom, x)
        v2 = eval_atom(AtomParams(atom.A, atom.alpha, atom.omega, atom.phi + 2 * math.pi), x)
        return abs(v1 - v2) / (1.0 + abs(v1))

    run("phase_periodicity", 1e-12, periodicity_check)

    def additivity_check():
        m = _random_model(rng)
        x = rng.uniform(-1.0, 1.0, m.dim)
        total = eval_model(m, x)
        parts = []
        for j in range(m.rank):
            sub_atoms = (
                (m.atoms[j],) if m.tied else tuple(m.atoms[j * m.dim : (j + 1) * m.dim])
            )
            parts.append(eval_model(ModelParams(1, m.dim, m.terms, m.tied, sub_atoms), x))
        scale = 1.0 + sum(abs(p) for p in parts)
        return abs(total - sum(parts)) / scale

    run("rank_additivity", 1e-14, additivity_check)

    return VerifyReport(seed=seed, trials=trials, checks=checks)
