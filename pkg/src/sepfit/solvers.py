"""Root-finding trainer and classical baseline minimizers.

The primary trainer treats fitting as solving F(delta) = 0, where F is the
resummed shifted gradient from ``calculus``: build the term ledger once at
the current parameters, then run a damped Newton iteration in delta-space
and apply the accepted update in one step.  Steepest descent with Armijo
backtracking and a line-search Newton-CG minimizer serve as baselines, run
from the same start on the same data.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .calculus import build_ledger, eval_F_ledger, eval_J, gradient, hessian
from .errors import (
    ExponentOverflow,
    LayoutMismatch,
    LineSearchFailed,
    NotDescentDirection,
    SepfitError,
)
from .model import Dataset, ModelParams, flatten, loss, shift_params

_METHODS = ("ID", "SD", "NCG")
_JACOBIAN_MODES = ("full", "block")

# gradient inf-norm below which a descent method is simply done
_ZERO_GRAD_TOL = 1e-15

# ceiling for the Levenberg shift escalation before declaring a stall
_LEVENBERG_MAX = 1e16


@dataclass(frozen=True)
class SolverConfig:
    """Settings for all three methods; unrelated fields are simply unused."""

    method: str = "ID"
    id_inner_tol: float = 1e-12  # inf-norm target for the root residual F
    id_max_inner: int = 100
    id_max_outer: int = 1
    id_jacobian: str = "full"  # "full" | "block"
    id_levenberg_init: float = 1e-8  # shift seed: *10 on reject, /10 on accept
    id_backtrack_factor: float = 0.5
    id_max_halvings: int = 40
    sd_max_iters: int = 1000
    sd_c1: float = 1e-4
    sd_rho: float = 0.5
    sd_step0: float = 1.0
    ncg_max_iters: int = 50
    ncg_loss_tol: float = 1e-8
    ncg_cg_tol: float | None = None  # None: min(0.5, sqrt(|g|)) * |g| per step

    def __post_init__(self):
        if self.method not in _METHODS:
            raise ValueError(f"method must be one of {_METHODS}, got '{self.method}'")
        if self.id_jacobian not in _JACOBIAN_MODES:
            raise ValueError(f"id_jacobian must be one of {_JACOBIAN_MODES}")
        for name in ("id_inner_tol", "id_levenberg_init", "sd_step0", "ncg_loss_tol"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        for name in ("id_max_inner", "id_max_outer", "sd_max_iters", "ncg_max_iters"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        for name in ("id_backtrack_factor", "sd_rho"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ValueError(f"{name} must lie strictly between 0 and 1")
        if not 0.0 < self.sd_c1 < 1.0:
            raise ValueError("sd_c1 must lie strictly between 0 and 1")
        if self.id_max_halvings < 0:
            raise ValueError("id_max_halvings must be non-negative")


@dataclass
class SolveReport:
    """Outcome of one solver run.

    ``trajectory`` holds flat parameter snapshots, aligned index-for-index
    with ``loss_trace`` and ``grad_norm_trace``.  ``termination`` is one of
    Converged, MaxIters, Stalled, Error; ``reason`` carries detail for the
    non-converged cases.
    """

    method: str
    outer_iterations: int
    inner_iterations: int
    loss_trace: list[float]
    grad_norm_trace: list[float]
    trajectory: list[np.ndarray]
    walltime_ms: float
    termination: str
    reason: str
    final_params: np.ndarray
    final_loss: float


@dataclass
class SnrResult:
    """Record of one damped-Newton inner solve on F(delta) = 0."""

    inner_iterations: int
    residual_norms: list[float]  # inf-norm of F per accepted iterate, start included
    termination: str
    reason: str = ""


def _inf_norm(v) -> float:
    return float(np.max(np.abs(v))) if np.size(v) else 0.0


def _check_mask(free_mask, size: int) -> np.ndarray:
    if free_mask is None:
        return np.ones(size, dtype=bool)
    mask = np.asarray(free_mask, dtype=bool)
    if mask.shape != (size,):
        raise LayoutMismatch(f"free mask of shape {mask.shape} does not fit K={size}")
    if not mask.any():
        raise LayoutMismatch("free mask leaves no coordinate free")
    return mask


def _require_method(cfg: SolverConfig, expected: str) -> None:
    if cfg.method != expected:
        raise ValueError(f"config selects method '{cfg.method}', not '{expected}'")


def _solve_damped(J, F, lam, eye):
    """Newton direction from (J + lam*I) d = -F, or None if unusable."""
    try:
        step = np.linalg.solve(J + lam * eye, -F)
    except np.linalg.LinAlgError:
        return None
    return step if np.all(np.isfinite(step)) else None


def snr_solve(model: ModelParams, data: Dataset, cfg: SolverConfig, free_mask=None):
    """Damped Newton iteration on the resummed root system F(delta) = 0.

    Builds the term ledger at ``model`` once, then repeats: solve
    (J + lam*I) d = -F with J the shifted Hessian (mode per config),
    backtrack on the merit 0.5*|F|^2 until it decreases, escalating the
    Levenberg shift tenfold whenever a direction is rejected and relaxing it
    tenfold on acceptance.  Exponent overflows during a trial merely shorten
    the step.  ``free_mask`` restricts the solve to a coordinate subset;
    frozen coordinates keep delta = 0.

    Returns (delta, SnrResult).
    """
    lay = model.layout
    mask = _check_mask(free_mask, lay.size)
    ledger = build_ledger(model, data)
    delta = np.zeros(lay.size)
    F = eval_F_ledger(ledger, delta)[mask]
    norms = [_inf_norm(F)]
    if norms[0] <= cfg.id_inner_tol:
        return delta, SnrResult(0, norms, "Converged")
    merit = 0.5 * float(F @ F)
    lam = cfg.id_levenberg_init
    eye = np.eye(int(mask.sum()))
    for it in range(1, cfg.id_max_inner + 1):
        J = eval_J(model, delta, data, cfg.id_jacobian)[np.ix_(mask, mask)]
        accepted = False
        while lam <= _LEVENBERG_MAX:
            step = _solve_damped(J, F, lam, eye)
            if step is None:
                lam *= 10.0
                continue
            t = 1.0
            for _ in range(cfg.id_max_halvings + 1):
                trial = delta.copy()
                trial[mask] += t * step
                try:
                    F_trial = eval_F_ledger(ledger, trial)[mask]
                except ExponentOverflow:
                    t *= cfg.id_backtrack_factor
                    continue
                if np.all(np.isfinite(F_trial)):
                    # the square may overflow to inf for huge residuals, which
                    # simply rejects the trial like any other non-improvement
                    with np.errstate(over="ignore"):
                        m_trial = 0.5 * float(F_trial @ F_trial)
                    if m_trial < merit:
                        delta, F, merit = trial, F_trial, m_trial
                        accepted = True
                        break
                t *= cfg.id_backtrack_factor
            if accepted:
                lam = max(lam / 10.0, cfg.id_levenberg_init)
                break
            lam *= 10.0
        if not accepted:
            return delta, SnrResult(
                it - 1, norms, "Stalled", "merit not reduced within the backtracking budget"
            )
        norms.append(_inf_norm(F))
        if norms[-1] <= cfg.id_inner_tol:
            return delta, SnrResult(it, norms, "Converged")
    return delta, SnrResult(
        cfg.id_max_inner, norms, "MaxIters", "inner iteration budget exhausted"
    )


def infinite_descent(model: ModelParams, data: Dataset, cfg: SolverConfig) -> SolveReport:
    """Outer loop of the one-shot trainer.

    Each round resums the gradient at the current parameters (via the term
    ledger), runs ``snr_solve`` to a root of F, and applies the whole update
    at once.  A run whose final loss exceeds the starting loss is reported
    Stalled: roots of the gradient need not be minima.
    """
    _require_method(cfg, "ID")
    start = time.perf_counter()
    current = model
    loss_trace = [loss(current, data)]
    grad_norm_trace = [_inf_norm(gradient(current, data))]
    trajectory = [flatten(current)]
    outer = 0
    inner = 0
    termination, reason = "MaxIters", "outer round budget exhausted"
    for _ in range(cfg.id_max_outer):
        try:
            delta, frag = snr_solve(current, data, cfg)
        except SepfitError as exc:
            termination, reason = "Error", str(exc)
            break
        inner += frag.inner_iterations
        if frag.termination == "Converged" and frag.inner_iterations == 0:
            termination, reason = "Converged", "already stationary at the start"
            break
        current = shift_params(current, delta)
        outer += 1
        loss_trace.append(loss(current, data))
        grad_norm_trace.append(_inf_norm(gradient(current, data)))
        trajectory.append(flatten(current))
        termination, reason = frag.termination, frag.reason
        if frag.termination in ("Converged", "Stalled"):
            break
    if loss_trace[-1] > loss_trace[0]:
        termination = "Stalled"
        reason = (
            f"stationary point raised the loss ({loss_trace[0]:.6g} -> {loss_trace[-1]:.6g})"
        )
    walltime_ms = (time.perf_counter() - start) * 1e3
    return SolveReport(
        method="ID",
        outer_iterations=outer,
        inner_iterations=inner,
        loss_trace=loss_trace,
        grad_norm_trace=grad_norm_trace,
        trajectory=trajectory,
        walltime_ms=walltime_ms,
        termination=termination,
        reason=reason,
        final_params=trajectory[-1],
        final_loss=loss(current, data),
    )


def armijo_search(
    model: ModelParams,
    direction,
    data: Dataset,
    c1: float,
    rho: float,
    t0: float,
) -> float:
    """Largest step t in {t0 * rho^k, k <= 60} satisfying the Armijo condition.

    Trial evaluations that overflow the exponent guard or produce a
    non-finite loss count as failures and shorten the step; the overflow is
    never propagated.  Raises NotDescentDirection for non-negative slopes
    and LineSearchFailed when no step in the schedule passes.
    """
    direction = np.asarray(direction, dtype=float)
    g = gradient(model, data)
    slope = float(g @ direction)
    if not slope < 0.0:
        raise NotDescentDirection(f"directional derivative {slope:.6g} is not negative")
    base = loss(model, data)
    t = float(t0)
    for _ in range(61):
        try:
            # large trial steps may overflow to inf, which the finiteness
            # check below treats as an ordinary rejection
            with np.errstate(over="ignore", invalid="ignore"):
                trial = loss(shift_params(model, t * direction), data)
        except ExponentOverflow:
            t *= rho
            continue
        if math.isfinite(trial) and trial <= base + c1 * t * slope:
            return t
        t *= rho
    raise LineSearchFailed("no Armijo step within 60 halvings")


def steepest_descent(
    model: ModelParams, data: Dataset, cfg: SolverConfig, free_mask=None
) -> SolveReport:
    """Gradient descent with Armijo backtracking.

    Runs exactly ``sd_max_iters`` iterations (its contract) unless the
    gradient inf-norm drops below 1e-15 first; either way the run counts as
    Converged.  ``free_mask`` zeroes the step on frozen coordinates.
    """
    _require_method(cfg, "SD")
    start = time.perf_counter()
    mask = _check_mask(free_mask, model.layout.size)
    current = model
    loss_trace = [loss(current, data)]
    grad_norm_trace: list[float] = []
    trajectory = [flatten(current)]
    termination, reason = "Converged", ""
    iters = 0
    for _ in range(cfg.sd_max_iters):
        g = gradient(current, data) * mask
        gnorm = _inf_norm(g)
        grad_norm_trace.append(gnorm)
        if gnorm < _ZERO_GRAD_TOL:
            reason = "gradient vanished early"
            break
        try:
            t = armijo_search(current, -g, data, cfg.sd_c1, cfg.sd_rho, cfg.sd_step0)
        except LineSearchFailed as exc:
            termination, reason = "Stalled", str(exc)
            break
        current = shift_params(current, -t * g)
        iters += 1
        loss_trace.append(loss(current, data))
        trajectory.append(flatten(current))
    if len(grad_norm_trace) < len(loss_trace):
        grad_norm_trace.append(_inf_norm(gradient(current, data) * mask))
    walltime_ms = (time.perf_counter() - start) * 1e3
    return SolveReport(
        method="SD",
        outer_iterations=iters,
        inner_iterations=0,
        loss_trace=loss_trace,
        grad_norm_trace=grad_norm_trace,
        trajectory=trajectory,
        walltime_ms=walltime_ms,
        termination=termination,
        reason=reason,
        final_params=trajectory[-1],
        final_loss=loss(current, data),
    )


def truncated_cg(H, g, tol: float, max_iter: int | None = None):
    """Conjugate gradients on H p = -g, truncated at negative curvature.

    Stops when the residual 2-norm falls to ``tol`` or curvature along a
    search direction is non-positive (returning the steepest-descent
    direction if that happens on the very first step).  Returns (p, iters).
    """
    g = np.asarray(g, dtype=float)
    n = g.shape[0]
    limit = max_iter if max_iter is not None else 4 * n
    p = np.zeros(n)
    r = g.copy()  # residual of H p + g at p = 0
    d = -r
    rr = float(r @ r)
    for it in range(limit):
        if math.sqrt(rr) <= tol:
            return p, it
        Hd = H @ d
        curvature = float(d @ Hd)
        if curvature <= 0.0:
            return (-g if it == 0 else p), it
        a = rr / curvature
        p = p + a * d
        r = r + a * Hd
        rr_new = float(r @ r)
        d = -r + (rr_new / rr) * d
        rr = rr_new
    return p, limit


def newton_cg(model: ModelParams, data: Dataset, cfg: SolverConfig) -> SolveReport:
    """Line-search Newton-CG on the squared-error objective.

    Each outer step solves the Newton system by truncated CG (residual
    target min(0.5, sqrt(|g|)) * |g| unless pinned in the config) and takes
    an Armijo-backtracked step.  Stops when the loss falls below
    ``ncg_loss_tol`` or after ``ncg_max_iters`` outer iterations.
    """
    _require_method(cfg, "NCG")
    start = time.perf_counter()
    current = model
    loss_now = loss(current, data)
    loss_trace = [loss_now]
    grad_norm_trace: list[float] = []
    trajectory = [flatten(current)]
    iters = 0
    cg_total = 0
    stalled_reason = ""
    while iters < cfg.ncg_max_iters and loss_now >= cfg.ncg_loss_tol:
        g = gradient(current, data)
        grad_norm_trace.append(_inf_norm(g))
        if grad_norm_trace[-1] < _ZERO_GRAD_TOL:
            stalled_reason = "stationary point above the loss tolerance"
            break
        gnorm2 = float(np.linalg.norm(g))
        cg_target = (
            cfg.ncg_cg_tol
            if cfg.ncg_cg_tol is not None
            else min(0.5, math.sqrt(gnorm2)) * gnorm2
        )
        H = hessian(current, data)
        p, used = truncated_cg(H, g, cg_target)
        cg_total += used
        if float(g @ p) >= 0.0:
            p = -g  # CG returned a non-descent direction; fall back
        try:
            t = armijo_search(current, p, data, cfg.sd_c1, cfg.sd_rho, 1.0)
        except LineSearchFailed as exc:
            stalled_reason = str(exc)
            break
        current = shift_params(current, t * p)
        iters += 1
        loss_now = loss(current, data)
        loss_trace.append(loss_now)
        trajectory.append(flatten(current))
    if len(grad_norm_trace) < len(loss_trace):
        grad_norm_trace.append(_inf_norm(gradient(current, data)))
    if loss_now < cfg.ncg_loss_tol:
        termination, reason = "Converged", ""
    elif stalled_reason:
        termination, reason = "Stalled", stalled_reason
    else:
        termination, reason = "MaxIters", "outer iteration budget exhausted"
    walltime_ms = (time.perf_counter() - start) * 1e3
    return SolveReport(
        method="NCG",
        outer_iterations=iters,
        inner_iterations=cg_total,
        loss_trace=loss_trace,
        grad_norm_trace=grad_norm_trace,
        trajectory=trajectory,
        walltime_ms=walltime_ms,
        termination=termination,
        reason=reason,
        final_params=trajectory[-1],
        final_loss=loss(current, data),
    )
