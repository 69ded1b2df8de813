"""Separable exponential-trigonometric least-squares models.

Fit sums of rank-separable products of damped-harmonic atoms either the
classical way (steepest descent, Newton-CG) or by the one-shot trainer:
resum the gradient of the shifted objective in closed form, root-find that
resummed system with a damped Newton iteration, and apply the whole update
at once.
"""

from .calculus import (
    TermLedger,
    build_ledger,
    eval_F_direct,
    eval_F_ledger,
    eval_J,
    gradient,
    hessian,
    value_gradient_batch,
    value_hessian,
)
from .errors import (
    ConfigError,
    DimensionMismatch,
    ExponentOverflow,
    LayoutMismatch,
    LineSearchFailed,
    NonFiniteInput,
    NotDescentDirection,
    SepfitError,
    UnknownTarget,
)
from .harness import (
    LandscapeSlice,
    VerifyReport,
    demo_dataset,
    demo_init,
    exact_demo_params,
    landscape_slice,
    make_grid_dataset,
    run_demo,
    verify_suite,
)
from .model import (
    AtomParams,
    Dataset,
    Layout,
    ModelParams,
    atom_carriers,
    eval_atom,
    eval_model,
    eval_model_batch,
    expand_params,
    flatten,
    loss,
    shift_params,
    unflatten,
)
from .solvers import (
    SnrResult,
    SolveReport,
    SolverConfig,
    armijo_search,
    infinite_descent,
    newton_cg,
    snr_solve,
    steepest_descent,
    truncated_cg,
)

__version__ = "0.1.0"

__all__ = [
    "AtomParams",
    "ConfigError",
    "Dataset",
    "DimensionMismatch",
    "ExponentOverflow",
    "LandscapeSlice",
    "Layout",
    "LayoutMismatch",
    "LineSearchFailed",
    "ModelParams",
    "NonFiniteInput",
    "NotDescentDirection",
    "SepfitError",
    "SnrResult",
    "SolveReport",
    "SolverConfig",
    "TermLedger",
    "UnknownTarget",
    "VerifyReport",
    "armijo_search",
    "atom_carriers",
    "build_ledger",
    "demo_dataset",
    "demo_init",
    "eval_F_direct",
    "eval_F_ledger",
    "eval_J",
    "eval_atom",
    "eval_model",
    "eval_model_batch",
    "exact_demo_params",
    "expand_params",
    "flatten",
    "gradient",
    "hessian",
    "infinite_descent",
    "landscape_slice",
    "loss",
    "make_grid_dataset",
    "newton_cg",
    "run_demo",
    "shift_params",
    "snr_solve",
    "steepest_descent",
    "truncated_cg",
    "unflatten",
    "value_gradient_batch",
    "value_hessian",
    "verify_suite",
]
