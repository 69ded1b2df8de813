"""Separable exponential-trigonometric models.

The model value at a point x in R^d is a sum of ``rank`` separable terms,
each a product of one univariate atom per coordinate:

    f(x) = sum_j  prod_i  psi[j,i](x_i)

where every atom is a damped harmonic sum over ``terms`` components,

    psi(x) = sum_p  A_p * exp(alpha_p * x) * cos(omega_p * x + phi_p).

Each component is the real part of an amplitude-scaled complex carrier
u_p(x) = exp(alpha_p*x + i*(omega_p*x + phi_p)); keeping the carrier
explicit is what lets ``calculus`` apply parameter shifts in closed form
instead of re-evaluating the model.

With ``tied=True`` the d atoms of one rank share a single parameter set, so
the model holds 4*terms*rank scalars; untied models hold 4*terms*rank*dim.
Flat parameter vectors use the canonical ordering rank-major, then dimension
(untied only), then component, then (A, alpha, omega, phi).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    ExponentOverflow,
    LayoutMismatch,
    NonFiniteInput,
)

# |alpha * x| beyond this would overflow double-precision exp.
EXP_GUARD = 700.0

PARAM_KINDS = ("A", "alpha", "omega", "phi")


def _frozen_array(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float, copy=True)
    arr = np.atleast_1d(arr)
    if arr.ndim != 1:
        raise LayoutMismatch(f"{name} must be a scalar or a 1-d sequence")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInput(f"{name} contains NaN or Inf")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class AtomParams:
    """One atom's parameters, each an array of length ``terms``."""

    A: np.ndarray
    alpha: np.ndarray
    omega: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        for name in PARAM_KINDS:
            object.__setattr__(self, name, _frozen_array(getattr(self, name), name))
        n = self.A.shape[0]
        if n < 1:
            raise LayoutMismatch("an atom needs at least one component")
        for name in ("alpha", "omega", "phi"):
            if getattr(self, name).shape[0] != n:
                raise LayoutMismatch("A, alpha, omega, phi must have equal length")

    @property
    def terms(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True)
class Layout:
    """Shape descriptor for the canonical flat parameter ordering."""

    rank: int
    dim: int
    terms: int
    tied: bool

    def __post_init__(self):
        if self.rank < 1 or self.dim < 1 or self.terms < 1:
            raise LayoutMismatch("rank, dim and terms must all be >= 1")

    @property
    def size(self) -> int:
        """Number of scalar parameters K."""
        per_rank = 4 * self.terms * (1 if self.tied else self.dim)
        return per_rank * self.rank

    def rank_slice(self, j: int) -> slice:
        """Contiguous coordinate range of rank ``j`` (0-based)."""
        if not 0 <= j < self.rank:
            raise LayoutMismatch(f"rank index {j} out of range")
        per_rank = self.size // self.rank
        return slice(j * per_rank, (j + 1) * per_rank)

    def axis_names(self) -> list[str]:
        """Human-readable name per flat coordinate, in canonical order.

        Tied models name coordinates ``A_j``, ``alpha_j``, ``omega_j``,
        ``phi_j`` with j the 1-based rank; untied models append the 1-based
        dimension (``A_j_i``).  Models with more than one component per atom
        append the component index as a final suffix.
        """
        names = []
        for j in range(self.rank):
            for i in ([None] if self.tied else range(self.dim)):
                for p in range(self.terms):
                    for kind in PARAM_KINDS:
                        parts = [kind, str(j + 1)]
                        if i is not None:
                            parts.append(str(i + 1))
                        if self.terms > 1:
                            parts.append(str(p + 1))
                        names.append("_".join(parts))
        return names

    def axis_index(self, name: str) -> int:
        """Flat coordinate index of a named parameter axis."""
        try:
            return self.axis_names().index(name)
        except ValueError:
            raise LayoutMismatch(f"unknown parameter axis '{name}'") from None


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Full parameter set: ``rank`` separable terms over ``dim`` coordinates.

    ``atoms`` is rank-major; untied models list the per-dimension atoms of a
    rank consecutively.
    """

    rank: int
    dim: int
    terms: int
    tied: bool
    atoms: tuple[AtomParams, ...]

    def __post_init__(self):
        if self.rank < 1 or self.dim < 1 or self.terms < 1:
            raise LayoutMismatch("rank, dim and terms must all be >= 1")
        object.__setattr__(self, "atoms", tuple(self.atoms))
        expected = self.rank if self.tied else self.rank * self.dim
        if len(self.atoms) != expected:
            raise LayoutMismatch(
                f"expected {expected} atom parameter sets, got {len(self.atoms)}"
            )
        for atom in self.atoms:
            if atom.terms != self.terms:
                raise LayoutMismatch("every atom must carry the model's component count")

    @property
    def layout(self) -> Layout:
        return Layout(self.rank, self.dim, self.terms, self.tied)

    def atom(self, j: int, i: int) -> AtomParams:
        """Atom used by rank j at coordinate i (tied ranks share one set)."""
        return self.atoms[j] if self.tied else self.atoms[j * self.dim + i]


@dataclass(frozen=True, eq=False)
class Dataset:
    """Sample points ``x`` (N x d) with scalar targets ``y`` (length N)."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.array(self.x, dtype=float, copy=True)
        y = np.array(self.y, dtype=float, copy=True)
        if x.ndim != 2 or x.shape[0] < 1:
            raise DimensionMismatch("x must be a non-empty N x d matrix")
        if y.shape != (x.shape[0],):
            raise DimensionMismatch("y must have one entry per row of x")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise NonFiniteInput("dataset contains NaN or Inf")
        x.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]


def guard_exponents(alpha, X) -> None:
    """Raise ExponentOverflow if any |alpha * x| exceeds the exp guard.

    ``alpha`` is broadcast of shape (rank, dim, terms) against points X of
    shape (N, d); scalar combinations are accepted too.
    """
    alpha = np.asarray(alpha, dtype=float)
    X = np.asarray(X, dtype=float)
    if alpha.ndim == 3 and X.ndim == 2:
        # per-dimension max keeps the check exact without forming the full product
        amax = np.abs(alpha).max(axis=(0, 2))  # (d,)
        xmax = np.abs(X).max(axis=0)  # (d,)
        peak = float(np.max(amax * xmax)) if X.size else 0.0
    else:
        peak = float(np.max(np.abs(alpha) * np.abs(X))) if X.size else 0.0
    if peak > EXP_GUARD:
        raise ExponentOverflow(
            f"|alpha*x| reaches {peak:.6g}, beyond the exp guard {EXP_GUARD:g}"
        )


def _check_point(x, dim: int) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.shape != (dim,):
        raise DimensionMismatch(f"expected a point of dimension {dim}, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInput("input point contains NaN or Inf")
    return arr


def _check_points(X, dim: int) -> np.ndarray:
    arr = np.asarray(X, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise DimensionMismatch(f"expected an N x {dim} point matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInput("input points contain NaN or Inf")
    return arr


def eval_atom(params: AtomParams, x: float) -> float:
    """Value of one atom at a scalar input."""
    x = float(x)
    if not math.isfinite(x):
        raise NonFiniteInput("atom input is NaN or Inf")
    if float(np.max(np.abs(params.alpha))) * abs(x) > EXP_GUARD:
        raise ExponentOverflow(f"|alpha*x| exceeds the exp guard {EXP_GUARD:g}")
    return float(
        np.sum(params.A * np.exp(params.alpha * x) * np.cos(params.omega * x + params.phi))
    )


def atom_carriers(params: AtomParams, x) -> np.ndarray:
    """Unit-amplitude complex carriers exp(alpha*x + i*(omega*x + phi)).

    ``x`` may be a scalar (returns shape (terms,)) or a 1-d array (returns
    shape (n, terms)).  Amplitudes A are deliberately not applied.
    """
    xa = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(xa)):
        raise NonFiniteInput("carrier input is NaN or Inf")
    if xa.size and float(np.max(np.abs(params.alpha)) * np.max(np.abs(xa))) > EXP_GUARD:
        raise ExponentOverflow(f"|alpha*x| exceeds the exp guard {EXP_GUARD:g}")
    scalar = xa.ndim == 0
    xa = np.atleast_1d(xa)[:, None]
    u = np.exp(params.alpha * xa + 1j * (params.omega * xa + params.phi))
    return u[0] if scalar else u


def expand_params(model: ModelParams):
    """Per-(rank, dimension, component) parameter arrays, each (rank, dim, terms).

    Tied models broadcast each rank's single atom across all dimensions.
    """
    r, d, P = model.rank, model.dim, model.terms
    A = np.empty((r, d, P))
    alpha = np.empty((r, d, P))
    omega = np.empty((r, d, P))
    phi = np.empty((r, d, P))
    for j in range(r):
        for i in range(d):
            atom = model.atom(j, i)
            A[j, i] = atom.A
            alpha[j, i] = atom.alpha
            omega[j, i] = atom.omega
            phi[j, i] = atom.phi
    return A, alpha, omega, phi


def _batch_atom_values(model: ModelParams, X: np.ndarray) -> np.ndarray:
    """Atom values psi for every (rank, sample, dimension), shape (r, N, d)."""
    A, alpha, omega, phi = expand_params(model)
    guard_exponents(alpha, X)
    xe = X[None, :, :, None]
    growth = np.exp(alpha[:, None, :, :] * xe)
    angle = omega[:, None, :, :] * xe + phi[:, None, :, :]
    return np.sum(A[:, None, :, :] * growth * np.cos(angle), axis=-1)


def eval_model_batch(model: ModelParams, X) -> np.ndarray:
    """Model values at every row of ``X``, shape (N,)."""
    X = _check_points(X, model.dim)
    psi = _batch_atom_values(model, X)
    return np.sum(np.prod(psi, axis=2), axis=0)


def eval_model(model: ModelParams, x) -> float:
    """Model value at a single point of dimension ``model.dim``."""
    x = _check_point(x, model.dim)
    return float(eval_model_batch(model, x[None, :])[0])


def loss(model: ModelParams, data: Dataset) -> float:
    """Sum of squared residuals over the dataset."""
    if data.dim != model.dim:
        raise DimensionMismatch(
            f"model dimension {model.dim} does not match dataset dimension {data.dim}"
        )
    resid = eval_model_batch(model, data.x) - data.y
    return float(np.dot(resid, resid))


def flatten(model: ModelParams) -> np.ndarray:
    """Canonical flat parameter vector of length ``model.layout.size``."""
    blocks = [
        np.stack([atom.A, atom.alpha, atom.omega, atom.phi], axis=-1).ravel()
        for atom in model.atoms
    ]
    return np.concatenate(blocks)


def unflatten(values, layout: Layout) -> ModelParams:
    """Rebuild ModelParams from a flat vector laid out per ``layout``."""
    arr = np.asarray(values, dtype=float)
    if arr.shape != (layout.size,):
        raise LayoutMismatch(
            f"vector of length {arr.shape} does not fit layout size {layout.size}"
        )
    per_atom = 4 * layout.terms
    count = layout.rank if layout.tied else layout.rank * layout.dim
    atoms = []
    for k in range(count):
        chunk = arr[k * per_atom : (k + 1) * per_atom].reshape(layout.terms, 4)
        atoms.append(AtomParams(chunk[:, 0], chunk[:, 1], chunk[:, 2], chunk[:, 3]))
    return ModelParams(layout.rank, layout.dim, layout.terms, layout.tied, tuple(atoms))


def shift_params(model: ModelParams, delta) -> ModelParams:
    """Model with ``delta`` added to its flat parameter vector."""
    delta = np.asarray(delta, dtype=float)
    lay = model.layout
    if delta.shape != (lay.size,):
        raise LayoutMismatch(
            f"update of shape {delta.shape} does not fit layout size {lay.size}"
        )
    return unflatten(flatten(model) + delta, lay)
