"""Derivatives of the squared-error objective and resummed shifted gradients.

For Phi(theta) = sum_n (f(x_n; theta) - y_n)^2 this module provides the
exact analytic gradient and Hessian, plus two routes to the shifted gradient
grad Phi(theta + delta):

* ``eval_F_direct`` re-evaluates the gradient at the shifted parameters;
* ``eval_F_ledger`` stores each atom component's complex carrier and each
  atom's partner product once at the base point, then applies the shift as
  the closed-form multiplier exp(d_alpha*x + i*(d_omega*x + d_phi)) on the
  stored carriers and adds d_A to the stored amplitudes.

Both routes compute the same function; the ledger route never revisits the
model parameters, only the stored factors.  F(delta) = grad Phi(theta+delta)
and its Jacobian (the Hessian at the shifted point, optionally restricted to
the rank-diagonal blocks) are what the Newton inner solver iterates on.

Atom partials, with u the unit carrier and partner the product of the
rank's other atoms:

    d/dA     =        Re u  * partner
    d/dalpha =  A x * Re u  * partner
    d/domega = -A x * Im u  * partner
    d/dphi   = -A   * Im u  * partner

Tied parameters accumulate these rows over the dimensions they feed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, LayoutMismatch
from .model import (
    Dataset,
    Layout,
    ModelParams,
    _check_point,
    _check_points,
    expand_params,
    guard_exponents,
    shift_params,
)


def _check_data(model: ModelParams, data: Dataset) -> None:
    if data.dim != model.dim:
        raise DimensionMismatch(
            f"model dimension {model.dim} does not match dataset dimension {data.dim}"
        )


def _carriers(alpha, omega, phi, X) -> np.ndarray:
    """Complex carriers exp(alpha*x + i(omega*x + phi)), shape (r, N, d, P)."""
    guard_exponents(alpha, X)
    xe = X[None, :, :, None]
    return np.exp(alpha[:, None, :, :] * xe + 1j * (omega[:, None, :, :] * xe + phi[:, None, :, :]))


def _atom_values(A, u) -> np.ndarray:
    """psi per (rank, sample, dimension): amplitudes against carrier real parts."""
    return np.sum(A[:, None, :, :] * u.real, axis=-1)


def _partner_products(psi) -> np.ndarray:
    """Exclusive products over the dimension axis: out[..., i] = prod_{s != i} psi[..., s].

    Computed from prefix and suffix cumulative products so zero atom values
    stay exact (no division).
    """
    shape = psi.shape[:-1] + (1,)
    fwd = np.cumprod(psi, axis=-1)
    rev = np.cumprod(psi[..., ::-1], axis=-1)[..., ::-1]
    left = np.concatenate([np.ones(shape), fwd[..., :-1]], axis=-1)
    right = np.concatenate([rev[..., 1:], np.ones(shape)], axis=-1)
    return left * right


def _dpsi(A, u, X) -> np.ndarray:
    """Atom partials per component, shape (r, N, d, P, 4) ordered (A, alpha, omega, phi)."""
    xe = X[None, :, :, None]
    Ae = A[:, None, :, :]
    uR = u.real
    uI = u.imag
    return np.stack([uR, Ae * xe * uR, -Ae * xe * uI, -Ae * uI], axis=-1)


def _contract_rows(rows, layout: Layout) -> np.ndarray:
    """(r, N, d, P, 4) per-parameter rows -> (N, K) in canonical flat order."""
    n = rows.shape[1]
    out = np.moveaxis(rows, 1, 0)
    if layout.tied:
        out = out.sum(axis=2)
    return out.reshape(n, layout.size)


def _forward(A, alpha, omega, phi, X):
    u = _carriers(alpha, omega, phi, X)
    psi = _atom_values(A, u)
    partner = _partner_products(psi)
    values = np.sum(np.prod(psi, axis=2), axis=0)
    return u, psi, partner, values


def _split_delta(delta, layout: Layout):
    """Flat update -> per-(rank, dim, component) shift arrays (tied broadcasts over dim)."""
    if layout.tied:
        quad = delta.reshape(layout.rank, 1, layout.terms, 4)
        quad = np.broadcast_to(quad, (layout.rank, layout.dim, layout.terms, 4))
    else:
        quad = delta.reshape(layout.rank, layout.dim, layout.terms, 4)
    return quad[..., 0], quad[..., 1], quad[..., 2], quad[..., 3]


def value_gradient_batch(model: ModelParams, X) -> np.ndarray:
    """Per-sample parameter gradient of the model value, shape (N, K)."""
    X = _check_points(X, model.dim)
    A, alpha, omega, phi = expand_params(model)
    u, psi, partner, _ = _forward(A, alpha, omega, phi, X)
    rows = _dpsi(A, u, X) * partner[..., None, None]
    return _contract_rows(rows, model.layout)


def value_hessian(model: ModelParams, x) -> np.ndarray:
    """Parameter Hessian of the model value at one point, shape (K, K).

    Parameters of different ranks never interact in the model value, so all
    cross-rank blocks are exactly zero.
    """
    x = _check_point(x, model.dim)
    X = x[None, :]
    A, alpha, omega, phi = expand_params(model)
    u, psi, partner, _ = _forward(A, alpha, omega, phi, X)
    return _weighted_value_hessian(A, u, psi, partner, X, np.ones(1), model.layout)


def gradient(model: ModelParams, data: Dataset) -> np.ndarray:
    """Exact gradient of the squared-error objective, shape (K,)."""
    _check_data(model, data)
    A, alpha, omega, phi = expand_params(model)
    u, psi, partner, values = _forward(A, alpha, omega, phi, data.x)
    resid = values - data.y
    rows = _dpsi(A, u, data.x) * partner[..., None, None]
    D = _contract_rows(rows, model.layout)
    return 2.0 * (D.T @ resid)


def _weighted_value_hessian(A, u, psi, partner, X, w, layout: Layout) -> np.ndarray:
    """sum_n w_n * (parameter Hessian of f at x_n), flat (K, K), exactly symmetric.

    Only within-rank blocks are assembled; cross-rank entries stay zero.
    Within a rank, same-dimension blocks use the atom's second partials
    (diagonal in the component index) and cross-dimension blocks pair first
    partials against the product of the remaining atoms.
    """
    r, n, d, P = u.shape
    dpsi = _dpsi(A, u, X)
    H = np.zeros((r, d, P, 4, r, d, P, 4))
    for j in range(r):
        for i in range(d):
            wp = w * partner[j, :, i]
            x = X[:, i]
            uR = u[j, :, i, :].real
            uI = u[j, :, i, :].imag
            a = A[j, i]
            s = np.einsum("n,np->p", wp, uR)
            sx = np.einsum("n,np->p", wp * x, uR)
            sxx = np.einsum("n,np->p", wp * x * x, uR)
            t = np.einsum("n,np->p", wp, uI)
            tx = np.einsum("n,np->p", wp * x, uI)
            txx = np.einsum("n,np->p", wp * x * x, uI)
            blk = np.zeros((P, 4, 4))
            blk[:, 0, 1] = blk[:, 1, 0] = sx
            blk[:, 0, 2] = blk[:, 2, 0] = -tx
            blk[:, 0, 3] = blk[:, 3, 0] = -t
            blk[:, 1, 1] = a * sxx
            blk[:, 1, 2] = blk[:, 2, 1] = -a * txx
            blk[:, 1, 3] = blk[:, 3, 1] = -a * tx
            blk[:, 2, 2] = -a * sxx
            blk[:, 2, 3] = blk[:, 3, 2] = -a * sx
            blk[:, 3, 3] = -a * s
            for p in range(P):
                H[j, i, p, :, j, i, p, :] = blk[p]
            for i2 in range(i + 1, d):
                rest = [q for q in range(d) if q != i and q != i2]
                pair = np.prod(psi[j][:, rest], axis=1) if rest else np.ones(n)
                Di = dpsi[j, :, i].reshape(n, 4 * P)
                Dk = dpsi[j, :, i2].reshape(n, 4 * P)
                M = np.einsum("n,na,nb->ab", w * pair, Di, Dk).reshape(P, 4, P, 4)
                H[j, i, :, :, j, i2, :, :] = M
                H[j, i2, :, :, j, i, :, :] = M.transpose(2, 3, 0, 1)
    if layout.tied:
        H = H.sum(axis=(1, 5))
    # the tied contraction reduces the two dimension axes in different orders
    # for H[a,b] and H[b,a]; mirroring one triangle restores exact symmetry
    return _mirror_upper(H.reshape(layout.size, layout.size))


def _mirror_upper(M: np.ndarray) -> np.ndarray:
    """Exactly symmetric matrix taking the upper triangle as the truth."""
    return np.triu(M) + np.triu(M, 1).T


def hessian(model: ModelParams, data: Dataset) -> np.ndarray:
    """Exact Hessian of the squared-error objective, shape (K, K).

    Sum of the rank-coupling first-order part 2 * sum_n grad f grad f^T and
    the residual-weighted model Hessian; both parts are assembled exactly
    symmetric, so the result is too.
    """
    _check_data(model, data)
    A, alpha, omega, phi = expand_params(model)
    u, psi, partner, values = _forward(A, alpha, omega, phi, data.x)
    resid = values - data.y
    rows = _dpsi(A, u, data.x) * partner[..., None, None]
    D = _contract_rows(rows, model.layout)
    first_order = _mirror_upper(2.0 * (D.T @ D))
    curvature = _weighted_value_hessian(
        A, u, psi, partner, data.x, 2.0 * resid, model.layout
    )
    return first_order + curvature


@dataclass(frozen=True, eq=False)
class TermLedger:
    """Factors stored at a base parameter point for closed-form shifted gradients.

    ``carriers`` holds every atom component's complex carrier at the base
    point, ``atom_values``/``partner_products`` the per-atom values and the
    products of each rank's other atoms.  ``eval_F_ledger`` consumes only
    these fields plus the update vector.
    """

    layout: Layout
    x: np.ndarray  # (N, d)
    y: np.ndarray  # (N,)
    amp: np.ndarray  # (r, d, P)
    growth: np.ndarray  # (r, d, P)
    freq: np.ndarray  # (r, d, P)
    phase: np.ndarray  # (r, d, P)
    carriers: np.ndarray  # (r, N, d, P) complex
    atom_values: np.ndarray  # (r, N, d)
    partner_products: np.ndarray  # (r, N, d)


def build_ledger(model: ModelParams, data: Dataset) -> TermLedger:
    """Evaluate and store all base-point factors the resummed gradient needs."""
    _check_data(model, data)
    A, alpha, omega, phi = expand_params(model)
    u, psi, partner, _ = _forward(A, alpha, omega, phi, data.x)
    return TermLedger(
        layout=model.layout,
        x=data.x,
        y=data.y,
        amp=A,
        growth=alpha,
        freq=omega,
        phase=phi,
        carriers=u,
        atom_values=psi,
        partner_products=partner,
    )


def eval_F_ledger(ledger: TermLedger, delta) -> np.ndarray:
    """Shifted gradient grad Phi(base + delta) from the stored ledger alone.

    The shift enters as exp(d_alpha*x + i*(d_omega*x + d_phi)) multiplying
    each stored carrier and as d_A added to the stored amplitudes; atom
    values, partner products and residuals are rebuilt from the shifted
    factors, never from the original model.
    """
    lay = ledger.layout
    delta = np.asarray(delta, dtype=float)
    if delta.shape != (lay.size,):
        raise LayoutMismatch(
            f"update of shape {delta.shape} does not fit layout size {lay.size}"
        )
    dA, dalpha, domega, dphi = _split_delta(delta, lay)
    guard_exponents(ledger.growth + dalpha, ledger.x)
    xe = ledger.x[None, :, :, None]
    mult = np.exp(
        dalpha[:, None, :, :] * xe + 1j * (domega[:, None, :, :] * xe + dphi[:, None, :, :])
    )
    u = ledger.carriers * mult
    A = ledger.amp + dA
    psi = _atom_values(A, u)
    partner = _partner_products(psi)
    values = np.sum(np.prod(psi, axis=2), axis=0)
    resid = values - ledger.y
    rows = _dpsi(A, u, ledger.x) * partner[..., None, None]
    D = _contract_rows(rows, lay)
    return 2.0 * (D.T @ resid)


def eval_F_direct(model: ModelParams, delta, data: Dataset) -> np.ndarray:
    """Shifted gradient via plain re-evaluation at the shifted parameters."""
    return gradient(shift_params(model, delta), data)


def eval_J(model: ModelParams, delta, data: Dataset, mode: str = "full") -> np.ndarray:
    """Jacobian of F at ``delta``: the objective Hessian at the shifted point.

    ``mode="full"`` returns the complete matrix; ``mode="block"`` keeps only
    the rank-diagonal blocks (the model Hessian part is block-diagonal
    already, so this drops only the first-order rank coupling).
    """
    if mode not in ("full", "block"):
        raise ValueError(f"unknown Jacobian mode '{mode}'")
    H = hessian(shift_params(model, delta), data)
    if mode == "block":
        lay = model.layout
        out = np.zeros_like(H)
        for j in range(lay.rank):
            s = lay.rank_slice(j)
            out[s, s] = H[s, s]
        return out
    return H
