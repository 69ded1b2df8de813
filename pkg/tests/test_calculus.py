import math
import random

import numpy as np
import pytest

import oracles
from sepfit.calculus import (
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
from sepfit.errors import ExponentOverflow
from sepfit.model import Dataset, Layout, eval_model, flatten, unflatten

CASE_GRID = [
    (rank, dim, terms, tied)
    for rank in (1, 2, 3)
    for dim in (1, 2, 3)
    for terms in (1, 2)
    for tied in (True, False)
]


def _case(rng, rank, dim, terms, tied, n_points=12):
    flat, xs, ys = oracles.random_case(rng, rank, dim, terms, tied, n_points)
    layout = Layout(rank=rank, dim=dim, terms=terms, tied=tied)
    model = unflatten(np.asarray(flat, dtype=float), layout)
    data = Dataset(x=np.asarray(xs), y=np.asarray(ys))
    return flat, model, data, xs, ys


# first derivatives
# -----------------------------------------------------------------------------

def test_single_atom_derivative_rows_by_hand():
    # one rank, one dimension, one component: the four rows of the value
    # gradient are e^{ax}cos, Ax e^{ax}cos, -Ax e^{ax}sin, -A e^{ax}sin
    A, alpha, omega, phi = 1.3, 0.4, 2.5, -0.6
    x = 0.7
    layout = Layout(rank=1, dim=1, terms=1, tied=True)
    model = unflatten(np.array([A, alpha, omega, phi]), layout)
    rows = value_gradient_batch(model, np.array([[x]]))
    assert rows.shape == (1, 4)
    e = math.exp(alpha * x)
    c = math.cos(omega * x + phi)
    s = math.sin(omega * x + phi)
    expected = [e * c, A * x * e * c, -A * x * e * s, -A * e * s]
    assert rows[0] == pytest.approx(expected, rel=1e-14)


def test_value_gradient_matches_fd_of_model_value():
    rng = random.Random(29)
    for rank, dim, terms, tied in CASE_GRID[::4]:
        flat, model, data, xs, _ = _case(rng, rank, dim, terms, tied, n_points=5)
        rows = value_gradient_batch(model, data.x)
        h = 1e-6
        for n, x in enumerate(xs):
            def value_at(v, x=x):
                plain = oracles.unflatten_plain(v, rank, dim, terms, tied)
                return [oracles.model_value(plain, x)]

            fd = [row[0] for row in oracles.jacobian_central_fd(value_at, flat, h)]
            scale = 1.0 + oracles.max_abs(fd)
            assert oracles.max_abs_diff(rows[n], fd) / scale < 1e-6


def test_loss_gradient_matches_central_differences():
    rng = random.Random(37)
    for rank, dim, terms, tied in CASE_GRID:
        flat, model, data, xs, ys = _case(rng, rank, dim, terms, tied)
        g = gradient(model, data)
        fd = oracles.grad_central_fd(flat, rank, dim, terms, tied, xs, ys)
        scale = 1.0 + oracles.max_abs(fd)
        assert oracles.max_abs_diff(g, fd) / scale < 1e-6, (rank, dim, terms, tied)


def test_gradient_vanishes_on_perfect_fit():
    layout = Layout(rank=1, dim=2, terms=1, tied=True)
    model = unflatten(np.array([1.0, 0.0, math.pi, 0.0]), layout)
    X = np.array([[a, b] for a in (0.0, 0.25, 0.5) for b in (0.0, 0.25, 0.5)])
    y = np.array([eval_model(model, row) for row in X])
    g = gradient(model, Dataset(x=X, y=y))
    assert np.max(np.abs(g)) < 1e-14


# second derivatives
# -----------------------------------------------------------------------------

def test_single_atom_second_partials_by_hand():
    # the 4x4 curvature table of one atom at one point, against pencil-and-
    # paper differentiation of A e^{ax} cos(wx + p)
    A, alpha, omega, phi = 0.9, -0.3, 3.1, 0.8
    x = 0.6
    layout = Layout(rank=1, dim=1, terms=1, tied=True)
    model = unflatten(np.array([A, alpha, omega, phi]), layout)
    H = value_hessian(model, np.array([x]))
    assert H.shape == (4, 4)
    e = math.exp(alpha * x)
    c = math.cos(omega * x + phi)
    s = math.sin(omega * x + phi)
    expected = np.array(
        [
            [0.0, x * e * c, -x * e * s, -e * s],
            [x * e * c, A * x * x * e * c, -A * x * x * e * s, -A * x * e * s],
            [-x * e * s, -A * x * x * e * s, -A * x * x * e * c, -A * x * e * c],
            [-e * s, -A * x * e * s, -A * x * e * c, -A * e * c],
        ]
    )
    assert np.allclose(H, expected, rtol=1e-13, atol=1e-15)


def test_loss_hessian_matches_fd_of_gradient():
    rng = random.Random(43)
    for rank, dim, terms, tied in CASE_GRID:
        flat, model, data, _, _ = _case(rng, rank, dim, terms, tied)
        layout = model.layout
        H = hessian(model, data)

        def grad_at(v):
            return list(gradient(unflatten(np.asarray(v), layout), data))

        fd = np.array(oracles.jacobian_central_fd(grad_at, flat, h=1e-5))
        scale = 1.0 + float(np.max(np.abs(fd)))
        assert float(np.max(np.abs(H - fd))) / scale < 1e-5, (rank, dim, terms, tied)


def test_loss_hessian_exactly_symmetric():
    rng = random.Random(47)
    for rank, dim, terms, tied in CASE_GRID:
        _, model, data, _, _ = _case(rng, rank, dim, terms, tied)
        H = hessian(model, data)
        assert H.tobytes() == H.T.copy().tobytes()


def test_value_hessian_cross_rank_blocks_are_zero():
    rng = random.Random(53)
    for rank, dim, terms, tied in [(2, 2, 1, True), (3, 2, 2, False), (2, 3, 1, False)]:
        _, model, data, xs, _ = _case(rng, rank, dim, terms, tied, n_points=3)
        layout = model.layout
        for x in xs:
            H = value_hessian(model, np.asarray(x))
            for j in range(rank):
                for jp in range(rank):
                    if j == jp:
                        continue
                    block = H[layout.rank_slice(j), layout.rank_slice(jp)]
                    assert np.count_nonzero(block) == 0


# the resummed optimality map and its Jacobian
# -----------------------------------------------------------------------------

def test_ledger_at_zero_shift_reproduces_the_gradient():
    rng = random.Random(59)
    for rank, dim, terms, tied in CASE_GRID[::3]:
        _, model, data, _, _ = _case(rng, rank, dim, terms, tied)
        ledger = build_ledger(model, data)
        F0 = eval_F_ledger(ledger, np.zeros(model.layout.size))
        assert F0.tobytes() == gradient(model, data).tobytes()


def test_ledger_matches_direct_reevaluation():
    rng = random.Random(61)
    np_rng = np.random.default_rng(61)
    for rank, dim, terms, tied in CASE_GRID:
        _, model, data, _, _ = _case(rng, rank, dim, terms, tied)
        ledger = build_ledger(model, data)
        for _ in range(3):
            delta = np_rng.uniform(-0.5, 0.5, size=model.layout.size)
            shifted = eval_F_ledger(ledger, delta)
            direct = eval_F_direct(model, delta, data)
            scale = 1.0 + float(np.max(np.abs(direct)))
            assert float(np.max(np.abs(shifted - direct))) / scale < 1e-10


def test_ledger_shift_guard():
    # base growth is fine, but the shift pushes |alpha * x| past the guard
    layout = Layout(rank=1, dim=1, terms=1, tied=True)
    model = unflatten(np.array([1.0, 0.5, 1.0, 0.0]), layout)
    data = Dataset(x=np.array([[1.0]]), y=np.array([0.0]))
    ledger = build_ledger(model, data)
    safe = eval_F_ledger(ledger, np.array([0.0, 300.0, 0.0, 0.0]))  # 300.5 is safe
    assert np.all(np.isfinite(safe))
    with pytest.raises(ExponentOverflow):
        eval_F_ledger(ledger, np.array([0.0, 701.0, 0.0, 0.0]))  # 701.5 > 700


def test_ledger_is_frozen_at_the_base_point():
    # mutating nothing: the ledger keeps producing the same answers even if
    # the caller reuses it across many shifts in any order
    rng = random.Random(67)
    _, model, data, _, _ = _case(rng, 2, 2, 1, True)
    ledger = build_ledger(model, data)
    delta = np.full(model.layout.size, 0.05)
    first = eval_F_ledger(ledger, delta)
    eval_F_ledger(ledger, -delta)
    again = eval_F_ledger(ledger, delta)
    assert first.tobytes() == again.tobytes()
    assert isinstance(ledger, TermLedger)


def test_eval_J_full_at_zero_equals_hessian():
    rng = random.Random(71)
    for rank, dim, terms, tied in CASE_GRID[::5]:
        _, model, data, _, _ = _case(rng, rank, dim, terms, tied)
        J = eval_J(model, np.zeros(model.layout.size), data, mode="full")
        assert J.tobytes() == hessian(model, data).tobytes()


def test_eval_J_block_zeroes_cross_rank_coupling():
    rng = random.Random(73)
    np_rng = np.random.default_rng(73)
    for rank, dim, terms, tied in [(2, 2, 1, True), (3, 2, 1, False)]:
        _, model, data, _, _ = _case(rng, rank, dim, terms, tied)
        layout = model.layout
        delta = np_rng.uniform(-0.2, 0.2, size=layout.size)
        full = eval_J(model, delta, data, mode="full")
        block = eval_J(model, delta, data, mode="block")
        coupled = 0.0
        for j in range(rank):
            for jp in range(rank):
                b = block[layout.rank_slice(j), layout.rank_slice(jp)]
                f = full[layout.rank_slice(j), layout.rank_slice(jp)]
                if j == jp:
                    assert b.tobytes() == f.tobytes()
                else:
                    assert np.count_nonzero(b) == 0
                    coupled = max(coupled, float(np.max(np.abs(f))))
        # the full Jacobian genuinely couples ranks, so dropping those blocks
        # is a real approximation rather than a no-op
        assert coupled > 0.0


def test_eval_J_rejects_unknown_mode():
    rng = random.Random(79)
    _, model, data, _, _ = _case(rng, 1, 1, 1, True)
    with pytest.raises(ValueError):
        eval_J(model, np.zeros(4), data, mode="diagonal")


def test_eval_F_direct_is_gradient_at_the_shifted_point():
    rng = random.Random(83)
    np_rng = np.random.default_rng(83)
    _, model, data, _, _ = _case(rng, 2, 2, 2, False)
    delta = np_rng.uniform(-0.3, 0.3, size=model.layout.size)
    direct = eval_F_direct(model, delta, data)
    shifted_model = unflatten(flatten(model) + delta, model.layout)
    assert direct.tobytes() == gradient(shifted_model, data).tobytes()
