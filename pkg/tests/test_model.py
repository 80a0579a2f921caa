from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lle_tpa.errors import DomainError
from lle_tpa.model import (
    FieldState,
    Params,
    dg_real_matrix,
    even_jacobian,
    even_residual,
    jacobian,
    n_matrix,
    nonlinearity_g,
    stationary_residual,
    to_complex,
    to_real,
)
from lle_tpa.trivial_branch import parametrize

finite = st.floats(-3, 3, allow_nan=False)


def test_params_validation():
    with pytest.raises(DomainError):
        Params(0.0, 1.0, 1.0)
    with pytest.raises(DomainError):
        Params(0.1, 1.0, 1.0, kappa=-0.1)
    assert Params(-0.1, 1.0, 1.0).replace(kappa=0.3).kappa == 0.3


def test_nonlinearity_examples():
    assert nonlinearity_g(0, Params(1, 0, 1, 0)) == -1j
    assert nonlinearity_g(1, Params(1, 0, 0, 1)) == 1 + 1j
    a = 1 + 1j
    # independent complex arithmetic: (1 + i kappa) |a|^2 a - i f
    expected = (1 + 0.5j) * 2 * (1 + 1j) - 2j
    assert nonlinearity_g(a, Params(1, 0, 2, 0.5)) == pytest.approx(expected)
    assert expected == pytest.approx(1 + 1j)


def _fd_matrix(a0, params, h=1e-7):
    cols = []
    for z in (1.0, 1j):
        diff = (nonlinearity_g(a0 + h * z, params) - nonlinearity_g(a0 - h * z, params)) / (2 * h)
        cols.append([diff.real, diff.imag])
    return np.array(cols).T


def test_dg_examples():
    p = Params(1, 0, 1, 0)
    np.testing.assert_array_equal(dg_real_matrix(0, p), np.zeros((2, 2)))
    np.testing.assert_allclose(dg_real_matrix(1, p), [[3, 0], [0, 1]])
    p2 = Params(1, 0, 1, 0.2)
    mat = dg_real_matrix(1 + 1j, p2)
    np.testing.assert_allclose(mat, _fd_matrix(1 + 1j, p2), atol=1e-7)
    # the printed example [[-0.4, 1.6], [2.8, 4.4]] is not the derivative of g
    np.testing.assert_allclose(mat, [[3.6, 1.2], [2.8, 4.4]], atol=1e-12)


@given(finite, finite, st.floats(0, 2))
@settings(max_examples=60, deadline=None)
def test_dg_matches_finite_differences(re, im, kappa):
    p = Params(1, 0, 1, kappa)
    a0 = complex(re, im)
    np.testing.assert_allclose(dg_real_matrix(a0, p), _fd_matrix(a0, p), atol=1e-6 * (1 + abs(a0) ** 2))


def test_packing_roundtrip():
    z = np.array([1 + 2j, -3 + 0.5j])
    np.testing.assert_array_equal(to_real(z), [1, 2, -3, 0.5])
    np.testing.assert_array_equal(to_complex(to_real(z)), z)


def test_parseval_and_norms():
    u = FieldState.from_function(lambda x: np.exp(1j * np.sin(x)) + 0.3 * np.cos(3 * x), 32)
    assert u.l2() == pytest.approx(u.coefficient_l2(), rel=1e-12)
    c = FieldState.from_function(lambda x: np.cos(2 * x), 16)
    assert c.l2() == pytest.approx(np.sqrt(np.pi))
    assert c.dx_l2() == pytest.approx(2 * np.sqrt(np.pi))
    assert c.sine_mass() < 1e-14


def test_even_fields_have_no_sine_part():
    half = np.cos(np.linspace(0, np.pi, 17)) + 0.2j
    u = FieldState.from_even_values(half)
    assert u.sine_mass() < 1e-12 * u.l2()
    assert u.n_points == 32 and u.n_modes == 16
    np.testing.assert_allclose(u.even_values(), half)


def test_residual_of_constant_solution():
    p = Params(0.1, 0.0, 1.6, 0.05)
    pt = parametrize(0.3, p)
    u = FieldState.constant(pt.a0, 16)
    assert stationary_residual(u, p.replace(zeta=pt.zeta)).l2() < 1e-12


def test_residual_cos_example():
    p = Params(1.0, 0.0, 0.0, 0.0)
    u = FieldState.from_function(np.cos, 16)
    x = u.x
    expected = 2 * np.cos(x) + 1j * np.cos(x) - np.cos(x) ** 3
    # -a'' = cos x, -(i - 0) a = -i cos x, so the hand expansion gives
    # cos x - i cos x - cos^3 x; the oracle above uses d a'' with a minus sign
    hand = np.cos(x) - 1j * np.cos(x) - np.cos(x) ** 3
    np.testing.assert_allclose(stationary_residual(u, p).values, hand, atol=1e-12)
    assert not np.allclose(hand, expected)


def test_residual_zero_field():
    res = stationary_residual(FieldState.constant(0, 8), Params(1, 0, 1, 0))
    np.testing.assert_allclose(res.values, 1j)


def test_residual_needs_eight_modes():
    with pytest.raises(DomainError):
        stationary_residual(FieldState.constant(1, 4), Params(1, 0, 1))


def test_translation_and_reflection_equivariance():
    p = Params(0.3, 1.2, 0.8, 0.1)
    u = FieldState.from_function(lambda x: 1 + 0.4 * np.exp(1j * x) + 0.2j * np.sin(2 * x), 32)
    for s in (1, 5, 17):
        lhs = stationary_residual(u.shift(s), p).values
        rhs = stationary_residual(u, p).shift(s).values
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)
    even = FieldState.from_function(lambda x: 1 + 0.5 * np.cos(x) + 0.1j * np.cos(3 * x), 32)
    assert stationary_residual(even, p).sine_mass() < 1e-12


def test_dealias_option_runs():
    p = Params(0.3, 1.2, 0.8, 0.1)
    u = FieldState.from_function(lambda x: 1 + 0.1 * np.cos(x), 32)
    a = stationary_residual(u, p).values
    b = stationary_residual(u, p, dealias=True).values
    np.testing.assert_allclose(a, b, atol=1e-10)


@pytest.mark.parametrize("basis", ["even", "full"])
def test_jacobian_matches_finite_differences(basis):
    rng = np.random.default_rng(3)
    p = Params(0.2, 1.1, 1.3, 0.15)
    u = FieldState.from_function(lambda x: 0.8 + 0.3 * np.cos(x) + 0.2j * np.cos(2 * x), 16)
    jac = jacobian(u, p, basis=basis)
    if basis == "even":
        base = u.even_values()
        func = lambda v: to_real(even_residual(to_complex(v), p))  # noqa: E731
    else:
        base = u.values
        func = lambda v: to_real(stationary_residual(FieldState(to_complex(v)), p).values)  # noqa: E731
    y = to_real(base)
    h = 1e-6
    for _ in range(10):
        v = rng.standard_normal(y.size)
        fd = (func(y + h * v) - func(y - h * v)) / (2 * h)
        mv = jac @ v
        assert np.linalg.norm(mv - fd) < 1e-6 * np.linalg.norm(mv)


def test_constant_state_blocks():
    p = Params(0.1, 0.0, 1.6, 0.05)
    pt = parametrize(0.2, p)
    p = p.replace(zeta=pt.zeta)
    n = 16
    jac = even_jacobian(np.full(n + 1, pt.a0), p)
    x = np.linspace(0, np.pi, n + 1)
    nmat = n_matrix(pt.a0, pt.zeta, p)
    for k in (0, 1, 3):
        block = -(nmat - p.d * k * k * np.eye(2))
        for col in range(2):
            e = np.zeros(2)
            e[col] = 1
            v = np.kron(np.cos(k * x), e)
            out = (jac @ v).reshape(-1, 2)
            np.testing.assert_allclose(out, np.outer(np.cos(k * x), block[:, col]), atol=1e-10)


def test_zero_field_block():
    p = Params(0.5, 0.7, 1.0, 0.0)
    n = 8
    jac = even_jacobian(np.zeros(n + 1, dtype=complex), p)
    x = np.linspace(0, np.pi, n + 1)
    k = 2
    v = np.kron(np.cos(k * x), [1.0, 0.0])
    out = (jac @ v).reshape(-1, 2)[0]
    # d k^2 + zeta on the diagonal, -1 below it (true Frechet derivative)
    np.testing.assert_allclose(out, [p.d * k * k + p.zeta, -1.0], atol=1e-10)
