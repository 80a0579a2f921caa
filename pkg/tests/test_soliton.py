from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from lle_tpa.continuation import residual_norm as torus_residual
from lle_tpa.errors import DomainError, StageFailed
from lle_tpa.soliton import (
    RescaledParams,
    background_residual,
    classify_equilibrium,
    continue_stage,
    equilibria,
    first_integral,
    homoclinic_bound,
    localization_norm,
    newton_half_line,
    nondegeneracy_check,
    profile_rhs,
    rescale_to_periodic,
    residual_norm,
    sech_seed,
    shooting_seed,
    solve_background,
    staged_continue,
    turning_points,
)

D, ZT, FT, EPS = 0.1, 5.0, 2.9, 0.5


@pytest.fixture(scope="module")
def staged():
    log = []
    u = staged_continue(RescaledParams(D, ZT, FT, EPS, 0.0), log=log, monitor=True)
    return u, log


def test_rescaled_params_validation():
    with pytest.raises(DomainError):
        RescaledParams(-0.1, ZT)
    with pytest.raises(DomainError):
        RescaledParams(D, ZT, eps=-1.0)
    with pytest.raises(DomainError):
        RescaledParams(D, ZT).torus_params()


def test_torus_params_anchor():
    p = RescaledParams(D, ZT, FT, EPS).torus_params()
    assert p.zeta == pytest.approx(10.0)
    assert p.f == pytest.approx(8.20, abs=5e-3)


def test_equilibria_examples():
    np.testing.assert_allclose(equilibria(ZT, 0.0), (-math.sqrt(5), 0.0, math.sqrt(5)), atol=1e-14)
    eq = equilibria(ZT, FT)
    np.testing.assert_allclose(eq, (-1.855, -0.630, 2.483), atol=2e-3)
    oracle = np.sort(np.roots([1.0, 0.0, -ZT, -FT]).real)
    np.testing.assert_allclose(eq, oracle, atol=1e-12)
    assert homoclinic_bound(ZT) == pytest.approx(4.303, abs=1e-3)
    assert len(equilibria(ZT, 4.4)) == 1


def test_classification():
    assert classify_equilibrium(0.0, ZT, D) == "saddle"
    assert classify_equilibrium(math.sqrt(5), ZT, D) == "center"
    assert classify_equilibrium(-math.sqrt(5), ZT, D) == "center"
    assert classify_equilibrium(0.0, ZT, -D) == "center"
    assert classify_equilibrium(math.sqrt(5), ZT, -D) == "saddle"
    with pytest.raises(DomainError):
        classify_equilibrium(math.sqrt(ZT / 3), ZT, D)


def test_first_integral_conserved():
    rhs = profile_rhs(ZT, FT, D)
    # classic RK4 at step 1e-4 over unit time
    y = np.array([0.3, 0.1])
    h = 1e-4
    i0 = first_integral(*y, ZT, FT, D)
    drift = 0.0
    for _ in range(10000):
        k1 = np.array(rhs(0, y))
        k2 = np.array(rhs(0, y + 0.5 * h * k1))
        k3 = np.array(rhs(0, y + 0.5 * h * k2))
        k4 = np.array(rhs(0, y + h * k3))
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        drift = max(drift, abs(first_integral(*y, ZT, FT, D) - i0))
    assert drift < 1e-8


def test_turning_points_on_homoclinic_level():
    v2 = equilibria(ZT, FT)[1]
    level = first_integral(v2, 0.0, ZT, FT, D)
    for v in turning_points(ZT, FT):
        assert first_integral(v, 0.0, ZT, FT, D) == pytest.approx(level, abs=1e-12)
    assert turning_points(ZT, 0.0)[1] == pytest.approx(math.sqrt(10))


def test_sech_seed_solves_base_problem():
    rp = RescaledParams(D, ZT)
    u = sech_seed(rp, 512)
    assert residual_norm(u, rp) < 1e-10
    assert abs(u.values[0]) == pytest.approx(math.sqrt(10), rel=1e-9)


def test_background_examples():
    rp = RescaledParams(D, ZT, FT)
    assert solve_background(rp) == 1j * equilibria(ZT, FT)[1]
    rp = RescaledParams(D, ZT, FT, 0.1, 0.05)
    bg = solve_background(rp)
    assert abs(background_residual(bg, rp)) < 1e-12
    assert abs(bg - 1j * equilibria(ZT, FT)[1]) < 0.05


def test_shooting_bump_matches_ode():
    rp = RescaledParams(D, ZT, FT)
    u = shooting_seed(rp, "bump", 256)
    sol = solve_ivp(profile_rhs(ZT, FT, D), (0, 0.5), [turning_points(ZT, FT)[1], 0.0],
                    method="RK45", rtol=1e-10, atol=1e-12, dense_output=True)
    x = u.x[u.x <= 0.5]
    np.testing.assert_allclose(u.values[: x.size].imag, sol.sol(x)[0], atol=1e-6)


def test_nondegeneracy_examples():
    rp0 = RescaledParams(D, ZT)
    assert nondegeneracy_check(sech_seed(rp0, 256), rp0) < 1e-12
    rp = RescaledParams(D, ZT, 0.2)
    u = staged_continue(rp, n_modes=256)
    assert nondegeneracy_check(u, rp) >= 1e-6


def test_staged_refuses_beyond_homoclinic_bound():
    with pytest.raises(DomainError):
        staged_continue(RescaledParams(D, ZT, 4.4, EPS))


@pytest.mark.slow
def test_staged_continuation_converges(staged):
    u, log = staged
    rp = RescaledParams(D, ZT, FT, EPS)
    assert residual_norm(u, rp) < 1e-10
    assert [e["stage"] for e in log][-1] == "eps"
    assert min(e["nondegeneracy"] for e in log) > 1e-8
    # purely imaginary at eps = kappa = 0, complex afterwards
    assert abs(u.values.real).max() > 1e-3


@pytest.mark.slow
def test_dip_and_bump_are_distinct(staged):
    bump, _ = staged
    rp = RescaledParams(D, ZT, FT)
    dip = staged_continue(rp, kind="dip")
    assert dip.peak() < bump.peak()
    base = staged_continue(rp, kind="bump")
    assert base.l2_distance(dip) > 1.0
    assert np.abs(dip.values.real).max() == 0.0


@pytest.mark.slow
def test_kappa_stage_flattens_and_folds(staged):
    u, _ = staged
    peaks = [u.peak()]
    for kappa in (0.05, 0.1):
        u = continue_stage(u, "kappa", kappa)
        peaks.append(u.peak())
    assert np.all(np.diff(peaks) < 0)
    with pytest.raises(StageFailed) as info:
        continue_stage(u, "kappa", 0.2)
    assert 0.15 < info.value.last_value < 0.16


@pytest.mark.slow
def test_rescale_to_periodic_and_localization(staged):
    u, _ = staged
    norms = []
    for eps in (0.5, 0.25, 0.125):
        if eps != EPS:
            u = continue_stage(u, "eps", eps)
        rp = RescaledParams(D, ZT, FT, eps)
        a, params = rescale_to_periodic(u, rp)
        assert torus_residual(a, params) < 1e-8
        assert a.sine_mass() < 1e-10 * a.l2()
        assert int(np.argmax(np.abs(a.values))) == a.n_modes
        norms.append(localization_norm(a))
    assert norms[0] < norms[1] < norms[2]


def test_newton_half_line_on_exact_seed():
    rp = RescaledParams(D, ZT)
    hist = []
    newton_half_line(sech_seed(rp, 256), rp, history=hist)
    assert len(hist) <= 2
