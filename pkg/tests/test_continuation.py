from __future__ import annotations

import numpy as np
import pytest

from lle_tpa.bifurcation import apriori_bound, kappa_star_bifurcation, scan_trivial_branch
from lle_tpa.continuation import (
    branch_violations,
    continue_branch,
    continue_from_candidate,
    kappa_num_threshold,
    lower_bound_gap,
    newton_solve,
    residual_norm,
    switch_branch,
)
from lle_tpa.errors import FellBackToTrivial, NoConvergence
from lle_tpa.model import FieldState, Params
from lle_tpa.trivial_branch import parametrize

D, F = 0.1, 1.6
N_MODES = 128


@pytest.fixture(scope="module")
def params():
    return Params(D, 0.0, F, 0.0)


@pytest.fixture(scope="module")
def candidates(params):
    return scan_trivial_branch(params)


@pytest.fixture(scope="module")
def k1_branch(params, candidates):
    c = next(c for c in candidates if c.k == 1)
    return continue_from_candidate(c, params, n_modes=N_MODES)


def test_newton_on_exact_constant():
    p = Params(D, 0.0, F, 0.05)
    pt = parametrize(0.3, p)
    p = p.replace(zeta=pt.zeta)
    hist = []
    u = newton_solve(FieldState.constant(pt.a0, 32), p, history=hist)
    assert len(hist) <= 2
    assert np.allclose(u.values, pt.a0, atol=1e-12)


def test_newton_returns_to_constant_above_threshold():
    p = Params(D, 0.0, F, 0.3)
    assert p.kappa > kappa_star_bifurcation(F)
    pt = parametrize(0.2, p)
    p = p.replace(zeta=pt.zeta)
    seed = FieldState.from_function(lambda x: pt.a0 + 1e-3 * np.cos(x) + 1e-3j * np.cos(2 * x), 32)
    u = newton_solve(seed, p)
    assert u.dx_l2() < 1e-9
    assert np.allclose(u.values, pt.a0, atol=1e-9)


def test_newton_reports_failure():
    p = Params(D, 3.0, F, 0.0)
    seed = FieldState.from_function(lambda x: 50 * np.cos(7 * x), 32)
    with pytest.raises(NoConvergence):
        newton_solve(seed, p, max_iter=2)


def test_switch_branch_amplitude_zero(params, candidates):
    c = candidates[0]
    start = switch_branch(c, 0.0, params, n_modes=32)
    assert start.h1x == 0.0
    assert np.allclose(start.field.values, c.a0)


def test_switch_branch_gives_nonconstant_solutions(params, candidates):
    for c in candidates:
        if c.non_simple:
            with pytest.raises(FellBackToTrivial):
                switch_branch(c, None, params, n_modes=N_MODES)
            continue
        start = switch_branch(c, None, params, n_modes=N_MODES)
        assert start.h1x > 1e-8
        p = params.replace(zeta=start.zeta)
        assert residual_norm(start.field, p) < 1e-10
        # converged Newton from the switched point keeps it nonconstant
        u = newton_solve(start.field, p)
        assert u.dx_l2() > 1e-3 * start.h1x


def test_switch_branch_rejects_under_resolved(params, candidates):
    c = max(candidates, key=lambda c: c.k)
    with pytest.raises(ValueError):
        switch_branch(c, None, params, n_modes=3 * c.k - 3)


def test_k1_branch_closes(k1_branch):
    assert k1_branch.closed
    assert k1_branch.stop_reason == "closed"
    assert len(k1_branch) <= 2001
    assert k1_branch.points[-1].h1x < 1e-7
    assert branch_violations(k1_branch) == []


def test_k1_branch_has_turning_points_and_localizes(k1_branch):
    zeta = k1_branch.values("zeta")
    dz = np.diff(zeta)
    turns = np.nonzero(dz[:-1] * dz[1:] < 0)[0] + 1
    assert turns.size >= 1
    far = turns[np.argmax(zeta[turns])]
    ratio = k1_branch.values("linf") / k1_branch.values("l2")
    assert abs(int(np.argmax(ratio)) - far) <= 0.1 * len(k1_branch)


def test_lower_bound_gap_along_branch(k1_branch):
    for p in k1_branch.points[1:-1]:
        prm = k1_branch.params.replace(zeta=p.zeta)
        assert lower_bound_gap(p.field, prm) > 0


def test_branch_with_damping_respects_apriori_bound():
    p = Params(D, 0.0, F, 0.05)
    c = next(c for c in scan_trivial_branch(p) if c.k == 1)
    branch = continue_from_candidate(c, p, n_modes=N_MODES)
    assert branch.closed
    assert branch_violations(branch) == []
    bound = apriori_bound(p)
    assert max(branch.values("linf")) <= bound


def test_kappa_continuation_stops_before_threshold(k1_branch, params):
    mid = k1_branch.points[len(k1_branch) // 2]
    branch = continue_branch(mid, params.replace(zeta=mid.zeta), "kappa", max_steps=400, direction=1.0)
    kappas = branch.values("kappa")
    assert branch.stop_reason in ("left_box", "closed")
    assert kappas.max() < kappa_star_bifurcation(F) + 0.01
    assert branch_violations(branch) == []


@pytest.mark.parametrize(
    "f, expected, tol", [(1.6, 0.185, 1e-3), (2.0, 0.245, 2e-3), (1.1, 0.042, 2e-3)]
)
def test_kappa_num_threshold_examples(f, expected, tol):
    assert kappa_num_threshold(D, f) == pytest.approx(expected, abs=tol)


def test_kappa_num_threshold_needs_bistability():
    with pytest.raises(ValueError):
        kappa_num_threshold(D, 0.9)
