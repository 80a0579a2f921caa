"""Newton solver and pseudo-arclength continuation of nonconstant branches.

All solves run on the even (cosine) grid with unknowns interleaved as
``(Re a_j, Im a_j)``.  The continuation parameter is either ``zeta`` or
``kappa``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg
from scipy.fft import dct

from . import bifurcation
from .bifurcation import BifurcationCandidate, apriori_bound, kappa_star_bifurcation
from .errors import DomainError, FellBackToTrivial, NoConvergence, SingularJacobian, StepUnderflow
from .model import (
    TWO_PI,
    FieldState,
    Params,
    even_jacobian,
    even_residual,
    even_torus_l2,
    to_complex,
    to_real,
)
from .trivial_branch import constant_states_at, solve_tau

log = logging.getLogger(__name__)

DS_MIN, DS_MAX = 1e-5, 0.1


@dataclass(frozen=True)
class BranchPoint:
    zeta: float
    kappa: float
    field: FieldState
    l2: float
    linf: float
    newton_residual: float
    h1x: float

    @classmethod
    def from_field(cls, u: FieldState, params: Params, residual: float):
        return cls(
            zeta=params.zeta,
            kappa=params.kappa,
            field=u,
            l2=u.l2(),
            linf=u.linf(),
            newton_residual=float(residual),
            h1x=u.dx_l2(),
        )


@dataclass(frozen=True)
class Branch:
    points: tuple
    origin: object
    closed: bool
    free_param: str
    params: Params
    stop_reason: str = ""
    extras: dict = field(default_factory=dict, compare=False)

    def __len__(self):
        return len(self.points)

    def values(self, name: str) -> np.ndarray:
        return np.array([getattr(p, name) for p in self.points])


# even-grid helpers ------------------------------------------------------------
def _residual_vec(y, params):
    return to_real(even_residual(to_complex(y), params))


def _residual_norm(y, params):
    return even_torus_l2(even_residual(to_complex(y), params))


def _param_derivative(y, free_param):
    a = to_complex(y)
    if free_param == "zeta":
        return to_real(a)
    if free_param == "kappa":
        return to_real(-1j * np.abs(a) ** 2 * a)
    raise ValueError(f"free_param must be 'zeta' or 'kappa', not {free_param!r}")


@lru_cache(maxsize=8)
def _cosine_projector(n_modes: int) -> np.ndarray:
    """Rows mapping cosine-grid samples to coefficients of ``cos(k x)``."""
    mat = dct(np.eye(n_modes + 1), type=1, axis=0) / n_modes
    mat[0] *= 0.5
    mat[-1] *= 0.5
    mat.flags.writeable = False
    return mat


def _solve(mat, rhs):
    try:
        with np.errstate(all="raise"):
            lu = scipy.linalg.lu_factor(mat, check_finite=True)
            out = scipy.linalg.lu_solve(lu, rhs)
    except (np.linalg.LinAlgError, FloatingPointError, ValueError) as exc:
        raise SingularJacobian(str(exc)) from exc
    if not np.all(np.isfinite(out)):
        raise SingularJacobian("non-finite Newton update")
    return out


def _lu_warning_filter():
    import warnings

    warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)


def newton_solve(
    seed: FieldState,
    params: Params,
    tol: float = 1e-10,
    max_iter: int = 25,
    history: list | None = None,
) -> FieldState:
    """Newton iteration for the stationary equation in the even subspace.

    The seed is projected onto its even part.  Convergence is declared when
    the torus L2 norm of the residual drops below ``tol``.  Residual norms per
    iteration are appended to ``history`` when given.
    """
    y = to_real(0.5 * (seed.even_values() + _reflect_half(seed)))
    res = _residual_norm(y, params)
    if history is not None:
        history.append(res)
    for it in range(max_iter):
        if res < tol:
            return FieldState.from_even_values(to_complex(y))
        jac = even_jacobian(to_complex(y), params)
        y = y - _solve(jac, _residual_vec(y, params))
        res = _residual_norm(y, params)
        if history is not None:
            history.append(res)
        if not np.isfinite(res):
            break
    if res < tol:
        return FieldState.from_even_values(to_complex(y))
    raise NoConvergence(
        f"Newton did not reach {tol:g} in {max_iter} iterations (last {res:.3e})",
        residual=res,
        iterations=max_iter,
    )


def _reflect_half(u: FieldState) -> np.ndarray:
    """Samples of ``a(-x)`` on the cosine grid."""
    vals = u.values
    n = u.n_modes
    idx = (-np.arange(n + 1)) % vals.size
    return vals[idx]


def residual_norm(u: FieldState, params: Params) -> float:
    from .model import stationary_residual

    return stationary_residual(u, params).l2()


# branch switching -------------------------------------------------------------
def _constrained_newton(y, zeta, params, row, target, tol, max_iter):
    """Solve ``F(y, zeta) = 0``, ``row . y = target`` for ``(y, zeta)``."""
    n = y.size
    for _ in range(max_iter):
        p = params.replace(zeta=zeta)
        f = _residual_vec(y, p)
        res = even_torus_l2(to_complex(f))
        gap = row @ y - target
        if res < tol and abs(gap) < tol:
            return y, zeta, res
        mat = np.zeros((n + 1, n + 1))
        mat[:n, :n] = even_jacobian(to_complex(y), p)
        mat[:n, n] = _param_derivative(y, "zeta")
        mat[n, :n] = row
        step = _solve(mat, np.concatenate([f, [gap]]))
        y = y - step[:n]
        zeta = zeta - step[n]
    raise NoConvergence(f"constrained Newton failed (residual {res:.3e})", residual=res)


def switch_branch(
    c: BifurcationCandidate,
    amplitude: float | None,
    params: Params,
    n_modes: int = 128,
    tol: float = 1e-10,
    max_halvings: int = 6,
) -> BranchPoint:
    """First point on the nonconstant branch emanating from ``c``.

    The predictor is ``a0 + amplitude (alpha1 + i alpha2) cos(kx)``.  It is
    corrected with ``zeta`` free and the projection of the ``cos(kx)``
    coefficient on the kernel vector pinned to ``amplitude``, which excludes
    the constant solution.  Halves the amplitude on failure.
    """
    p0 = params.replace(zeta=c.zeta)
    if amplitude is None:
        amplitude = 1e-2 * abs(c.a0)
    if amplitude == 0:
        u = FieldState.constant(c.a0, n_modes)
        return BranchPoint.from_field(u, p0, residual_norm(u, p0))
    if abs(c.transversality) <= 1e-8:
        raise FellBackToTrivial("candidate is not transversal")
    if c.non_simple:
        raise FellBackToTrivial("both wavenumbers are integers: kernel is not simple")
    if c.k > n_modes // 3:
        raise ValueError(f"wavenumber {c.k} under-resolved with {n_modes} modes")
    x = np.pi * np.arange(n_modes + 1) / n_modes
    alpha = c.kernel_vector[0] + 1j * c.kernel_vector[1]
    proj = _cosine_projector(n_modes)[c.k]
    row = np.zeros(2 * (n_modes + 1))
    row[0::2] = proj * c.kernel_vector[0]
    row[1::2] = proj * c.kernel_vector[1]
    last_error = None
    for _ in range(max_halvings + 1):
        y0 = to_real(c.a0 + amplitude * alpha * np.cos(c.k * x))
        try:
            y, zeta, res = _constrained_newton(y0, c.zeta, params, row, amplitude, tol, 30)
        except (NoConvergence, SingularJacobian) as exc:
            last_error = exc
            amplitude *= 0.5
            continue
        u = FieldState.from_even_values(to_complex(y))
        if u.dx_l2() > 1e-8:
            return BranchPoint.from_field(u, params.replace(zeta=zeta), res)
        amplitude *= 0.5
    raise FellBackToTrivial(f"branch switching failed at t={c.t:.6g}: {last_error}")


# pseudo-arclength continuation ----------------------------------------------------
def _dominant_mode(y, n_modes):
    coeffs = _cosine_projector(n_modes) @ to_complex(y)
    k = int(np.argmax(np.abs(coeffs[1:]))) + 1
    return k, coeffs[k]


class _Arclength:
    """Augmented system in ``X = (y, lambda)`` with weighted inner product."""

    def __init__(self, params: Params, free_param: str, tol: float):
        self.params = params
        self.free = free_param
        self.tol = tol

    def params_at(self, lam):
        return self.params.replace(**{self.free: lam})

    def weights(self, n):
        w = np.full(n + 1, 1.0 / n)
        w[-1] = 1.0
        return w

    def bordered(self, y, lam):
        p = self.params_at(lam)
        n = y.size
        mat = np.empty((n + 1, n + 1))
        mat[:n, :n] = even_jacobian(to_complex(y), p)
        mat[:n, n] = _param_derivative(y, self.free)
        return mat

    def tangent(self, y, lam, previous):
        n = y.size
        mat = self.bordered(y, lam)
        w = self.weights(n)
        mat[n] = previous * w
        rhs = np.zeros(n + 1)
        rhs[n] = 1.0
        t = _solve(mat, rhs)
        t /= math.sqrt(np.sum(w * t * t))
        if np.sum(w * t * previous) < 0:
            t = -t
        return t

    def distance(self, x, y):
        w = self.weights(x.size - 1)
        return math.sqrt(np.sum(w * (x - y) ** 2))

    def correct(self, x_pred, tangent, max_iter=8, max_dist=np.inf):
        n = x_pred.size - 1
        w = self.weights(n)
        x = x_pred.copy()
        for it in range(1, max_iter + 1):
            p = self.params_at(x[n])
            f = _residual_vec(x[:n], p)
            mat = self.bordered(x[:n], x[n])
            mat[n] = tangent * w
            gap = np.sum(w * tangent * (x - x_pred))
            step = _solve(mat, np.concatenate([f, [gap]]))
            x = x - step
            res = _residual_norm(x[:n], self.params_at(x[n]))
            if not np.isfinite(res) or res > 1e3:
                break
            if self.distance(x, x_pred) > max_dist:
                break
            if res < self.tol and math.sqrt(np.sum(w * step * step)) < 1e-6:
                return x, it, res
        raise NoConvergence("corrector failed")


def continue_branch(
    start: BranchPoint,
    params: Params,
    free_param: str = "zeta",
    ds: float = 0.02,
    max_steps: int = 2000,
    box: dict | None = None,
    direction: float | None = None,
    tol: float = 1e-10,
    origin=None,
    detect_closure: bool = True,
) -> Branch:
    """Follow the solution curve through ``start`` in ``(field, free_param)``.

    Stops after ``max_steps`` accepted steps, when the free parameter leaves
    ``box`` (``{"zeta": (lo, hi), "kappa": (lo, hi)}``), or when the branch
    returns to the trivial curve.  A return is recognised when the dominant
    cosine mode changes sign between two steps while ``||a_x||_2`` is small
    and the interpolated crossing matches a bifurcation point of that mode;
    the constant state there is appended and the branch is marked closed.

    ``direction`` orients the initial tangent: for ``zeta``/``kappa`` its sign
    is the sign of the initial parameter change; by default the branch
    starts in the direction in which ``||a_x||_2`` grows.
    """
    if free_param not in ("zeta", "kappa"):
        raise ValueError("free_param must be 'zeta' or 'kappa'")
    params = params.replace(zeta=start.zeta, kappa=start.kappa)
    n_modes = start.field.n_modes
    box = dict(box or {})
    box.setdefault("kappa", (0.0, 10.0))
    lo, hi = box.get(free_param, (-np.inf, np.inf))
    system = _Arclength(params, free_param, tol)
    y = to_real(start.field.even_values())
    lam = getattr(start, free_param)
    n = y.size
    x = np.concatenate([y, [lam]])

    # initial tangent from the null vector of the bordered Jacobian
    mat = system.bordered(y, lam)
    null = scipy.linalg.null_space(mat[:n])
    guess = null[:, 0] if null.shape[1] else np.eye(n + 1)[n]
    tangent = system.tangent(y, lam, guess)
    if direction is not None:
        if np.sign(tangent[n]) != np.sign(direction):
            tangent = -tangent
    else:
        dmode, cmode = _dominant_mode(y, n_modes)
        proj = _cosine_projector(n_modes)[dmode]
        growth = np.real(
            np.conj(cmode) * (proj @ (tangent[:n:2] + 1j * tangent[1:n:2]))
        )
        if growth < 0:
            tangent = -tangent

    points = [start]
    closed = False
    stop = "max_steps"
    easy = 0
    max_h1x = start.h1x
    start_h1x = start.h1x
    prev_mode = _dominant_mode(y, n_modes)
    rejected = 0

    while len(points) <= max_steps:
        x_pred = x + ds * tangent
        if free_param == "kappa" and x_pred[n] < 0:
            stop = "left_box"
            break
        try:
            # a far corrector jump usually lands on another branch
            x_new, iters, res = system.correct(x_pred, tangent, max_dist=0.5 * ds)
        except (NoConvergence, SingularJacobian):
            ds *= 0.5
            easy = 0
            rejected += 1
            if ds < DS_MIN:
                raise StepUnderflow(
                    f"step size underflow after {len(points)} points at "
                    f"{free_param}={x[n]:.6g}"
                )
            continue
        easy = easy + 1 if iters <= 3 else 0
        lam_new = x_new[n]
        u_new = FieldState.from_even_values(to_complex(x_new[:n]))
        point = BranchPoint.from_field(u_new, system.params_at(lam_new), res)

        landed = point.h1x < 1e-7
        if detect_closure and max_h1x > 10 * start_h1x:
            k_dom, c_dom = prev_mode
            c_new = _cosine_projector(n_modes)[k_dom] @ to_complex(x_new[:n])
            if landed:
                c_new = 0.0 * c_new
            flipped = landed or np.real(np.conj(c_dom) * c_new) < 0
            small = max(points[-1].h1x, point.h1x) < 0.2 * max_h1x
            if flipped and small:
                refined = _closure_point(
                    system, points[-1], point, k_dom, c_dom, c_new, n_modes
                )
                if refined is not None:
                    if not landed:
                        points.append(point)
                    points.append(refined)
                    closed = True
                    stop = "closed"
                    break
        if landed and points[-1].h1x >= 1e-7:
            # jumped onto the constant curve away from a crossing
            ds *= 0.5
            easy = 0
            rejected += 1
            if ds < DS_MIN:
                raise StepUnderflow("corrector keeps landing on constant states")
            continue

        points.append(point)
        max_h1x = max(max_h1x, point.h1x)
        new_tangent = system.tangent(x_new[:n], lam_new, tangent)
        x, tangent = x_new, new_tangent
        prev_mode = _dominant_mode(x[:n], n_modes)
        if easy >= 3:
            ds = min(ds * 1.3, DS_MAX)
            easy = 0
        ds = max(ds, DS_MIN)
        if not lo <= lam_new <= hi:
            stop = "left_box"
            break

    log.debug("branch finished: %s after %d points", stop, len(points))
    return Branch(
        points=tuple(points),
        origin=origin,
        closed=closed,
        free_param=free_param,
        params=params,
        stop_reason=stop,
        extras={"rejected_steps": rejected},
    )


def _closure_point(system, prev, point, k_dom, c_dom, c_new, n_modes):
    """Bifurcation point at which the branch meets the trivial curve.

    The zero of the dominant ``cos(k x)`` coefficient is interpolated in
    ``zeta`` between the two bracketing points and matched against the
    crossings of ``k_dom`` found by the trivial-curve scan.  Returns the
    exact constant state there, or ``None`` when nothing matches.
    """
    fa = abs(c_dom)
    fb = float(np.real(np.conj(c_dom) * c_new) / fa)
    theta = fa / (fa - fb)
    if system.free == "kappa":
        k_cross = prev.kappa + (point.kappa - prev.kappa) * theta
        params = system.params_at(max(k_cross, 0.0))
        mean = prev.field.mean() + (point.field.mean() - prev.field.mean()) * theta
        states = constant_states_at(params.zeta, params)
        if not states:
            return None
        a0 = min(states, key=lambda z: abs(z - mean))
        u = FieldState.constant(a0, n_modes)
        return BranchPoint.from_field(u, params, residual_norm(u, params))
    z_cross = prev.zeta + (point.zeta - prev.zeta) * theta
    params = system.params_at(z_cross)
    matches = [
        c for c in bifurcation.scan_trivial_branch(params) if c.k == k_dom
    ]
    if not matches:
        return None
    best = min(matches, key=lambda c: abs(c.zeta - z_cross))
    # the curve is quadratic in the amplitude near the crossing, so linear
    # interpolation is only accurate to the size of the step in zeta
    if abs(best.zeta - z_cross) > max(1e-2, 2 * abs(point.zeta - prev.zeta)):
        return None
    u = FieldState.constant(best.a0, n_modes)
    at = params.replace(zeta=best.zeta)
    return BranchPoint.from_field(u, at, residual_norm(u, at))


def continue_from_candidate(
    c: BifurcationCandidate,
    params: Params,
    n_modes: int = 128,
    ds: float = 0.02,
    max_steps: int = 2000,
    amplitude: float | None = None,
    box: dict | None = None,
) -> Branch:
    start = switch_branch(c, amplitude, params, n_modes=n_modes)
    return continue_branch(
        start, params, "zeta", ds=ds, max_steps=max_steps, box=box, origin=c
    )


# numerical threshold -----------------------------------------------------------
def kappa_num_threshold(d: float, f: float, width: float = 1e-3, n_grid: int = 2000) -> float:
    """Damping at which integer crossings on the trivial curve cease to exist.

    Bisection on ``kappa`` for the predicate "the scan finds a candidate",
    starting from ``[0, kappa_star + 0.002]``, until the bracket is narrower
    than ``width``; returns the midpoint.
    """
    if f * f <= 1:
        raise ValueError("the numerical threshold needs f^2 > 1")

    def has_candidates(kappa):
        return bool(bifurcation.scan_trivial_branch(Params(d, 0.0, f, kappa), n_grid=n_grid))

    lo, hi = 0.0, kappa_star_bifurcation(f) + 0.002
    if not has_candidates(lo):
        return 0.0
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        if has_candidates(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# diagnostics ---------------------------------------------------------------
def lower_bound_gap(u: FieldState, params: Params) -> float:
    """``2 pi ||a_x|| + max(sqrt(2 pi)|f|, ||a||) - sqrt(2 pi / alpha_kappa)``.

    Nonnegative for every nonconstant stationary solution when
    ``kappa < 1/sqrt(3)``.
    """
    alpha = -2 * params.kappa + math.sqrt(1 + params.kappa**2)
    lhs = TWO_PI * u.dx_l2() + max(math.sqrt(TWO_PI) * abs(params.f), u.l2())
    return lhs - math.sqrt(TWO_PI / alpha)


def branch_violations(branch: Branch, tol: float = 1e-8) -> list[str]:
    """Invariant checks for every point of a branch; empty list when clean."""
    problems = []
    for i, p in enumerate(branch.points):
        prm = branch.params.replace(zeta=p.zeta, kappa=p.kappa)
        res = residual_norm(p.field, prm)
        if res >= tol:
            problems.append(f"point {i}: residual {res:.2e}")
        if p.kappa > 0 and p.linf > apriori_bound(prm):
            problems.append(f"point {i}: a-priori bound violated")
        if p.field.sine_mass() > 1e-10 * max(1.0, p.l2):
            problems.append(f"point {i}: left the even subspace")
    return problems


def trivial_zeta_range(params: Params):
    """Range of ``zeta`` covered by the trivial curve is all of R; kept for
    symmetry with the box convention (returns ``(-inf, inf)``)."""
    solve_tau(params.kappa, params.f)
    return -np.inf, np.inf
