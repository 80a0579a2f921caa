"""Bright solitons through the rescaled Neumann problem.

With ``a(x) = eps^{-1/2} u(eps^{-1/2} x)`` the stationary equation becomes

    -d u'' + (zeta_t - eps i) u - (1 + i kappa)|u|^2 u + i f_t = 0

with ``zeta_t = eps zeta`` and ``f_t = eps^{3/2} f``.  At ``eps = kappa = 0``
and ``u = i v`` it reduces to the real ODE ``-d v'' + zeta_t v - v^3 + f_t = 0``
whose homoclinic orbits to the middle equilibrium seed the continuation.
The real line is replaced by ``[0, length]`` with Neumann ends.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.fft import dct
from scipy.integrate import solve_ivp

from .continuation import newton_solve
from .errors import BackgroundFold, DomainError, NoConvergence, SingularJacobian, StageFailed
from .model import (
    FieldState,
    Params,
    _interleave_operator,
    cosine_d2,
    cosine_second_derivative,
    dg_real_matrix,
    even_l2,
    to_complex,
    to_real,
)

STAGE_STEPS = {"f_tilde": 0.05, "eps": 0.02, "kappa": 0.01}
MIN_STAGE_STEP = 1e-5


@dataclass(frozen=True)
class RescaledParams:
    d: float
    zeta_tilde: float
    f_tilde: float = 0.0
    eps: float = 0.0
    kappa: float = 0.0

    def __post_init__(self):
        if not self.d > 0:
            raise DomainError("the soliton construction needs anomalous dispersion d > 0")
        if not self.zeta_tilde > 0:
            raise DomainError("zeta_tilde must be positive")
        if self.eps < 0 or self.kappa < 0:
            raise DomainError("eps and kappa must be nonnegative")

    @property
    def homoclinic_bound(self) -> float:
        """``(2 sqrt 3 / 9) zeta_t^{3/2}``; three equilibria exist below it."""
        return homoclinic_bound(self.zeta_tilde)

    def replace(self, **changes) -> "RescaledParams":
        return replace(self, **changes)

    def torus_params(self) -> Params:
        """Parameters ``(zeta, f) = (zeta_t / eps, f_t eps^{-3/2})`` on the circle."""
        if not self.eps > 0:
            raise DomainError("rescaling needs eps > 0")
        return Params(
            self.d,
            self.zeta_tilde / self.eps,
            self.f_tilde * self.eps**-1.5,
            self.kappa,
        )


@dataclass(frozen=True)
class HalfLineField:
    """Samples on the ``N + 1`` point cosine grid of ``[0, length]``."""

    values: np.ndarray
    u_infty: complex
    length: float = math.pi
    params: RescaledParams | None = field(default=None, compare=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=complex)
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def n_modes(self) -> int:
        return self.values.size - 1

    @property
    def x(self) -> np.ndarray:
        return np.linspace(0.0, self.length, self.n_modes + 1)

    def peak(self) -> float:
        return float(np.max(np.abs(self.values)))

    def evaluate(self, s) -> np.ndarray:
        """Cosine-series interpolant at arbitrary points of ``[0, length]``."""
        n = self.n_modes
        coeffs = dct(self.values.real, type=1) + 1j * dct(self.values.imag, type=1)
        coeffs /= n
        coeffs[[0, -1]] *= 0.5
        s = np.asarray(s, dtype=float)
        k = np.arange(n + 1)
        return np.cos(np.multiply.outer(s * math.pi / self.length, k)) @ coeffs

    def l2_distance(self, other: "HalfLineField") -> float:
        return even_l2(self.values - other.values, self.length)


# phase plane ---------------------------------------------------------------
def homoclinic_bound(zeta_tilde: float) -> float:
    return 2.0 * math.sqrt(3.0) / 9.0 * zeta_tilde**1.5


def equilibria(zeta_tilde: float, f_tilde: float) -> tuple:
    """Real roots of ``v^3 - zeta_t v = f_t`` in increasing order."""
    p, q = -zeta_tilde, -f_tilde
    disc = -(4 * p**3 + 27 * q**2)
    if disc > 0:
        r = 2.0 * math.sqrt(-p / 3.0)
        arg = 3.0 * q / (2.0 * p) * math.sqrt(-3.0 / p)
        phi = math.acos(max(-1.0, min(1.0, arg)))
        roots = [r * math.cos(phi / 3.0 - 2.0 * math.pi * j / 3.0) for j in range(3)]
    else:
        roots = [float(r.real) for r in np.roots([1.0, 0.0, p, q]) if abs(r.imag) < 1e-7]
    polished = []
    for v in roots:
        for _ in range(3):
            dv = 3 * v * v + p
            if dv == 0:
                break
            v -= (v**3 + p * v + q) / dv
        polished.append(v)
    polished = sorted(polished)
    out = []
    for v in polished:
        if not out or abs(v - out[-1]) > 1e-9 * max(1.0, abs(v)):
            out.append(v)
    if len(out) == 3:
        edge = math.sqrt(zeta_tilde / 3.0)
        assert out[0] < -edge < out[1] < edge < out[2]
    return tuple(out)


def classify_equilibrium(v: float, zeta_tilde: float, d: float) -> str:
    """``"saddle"`` or ``"center"`` for the equilibrium ``v`` of the profile ODE.

    Linearising ``-d v'' + zeta_t v - v^3 + f_t = 0`` gives
    ``w'' = -(Delta / d) w`` with ``Delta = -zeta_t + 3 v^2``; the equilibrium is
    a saddle when ``Delta / d < 0``.
    """
    delta = -zeta_tilde + 3.0 * v * v
    if abs(delta) < 1e-12:
        raise DomainError("degenerate equilibrium (Delta = 0)")
    if d == 0:
        raise DomainError("d must be nonzero")
    return "saddle" if delta * d < 0 else "center"


def first_integral(v, vp, zeta_tilde, f_tilde, d):
    """``-d v'^2 + zeta_t v^2 - v^4 / 2 + 2 f_t v``, constant along profiles."""
    return -d * vp * vp + zeta_tilde * v * v - 0.5 * v**4 + 2.0 * f_tilde * v


def profile_rhs(zeta_tilde, f_tilde, d):
    def rhs(_x, y):
        v, vp = y
        return [vp, (zeta_tilde * v - v**3 + f_tilde) / d]

    return rhs


def turning_points(zeta_tilde: float, f_tilde: float) -> tuple:
    """Amplitudes ``(v_dip, v_bump)`` where the homoclinic level set of the
    middle equilibrium meets ``v' = 0``."""
    eq = equilibria(zeta_tilde, f_tilde)
    if len(eq) != 3:
        raise DomainError("homoclinic orbits need three equilibria")
    v2 = eq[1]
    # P(v) - P(v2) = -(1/2)(v - v2)^2 (v^2 + 2 v2 v + c)
    c = 3.0 * v2 * v2 - 2.0 * zeta_tilde
    disc = v2 * v2 - c
    if disc <= 0:
        raise DomainError("no homoclinic turning points")
    root = math.sqrt(disc)
    return -v2 - root, -v2 + root


# residuals ---------------------------------------------------------------
def background_residual(u: complex, rp: RescaledParams) -> complex:
    return (
        (rp.zeta_tilde - 1j * rp.eps) * u
        - (1 + 1j * rp.kappa) * abs(u) ** 2 * u
        + 1j * rp.f_tilde
    )


def _linear_block(rp):
    return np.array([[rp.zeta_tilde, rp.eps], [-rp.eps, rp.zeta_tilde]])


def half_line_residual(values: np.ndarray, rp: RescaledParams, length: float = math.pi):
    u_xx = cosine_second_derivative(values, length)
    return (
        -rp.d * u_xx
        + (rp.zeta_tilde - 1j * rp.eps) * values
        - (1 + 1j * rp.kappa) * np.abs(values) ** 2 * values
        + 1j * rp.f_tilde
    )


def half_line_jacobian(values: np.ndarray, rp: RescaledParams, length: float = math.pi):
    n_modes = values.size - 1
    blocks = _linear_block(rp) - dg_real_matrix(values, rp)
    return _interleave_operator(cosine_d2(n_modes, length), blocks, -rp.d)


def residual_norm(u: HalfLineField, rp: RescaledParams | None = None) -> float:
    rp = rp or u.params
    return even_l2(half_line_residual(u.values, rp, u.length), u.length)


# backgrounds --------------------------------------------------------------
def solve_background(rp: RescaledParams, n_steps: int = 20) -> complex:
    """Continuation of ``i v2`` (middle equilibrium) from ``eps = kappa = 0``.

    Newton on the two real unknowns, stepping along the segment towards
    ``(eps, kappa)``.  A sign change of the Jacobian determinant or a failed
    Newton solve means the middle root was lost at a fold.
    """
    eq = equilibria(rp.zeta_tilde, rp.f_tilde)
    if len(eq) != 3:
        raise DomainError("the background needs three equilibria at eps = kappa = 0")
    u = 1j * eq[1]
    if rp.eps == 0 and rp.kappa == 0:
        return u

    def jac(u, p):
        return _linear_block(p) - dg_real_matrix(u, p)

    det0 = np.linalg.det(jac(u, rp.replace(eps=0.0, kappa=0.0)))
    s, ds = 0.0, 1.0 / n_steps
    while s < 1.0:
        s_new = min(1.0, s + ds)
        p = rp.replace(eps=s_new * rp.eps, kappa=s_new * rp.kappa)
        z = u
        ok = False
        for _ in range(30):
            g = background_residual(z, p)
            if abs(g) < 1e-15 * max(1.0, abs(z)):
                ok = True
                break
            step = np.linalg.solve(jac(z, p), [g.real, g.imag])
            z = z - complex(step[0], step[1])
        ok = ok or abs(background_residual(z, p)) < 1e-13
        if ok and np.sign(np.linalg.det(jac(z, p))) == np.sign(det0):
            u, s = z, s_new
            continue
        ds *= 0.5
        if ds < 1e-6:
            raise BackgroundFold(f"background lost at eps={p.eps:.4g}, kappa={p.kappa:.4g}")
    return complex(u)


# seeds -------------------------------------------------------------------
def sech_seed(rp: RescaledParams, n_modes: int = 512, length: float = math.pi,
              images: int = 2) -> HalfLineField:
    """``i sqrt(2 zeta_t) sech(x sqrt(zeta_t / d))`` summed over mirror images.

    Adding the images at ``2 m length`` makes the profile exactly even about
    both ends, so the cosine collocation sees no derivative jump at
    ``x = length``.
    """
    x = np.linspace(0.0, length, n_modes + 1)
    b = math.sqrt(rp.zeta_tilde / rp.d)
    v = sum(1.0 / np.cosh(b * (x - 2 * m * length)) for m in range(-images, images + 1))
    values = 1j * math.sqrt(2.0 * rp.zeta_tilde) * v
    return HalfLineField(values, 0j, length, rp)


def shooting_seed(rp: RescaledParams, kind: str = "dip", n_modes: int = 512,
                  length: float = math.pi) -> HalfLineField:
    """Homoclinic profile of the real ODE integrated from its turning point.

    ``kind="bump"`` has its maximum at ``x = 0`` (``x Im u' < 0``),
    ``kind="dip"`` its minimum (``x Im u' > 0``).
    """
    v_dip, v_bump = turning_points(rp.zeta_tilde, rp.f_tilde)
    v0 = {"dip": v_dip, "bump": v_bump}[kind]
    x = np.linspace(0.0, length, n_modes + 1)
    sol = solve_ivp(
        profile_rhs(rp.zeta_tilde, rp.f_tilde, rp.d),
        (0.0, length),
        [v0, 0.0],
        method="DOP853",
        t_eval=x,
        rtol=1e-13,
        atol=1e-13,
    )
    v = sol.y[0]
    v2 = equilibria(rp.zeta_tilde, rp.f_tilde)[1]
    # the saddle repels integration errors; freeze the tail once it is reached
    close = np.nonzero(np.abs(v - v2) < 1e-6)[0]
    if close.size:
        v[close[0]:] = v2
    if v.size != x.size:
        raise NoConvergence("profile integration stopped early")
    return HalfLineField(1j * v, 1j * v2, length, rp.replace(eps=0.0, kappa=0.0))


# Newton and staged continuation --------------------------------------------
def newton_half_line(u: HalfLineField, rp: RescaledParams, tol: float = 1e-10,
                     max_iter: int = 25, history: list | None = None) -> HalfLineField:
    y = to_real(u.values)
    length = u.length
    for _ in range(max_iter + 1):
        res = half_line_residual(to_complex(y), rp, length)
        norm = even_l2(res, length)
        if history is not None:
            history.append(norm)
        if norm < tol:
            return HalfLineField(to_complex(y), u.u_infty, length, rp)
        if not np.isfinite(norm) or norm > 1e8:
            break
        jac = half_line_jacobian(to_complex(y), rp, length)
        try:
            y = y - np.linalg.solve(jac, to_real(res))
        except np.linalg.LinAlgError as exc:
            raise SingularJacobian(str(exc)) from exc
    raise NoConvergence(f"half-line Newton failed (residual {norm:.3e})", residual=norm)


def nondegeneracy_check(u: HalfLineField, rp: RescaledParams | None = None) -> float:
    """``sigma_min / sigma_max`` of the even-basis Jacobian at ``u``."""
    rp = rp or u.params
    sv = np.linalg.svd(half_line_jacobian(u.values, rp, u.length), compute_uv=False)
    return float(sv[-1] / sv[0])


def continue_stage(u: HalfLineField, stage: str, target: float,
                   step: float | None = None, tol: float = 1e-10,
                   log: list | None = None, monitor: bool = False) -> HalfLineField:
    """Natural-parameter continuation of one of ``f_tilde``, ``eps``, ``kappa``.

    The predictor keeps the deviation ``u - u_infty`` and moves the
    background.  Steps are halved on failure and grow back after successes.
    """
    if stage not in STAGE_STEPS:
        raise ValueError(f"unknown stage {stage!r}")
    rp = u.params
    base = step or STAGE_STEPS[stage]
    value = getattr(rp, stage)
    direction = 1.0 if target >= value else -1.0
    h = base
    while direction * (target - value) > 1e-14:
        new = value + direction * min(h, abs(target - value))
        p = rp.replace(**{stage: new})
        try:
            bg = solve_background(p)
            seed = HalfLineField(u.values - u.u_infty + bg, bg, u.length, p)
            u_new = newton_half_line(seed, p, tol=tol)
        except (NoConvergence, SingularJacobian, BackgroundFold):
            h *= 0.5
            if h < MIN_STAGE_STEP:
                raise StageFailed(stage, value) from None
            continue
        u, rp, value = u_new, p, new
        if log is not None:
            entry = {"stage": stage, "value": value, "peak": u.peak()}
            if monitor:
                entry["nondegeneracy"] = nondegeneracy_check(u, p)
            log.append(entry)
        h = min(base, 2 * h)
    return u


def staged_continue(rp_target: RescaledParams, n_modes: int = 512,
                    length: float = math.pi, kind: str = "bump",
                    log: list | None = None, monitor: bool = False,
                    start: HalfLineField | None = None) -> HalfLineField:
    """Continue from the sech profile to ``rp_target`` in ``f_t``, ``eps``, ``kappa``.

    ``kind="dip"`` starts from the second homoclinic at the target ``f_t``
    (built by :func:`shooting_seed`) and skips the first stage.
    """
    if abs(rp_target.f_tilde) >= rp_target.homoclinic_bound:
        raise DomainError(
            f"|f_tilde| must be below {rp_target.homoclinic_bound:.6g} for a homoclinic"
        )
    if start is not None:
        u = start
    elif kind == "bump":
        rp0 = rp_target.replace(f_tilde=0.0, eps=0.0, kappa=0.0)
        u = sech_seed(rp0, n_modes, length)
    elif kind == "dip":
        rp0 = rp_target.replace(eps=0.0, kappa=0.0)
        u = newton_half_line(shooting_seed(rp0, "dip", n_modes, length), rp0)
    else:
        raise ValueError("kind must be 'bump' or 'dip'")
    for stage in ("f_tilde", "eps", "kappa"):
        u = continue_stage(u, stage, getattr(rp_target, stage), log=log, monitor=monitor)
    return u


# back to the circle ---------------------------------------------------------
def periodic_seed(u: HalfLineField, rp: RescaledParams, n_modes_torus: int = 256) -> FieldState:
    """Rescale, extend by the far value, mirror and shift the peak to ``pi``."""
    if not rp.eps > 0:
        raise DomainError("rescaling needs eps > 0")
    scale = math.sqrt(rp.eps)
    x = np.pi * np.arange(2 * n_modes_torus) / n_modes_torus
    y = np.abs(x - np.pi)
    inside = y <= scale * u.length
    values = np.full(x.size, u.values[-1] / scale, dtype=complex)
    values[inside] = u.evaluate(y[inside] / scale) / scale
    return FieldState(values, even_restricted=True)


def rescale_to_periodic(u: HalfLineField, rp: RescaledParams, n_modes_torus: int = 256,
                        tol: float = 1e-10):
    """Torus soliton at ``(zeta_t / eps, f_t eps^{-3/2})`` refined by Newton."""
    params = rp.torus_params()
    seed = periodic_seed(u, rp, n_modes_torus)
    return newton_solve(seed, params, tol=tol), params


def localization_norm(a: FieldState) -> float:
    """``||a - a(0)||_{H^2}`` with ``x = 0`` the point farthest from the peak."""
    return FieldState(a.values - a.values[0]).h2_norm()


def write_profile_csv(u: HalfLineField, path) -> None:
    from .outputs import write_rows

    rows = [(x, z.real, z.imag, abs(z)) for x, z in zip(u.x, u.values)]
    write_rows(path, ("x", "re_u", "im_u", "abs_u"), rows)


def write_periodic_csv(a: FieldState, params: Params, path) -> None:
    from .outputs import write_rows

    rows = [
        (x, z.real, z.imag, abs(z), params.zeta, params.f) for x, z in zip(a.x, a.values)
    ]
    write_rows(path, ("x", "re_a", "im_a", "abs_a", "zeta", "f"), rows)
