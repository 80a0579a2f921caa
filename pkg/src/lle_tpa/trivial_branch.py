"""Curve of spatially constant solutions.

Constant solutions satisfy ``(zeta - i) a0 - (1 + i kappa)|a0|^2 a0 + i f = 0``.
The curve is parametrised by ``t in (-sqrt(tau), sqrt(tau))`` with
``|a0|^2 = f^2 (tau - t^2)`` and ``sign(t) = sign(zeta - |a0|^2)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, TurningPoint
from .model import Params

RADICAND_TOL = 1e-12


@dataclass(frozen=True)
class TrivialBranchPoint:
    t: float
    zeta: float
    a0: complex
    rho: float


def constant_residual(a0, zeta, params: Params):
    return (zeta - 1j) * a0 - (1 + 1j * params.kappa) * abs(a0) ** 2 * a0 + 1j * params.f


def solve_tau(kappa: float, f: float) -> float:
    """Unique ``tau in (0, 1]`` with ``tau (1 + kappa f^2 tau)^2 = 1``."""
    if kappa < 0:
        raise DomainError("kappa must be >= 0")
    if f == 0:
        raise DomainError("f must be nonzero")
    c = kappa * f * f
    if c == 0:
        return 1.0

    def h(tau):
        return tau * (1.0 + c * tau) ** 2 - 1.0

    tau = brentq(h, 0.0, 1.0, xtol=1e-16, rtol=1e-15)
    # Newton polish on the strictly increasing cubic
    for _ in range(3):
        dh = (1.0 + c * tau) ** 2 + 2.0 * c * tau * (1.0 + c * tau)
        tau -= h(tau) / dh
    return float(tau)


def _radicand_numerator(t, tau, kappa, f):
    kf2 = kappa * f * f
    return (
        1.0
        + 4.0 * kf2 * tau
        + 3.0 * kf2**2 * tau**2
        + t**2 * (-3.0 * kf2**2 * tau - 2.0 * kf2)
        + t**4 * kf2**2
    )


def _curve(t, tau, params: Params):
    """Vectorised ``(zeta(t), a0(t), A(t))`` with no domain checks."""
    f, kappa = params.f, params.kappa
    s = tau - t**2
    radicand = _radicand_numerator(t, tau, kappa, f) / s
    big_a = t * np.sqrt(np.maximum(radicand, 0.0))
    zeta = f * f * s + big_a
    a0 = f * s * (1.0 + kappa * f * f * s - 1j * big_a)
    return zeta, a0, big_a


def parametrize(t: float, params: Params, tau: float | None = None) -> TrivialBranchPoint:
    """Point ``(zeta(t), a0(t))`` of the trivial curve (``params.zeta`` unused)."""
    if tau is None:
        tau = solve_tau(params.kappa, params.f)
    if abs(t) >= np.sqrt(tau):
        raise DomainError(f"|t| must be < sqrt(tau) = {np.sqrt(tau):.6g}")
    s = tau - t * t
    radicand = _radicand_numerator(t, tau, params.kappa, params.f) / s
    if radicand < -RADICAND_TOL:
        raise DomainError(f"negative radicand {radicand:.3e} in A(t)")
    zeta, a0, _ = _curve(t, tau, params)
    return TrivialBranchPoint(
        t=float(t), zeta=float(zeta), a0=complex(a0), rho=float(params.f**2 * s)
    )


def sample_branch(params: Params, n: int = 2001, margin: float = 1e-3):
    """Points on a uniform t-grid that stops ``margin * sqrt(tau)`` short of
    the endpoints (zeta is unbounded there)."""
    tau = solve_tau(params.kappa, params.f)
    edge = np.sqrt(tau) * (1.0 - margin)
    return [parametrize(t, params, tau) for t in np.linspace(-edge, edge, n)]


def _cubic_coefficients(zeta, params):
    kappa, f = params.kappa, params.f
    # rho ((zeta - rho)^2 + (1 + kappa rho)^2) - f^2
    return np.array(
        [1.0 + kappa**2, 2.0 * kappa - 2.0 * zeta, zeta**2 + 1.0, -f * f]
    )


def constant_states_at(zeta: float, params: Params) -> list[complex]:
    """All constant solutions at detuning ``zeta``, ordered by ``|a0|^2``.

    Roots of the cubic in ``rho = |a0|^2`` come from the companion matrix,
    each polished by Newton steps, then mapped to
    ``a0 = (rho / f)(1 + kappa rho + i (rho - zeta))``.
    """
    if params.f == 0:
        raise DomainError("f must be nonzero")
    coeffs = _cubic_coefficients(zeta, params)
    poly = np.polynomial.Polynomial(coeffs[::-1])
    dpoly = poly.deriv()
    roots = np.roots(coeffs)
    scale = max(1.0, float(np.max(np.abs(roots))))
    rhos = []
    for r in roots:
        if abs(r.imag) > 1e-7 * scale or r.real <= 0:
            continue
        rho = float(r.real)
        for _ in range(4):
            step = poly(rho) / dpoly(rho) if dpoly(rho) != 0 else 0.0
            rho -= step
            if abs(step) < 1e-16 * max(1.0, rho):
                break
        rhos.append(rho)
    rhos = sorted(rhos)
    unique = []
    for rho in rhos:
        if not unique or abs(rho - unique[-1]) > 1e-10 * max(1.0, rho):
            unique.append(rho)
    f, kappa = params.f, params.kappa
    return [complex(rho / f * (1 + kappa * rho + 1j * (rho - zeta))) for rho in unique]


def tangent_factor(a0: complex, zeta: float, kappa: float) -> complex:
    """Complex factor ``c`` with ``d a0/dt = c * (d zeta/dt) * a0`` on the curve."""
    rho = abs(a0) ** 2
    num = (1 - 3j * kappa) * rho - zeta - 1j
    den = 3 * (1 + kappa**2) * rho**2 + 4 * (kappa - zeta) * rho + zeta**2 + 1
    return num / den


def tangent_denominator(a0: complex, zeta: float, kappa: float) -> float:
    rho = abs(a0) ** 2
    return 3 * (1 + kappa**2) * rho**2 + 4 * (kappa - zeta) * rho + zeta**2 + 1


def zeta_derivative(t: float, params: Params, tau: float | None = None) -> float:
    if tau is None:
        tau = solve_tau(params.kappa, params.f)
    f, kappa = params.f, params.kappa
    kf2 = kappa * f * f
    s = tau - t * t
    num = _radicand_numerator(t, tau, kappa, f)
    dnum = 2 * t * (-3 * kf2**2 * tau - 2 * kf2) + 4 * t**3 * kf2**2
    q = num / s
    dq = (dnum * s + 2 * t * num) / s**2
    root = np.sqrt(max(q, 0.0))
    d_big_a = root + (t * dq / (2 * root) if root > 0 else 0.0)
    return float(-2 * f * f * t + d_big_a)


def branch_tangent(p: TrivialBranchPoint, params: Params):
    """Tangent ``(d zeta/dt, d a0/dt)`` of the trivial curve at ``p``.

    Raises :class:`TurningPoint` where ``|d zeta/dt| < 1e-10``.
    """
    zeta_dot = zeta_derivative(p.t, params)
    if abs(zeta_dot) < 1e-10:
        raise TurningPoint(f"d zeta/dt vanishes at t={p.t:.6g}")
    c = tangent_factor(p.a0, p.zeta, params.kappa)
    return zeta_dot, c * zeta_dot * p.a0


def turning_points(params: Params, n: int = 4001) -> list[TrivialBranchPoint]:
    """Folds of the trivial curve (zeros of ``d zeta / dt``)."""
    tau = solve_tau(params.kappa, params.f)
    edge = np.sqrt(tau) * (1 - 1e-6)
    ts = np.linspace(-edge, edge, n)
    vals = np.array([zeta_derivative(t, params, tau) for t in ts])
    out = []
    for i in np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]:
        t0 = brentq(zeta_derivative, ts[i], ts[i + 1], args=(params, tau), xtol=1e-15)
        out.append(parametrize(t0, params, tau))
    return out


def write_branch_csv(points, path) -> None:
    """CSV with columns ``t, zeta, re_a0, im_a0, rho``."""
    from .outputs import write_rows

    rows = [(p.t, p.zeta, p.a0.real, p.a0.imag, p.rho) for p in points]
    write_rows(path, ("t", "zeta", "re_a0", "im_a0", "rho"), rows)
