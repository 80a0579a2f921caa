"""Bifurcation points on the trivial curve, kernels, and closed-form thresholds."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import DomainError
from .model import FieldState, Params, n_matrix
from .trivial_branch import _curve, parametrize, solve_tau

KAPPA_MAX = 1.0 / math.sqrt(3.0)


@dataclass(frozen=True)
class BifurcationCandidate:
    """A point of the trivial curve where ``k1`` or ``k2`` is a positive integer.

    ``branch_sign`` is ``+1`` for ``k1`` and ``-1`` for ``k2``.  ``kernel_vector``
    spans the kernel of ``N - d k^2 Id``; ``adjoint_vector`` that of its
    transpose.  ``non_simple`` flags points where both wavenumbers are integers.
    """

    t: float
    k: int
    branch_sign: int
    kernel_vector: np.ndarray
    adjoint_vector: np.ndarray
    transversality: float
    zeta: float
    a0: complex
    non_simple: bool = False

    @property
    def rho(self) -> float:
        return abs(self.a0) ** 2


def inner_radicand(rho, kappa):
    return (1.0 - 3.0 * kappa**2) * rho**2 - 4.0 * kappa * rho - 1.0


def quadratic_residual(a0: complex, zeta: float, k: float, params: Params) -> float:
    """Left side of the necessary condition, quadratic in ``zeta + d k^2``."""
    rho = abs(a0) ** 2
    s = zeta + params.d * k * k
    kappa = params.kappa
    return s * s - 4 * rho * s + 3 * (1 + kappa**2) * rho**2 + 4 * kappa * rho + 1


def wavenumbers(a0: complex, zeta: float, params: Params):
    """``(k1, k2)``; an entry is ``None`` when one of its radicands is negative."""
    rho = abs(a0) ** 2
    disc = inner_radicand(rho, params.kappa)
    if disc < 0:
        return None, None
    root = math.sqrt(disc)
    out = []
    for sign in (1.0, -1.0):
        outer = (2 * rho - zeta + sign * root) / params.d
        out.append(math.sqrt(outer) if outer >= 0 else None)
    return tuple(out)


def _signed_k(outer):
    return np.sign(outer) * np.sqrt(np.abs(outer))


def _k_functions(params: Params, tau: float):
    """Continuous signed wavenumbers ``sign(q) sqrt(|q|)`` along ``t``; a
    positive integer crossing of these is a crossing of ``k1`` or ``k2``."""

    def k_of_t(t, sign):
        zeta, a0, _ = _curve(t, tau, params)
        rho = np.abs(a0) ** 2
        root = np.sqrt(np.maximum(inner_radicand(rho, params.kappa), 0.0))
        return _signed_k((2 * rho - zeta + sign * root) / params.d)

    return k_of_t


def feasible_interval(params: Params, tau: float | None = None):
    """Closed ``t``-interval where the inner radicand is nonnegative, or None.

    The radicand is increasing in ``|a0|^2`` wherever it is nonnegative, and
    ``|a0|^2 = f^2 (tau - t^2)`` decreases in ``|t|``.
    """
    kappa = params.kappa
    if kappa >= KAPPA_MAX:
        return None
    if tau is None:
        tau = solve_tau(kappa, params.f)
    rho_min = (2 * kappa + math.sqrt(1 + kappa**2)) / (1 - 3 * kappa**2)
    t2 = tau - rho_min / params.f**2
    if t2 < 0:
        return None
    tc = math.sqrt(t2)
    return -tc, tc


def kernel_vectors(a0: complex, zeta: float, k: int, params: Params):
    """Unit kernel vectors of ``N - d k^2 Id`` and its transpose.

    Uses ``alpha = (alpha1, alpha2)`` when ``Im(a0^2) <= 0`` and
    ``alpha~ = (alpha~1, alpha~2)`` otherwise, with the entries read off
    ``N - d k^2 Id = [[-alpha2, alpha1], [alpha~2, -alpha~1]]``.
    """
    res = quadratic_residual(a0, zeta, k, params)
    if abs(res) > 1e-8:
        raise DomainError(f"no kernel at k={k}: quadratic residual {res:.3e}")
    m = n_matrix(a0, zeta, params) - params.d * k * k * np.eye(2)
    alpha1, alpha2 = m[0, 1], -m[0, 0]
    alpha1_t, alpha2_t = -m[1, 1], m[1, 0]
    if (a0 * a0).imag <= 0:
        alpha = np.array([alpha1, alpha2])
        alpha_star = np.array([alpha1_t, alpha1])
    else:
        alpha = np.array([alpha1_t, alpha2_t])
        alpha_star = np.array([alpha2_t, alpha2])
    return alpha / np.linalg.norm(alpha), alpha_star / np.linalg.norm(alpha_star)


def transversality_value(c: BifurcationCandidate, params: Params) -> float:
    """Crandall-Rabinowitz transversality expression; nonzero means bifurcation."""
    return transversality_expression(c.a0, c.zeta, c.branch_sign, params.kappa)


def transversality_expression(a0, zeta, branch_sign, kappa) -> float:
    rho = abs(a0) ** 2
    root = math.sqrt(max(inner_radicand(rho, kappa), 0.0))
    first = 2 * (3 * kappa**2 - rho**2) * (rho - zeta) - 4 * kappa * rho * (3 * rho - zeta)
    second = root * (1 + zeta**2 - rho**2 - 4 * kappa * rho + 3 * kappa**2)
    return float(first + branch_sign * second)


def _refined_grid(k_of_t, sign, lo, hi, n):
    """Grid on ``[lo, hi]`` augmented with local extrema of ``k(t)`` so that
    tangential integer touches between grid points are bracketed."""
    ts = np.linspace(lo, hi, n)
    ks = k_of_t(ts, sign)
    extra = []
    for i in range(1, n - 1):
        left, mid, right = ks[i - 1], ks[i], ks[i + 1]
        if (mid - left) * (right - mid) < 0:
            res = minimize_scalar(
                lambda t: (-1 if mid > left else 1) * k_of_t(t, sign),
                bounds=(ts[i - 1], ts[i + 1]),
                method="bounded",
                options={"xatol": 1e-14},
            )
            extra.append(res.x)
    if extra:
        ts = np.unique(np.concatenate([ts, extra]))
        ks = k_of_t(ts, sign)
    return ts, ks


def scan_trivial_branch(
    params: Params, t_grid: np.ndarray | None = None, n_grid: int = 2000
) -> list[BifurcationCandidate]:
    """All positive-integer crossings of ``k1(t)`` and ``k2(t)``.

    The scan is restricted to the interval where the inner radicand is
    nonnegative (computed in closed form), bracketed on a grid augmented
    with the extrema of ``k(t)``, and refined by Brent's method to
    ``|k - n| < 1e-10``.  If ``t_grid`` is given its range is intersected with
    that interval and its length sets the grid density.
    """
    tau = solve_tau(params.kappa, params.f)
    interval = feasible_interval(params, tau)
    if interval is None:
        return []
    lo, hi = interval
    if t_grid is not None:
        lo, hi = max(lo, float(np.min(t_grid))), min(hi, float(np.max(t_grid)))
        n_grid = len(t_grid)
        if lo >= hi:
            return []
    k_of_t = _k_functions(params, tau)
    found = []
    for sign in (1, -1):
        ts, ks = _refined_grid(k_of_t, sign, lo, hi, n_grid)
        kmax = np.nanmax(ks)
        for n in range(1, int(math.floor(kmax)) + 1):
            g = ks - n
            exact = np.nonzero(g == 0)[0]
            roots = [ts[i] for i in exact]
            for i in np.nonzero(g[:-1] * g[1:] < 0)[0]:
                roots.append(
                    brentq(
                        lambda t: k_of_t(t, sign) - n,
                        ts[i],
                        ts[i + 1],
                        xtol=1e-15,
                        rtol=1e-15,
                    )
                )
            for t0 in roots:
                found.append((float(t0), n, sign))
    candidates = []
    for t0, n, sign in sorted(found):
        point = parametrize(t0, params, tau)
        k1, k2 = wavenumbers(point.a0, point.zeta, params)
        other = k2 if sign == 1 else k1
        non_simple = other is not None and abs(other - round(other)) < 1e-8 and round(other) > 0
        trans = transversality_expression(point.a0, point.zeta, sign, params.kappa)
        if abs(trans) < 1e-8:
            warnings.warn(
                f"degenerate crossing (transversality {trans:.2e}) at t={t0:.6g}, k={n}",
                RuntimeWarning,
                stacklevel=2,
            )
        try:
            alpha, alpha_star = kernel_vectors(point.a0, point.zeta, n, params)
        except DomainError:
            continue
        candidates.append(
            BifurcationCandidate(
                t=t0,
                k=n,
                branch_sign=sign,
                kernel_vector=alpha,
                adjoint_vector=alpha_star,
                transversality=trans,
                zeta=point.zeta,
                a0=point.a0,
                non_simple=non_simple,
            )
        )
    return candidates


# closed-form thresholds -------------------------------------------------------
def kappa_star_lhs(kappa):
    """Left side of the defining equation of the bifurcation threshold."""
    r = np.sqrt(1 + np.asarray(kappa) ** 2)
    return (2 * kappa + r) / (1 - 3 * kappa**2) ** 3 * (1 - kappa**2 + kappa * r) ** 2


def kappa_star_bifurcation(f: float) -> float:
    """Damping above which the trivial curve has no bifurcation points.

    Zero for ``f^2 <= 1``; otherwise the root in ``(0, 1/sqrt(3))`` of the
    strictly increasing left side minus ``f^2``.
    """
    f2 = f * f
    if f2 <= 1:
        return 0.0
    grid = np.linspace(0.0, KAPPA_MAX * (1 - 1e-6), 2001)
    if np.any(np.diff(kappa_star_lhs(grid)) <= 0):
        raise RuntimeError("threshold function is not monotone on the grid")
    hi = KAPPA_MAX * (1 - 1e-15)
    return float(brentq(lambda k: kappa_star_lhs(k) - f2, 0.0, hi, xtol=1e-14))


def kappa_star_nonexistence(d: float, f: float) -> float:
    """Damping above which every solution is constant."""
    if d == 0:
        raise DomainError("d must be nonzero")
    return 6 * math.sqrt(6) * (1 + 2 * math.pi**2 * f * f / abs(d)) ** 3 * f * f


def cardano_bound(kappa: float, f: float) -> float:
    """Real root of ``kappa C^3 + C = |f|`` via Cardano, polished by Newton."""
    if kappa <= 0:
        raise DomainError("kappa must be > 0")
    af = abs(f)
    p = af / (2 * kappa)
    q = math.sqrt(f * f / (4 * kappa**2) + 1 / (27 * kappa**3))
    c = np.cbrt(p + q) - np.cbrt(q - p)
    # q - p suffers cancellation for small |f|; Newton restores full accuracy
    for _ in range(4):
        c -= (kappa * c**3 + c - af) / (3 * kappa * c * c + 1)
    res = kappa * c**3 + c - af
    if abs(res) > 1e-12 * max(1.0, af):
        raise RuntimeError(f"cubic identity violated: residual {res:.3e}")
    return float(c)


def apriori_bound(params: Params) -> float:
    """Sup-norm bound valid for every stationary solution."""
    f = abs(params.f)
    scale = 1 + 2 * math.pi**2 * f * f / abs(params.d)
    if params.kappa > 0:
        return scale * min(f, (f / params.kappa) ** (1 / 3))
    return scale * f


def check_apriori(u: FieldState, params: Params) -> bool:
    return u.linf() <= apriori_bound(params)


def necessary_rho_bound(kappa: float) -> float:
    """Lower bound on ``|a0|^2`` at any bifurcation point (``kappa < 1/sqrt 3``)."""
    return (2 * kappa + math.sqrt(1 + kappa**2)) / (1 - 3 * kappa**2)


def write_candidates_csv(candidates, path) -> None:
    from .outputs import write_rows

    header = ("t", "zeta", "re_a0", "im_a0", "k", "branch_sign", "transversality")
    rows = [
        (c.t, c.zeta, c.a0.real, c.a0.imag, c.k, c.branch_sign, c.transversality)
        for c in candidates
    ]
    write_rows(path, header, rows)
