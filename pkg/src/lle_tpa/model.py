"""Stationary Lugiato-Lefever problem with two-photon absorption on the torus.

The stationary equation is

    R(a) = -d a'' - (i - zeta) a - (1 + i kappa) |a|^2 a + i f = 0,

for 2*pi-periodic complex ``a``.  Complex fields are identified with real
vectors by interleaving ``(Re a_j, Im a_j)`` point by point; a complex number
``z = x + iy`` is the column ``(x, y)``.  Under this identification
multiplication by ``i`` is the matrix ``[[0, -1], [1, 0]]``.

Two discretisations are used:

* the full torus grid ``x_j = pi j / N``, ``j = 0 .. 2N-1`` (``2N`` points,
  ``N = n_modes``), used by the time stepper and for equivariance checks;
* the even (cosine) grid ``x_j = pi j / N``, ``j = 0 .. N``, i.e. the first
  ``N + 1`` torus points.  An even field is fully determined by these values
  and the DCT-I maps them to the cosine coefficients of ``cos(k x)``,
  ``k = 0 .. N``.  All Newton solves run on this grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.fft import dct, idct

from .errors import DomainError

TWO_PI = 2.0 * np.pi

# multiplication by i in the interleaved real representation
I_MATRIX = np.array([[0.0, -1.0], [1.0, 0.0]])


@dataclass(frozen=True)
class Params:
    """Physical parameters of the stationary problem."""

    d: float
    zeta: float
    f: float
    kappa: float = 0.0

    def __post_init__(self):
        if self.d == 0:
            raise DomainError("dispersion d must be nonzero")
        if self.kappa < 0:
            raise DomainError("nonlinear damping kappa must be >= 0")

    def replace(self, **changes) -> "Params":
        values = dict(d=self.d, zeta=self.zeta, f=self.f, kappa=self.kappa)
        values.update(changes)
        return Params(**values)


def torus_grid(n_modes: int) -> np.ndarray:
    return np.pi * np.arange(2 * n_modes) / n_modes


def even_grid(n_modes: int) -> np.ndarray:
    return np.pi * np.arange(n_modes + 1) / n_modes


def wavenumbers(n_points: int) -> np.ndarray:
    """Integer wavenumbers in FFT order for a 2*pi-periodic grid."""
    return np.fft.fftfreq(n_points, d=1.0 / n_points)


@dataclass(frozen=True)
class FieldState:
    """Complex field sampled on the uniform torus grid of ``2 * n_modes`` points.

    ``even_restricted`` marks fields that live in the cosine subspace; the flag
    is informational for the solvers, the samples are always the full grid.
    """

    values: np.ndarray
    even_restricted: bool = False
    _coeffs: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.ndim != 1 or values.size < 2 or values.size % 2:
            raise DomainError("field needs an even number of grid points")
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_coeffs", np.fft.fft(values) / values.size)

    # constructors -------------------------------------------------------
    @classmethod
    def constant(cls, a0: complex, n_modes: int = 128) -> "FieldState":
        return cls(np.full(2 * n_modes, complex(a0)), even_restricted=True)

    @classmethod
    def from_function(cls, func, n_modes: int = 128, even_restricted=False):
        return cls(func(torus_grid(n_modes)), even_restricted=even_restricted)

    @classmethod
    def from_even_values(cls, half_values: np.ndarray) -> "FieldState":
        """Build a torus field from samples on the even grid ``[0, pi]``."""
        half_values = np.asarray(half_values, dtype=complex)
        full = np.concatenate([half_values, half_values[-2:0:-1]])
        return cls(full, even_restricted=True)

    @classmethod
    def from_coefficients(cls, coeffs: np.ndarray, even_restricted=False):
        coeffs = np.asarray(coeffs, dtype=complex)
        return cls(np.fft.ifft(coeffs * coeffs.size), even_restricted)

    # grid data ----------------------------------------------------------
    @property
    def n_points(self) -> int:
        return self.values.size

    @property
    def n_modes(self) -> int:
        return self.values.size // 2

    @property
    def x(self) -> np.ndarray:
        return torus_grid(self.n_modes)

    @property
    def coefficients(self) -> np.ndarray:
        """Fourier coefficients ``c_k`` with ``a(x) = sum_k c_k e^{ikx}``."""
        return self._coeffs

    def even_values(self) -> np.ndarray:
        """Samples on the cosine grid ``[0, pi]`` (first ``N + 1`` points)."""
        return self.values[: self.n_modes + 1].copy()

    # norms --------------------------------------------------------------
    def l2(self) -> float:
        return float(np.sqrt(TWO_PI * np.mean(np.abs(self.values) ** 2)))

    def coefficient_l2(self) -> float:
        return float(np.sqrt(TWO_PI * np.sum(np.abs(self._coeffs) ** 2)))

    def linf(self) -> float:
        return float(np.max(np.abs(self.values)))

    def derivative(self, order: int = 1) -> "FieldState":
        k = wavenumbers(self.n_points)
        return FieldState.from_coefficients(
            (1j * k) ** order * self._coeffs, self.even_restricted
        )

    def dx_l2(self) -> float:
        """``||a_x||_2`` evaluated in coefficient space."""
        k = wavenumbers(self.n_points)
        return float(np.sqrt(TWO_PI * np.sum(k**2 * np.abs(self._coeffs) ** 2)))

    def h2_norm(self) -> float:
        k = wavenumbers(self.n_points)
        w = 1.0 + k**2 + k**4
        return float(np.sqrt(TWO_PI * np.sum(w * np.abs(self._coeffs) ** 2)))

    def mean(self) -> complex:
        return complex(self._coeffs[0])

    def sine_mass(self) -> float:
        """L2 norm of the odd part ``(a(x) - a(-x)) / 2``."""
        reflected = np.roll(self.values[::-1], 1)
        odd = 0.5 * (self.values - reflected)
        return float(np.sqrt(TWO_PI * np.mean(np.abs(odd) ** 2)))

    def spectral_tail(self, fraction: float = 0.125) -> float:
        """Largest coefficient magnitude in the top ``fraction`` of wavenumbers,
        relative to the largest coefficient overall."""
        k = np.abs(wavenumbers(self.n_points))
        mags = np.abs(self._coeffs)
        top = mags[k >= (1.0 - fraction) * k.max()].max()
        return float(top / max(mags.max(), 1e-300))

    def shift(self, steps: int) -> "FieldState":
        """Grid translation ``a(x) -> a(x + steps * h)``."""
        return FieldState(np.roll(self.values, -steps), self.even_restricted)


# nonlinearity --------------------------------------------------------------
def nonlinearity_g(a, params: Params):
    """``g(a) = (1 + i kappa) |a|^2 a - i f`` (scalar or array)."""
    a = np.asarray(a, dtype=complex)
    out = (1.0 + 1j * params.kappa) * np.abs(a) ** 2 * a - 1j * params.f
    return complex(out) if out.ndim == 0 else out


def dg_real_matrix(a0, params: Params) -> np.ndarray:
    """Real 2x2 matrix of ``z -> Dg(a0) z`` acting on ``(Re z, Im z)``.

    Accepts an array of points and then returns shape ``(..., 2, 2)``.
    """
    a0 = np.asarray(a0, dtype=complex)
    kappa = params.kappa
    sq = a0**2
    p, q = sq.real, sq.imag
    rho = np.abs(a0) ** 2
    out = np.empty(a0.shape + (2, 2))
    out[..., 0, 0] = p + 2 * rho - kappa * q
    out[..., 0, 1] = q - 2 * kappa * rho + kappa * p
    out[..., 1, 0] = q + kappa * p + 2 * kappa * rho
    out[..., 1, 1] = 2 * rho - p + kappa * q
    return out


def pointwise_block(a, params: Params) -> np.ndarray:
    """Local part of the linearisation: ``zeta - i - Dg(a)`` per grid point."""
    shift = np.array([[params.zeta, 1.0], [-1.0, params.zeta]])
    return shift - dg_real_matrix(a, params)


# real/complex packing -------------------------------------------------------
def to_real(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    out = np.empty(2 * z.size)
    out[0::2] = z.real
    out[1::2] = z.imag
    return out


def to_complex(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return v[0::2] + 1j * v[1::2]


# differentiation matrices ---------------------------------------------------
@lru_cache(maxsize=16)
def _cosine_d2(n_modes: int) -> np.ndarray:
    eye = np.eye(n_modes + 1)
    k2 = np.arange(n_modes + 1, dtype=float) ** 2
    coeffs = dct(eye, type=1, axis=0)
    mat = idct(-k2[:, None] * coeffs, type=1, axis=0)
    mat.flags.writeable = False
    return mat


def cosine_d2(n_modes: int, length: float = np.pi) -> np.ndarray:
    """Second-derivative collocation matrix on ``N + 1`` equispaced points of
    ``[0, length]`` for fields with Neumann ends (cosine series)."""
    return _cosine_d2(n_modes) * (np.pi / length) ** 2


def cosine_second_derivative(values: np.ndarray, length: float = np.pi):
    n_modes = values.shape[0] - 1
    k2 = np.arange(n_modes + 1, dtype=float) ** 2 * (np.pi / length) ** 2
    re = idct(-k2 * dct(values.real, type=1), type=1)
    im = idct(-k2 * dct(values.imag, type=1), type=1)
    return re + 1j * im


@lru_cache(maxsize=16)
def _torus_d2(n_points: int) -> np.ndarray:
    k = wavenumbers(n_points)
    eye = np.eye(n_points)
    mat = np.fft.ifft(-(k**2)[:, None] * np.fft.fft(eye, axis=0), axis=0).real
    mat.flags.writeable = False
    return mat


def _interleave_operator(d2: np.ndarray, blocks: np.ndarray, coeff: float):
    """Assemble ``coeff * D2 (x) Id_2 + blockdiag(blocks)``."""
    n = d2.shape[0]
    mat = np.zeros((2 * n, 2 * n))
    mat[0::2, 0::2] = coeff * d2
    mat[1::2, 1::2] = coeff * d2
    idx = np.arange(n)
    for r in range(2):
        for c in range(2):
            mat[2 * idx + r, 2 * idx + c] += blocks[:, r, c]
    return mat


# residual and Jacobian -------------------------------------------------------
def residual_values(a: np.ndarray, a_xx: np.ndarray, params: Params):
    """Pointwise residual given samples and their second derivative."""
    return (
        -params.d * a_xx
        - (1j - params.zeta) * a
        - (1.0 + 1j * params.kappa) * np.abs(a) ** 2 * a
        + 1j * params.f
    )


def stationary_residual(
    u: FieldState, params: Params, dealias: bool = False
) -> FieldState:
    """Spectral evaluation of ``-d a'' - (i - zeta) a - (1 + i kappa)|a|^2 a + i f``.

    With ``dealias=True`` the cubic term is filtered with the 2/3 rule.
    """
    if u.n_modes < 8:
        raise DomainError("stationary_residual needs at least 8 modes")
    a = u.values
    k = wavenumbers(u.n_points)
    a_xx = np.fft.ifft(-(k**2) * np.fft.fft(a))
    cubic = (1.0 + 1j * params.kappa) * np.abs(a) ** 2 * a
    if dealias:
        spec = np.fft.fft(cubic)
        spec[np.abs(k) > u.n_points / 3.0] = 0.0
        cubic = np.fft.ifft(spec)
    res = -params.d * a_xx - (1j - params.zeta) * a - cubic + 1j * params.f
    return FieldState(res, u.even_restricted)


def even_residual(half_values: np.ndarray, params: Params) -> np.ndarray:
    """Residual on the cosine grid for samples on ``[0, pi]``."""
    a_xx = cosine_second_derivative(half_values)
    return residual_values(half_values, a_xx, params)


def jacobian(u: FieldState, params: Params, basis: str = "even") -> np.ndarray:
    """Real Jacobian of :func:`stationary_residual` in interleaved form.

    ``basis="even"`` differentiates with respect to the ``N + 1`` cosine-grid
    samples (size ``2(N+1)``); ``basis="full"`` uses all ``2N`` torus samples
    (size ``4N``).  At a constant state ``a0`` the block acting on
    ``alpha cos(kx)`` is ``d k^2 Id + [[zeta, 1], [-1, zeta]] - Dg(a0)``,
    which equals ``-(N - d k^2 Id)`` with ``N = Dg(a0) + [[-zeta, -1], [1, -zeta]]``.
    """
    if basis == "even":
        a = u.even_values()
        d2 = _cosine_d2(u.n_modes)
    elif basis == "full":
        a = u.values
        d2 = _torus_d2(u.n_points)
    else:
        raise ValueError(f"unknown basis {basis!r}")
    return _interleave_operator(d2, pointwise_block(a, params), -params.d)


def even_jacobian(half_values: np.ndarray, params: Params) -> np.ndarray:
    n_modes = half_values.size - 1
    return _interleave_operator(
        _cosine_d2(n_modes), pointwise_block(half_values, params), -params.d
    )


def grid_l2(values: np.ndarray) -> float:
    """L2 norm over the torus of samples on the full grid."""
    return float(np.sqrt(TWO_PI * np.mean(np.abs(values) ** 2)))


def even_l2(half_values: np.ndarray, length: float = np.pi) -> float:
    """Trapezoidal L2 norm over ``[0, length]`` of cosine-grid samples.

    For ``length = pi`` this equals the torus norm of the even extension
    divided by ``sqrt(2)``.
    """
    n = half_values.size - 1
    w = np.full(n + 1, length / n)
    w[[0, -1]] *= 0.5
    return float(np.sqrt(np.sum(w * np.abs(half_values) ** 2)))


def even_torus_l2(half_values: np.ndarray) -> float:
    """Torus L2 norm of the even extension of cosine-grid samples."""
    return np.sqrt(2.0) * even_l2(half_values)


def n_matrix(a0: complex, zeta: float, params: Params) -> np.ndarray:
    """``N = Dg(a0) + [[-zeta, -1], [1, -zeta]]`` from the kernel computation."""
    return dg_real_matrix(a0, params) + np.array([[-zeta, -1.0], [1.0, -zeta]])
