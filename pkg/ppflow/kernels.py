"""Heat kernels and the Duhamel evaluators behind the wall-layer profiles.

All half-line quantities use homogeneous Dirichlet data at ``Z = 0`` and the
unit exponential source ``e^{-Z}``. The time integral of the Duhamel formula is
taken after the substitution ``tau = sigma^2``, which turns the inverse square
root concentration of the kernel near the upper limit into a smooth integrand
for composite Simpson quadrature.
"""

from __future__ import annotations

from typing import Tuple, Union

import numpy as np
from scipy.integrate import simpson
from scipy.special import erf, erfc, erfcx

from .errors import DomainError
from .types import FloatArray

__all__ = [
    "DEFAULT_SIGMA_NODES",
    "heat_kernel_free",
    "heat_kernel_halfline",
    "heat_mass_halfline",
    "halfline_exponential_response",
    "halfline_exponential_response_zderiv",
    "duhamel_exponential",
    "duhamel_exponential_zderiv",
    "unit_wall_profile",
    "unit_wall_profile_zderiv",
    "rescaled_time",
]

DEFAULT_SIGMA_NODES = 129

ArrayLike = Union[float, FloatArray]


def _positive_time(t: ArrayLike) -> FloatArray:
    t = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(t)) or np.any(t <= 0):
        raise DomainError("heat kernels need t > 0")
    return t


def _halfline(Z: ArrayLike, name: str = "Z") -> FloatArray:
    Z = np.asarray(Z, dtype=float)
    if np.any(Z < 0):
        raise DomainError(f"{name} must be nonnegative on the half-line")
    return Z


def heat_kernel_free(t: ArrayLike, X: ArrayLike) -> FloatArray:
    """Whole-line heat kernel ``(4 pi t)^{-1/2} exp(-X^2 / 4t)``."""

    t = _positive_time(t)
    X = np.asarray(X, dtype=float)
    return np.exp(-(X**2) / (4.0 * t)) / np.sqrt(4.0 * np.pi * t)


def heat_kernel_halfline(t: ArrayLike, Z: ArrayLike, Zp: ArrayLike) -> FloatArray:
    """Dirichlet kernel on the half-line by the image method."""

    t = _positive_time(t)
    Z = _halfline(Z)
    Zp = _halfline(Zp, "Zp")
    # G(Z - Zp) - G(Z + Zp) = G(Z - Zp) * (1 - exp(-Z Zp / t)), nonnegative by construction
    return heat_kernel_free(t, Z - Zp) * -np.expm1(-Z * Zp / t)


def heat_mass_halfline(t: ArrayLike, Z: ArrayLike) -> FloatArray:
    """``integral_0^inf G_half(t, Z; Zp) dZp = erf(Z / 2 sqrt(t))``."""

    t = _positive_time(t)
    Z = _halfline(Z)
    return erf(Z / (2.0 * np.sqrt(t)))


def _response_terms(tau: FloatArray, Z: FloatArray) -> Tuple[FloatArray, FloatArray, FloatArray]:
    """Direct term, image term and ``G(tau, Z)`` of the exponential response, for tau > 0."""

    root = np.sqrt(tau)
    gauss = np.exp(-(Z**2) / (4.0 * tau))
    b = (2.0 * tau - Z) / (2.0 * root)
    a = (2.0 * tau + Z) / (2.0 * root)
    direct = np.empty(b.shape)
    upper = b >= 0
    direct[upper] = 0.5 * erfcx(b[upper]) * gauss[upper]
    lower = ~upper
    direct[lower] = 0.5 * np.exp(tau[lower] - Z[lower]) * erfc(b[lower])
    image = 0.5 * erfcx(a) * gauss
    kernel = gauss / (2.0 * np.sqrt(np.pi) * root)
    return direct, image, kernel


def halfline_exponential_response(tau: ArrayLike, Z: ArrayLike) -> FloatArray:
    """``integral_0^inf G_half(tau, Z; Zp) e^{-Zp} dZp``.

    Closed form ``1/2 [e^{tau-Z} erfc((2tau-Z)/2sqrt(tau)) - e^{tau+Z} erfc((2tau+Z)/2sqrt(tau))]``,
    rewritten with the scaled complementary error function so that no factor
    overflows. At ``tau = 0`` it is the source itself, ``e^{-Z}`` off the wall.
    """

    tau, Z = np.broadcast_arrays(np.asarray(tau, dtype=float), _halfline(Z))
    if np.any(tau < 0):
        raise DomainError("response time must be nonnegative")
    out = np.zeros(tau.shape)
    positive = tau > 0
    if np.any(positive):
        direct, image, _ = _response_terms(tau[positive], Z[positive])
        out[positive] = direct - image
    initial = ~positive & (Z > 0)
    out[initial] = np.exp(-Z[initial])
    return out


def halfline_exponential_response_zderiv(tau: ArrayLike, Z: ArrayLike) -> FloatArray:
    """``d/dZ`` of :func:`halfline_exponential_response`: ``2 G(tau, Z) - direct - image``."""

    tau, Z = np.broadcast_arrays(np.asarray(tau, dtype=float), _halfline(Z))
    if np.any(tau < 0):
        raise DomainError("response time must be nonnegative")
    out = np.zeros(tau.shape)
    positive = tau > 0
    if np.any(positive):
        direct, image, kernel = _response_terms(tau[positive], Z[positive])
        out[positive] = 2.0 * kernel - direct - image
    initial = ~positive & (Z > 0)
    out[initial] = -np.exp(-Z[initial])
    return out


def _sigma_quadrature(t: FloatArray, Z: FloatArray, integrand, n_sigma: int) -> FloatArray:
    if n_sigma < 3 or n_sigma % 2 == 0:
        raise DomainError(f"n_sigma must be an odd integer >= 3, got {n_sigma}")
    t, Z = np.broadcast_arrays(t, Z)
    s = np.linspace(0.0, 1.0, n_sigma)
    shape = (n_sigma,) + (1,) * t.ndim
    sigma = np.sqrt(t)[None, ...] * s.reshape(shape)
    values = 2.0 * sigma * integrand(sigma**2, Z[None, ...])
    return np.sqrt(t) * simpson(values, x=s, axis=0)


def _duhamel_arguments(t: ArrayLike, Z: ArrayLike, decay_sign: int) -> Tuple[FloatArray, FloatArray]:
    t = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(t)) or np.any(t < 0):
        raise DomainError("Duhamel time must be nonnegative")
    Z = np.asarray(Z, dtype=float)
    if decay_sign == 1:
        return t, _halfline(Z)
    if decay_sign == -1:
        if np.any(Z > 0):
            raise DomainError("the mirrored problem lives on the negative half-line")
        return t, -Z
    raise DomainError(f"decay_sign must be +1 or -1, got {decay_sign}")


def duhamel_exponential(
    t: ArrayLike,
    Z: ArrayLike,
    decay_sign: int = 1,
    *,
    n_sigma: int = DEFAULT_SIGMA_NODES,
) -> FloatArray:
    """Duhamel integral ``int_0^t int_0^inf G_half(t-s, Z; Zp) e^{-Zp} dZp ds``.

    ``decay_sign=-1`` evaluates the mirrored problem on ``X <= 0`` with source
    ``e^{X}``. ``t`` and ``Z`` broadcast against each other.
    """

    t, Z = _duhamel_arguments(t, Z, decay_sign)
    return _sigma_quadrature(t, Z, halfline_exponential_response, n_sigma)


def duhamel_exponential_zderiv(
    t: ArrayLike,
    Z: ArrayLike,
    decay_sign: int = 1,
    *,
    n_sigma: int = DEFAULT_SIGMA_NODES,
) -> FloatArray:
    t, W = _duhamel_arguments(t, Z, decay_sign)
    return decay_sign * _sigma_quadrature(t, W, halfline_exponential_response_zderiv, n_sigma)


def unit_wall_profile(t: ArrayLike, Z: ArrayLike, *, n_sigma: int = DEFAULT_SIGMA_NODES) -> FloatArray:
    """Heat solution with wall value ``-1`` and initial data ``-e^{-Z}``.

    Every wall-layer profile is a multiple of this one: ``U_P = u0(0) * Phi``
    and ``V_P(x) = v0(x, 0) * Phi``.
    """

    Z = _halfline(Z)
    return -(np.exp(-Z) + duhamel_exponential(t, Z, n_sigma=n_sigma))


def unit_wall_profile_zderiv(t: ArrayLike, Z: ArrayLike, *, n_sigma: int = DEFAULT_SIGMA_NODES) -> FloatArray:
    Z = _halfline(Z)
    return np.exp(-Z) - duhamel_exponential_zderiv(t, Z, n_sigma=n_sigma)


def rescaled_time(t: ArrayLike, shear: ArrayLike) -> FloatArray:
    """``int_0^t (1 + (s * shear)^2) ds = t + t^3 shear^2 / 3`` for a shear growing linearly in time."""

    t = np.asarray(t, dtype=float)
    shear = np.asarray(shear, dtype=float)
    return t + t**3 * shear**2 / 3.0
