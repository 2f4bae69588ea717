"""Residuals the approximate solution leaves in the depleted equations.

Signs follow ``E = eps L(app) - d_t app - (u_app - u0) d_x app``: what the
approximate solution fails to satisfy, written as a forcing.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from .calculus import fd_derivative, lp_norm, mixed_derivative, sample_pchip, trapezoid_in_time
from .errors import DomainError
from .flow import LayerSampler, assemble_ansatz, layer_grid
from .grids import Axis, Field1D, Grid2D, TwoSidedField2D, trapezoid_weights
from .initial_data import InitialData, InterfaceGeometry
from .profiles import ProfileSet
from .types import FloatArray

__all__ = [
    "EV_TERMS",
    "ResidualReport",
    "compute_Eu",
    "compute_Ev",
    "singular_term_norm",
    "scaling_check",
    "direct_residual_u",
    "direct_residual_v",
    "residual_report",
]

logger = logging.getLogger(__name__)

EV_TERMS: Tuple[str, ...] = (
    "slow_diffusion",
    "box_skew",
    "kh_mixed",
    "kh_drift",
    "kh_slow",
    "prandtl_tangential",
    "prandtl_mixed",
    "prandtl_drift",
    "transport_regular",
    "transport_singular_kh",
    "transport_singular_box",
)


def compute_Eu(u0: Field1D, epsilon: float) -> Field1D:
    """``eps * d_z^2 u0``."""

    return fd_derivative(u0, 0, 2) * float(epsilon)


def _straightened_laplacian(field: TwoSidedField2D, psi_z: FloatArray, psi_zz: FloatArray) -> TwoSidedField2D:
    return (
        fd_derivative(field, "x", 2) * (1.0 + psi_z**2)
        - mixed_derivative(field) * (2.0 * psi_z)
        - fd_derivative(field, "x", 1) * psi_zz
        + fd_derivative(field, "z", 2)
    )


def _kh_transport(sampler: LayerSampler, profiles: ProfileSet, t: float) -> TwoSidedField2D:
    """``-eps^{-1/2} U_P(t, z / sqrt(eps)) d_X V_KH(t, x / sqrt(eps), z)``."""

    U_P = sampler.along_z(profiles.U_P.at(t).values, "fast")
    kh_X = sampler.map_field(fd_derivative(profiles.V_KH.at(t), "x", 1), x="fast", z="phys")
    return kh_X * (-U_P / sampler.scale)


def compute_Ev(
    profiles: ProfileSet,
    data: InitialData,
    geometry: InterfaceGeometry,
    epsilon: float,
    t: float,
    p: float,
    *,
    grid: Optional[Grid2D] = None,
) -> Tuple[TwoSidedField2D, Dict[str, float]]:
    """Residual of the cross-flow equation and the ``L^p`` norm of each of its terms.

    Every layer term is differentiated on the grid it was computed on and then
    moved to the physical grid, whose nonuniform quadrature carries the
    ``sqrt(eps)`` Jacobian of each fast direction.
    """

    if not np.isfinite(epsilon) or epsilon <= 0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    grid = grid or layer_grid(profiles.grids, epsilon)
    sampler = LayerSampler(grid, profiles.grids, epsilon)
    scale = sampler.scale
    z = grid.z_axis.nodes
    fast_Z = profiles.grids.fast_Z.nodes
    phys_z = profiles.grids.phys_z.nodes
    terms: Dict[str, TwoSidedField2D] = {}

    v0 = data.v0_field(grid)
    terms["slow_diffusion"] = _straightened_laplacian(v0, geometry.psi_z(t, z), geometry.psi_zz(t, z)) * epsilon

    # coefficients of the corner layer at physical height sqrt(eps) * Z
    V_b = profiles.V_b.at(t)
    a0 = geometry.psi_z_wall(t)
    shear = geometry.psi_z(t, scale * fast_Z)
    curvature = geometry.psi_zz(t, scale * fast_Z)
    box_X = fd_derivative(V_b, "x", 1)
    box = (
        fd_derivative(V_b, "x", 2) * (shear**2 - a0**2)
        - mixed_derivative(V_b) * (2.0 * (shear - a0))
        - box_X * (scale * curvature)
    )
    terms["box_skew"] = sampler.map_field(box, x="fast", z="fast")

    V_KH = profiles.V_KH.at(t)
    kh_X = fd_derivative(V_KH, "x", 1)
    kh_XZ = fd_derivative(kh_X, "z", 1)
    shear = geometry.psi_z(t, phys_z)
    curvature = geometry.psi_zz(t, phys_z)
    terms["kh_mixed"] = sampler.map_field(kh_XZ * (-2.0 * scale * shear), x="fast", z="phys")
    terms["kh_drift"] = sampler.map_field(kh_X * (-scale * curvature), x="fast", z="phys")
    terms["kh_slow"] = sampler.map_field(fd_derivative(V_KH, "z", 2) * epsilon, x="fast", z="phys")

    V_P = profiles.V_P.at(t)
    vp_x = fd_derivative(V_P, "x", 1)
    shear = geometry.psi_z(t, scale * fast_Z)
    curvature = geometry.psi_zz(t, scale * fast_Z)
    terms["prandtl_tangential"] = sampler.map_field(
        fd_derivative(V_P, "x", 2) * (epsilon * (1.0 + shear**2)), x="phys", z="fast"
    )
    terms["prandtl_mixed"] = sampler.map_field(fd_derivative(vp_x, "z", 1) * (-2.0 * scale * shear), x="phys", z="fast")
    terms["prandtl_drift"] = sampler.map_field(vp_x * (-epsilon * curvature), x="phys", z="fast")

    U_P = sampler.along_z(profiles.U_P.at(t).values, "fast")
    regular = fd_derivative(v0, "x", 1) + sampler.map_field(vp_x, x="phys", z="fast")
    terms["transport_regular"] = regular * (-U_P)
    terms["transport_singular_kh"] = _kh_transport(sampler, profiles, t)
    terms["transport_singular_box"] = sampler.map_field(box_X, x="fast", z="fast") * (-U_P / scale)

    total = terms[EV_TERMS[0]]
    for name in EV_TERMS[1:]:
        total = total + terms[name]
    breakdown = {name: lp_norm(terms[name], p) for name in EV_TERMS}
    breakdown["total"] = lp_norm(total, p)
    return total, breakdown


def singular_term_norm(
    profiles: ProfileSet,
    epsilon: float,
    t: float,
    p: float,
    *,
    grid: Optional[Grid2D] = None,
) -> float:
    """``L^p`` norm of the transport of the transition layer by the wall layer."""

    grid = grid or layer_grid(profiles.grids, epsilon)
    return lp_norm(_kh_transport(LayerSampler(grid, profiles.grids, epsilon), profiles, t), p)


def scaling_check(
    f: Field1D,
    epsilon: float,
    p: float,
    *,
    physical: Optional[Axis] = None,
) -> Tuple[float, float]:
    """Measured and predicted ``L^p_z`` norms of ``z -> f(z / sqrt(eps))``.

    Without ``physical`` the profile is placed on its own nodes scaled by
    ``sqrt(eps)``, so the two numbers agree to rounding. With a physical axis
    it is interpolated there first.
    """

    if not np.isfinite(epsilon) or epsilon <= 0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    scale = math.sqrt(epsilon)
    predicted = scale ** (1.0 / p) * lp_norm(f, p)
    if physical is None:
        weights = trapezoid_weights(scale * f.axis.nodes)
        measured = float(np.sum(weights * np.abs(f.values) ** p) ** (1.0 / p))
    else:
        values = sample_pchip(f.values, f.axis.nodes, physical.nodes / scale)
        measured = lp_norm(Field1D(physical, values), p)
    return measured, predicted


def _time_weights(profiles: ProfileSet, t: float) -> Tuple[Tuple[int, int, int], Tuple[float, float, float]]:
    """Three-point derivative weights at an interior store time."""

    k = profiles.index_of(t)
    times = profiles.store_times
    if k == 0 or k == times.size - 1:
        raise DomainError(f"t={t} needs a stored neighbour on both sides")
    h1 = float(times[k] - times[k - 1])
    h2 = float(times[k + 1] - times[k])
    weights = (-h2 / (h1 * (h1 + h2)), (h2 - h1) / (h1 * h2), h1 / (h2 * (h1 + h2)))
    return (k - 1, k, k + 1), weights


def direct_residual_u(
    profiles: ProfileSet,
    data: InitialData,
    epsilon: float,
    t: float,
    *,
    grid: Optional[Grid2D] = None,
) -> Field1D:
    """``eps d_z^2 u_app - d_t u_app`` by differencing the assembled field.

    ``t`` must be a store time with stored neighbours; the time derivative is
    the three-point difference over them. This is a coarse diagnostic: the
    second difference of the wall profile carries an ``O(h_Z^2)`` error on the
    fast grid that does not shrink with ``eps``, while ``E^u`` is ``O(eps)``.
    Compare it with :func:`compute_Eu` inside the layer window and under
    refinement of ``h_Z``, not at a single resolution.
    """

    grid = grid or layer_grid(profiles.grids, epsilon)
    sampler = LayerSampler(grid, profiles.grids, epsilon)
    u0 = data.u0_field(grid.z_axis)
    indices, weights = _time_weights(profiles, t)
    fields = [u0 + sampler.u_field(profiles.U_P[k].values) for k in indices]
    rate = fields[0] * weights[0] + fields[1] * weights[1] + fields[2] * weights[2]
    return fd_derivative(fields[1], 0, 2) * epsilon - rate


def direct_residual_v(
    profiles: ProfileSet,
    data: InitialData,
    geometry: InterfaceGeometry,
    epsilon: float,
    t: float,
    *,
    grid: Optional[Grid2D] = None,
) -> TwoSidedField2D:
    """``eps L_psi v_app - d_t v_app - U_P d_x v_app`` by differencing the assembled field.

    Profiles built with store times clustered around ``t`` keep the time
    difference accurate.
    """

    grid = grid or layer_grid(profiles.grids, epsilon)
    indices, weights = _time_weights(profiles, t)
    fields = [assemble_ansatz(profiles, data, epsilon, float(profiles.store_times[k]), grid=grid) for k in indices]
    rate = fields[0].v_app * weights[0] + fields[1].v_app * weights[1] + fields[2].v_app * weights[2]
    current = fields[1]
    z = grid.z_axis.nodes
    U_P = current.components["U_P"].values
    laplacian = _straightened_laplacian(current.v_app, geometry.psi_z(t, z), geometry.psi_zz(t, z))
    return laplacian * epsilon - rate - fd_derivative(current.v_app, "x", 1) * U_P


@dataclass(frozen=True)
class ResidualReport:
    """Residual norms of one epsilon over the store times."""

    epsilon: float
    p: float
    times: FloatArray
    eu_norms: FloatArray
    ev_norms: FloatArray
    ev_integral: float
    singular_norms: FloatArray
    breakdown: Dict[str, FloatArray]

    def __post_init__(self) -> None:
        arrays = [self.eu_norms, self.ev_norms, self.singular_norms, *self.breakdown.values()]
        for values in arrays:
            values = np.asarray(values, dtype=float)
            if values.size and (not np.all(np.isfinite(values)) or np.any(values < 0)):
                raise DomainError("residual norms must be finite and nonnegative")
        if not np.isfinite(self.ev_integral) or self.ev_integral < 0:
            raise DomainError("the time-integrated residual must be finite and nonnegative")

    @property
    def eu_sup(self) -> float:
        return float(np.max(self.eu_norms)) if self.eu_norms.size else 0.0

    @property
    def singular_sup(self) -> float:
        return float(np.max(self.singular_norms)) if self.singular_norms.size else 0.0

    @property
    def c_in(self) -> float:
        """``int ||E^v||^p dt / eps^(1 - p/2)``."""

        return self.ev_integral / self.epsilon ** (1.0 - self.p / 2.0)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "epsilon": self.epsilon,
            "p": self.p,
            "times": self.times.tolist(),
            "eu_norms": self.eu_norms.tolist(),
            "ev_norms": self.ev_norms.tolist(),
            "ev_integral": self.ev_integral,
            "singular_norms": self.singular_norms.tolist(),
            "breakdown": {name: values.tolist() for name, values in self.breakdown.items()},
            "c_in": self.c_in,
        }


def residual_report(
    profiles: ProfileSet,
    data: InitialData,
    epsilon: float,
    p: float,
    *,
    grid: Optional[Grid2D] = None,
    times: Optional[Sequence[float]] = None,
    singular_only: bool = False,
) -> ResidualReport:
    """Evaluate ``E^u``, ``E^v`` and the singular term at every store time."""

    grid = grid or layer_grid(profiles.grids, epsilon)
    geometry = data.geometry()
    stamps = np.asarray(times if times is not None else profiles.store_times, dtype=float)
    eu_norm = lp_norm(compute_Eu(data.u0_field(grid.z_axis), epsilon), 2.0)
    sampler = LayerSampler(grid, profiles.grids, epsilon)
    singular = np.array([lp_norm(_kh_transport(sampler, profiles, float(t)), p) for t in stamps])
    ev_norms = np.zeros(0)
    breakdown: Dict[str, FloatArray] = {}
    integral = 0.0
    if not singular_only:
        rows = [compute_Ev(profiles, data, geometry, epsilon, float(t), p, grid=grid)[1] for t in stamps]
        breakdown = {name: np.array([row[name] for row in rows]) for name in (*EV_TERMS, "total")}
        ev_norms = breakdown["total"]
        integral = trapezoid_in_time(stamps, ev_norms**p)
    logger.debug("residuals eps=%.3e: int ||E^v||^p = %.4e", epsilon, integral)
    return ResidualReport(
        epsilon=float(epsilon),
        p=float(p),
        times=stamps,
        eu_norms=np.full(stamps.size, eu_norm),
        ev_norms=ev_norms,
        ev_integral=float(integral),
        singular_norms=singular,
        breakdown=breakdown,
    )
