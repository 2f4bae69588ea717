from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Dict, Literal, Optional, Sequence, Tuple, Union, get_args

import numpy as np
from scipy.integrate import trapezoid

from .calculus import (
    derivative_along,
    implicit_line_solve,
    lp_norm,
    normalize_store_times,
    sample_pchip,
    step_schedule,
)
from .errors import CFLViolation, DomainError, GridError, StabilityError
from .grids import Axis, Field1D, Grid1D, Grid2D, LayerAxis, TimeSeries, TwoSidedField2D
from .initial_data import InitialData, InterfaceGeometry
from .profiles import ProfileGrids, ProfileSet
from .types import FloatArray, ProgressLogger

__all__ = [
    "LayerSampler",
    "AnsatzField",
    "TrajectoryField",
    "ShearedField2D",
    "layer_grid",
    "assemble_ansatz",
    "solve_depleted_ns",
    "euler_solution",
]

logger = logging.getLogger(__name__)

_SAFETY = 0.9

Placement = Literal["fast", "phys"]


def _check_placement(placement: str) -> None:
    if placement not in get_args(Placement):
        raise DomainError(f"placement must be one of {get_args(Placement)}, got {placement!r}")


def layer_grid(grids: ProfileGrids, epsilon: float) -> Grid2D:
    """Physical grid that carries the fast nodes of both layers at scale ``sqrt(epsilon)``."""

    if not np.isfinite(epsilon) or epsilon <= 0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    scale = math.sqrt(epsilon)
    return Grid2D(
        LayerAxis.build(grids.phys_x, grids.fast_X, scale),
        LayerAxis.build(grids.phys_z, grids.fast_Z, scale),
    )


class LayerSampler:
    """Moves profile fields from their native grids onto a physical :class:`Grid2D`.

    Fast coordinates are ``X = x / sqrt(eps)`` and ``Z = z / sqrt(eps)``. When
    an axis of the target grid is the matching :class:`LayerAxis` the fast
    values are picked node by node; otherwise they are interpolated with
    monotone cubics. Fast profiles vanish outside their window.
    """

    def __init__(self, grid: Grid2D, grids: ProfileGrids, epsilon: float) -> None:
        if not np.isfinite(epsilon) or epsilon <= 0:
            raise DomainError(f"epsilon must be positive, got {epsilon}")
        self.grid = grid
        self.grids = grids
        self.epsilon = float(epsilon)
        self.scale = math.sqrt(epsilon)

    def _picks(self, axis: Axis, fast: Grid1D) -> bool:
        return isinstance(axis, LayerAxis) and axis.fast == fast and math.isclose(axis.scale, self.scale)

    def along_z(self, values: FloatArray, placement: Placement, *, axis: int = 0) -> FloatArray:
        _check_placement(placement)
        z_axis = self.grid.z_axis
        if placement == "fast":
            fast = self.grids.fast_Z
            if self._picks(z_axis, fast):
                return z_axis.sample_fast(values, axis=axis)
            return sample_pchip(values, fast.nodes, z_axis.nodes / self.scale, axis=axis)
        phys = self.grids.phys_z
        if z_axis == phys:
            return np.asarray(values, dtype=float)
        return sample_pchip(values, phys.nodes, z_axis.nodes, axis=axis)

    def _x_sides(self, left: FloatArray, right: FloatArray, placement: Placement) -> Tuple[FloatArray, FloatArray]:
        grid = self.grid
        i0 = grid.interface_index
        x_axis = grid.x_axis
        source = self.grids.fast_X if placement == "fast" else self.grids.phys_x
        center = source.index_of(0.0)
        if placement == "fast" and self._picks(x_axis, source):
            pad_right = np.zeros((source.n_points - center - 1,) + left.shape[1:])
            pad_left = np.zeros((center,) + right.shape[1:])
            picked_left = x_axis.sample_fast(np.concatenate([left, pad_right]))[: i0 + 1]
            picked_right = x_axis.sample_fast(np.concatenate([pad_left, right]))[i0:]
            return picked_left, picked_right
        if placement == "phys" and x_axis == source:
            return np.asarray(left, dtype=float), np.asarray(right, dtype=float)
        factor = self.scale if placement == "fast" else 1.0
        nodes = source.nodes
        return (
            sample_pchip(left, nodes[: center + 1], grid.x_left / factor),
            sample_pchip(right, nodes[center:], grid.x_right / factor),
        )

    def map_field(self, field: TwoSidedField2D, *, x: Placement, z: Placement) -> TwoSidedField2D:
        """Native field to the physical grid; pinned slopes become physical ``d/dx`` traces."""

        _check_placement(x)
        _check_placement(z)
        left, right = self._x_sides(field.left, field.right, x)
        left = self.along_z(left, z, axis=1)
        right = self.along_z(right, z, axis=1)
        slopes = None
        if field.slopes is not None:
            factor = 1.0 / self.scale if x == "fast" else 1.0
            slopes = (self.along_z(field.slopes[0], z) * factor, self.along_z(field.slopes[1], z) * factor)
        return TwoSidedField2D(self.grid, left, right, slopes)

    def u_field(self, values: FloatArray) -> Field1D:
        return Field1D(self.grid.z_axis, self.along_z(values, "fast"))


@dataclass(frozen=True, eq=False)
class AnsatzField:
    """Approximate solution ``(u_app, v_app)`` at one time and one epsilon.

    ``components`` holds ``u0``, ``U_P``, ``v0``, ``V_P``, ``V_KH`` and ``V_b``
    on the same physical grid.
    """

    epsilon: float
    t: float
    grid: Grid2D
    u_app: Field1D
    v_app: TwoSidedField2D
    components: Dict[str, Union[Field1D, TwoSidedField2D]]

    @property
    def u0(self) -> Field1D:
        return self.components["u0"]  # type: ignore[return-value]

    def wall_defect_u(self) -> float:
        return abs(float(self.u_app.values[0]))

    def wall_defect_v(self) -> float:
        return float(max(np.max(np.abs(self.v_app.left[:, 0])), np.max(np.abs(self.v_app.right[:, 0]))))

    def interface_defects(self) -> Tuple[float, float]:
        """Largest ``|[v_app]|`` and ``|[d_x v_app]|`` over the interface."""

        return float(np.max(np.abs(self.v_app.jump))), float(np.max(np.abs(self.v_app.xderiv_jump)))


def assemble_ansatz(
    profiles: ProfileSet,
    data: InitialData,
    epsilon: float,
    t: float,
    *,
    grid: Optional[Grid2D] = None,
) -> AnsatzField:
    """``u_app = u0 + U_P(z / sqrt(eps))`` and ``v_app = v0 + V_P + V_KH + V_b`` at time ``t``.

    The wall layer ``V_P`` is rebuilt exactly from ``v0(x, 0) * Phi(Z)`` at the
    grid's own ``x`` nodes. The transition-layer traces at ``x = 0`` are set to
    ``-/+ [v0](z) / 2`` so the four jumps telescope.
    """

    if not np.isfinite(epsilon) or epsilon <= 0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    grid = grid or layer_grid(profiles.grids, epsilon)
    sampler = LayerSampler(grid, profiles.grids, epsilon)
    z = grid.z_axis.nodes

    u0 = data.u0_field(grid.z_axis)
    U_P = sampler.u_field(profiles.U_P.at(t).values)
    u_app = u0 + U_P

    phi = sampler.along_z(profiles.wall_unit.at(t).values, "fast")
    trace = data.wall_trace()
    slope_minus, slope_plus = data.wall_derivative_traces()
    V_P = TwoSidedField2D(
        grid,
        trace.left_values(grid.x_left)[:, None] * phi[None, :],
        trace.right_values(grid.x_right)[:, None] * phi[None, :],
        (slope_minus * phi, slope_plus * phi),
    )

    mapped = sampler.map_field(profiles.V_KH.at(t), x="fast", z="phys")
    half = 0.5 * data.jump_v0(z)
    kh_left, kh_right = np.array(mapped.left), np.array(mapped.right)
    kh_left[-1] = half
    kh_right[0] = -half
    V_KH = TwoSidedField2D(grid, kh_left, kh_right, mapped.slopes)

    V_b = sampler.map_field(profiles.V_b.at(t), x="fast", z="fast")
    v0 = data.v0_field(grid)
    v_app = v0 + V_P + V_KH + V_b
    return AnsatzField(
        epsilon=float(epsilon),
        t=float(t),
        grid=grid,
        u_app=u_app,
        v_app=v_app,
        components={"u0": u0, "U_P": U_P, "v0": v0, "V_P": V_P, "V_KH": V_KH, "V_b": V_b},
    )


@dataclass(frozen=True, eq=False)
class TrajectoryField:
    epsilon: float
    grid: Grid2D
    u: TimeSeries
    v: TimeSeries
    dt: float
    n_steps: int

    @property
    def store_times(self) -> FloatArray:
        return self.u.times

    def u_energy(self) -> FloatArray:
        return np.array([lp_norm(field, 2.0) for field in self.u.snapshots])

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(f.values)) for f in self.u.snapshots) and all(
            np.all(np.isfinite(f.left)) and np.all(np.isfinite(f.right)) for f in self.v.snapshots
        )


def _explicit_bound(epsilon: float, shear: FloatArray, curvature: FloatArray, h_x: float, h_z: float) -> float:
    """Step limit for the explicit part of the straightened Laplacian."""

    rate = epsilon * float(
        np.max(2.0 * shear**2 / h_x**2 + 2.0 * np.abs(shear) / (h_x * h_z) + np.abs(curvature) / h_x)
    )
    return math.inf if rate == 0 else 1.0 / rate


def _advance_v(
    v: FloatArray,
    drift: FloatArray,
    x: FloatArray,
    z: FloatArray,
    step: float,
    epsilon: float,
    psi_z: FloatArray,
    psi_zz: FloatArray,
    held: Tuple[FloatArray, FloatArray, FloatArray],
) -> FloatArray:
    held_left, held_right, held_far = held
    v_x = np.gradient(v, x, axis=0, edge_order=2)
    v_xx = derivative_along(v, x, axis=0, order=2)
    # Lax-Wendroff transport with an x-independent speed
    explicit = -drift[None, :] * v_x + 0.5 * step * drift[None, :] ** 2 * v_xx
    if epsilon > 0:
        v_xz = np.gradient(v_x, z, axis=1, edge_order=2)
        explicit += epsilon * (psi_z[None, :] ** 2 * v_xx - 2.0 * psi_z[None, :] * v_xz - psi_zz[None, :] * v_x)
    rhs = v + step * explicit
    swept = implicit_line_solve(rhs, x, epsilon * step, axis=0, lower=held_left, upper=held_right)
    out = implicit_line_solve(swept, z, epsilon * step, axis=1, lower=0.0, upper=held_far)
    out[0] = held_left
    out[-1] = held_right
    return out


def solve_depleted_ns(
    initial: Union[AnsatzField, Tuple[Field1D, TwoSidedField2D]],
    epsilon: float,
    geometry: InterfaceGeometry,
    T: float,
    dt: Optional[float] = None,
    *,
    store_times: Optional[Sequence[float]] = None,
    background: Optional[Field1D] = None,
    progress: Optional[ProgressLogger] = None,
) -> TrajectoryField:
    """Viscous flow in straightened coordinates.

    ``u`` solves ``d_t u = eps d_z^2 u`` by backward Euler. ``v`` is advanced
    explicitly in the transport ``(u - u0) d_x v`` and in the ``psi`` part of
    the straightened Laplacian, then implicitly in ``eps (d_x^2 + d_z^2)`` by
    an ``x`` sweep and a ``z`` sweep. Both vanish on the wall; the truncation
    boundaries keep their initial values. ``epsilon = 0`` leaves pure
    transport.

    Raises:
        CFLViolation: ``|u - u0| dt / h_x`` exceeds 1.
        StabilityError: ``dt`` exceeds the bound of the explicit ``psi`` terms.
    """

    if not np.isfinite(epsilon) or epsilon < 0:
        raise DomainError(f"epsilon must be nonnegative, got {epsilon}")
    if isinstance(initial, AnsatzField):
        u_field, v_field = initial.u_app, initial.v_app
        background = background or initial.u0
    else:
        u_field, v_field = initial
    if background is None:
        raise DomainError("the shear flow u0 is needed to form the transport speed")
    grid = v_field.grid
    x, z = grid.x_axis.nodes, grid.z_axis.nodes
    if u_field.axis.n_points != z.size or background.axis.n_points != z.size:
        raise GridError("u and u0 must live on the z axis of the v grid")

    times = normalize_store_times(store_times, T)
    u = np.array(u_field.values)
    v = np.array(v_field.values)
    u0 = np.asarray(background.values, dtype=float)
    u0_z = np.broadcast_to(geometry.u0_z(z), z.shape).astype(float)
    u0_zz = np.broadcast_to(geometry.u0_zz(z), z.shape).astype(float)
    h_x, h_z = grid.x_axis.spacing_min, grid.z_axis.spacing_min

    speed = float(np.max(np.abs(u - u0)))
    cfl_dt = math.inf if speed == 0 else h_x / speed
    rate_dt = _explicit_bound(epsilon, T * u0_z, T * u0_zz, h_x, h_z)
    if dt is None:
        bound = min(cfl_dt, rate_dt)
        dt = _SAFETY * bound if np.isfinite(bound) else h_x
    elif dt > cfl_dt * (1.0 + 1e-12):
        raise CFLViolation(
            f"transport step {dt:.3e} exceeds the CFL limit {cfl_dt:.3e}",
            suggested_dt=_SAFETY * cfl_dt,
            payload={"speed": speed, "h_x": h_x},
        )
    elif dt > rate_dt * (1.0 + 1e-12):
        raise StabilityError(
            f"step {dt:.3e} exceeds the explicit-term bound {rate_dt:.3e}",
            suggested_dt=_SAFETY * rate_dt,
        )

    held = (v[0].copy(), v[-1].copy(), v[:, -1].copy())
    u_far = float(u[-1])
    u_snapshots = [Field1D(grid.z_axis, u)]
    v_snapshots = [TwoSidedField2D.continuous(grid, v)]
    total = 0
    for interval in step_schedule(times, dt):
        step = interval.dt
        for k in range(interval.n_steps):
            t_mid = interval.start + (k + 0.5) * step
            drift = u - u0
            speed = float(np.max(np.abs(drift)))
            if speed * step > h_x * (1.0 + 1e-12):
                raise CFLViolation(
                    f"transport speed {speed:.3e} broke the CFL limit at t={t_mid:.4f}",
                    suggested_dt=_SAFETY * h_x / speed,
                    payload={"speed": speed, "t": t_mid},
                )
            v = _advance_v(v, drift, x, z, step, epsilon, t_mid * u0_z, t_mid * u0_zz, held)
            u = implicit_line_solve(u, z, epsilon * step, lower=0.0, upper=u_far)
        total += interval.n_steps
        t_store = float(times[interval.store_index])
        u_snapshots.append(Field1D(grid.z_axis, u))
        v_snapshots.append(TwoSidedField2D.continuous(grid, v))
        logger.debug("viscous solve eps=%.3e stored t=%.4f after %d steps", epsilon, t_store, total)
        if progress is not None:
            progress(f"viscous solve t={t_store:.4f}")
    logger.info("viscous solve eps=%.3e finished: dt=%.3e, %d steps", epsilon, dt, total)
    return TrajectoryField(
        epsilon=float(epsilon),
        grid=grid,
        u=TimeSeries(times, tuple(u_snapshots)),
        v=TimeSeries(times, tuple(v_snapshots)),
        dt=float(dt),
        n_steps=total,
    )


@dataclass(frozen=True, eq=False)
class ShearedField2D:
    """``v0(x - s(z), z)`` on a fixed grid, jumping across the moved interface ``x = s(z)``.

    ``values`` holds the left formula at nodes ``x < s(z)`` and the right
    formula elsewhere; ``left_limit``/``right_limit`` are the one-sided values
    on the interface so row integrals stop exactly there.
    """

    grid: Grid2D
    t: float
    shift: FloatArray
    values: FloatArray
    left_limit: FloatArray
    right_limit: FloatArray
    clamped: bool = False

    @property
    def jump(self) -> FloatArray:
        return self.right_limit - self.left_limit

    def power_integral(self, p: float) -> float:
        x = self.grid.x_axis.nodes
        rows = np.empty(self.shift.size)
        for j, s in enumerate(self.shift):
            below = x < s
            left = np.abs(np.append(self.values[below, j], self.left_limit[j])) ** p
            right = np.abs(np.insert(self.values[~below, j], 0, self.right_limit[j])) ** p
            rows[j] = trapezoid(left, np.append(x[below], s)) + trapezoid(right, np.insert(x[~below], 0, s))
        return float(np.sum(self.grid.z_axis.quadrature_weights() * rows))

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))


def euler_solution(
    data: InitialData,
    t: float,
    grid: Grid2D,
    *,
    coordinates: str = "straightened",
) -> Union[TwoSidedField2D, ShearedField2D]:
    """The inviscid cross flow at time ``t`` (the shear flow ``u0`` never changes).

    In straightened coordinates it is ``v0`` itself. In original coordinates
    each ``z`` row is ``v0`` shifted by ``t * u0(z)``, sampled from the grid
    values with monotone cubics; arguments beyond the truncated range are
    clamped to the last node.
    """

    v0 = data.v0_field(grid)
    if coordinates == "straightened":
        return v0
    if coordinates != "original":
        raise DomainError(f"unknown coordinates {coordinates!r}")
    x = grid.x_axis.nodes
    x_left, x_right = grid.x_left, grid.x_right
    shift = np.clip(t * np.broadcast_to(data.u0(grid.z_axis.nodes), grid.z_axis.nodes.shape), x[0], x[-1])
    values = np.empty(grid.shape)
    clamped = False
    for j, s in enumerate(shift):
        arguments = x - s
        below = x < s
        from_left = arguments[below]
        from_right = arguments[~below]
        if (from_left.size and from_left.min() < x_left[0]) or (from_right.size and from_right.max() > x_right[-1]):
            clamped = True
        values[below, j] = sample_pchip(v0.left[:, j], x_left, np.clip(from_left, x_left[0], 0.0))
        values[~below, j] = sample_pchip(v0.right[:, j], x_right, np.clip(from_right, 0.0, x_right[-1]))
    if clamped:
        logger.warning("Euler evaluation at t=%.4f clamped arguments outside the truncated x range", t)
    return ShearedField2D(
        grid=grid,
        t=float(t),
        shift=shift,
        values=values,
        left_limit=np.array(v0.left_trace),
        right_limit=np.array(v0.right_trace),
        clamped=clamped,
    )
