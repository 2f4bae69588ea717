"""Corner layer where the wall layer meets the transition layer.

The corner profile jumps across ``X = 0``; it is computed through the smooth
substitute ``w = V_b +/- 1/2 [V_P] e^{-|X|}``, which solves a forced heat
problem with the skewed Laplacian on the whole strip ``X in R, Z > 0``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import numpy as np

from .calculus import (
    derivative_along,
    fd_derivative,
    implicit_line_solve,
    normalize_store_times,
    step_schedule,
    trapezoid_in_time,
)
from .errors import CFLViolation, DomainError, GridError, InitialDataError
from .grids import Field1D, Grid1D, Grid2D, TimeSeries, TwoSidedField2D
from .initial_data import InterfaceGeometry
from .kernels import DEFAULT_SIGMA_NODES, duhamel_exponential, unit_wall_profile, unit_wall_profile_zderiv
from .types import FloatArray, ProgressLogger

__all__ = [
    "WallJumpHistory",
    "KelvinHelmholtzWallTrace",
    "JumpSources",
    "SkewOperator",
    "BoxLayerSolution",
    "EnergyMonitorReport",
    "compute_J_pm",
    "jump_sources_from_arrays",
    "stable_box_dt",
    "solve_box_layer",
    "energy_monitor",
    "box_second_derivative_integrability",
]

logger = logging.getLogger(__name__)

CORNER_TOLERANCE = 1e-8

JumpEvaluator = Callable[[float], Tuple[FloatArray, FloatArray]]
TraceEvaluator = Callable[[float], FloatArray]


class WallJumpHistory:
    """``[V_P]_{x=0}(t, Z)`` and its ``Z``-derivative at any time, from the Duhamel formula."""

    def __init__(self, wall_jump: float, grid_Z: Grid1D, *, n_sigma: int = DEFAULT_SIGMA_NODES) -> None:
        self.wall_jump = float(wall_jump)
        self.grid_Z = grid_Z
        self.n_sigma = n_sigma

    def __call__(self, t: float) -> Tuple[FloatArray, FloatArray]:
        Z = self.grid_Z.nodes
        value = self.wall_jump * unit_wall_profile(t, Z, n_sigma=self.n_sigma)
        slope = self.wall_jump * unit_wall_profile_zderiv(t, Z, n_sigma=self.n_sigma)
        return value, slope


class KelvinHelmholtzWallTrace:
    """Transition-layer profile on the wall, ``V_KH(t, X, z = 0)``.

    The node ``X = 0`` carries the average of the two one-sided values.
    """

    def __init__(
        self,
        corner_jump: float,
        wall_shear: float,
        grid_X: Grid1D,
        *,
        n_sigma: int = DEFAULT_SIGMA_NODES,
    ) -> None:
        nodes = grid_X.nodes
        if not np.allclose(nodes, -nodes[::-1], rtol=0.0, atol=1e-9 * max(1.0, abs(nodes[0]))):
            raise GridError("the transition-layer trace needs an X grid symmetric about 0")
        self.corner_jump = float(corner_jump)
        self.wall_shear = float(wall_shear)
        self.grid_X = grid_X
        self.n_sigma = n_sigma
        self._center = grid_X.index_of(0.0)

    def __call__(self, t: float) -> FloatArray:
        X_right = self.grid_X.nodes[self._center :]
        stretched = t + t**3 * self.wall_shear**2 / 3.0
        right = -0.5 * self.corner_jump * (np.exp(-X_right) + duhamel_exponential(stretched, X_right, n_sigma=self.n_sigma))
        values = np.concatenate([-right[:0:-1], right])
        values[self._center] = 0.0
        return values


def jump_sources_from_arrays(psi_z0: float, jump: FloatArray, jump_Z: FloatArray) -> Tuple[FloatArray, FloatArray]:
    """``J_+/- = -/+ 1/2 ((1 + a^2) q +/- 2 a q_Z)`` for ``a = psi_z0``, ``q = [V_P]``."""

    stretch = 1.0 + psi_z0**2
    J_plus = -0.5 * (stretch * jump + 2.0 * psi_z0 * jump_Z)
    J_minus = 0.5 * (stretch * jump - 2.0 * psi_z0 * jump_Z)
    return J_plus, J_minus


def _field_at(series: Union[TimeSeries, Field1D], t: float) -> Field1D:
    if isinstance(series, Field1D):
        return series
    return series.at(t)


def compute_J_pm(
    geometry: InterfaceGeometry,
    vp_jump: Union[TimeSeries, Field1D],
    vp_jump_Zderiv: Union[TimeSeries, Field1D],
    t: float,
) -> Tuple[Field1D, Field1D]:
    jump = _field_at(vp_jump, t)
    jump_Z = _field_at(vp_jump_Zderiv, t)
    J_plus, J_minus = jump_sources_from_arrays(geometry.psi_z_wall(t), jump.values, jump_Z.values)
    return Field1D(jump.axis, J_plus), Field1D(jump.axis, J_minus)


@dataclass(frozen=True, eq=False)
class JumpSources:
    """Source amplitudes ``J_+`` (for ``X > 0``) and ``J_-`` (for ``X < 0``) over ``Z``.

    ``evaluator`` gives exact values at any time; without it :meth:`at`
    interpolates the stored snapshots linearly in time.
    """

    J_plus: TimeSeries
    J_minus: TimeSeries
    wall_shear: float
    evaluator: Optional[JumpEvaluator] = None

    @property
    def times(self) -> FloatArray:
        return self.J_plus.times

    @property
    def axis(self) -> Grid1D:
        return self.J_plus[0].axis

    def psi_z0(self, t: float) -> float:
        return t * self.wall_shear

    def at(self, t: float) -> Tuple[FloatArray, FloatArray]:
        if self.evaluator is not None:
            return self.evaluator(t)
        return self.J_plus.at(t).values, self.J_minus.at(t).values

    @classmethod
    def from_history(
        cls,
        history: Callable[[float], Tuple[FloatArray, FloatArray]],
        geometry: InterfaceGeometry,
        times: FloatArray,
        grid_Z: Grid1D,
    ) -> "JumpSources":
        def evaluate(t: float) -> Tuple[FloatArray, FloatArray]:
            return jump_sources_from_arrays(geometry.psi_z_wall(t), *history(t))

        pairs = [evaluate(float(t)) for t in times]
        return cls(
            J_plus=TimeSeries(times, tuple(Field1D(grid_Z, plus) for plus, _ in pairs)),
            J_minus=TimeSeries(times, tuple(Field1D(grid_Z, minus) for _, minus in pairs)),
            wall_shear=geometry.wall_shear,
            evaluator=evaluate,
        )

    @classmethod
    def from_snapshots(
        cls,
        vp_jump: TimeSeries,
        geometry: InterfaceGeometry,
    ) -> "JumpSources":
        plus: List[Field1D] = []
        minus: List[Field1D] = []
        for t, jump in vp_jump:
            J_plus, J_minus = compute_J_pm(geometry, jump, fd_derivative(jump), t)
            plus.append(J_plus)
            minus.append(J_minus)
        return cls(
            J_plus=TimeSeries(vp_jump.times, tuple(plus)),
            J_minus=TimeSeries(vp_jump.times, tuple(minus)),
            wall_shear=geometry.wall_shear,
        )


@dataclass(frozen=True)
class SkewOperator:
    """``(1 + a^2) d_XX - 2 a d_XZ + d_ZZ`` with ``a = psi_z0`` frozen over a step."""

    psi_z0: float

    @property
    def xx_coefficient(self) -> float:
        return 1.0 + self.psi_z0**2

    @property
    def is_laplacian(self) -> bool:
        return self.psi_z0 == 0.0

    def gradient(self, values: FloatArray, X: FloatArray, Z: FloatArray) -> Tuple[FloatArray, FloatArray]:
        """``(d_X w, d_Z w - a d_X w)``."""

        w_X = np.gradient(values, X, axis=0, edge_order=2)
        w_Z = np.gradient(values, Z, axis=1, edge_order=2)
        return w_X, w_Z - self.psi_z0 * w_X

    def mixed(self, values: FloatArray, X: FloatArray, Z: FloatArray) -> FloatArray:
        if self.is_laplacian:
            return np.zeros_like(values)
        w_X = np.gradient(values, X, axis=0, edge_order=2)
        return -2.0 * self.psi_z0 * np.gradient(w_X, Z, axis=1, edge_order=2)

    def apply(self, values: FloatArray, X: FloatArray, Z: FloatArray) -> FloatArray:
        return (
            self.xx_coefficient * derivative_along(values, X, axis=0, order=2)
            + self.mixed(values, X, Z)
            + derivative_along(values, Z, axis=1, order=2)
        )


@dataclass(frozen=True, eq=False)
class BoxLayerSolution:
    grid: Grid2D
    w: TimeSeries
    V_b: TimeSeries
    sources: JumpSources
    dt: float
    n_steps: int

    @property
    def store_times(self) -> FloatArray:
        return self.w.times


def stable_box_dt(grid_X: Grid1D, grid_Z: Grid1D, max_psi_z0: float) -> float:
    """Largest step the explicit mixed term tolerates: ``h^2 / (4 (1 + a_max^2))``."""

    h = min(grid_X.spacing, grid_Z.spacing)
    return h**2 / (4.0 * (1.0 + max_psi_z0**2))


def _trace_evaluator(trace: Union[TimeSeries, TraceEvaluator]) -> TraceEvaluator:
    if isinstance(trace, TimeSeries):
        return lambda t: trace.at(t).values
    return trace


def _jump_at(vp_jump: Union[TimeSeries, Callable[[float], Tuple[FloatArray, FloatArray]]], t: float) -> FloatArray:
    if isinstance(vp_jump, TimeSeries):
        return vp_jump.at(t).values
    return vp_jump(t)[0]


def _source(grid: Grid2D, J_plus: FloatArray, J_minus: FloatArray) -> FloatArray:
    X = grid.x_axis.nodes
    i0 = grid.interface_index
    decay = np.exp(-np.abs(X))[:, None]
    source = np.empty(grid.shape)
    source[:i0] = J_minus[None, :] * decay[:i0]
    source[i0 + 1 :] = J_plus[None, :] * decay[i0 + 1 :]
    source[i0] = 0.5 * (J_plus + J_minus)
    return source


def _wall_data(grid: Grid2D, vkh_wall: FloatArray, corner_jump: float) -> FloatArray:
    X = grid.x_axis.nodes
    return -vkh_wall - np.sign(X) * 0.5 * corner_jump * np.exp(-np.abs(X))


def _reconstruct(grid: Grid2D, w: FloatArray, jump: FloatArray) -> Tuple[TwoSidedField2D, TwoSidedField2D]:
    i0 = grid.interface_index
    X = grid.x_axis.nodes
    central = np.gradient(w, X, axis=0, edge_order=2)[i0]
    smooth = TwoSidedField2D.continuous(grid, w, slope=central)
    left = w[: i0 + 1] + 0.5 * jump[None, :] * np.exp(grid.x_left)[:, None]
    right = w[i0:] - 0.5 * jump[None, :] * np.exp(-grid.x_right)[:, None]
    slope = central + 0.5 * jump
    return smooth, TwoSidedField2D(grid, left, right, (slope, slope))


def solve_box_layer(
    J_pm: JumpSources,
    vkh_trace_z0: Union[TimeSeries, TraceEvaluator],
    vp_jump: Union[TimeSeries, Callable[[float], Tuple[FloatArray, FloatArray]]],
    v0_corner_jump: float,
    geometry: InterfaceGeometry,
    T: float,
    grid_X: Grid1D,
    grid_Z: Grid1D,
    dt: Optional[float] = None,
    *,
    store_times: Optional[FloatArray] = None,
    progress: Optional[ProgressLogger] = None,
) -> BoxLayerSolution:
    """Time-step ``w`` and reconstruct the corner profile at the store times.

    Each step freezes ``a = psi_z0`` and the sources at the midpoint, treats
    the mixed derivative and the sources explicitly, then does an implicit
    sweep in ``X`` followed by an implicit sweep in ``Z`` that imposes the
    wall data.

    Raises:
        CFLViolation: ``dt`` exceeds :func:`stable_box_dt`.
        InitialDataError: the wall data do not vanish at ``t = 0`` (corner compatibility).
    """

    grid = Grid2D(grid_X, grid_Z)
    times = normalize_store_times(store_times, T)
    X, Z = grid_X.nodes, grid_Z.nodes
    wall_trace = _trace_evaluator(vkh_trace_z0)
    max_shear = max(abs(geometry.psi_z_wall(0.0)), abs(geometry.psi_z_wall(T)))
    bound = stable_box_dt(grid_X, grid_Z, max_shear)
    if dt is None:
        dt = bound
    elif dt > bound * (1.0 + 1e-12):
        raise CFLViolation(
            f"box-layer step {dt:.3e} exceeds the mixed-derivative bound {bound:.3e}",
            suggested_dt=bound,
            payload={"max_psi_z0": max_shear},
        )

    initial_wall = _wall_data(grid, wall_trace(0.0), v0_corner_jump)
    mismatch = float(np.max(np.abs(initial_wall)))
    if mismatch > CORNER_TOLERANCE * max(1.0, abs(v0_corner_jump)):
        raise InitialDataError(
            f"corner data are incompatible at t = 0 (wall mismatch {mismatch:.3e})",
            condition="corner-compatibility",
            payload={"mismatch": mismatch},
        )

    w = np.zeros(grid.shape)
    smooth, corner = _reconstruct(grid, w, _jump_at(vp_jump, 0.0))
    w_snapshots = [smooth]
    V_b_snapshots = [corner]
    total_steps = 0
    for interval in step_schedule(times, dt):
        step = interval.dt
        for k in range(interval.n_steps):
            t_now = interval.start + k * step
            t_mid = t_now + 0.5 * step
            operator = SkewOperator(geometry.psi_z_wall(t_mid))
            J_plus, J_minus = J_pm.at(t_mid)
            rhs = w + step * (operator.mixed(w, X, Z) + _source(grid, J_plus, J_minus))
            swept = rhs.copy()
            swept[:, 1:-1] = implicit_line_solve(rhs[:, 1:-1], X, step * operator.xx_coefficient, axis=0)
            wall = _wall_data(grid, wall_trace(t_now + step), v0_corner_jump)
            w = implicit_line_solve(swept, Z, step, axis=1, lower=wall, upper=0.0)
        total_steps += interval.n_steps
        t_store = float(times[interval.store_index])
        smooth, corner = _reconstruct(grid, w, _jump_at(vp_jump, t_store))
        w_snapshots.append(smooth)
        V_b_snapshots.append(corner)
        logger.debug("box layer stored t=%.4f after %d steps", t_store, total_steps)
        if progress is not None:
            progress(f"box layer t={t_store:.4f}")
    logger.info("box layer solved with dt=%.3e over %d steps", dt, total_steps)
    return BoxLayerSolution(
        grid=grid,
        w=TimeSeries(times, tuple(w_snapshots)),
        V_b=TimeSeries(times, tuple(V_b_snapshots)),
        sources=J_pm,
        dt=float(dt),
        n_steps=total_steps,
    )


@dataclass(frozen=True)
class EnergyMonitorReport:
    """Discrete terms of the ``L^p_X W^{1,p}_Z`` energy balance of ``w`` and of ``d_X w``."""

    p: float
    times: FloatArray
    norm: FloatArray
    norm_rate: FloatArray
    dissipation: FloatArray
    dissipation_z: FloatArray
    rhs: FloatArray
    x_norm: FloatArray
    x_norm_rate: FloatArray
    x_dissipation: FloatArray
    x_dissipation_z: FloatArray
    x_rhs: FloatArray
    source_norm: FloatArray
    source_integral: float

    @property
    def lhs(self) -> FloatArray:
        return self.norm_rate + self.dissipation + self.dissipation_z

    @property
    def x_lhs(self) -> FloatArray:
        return self.x_norm_rate + self.x_dissipation + self.x_dissipation_z

    @property
    def constant(self) -> float:
        return float(np.max(self.lhs / self.rhs))

    @property
    def x_constant(self) -> float:
        return float(np.max(self.x_lhs / self.x_rhs))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "p": self.p,
            "times": self.times.tolist(),
            "lhs": self.lhs.tolist(),
            "rhs": self.rhs.tolist(),
            "dissipation": self.dissipation.tolist(),
            "dissipation_z": self.dissipation_z.tolist(),
            "x_lhs": self.x_lhs.tolist(),
            "x_rhs": self.x_rhs.tolist(),
            "constant": self.constant,
            "x_constant": self.x_constant,
            "source_integral": self.source_integral,
        }


def _weighted_dissipation(
    base: FloatArray, operator: SkewOperator, X: FloatArray, Z: FloatArray, p: float, weights: FloatArray
) -> float:
    """``int |w|^{p-2} |grad_a w|^2`` as ``(4/p^2) int |grad_a |w|^{p/2}|^2``; the weight itself is never formed."""

    root = np.abs(base) ** (0.5 * p)
    g_X, g_Z = operator.gradient(root, X, Z)
    return float(4.0 / p**2 * np.sum(weights * (g_X**2 + g_Z**2)))


def energy_monitor(w: Union[TimeSeries, BoxLayerSolution], J_pm: JumpSources, p: float) -> EnergyMonitorReport:
    """Evaluate both sides of the energy inequalities along a stored trajectory.

    The left side is ``d/dt N + D_1 + D_2`` with ``N = ||w||^p + ||w_Z||^p`` and
    the two weighted dissipation integrals; the right side is
    ``1 + ||J_+/-||^p_{W^{1,p}_Z} + N``. The same is done for ``d_X w``.
    """

    if not np.isfinite(p) or p <= 1:
        raise DomainError(f"energy monitors need p > 1, got {p}")
    series = w.w if isinstance(w, BoxLayerSolution) else w
    times = series.times
    first = series[0]
    grid: Grid2D = first.grid
    X, Z = grid.x_axis.nodes, grid.z_axis.nodes
    weights = grid.quadrature_weights()
    z_weights = grid.z_axis.quadrature_weights()

    def integral(values: FloatArray) -> float:
        return float(np.sum(weights * np.abs(values) ** p))

    def z_integral(values: FloatArray) -> float:
        return float(np.sum(z_weights * np.abs(values) ** p))

    columns: Dict[str, List[float]] = {
        key: [] for key in ("norm", "d1", "d2", "x_norm", "x_d1", "x_d2", "source")
    }
    for t, snapshot in series:
        values = snapshot.values
        operator = SkewOperator(J_pm.psi_z0(t))
        w_X = np.gradient(values, X, axis=0, edge_order=2)
        w_Z = np.gradient(values, Z, axis=1, edge_order=2)
        w_XZ = np.gradient(w_X, Z, axis=1, edge_order=2)
        columns["norm"].append(integral(values) + integral(w_Z))
        columns["d1"].append(_weighted_dissipation(values, operator, X, Z, p, weights))
        columns["d2"].append(_weighted_dissipation(w_Z, operator, X, Z, p, weights))
        columns["x_norm"].append(integral(w_X) + integral(w_XZ))
        columns["x_d1"].append(_weighted_dissipation(w_X, operator, X, Z, p, weights))
        columns["x_d2"].append(_weighted_dissipation(w_XZ, operator, X, Z, p, weights))
        J_plus, J_minus = J_pm.at(t)
        source = 0.0
        for amplitude in (J_plus, J_minus):
            source += z_integral(amplitude) + z_integral(np.gradient(amplitude, Z, edge_order=2))
        columns["source"].append(source)

    arrays = {key: np.asarray(value) for key, value in columns.items()}

    def rate(values: FloatArray) -> FloatArray:
        if times.size < 2:
            return np.zeros_like(values)
        return np.gradient(values, times)

    return EnergyMonitorReport(
        p=float(p),
        times=times,
        norm=arrays["norm"],
        norm_rate=rate(arrays["norm"]),
        dissipation=arrays["d1"],
        dissipation_z=arrays["d2"],
        rhs=1.0 + arrays["source"] + arrays["norm"],
        x_norm=arrays["x_norm"],
        x_norm_rate=rate(arrays["x_norm"]),
        x_dissipation=arrays["x_d1"],
        x_dissipation_z=arrays["x_d2"],
        x_rhs=1.0 + arrays["source"] + arrays["x_norm"],
        source_norm=arrays["source"],
        source_integral=trapezoid_in_time(times, arrays["source"]),
    )


def box_second_derivative_integrability(V_b: Union[TimeSeries, BoxLayerSolution], p: float) -> float:
    """``int_0^T int |d_X^2 V_b|^p dX dZ dt`` with one-sided stencils at ``X = 0``."""

    if not np.isfinite(p) or p <= 0:
        raise DomainError(f"the exponent must be positive, got {p}")
    series = V_b.V_b if isinstance(V_b, BoxLayerSolution) else V_b
    values = [fd_derivative(snapshot, "x", 2).power_integral(p) for snapshot in series.snapshots]
    if len(values) == 1:
        return float(values[0])
    return trapezoid_in_time(series.times, np.asarray(values))
