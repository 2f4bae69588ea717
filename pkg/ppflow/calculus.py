from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Union, overload

import numpy as np
from scipy.integrate import trapezoid
from scipy.interpolate import PchipInterpolator
from scipy.linalg import solve_banded

from .errors import DomainError, GridError
from .grids import Field1D, TwoSidedField2D
from .types import FloatArray

__all__ = [
    "StepInterval",
    "derivative_along",
    "fd_derivative",
    "mixed_derivative",
    "lp_norm",
    "w1p_norm",
    "implicit_line_solve",
    "normalize_store_times",
    "step_schedule",
    "sample_pchip",
    "trapezoid_in_time",
]

AxisName = Union[int, str]
_AXES = {"x": 0, "z": 1, "X": 0, "Z": 1}


def _second_derivative_weights(offsets: FloatArray) -> FloatArray:
    """Weights reproducing f'' at offset 0 exactly for polynomials of degree < len(offsets)."""

    powers = np.arange(offsets.size)
    vandermonde = offsets[None, :] ** powers[:, None]
    target = np.zeros(offsets.size)
    target[2] = 2.0
    return np.linalg.solve(vandermonde, target)


def _second_derivative(values: FloatArray, nodes: FloatArray) -> FloatArray:
    n = nodes.size
    out = np.empty_like(values)
    h_minus = nodes[1:-1] - nodes[:-2]
    h_plus = nodes[2:] - nodes[1:-1]
    shape = (-1,) + (1,) * (values.ndim - 1)
    w_minus = (2.0 / (h_minus * (h_minus + h_plus))).reshape(shape)
    w_mid = (-2.0 / (h_minus * h_plus)).reshape(shape)
    w_plus = (2.0 / (h_plus * (h_minus + h_plus))).reshape(shape)
    out[1:-1] = w_minus * values[:-2] + w_mid * values[1:-1] + w_plus * values[2:]
    width = min(4, n)
    head = _second_derivative_weights(nodes[:width] - nodes[0])
    tail = _second_derivative_weights(nodes[-width:] - nodes[-1])
    out[0] = np.tensordot(head, values[:width], axes=(0, 0))
    out[-1] = np.tensordot(tail, values[-width:], axes=(0, 0))
    return out


def derivative_along(values: FloatArray, nodes: FloatArray, *, axis: int = 0, order: int = 1) -> FloatArray:
    """Second-order finite-difference derivative of ``values`` along ``axis``.

    Central stencils in the interior and one-sided stencils at both ends; the
    nodes may be nonuniform.
    """

    values = np.asarray(values, dtype=float)
    nodes = np.asarray(nodes, dtype=float)
    if nodes.size < 3 or values.shape[axis] != nodes.size:
        raise GridError(f"need at least 3 matching nodes along axis {axis}, got {nodes.size}")
    if order == 1:
        return np.gradient(values, nodes, axis=axis, edge_order=2)
    if order == 2:
        moved = np.moveaxis(values, axis, 0)
        return np.moveaxis(_second_derivative(moved, nodes), 0, axis)
    raise DomainError(f"derivative order must be 1 or 2, got {order}")


def _axis_index(axis: AxisName) -> int:
    if isinstance(axis, str):
        if axis not in _AXES:
            raise GridError(f"unknown axis {axis!r}")
        return _AXES[axis]
    return int(axis)


@overload
def fd_derivative(field: Field1D, axis: AxisName = 0, order: int = 1) -> Field1D:
    ...


@overload
def fd_derivative(field: TwoSidedField2D, axis: AxisName = 0, order: int = 1) -> TwoSidedField2D:
    ...


def fd_derivative(field, axis=0, order=1):
    """Derivative of a grid field.

    Two-sided fields are differenced one side at a time, so nothing is ever
    averaged across ``x = 0``. For ``order=1`` along ``x`` the interface rows
    carry the one-sided derivatives (pinned slopes win over stencils); along
    ``z`` the pinned slopes are differenced with the field.
    """

    index = _axis_index(axis)
    if isinstance(field, Field1D):
        if index != 0:
            raise GridError("a one-dimensional field only has axis 0")
        return Field1D(field.axis, derivative_along(field.values, field.axis.nodes, order=order))
    if not isinstance(field, TwoSidedField2D):
        raise TypeError(f"cannot differentiate {type(field).__name__}")
    grid = field.grid
    if index == 0:
        left = derivative_along(field.left, grid.x_left, axis=0, order=order)
        right = derivative_along(field.right, grid.x_right, axis=0, order=order)
        if order == 1 and field.slopes is not None:
            left[-1] = field.slopes[0]
            right[0] = field.slopes[1]
        return TwoSidedField2D(grid, left, right)
    if index == 1:
        z = grid.z_axis.nodes
        left = derivative_along(field.left, z, axis=1, order=order)
        right = derivative_along(field.right, z, axis=1, order=order)
        slopes = None
        if field.slopes is not None:
            slopes = (
                derivative_along(field.slopes[0], z, order=order),
                derivative_along(field.slopes[1], z, order=order),
            )
        return TwoSidedField2D(grid, left, right, slopes)
    raise GridError(f"axis {axis!r} does not exist on a two-dimensional field")


def mixed_derivative(field: TwoSidedField2D) -> TwoSidedField2D:
    return fd_derivative(fd_derivative(field, "x", 1), "z", 1)


def _check_exponent(p: float) -> float:
    if not np.isfinite(p) or p <= 1:
        raise DomainError(f"the norm exponent must lie in (1, inf), got {p}")
    return float(p)


def lp_norm(field: Union[Field1D, TwoSidedField2D], p: float) -> float:
    """Trapezoid approximation of ``(integral |f|^p)^(1/p)`` over the truncated domain."""

    p = _check_exponent(p)
    return field.power_integral(p) ** (1.0 / p)


def w1p_norm(
    field: Union[Field1D, TwoSidedField2D],
    p: float,
    *,
    axes: Optional[Sequence[AxisName]] = None,
) -> float:
    """``(||f||_p^p + sum ||d_a f||_p^p)^(1/p)`` over the derivative ``axes`` (all by default)."""

    p = _check_exponent(p)
    if axes is None:
        axes = (0,) if isinstance(field, Field1D) else (0, 1)
    total = field.power_integral(p)
    for axis in axes:
        total += fd_derivative(field, axis, 1).power_integral(p)
    return total ** (1.0 / p)


def implicit_line_solve(
    rhs: FloatArray,
    nodes: FloatArray,
    coefficient: float,
    *,
    axis: int = 0,
    lower: Union[float, FloatArray] = 0.0,
    upper: Union[float, FloatArray] = 0.0,
) -> FloatArray:
    """Solve ``(I - coefficient * d2/ds2) u = rhs`` line by line along ``axis``.

    Dirichlet values ``lower``/``upper`` replace the first and last rows; they
    broadcast over the remaining axes. With a zero coefficient only the
    boundary rows change.
    """

    nodes = np.asarray(nodes, dtype=float)
    moved = np.array(np.moveaxis(np.asarray(rhs, dtype=float), axis, 0))
    n = nodes.size
    if moved.shape[0] != n or n < 3:
        raise GridError(f"rhs has {moved.shape[0]} rows along axis {axis}, grid has {n} nodes")
    moved[0] = lower
    moved[-1] = upper
    if coefficient == 0:
        return np.moveaxis(moved, 0, axis)
    if coefficient < 0:
        raise DomainError("implicit diffusion coefficient must be nonnegative")
    h_minus = nodes[1:-1] - nodes[:-2]
    h_plus = nodes[2:] - nodes[1:-1]
    sub = -coefficient * 2.0 / (h_minus * (h_minus + h_plus))
    sup = -coefficient * 2.0 / (h_plus * (h_minus + h_plus))
    diag = 1.0 + coefficient * 2.0 / (h_minus * h_plus)
    banded = np.zeros((3, n))
    banded[1, 0] = banded[1, -1] = 1.0
    banded[1, 1:-1] = diag
    banded[0, 2:] = sup
    banded[2, :-2] = sub
    flat = moved.reshape(n, -1)
    solved = solve_banded((1, 1), banded, flat, check_finite=False)
    return np.moveaxis(solved.reshape(moved.shape), 0, axis)


@dataclass(frozen=True)
class StepInterval:
    """Equal steps covering ``[start, start + n_steps * dt]``, ending on store time ``store_index``."""

    start: float
    dt: float
    n_steps: int
    store_index: int

    @property
    def end(self) -> float:
        return self.start + self.n_steps * self.dt


def normalize_store_times(times: Optional[Iterable[float]], T: float) -> FloatArray:
    """Sorted, de-duplicated store times in ``[0, T]`` that always include both ends."""

    if not np.isfinite(T) or T <= 0:
        raise DomainError(f"final time must be positive, got {T}")
    values = np.asarray(list(times) if times is not None else [], dtype=float)
    if values.size and (np.any(values < 0) or np.any(values > T * (1 + 1e-12))):
        raise DomainError(f"store times must lie in [0, {T}]")
    merged = np.unique(np.concatenate([[0.0, float(T)], np.minimum(values, T)]))
    keep = np.concatenate([[True], np.diff(merged) > 1e-12 * max(1.0, T)])
    merged = merged[keep]
    merged[-1] = float(T)
    return merged


def step_schedule(store_times: Sequence[float], dt: float) -> List[StepInterval]:
    """Split the time axis so every store time is hit exactly with steps no longer than ``dt``."""

    if not np.isfinite(dt) or dt <= 0:
        raise DomainError(f"time step must be positive, got {dt}")
    times = np.asarray(store_times, dtype=float)
    schedule: List[StepInterval] = []
    for index in range(1, times.size):
        span = times[index] - times[index - 1]
        n_steps = max(1, math.ceil(span / dt - 1e-9))
        schedule.append(StepInterval(float(times[index - 1]), span / n_steps, n_steps, index))
    return schedule


def sample_pchip(
    values: FloatArray,
    nodes: FloatArray,
    targets: FloatArray,
    *,
    axis: int = 0,
    fill: float = 0.0,
) -> FloatArray:
    """Monotone cubic interpolation along ``axis``; targets outside the nodes get ``fill``."""

    interpolant = PchipInterpolator(np.asarray(nodes, dtype=float), values, axis=axis, extrapolate=False)
    return np.nan_to_num(interpolant(np.asarray(targets, dtype=float)), nan=fill)


def trapezoid_in_time(times: FloatArray, values: FloatArray) -> float:
    times = np.asarray(times, dtype=float)
    if times.size < 2:
        return 0.0
    return float(trapezoid(np.asarray(values, dtype=float), times))
