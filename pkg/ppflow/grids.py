from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Callable, Generic, Iterator, Optional, Protocol, Tuple, TypeVar, Union, runtime_checkable

import numpy as np

from .errors import DomainError, GridError
from .types import FloatArray, IntArray, PlaneFunction

__all__ = [
    "Axis",
    "Grid1D",
    "LayerAxis",
    "Grid2D",
    "Field1D",
    "TwoSidedField2D",
    "TimeSeries",
    "trapezoid_weights",
]

_NODE_TOL = 1e-9


@runtime_checkable
class Axis(Protocol):
    """Anything that places nodes on a line and can integrate over them."""

    @property
    def nodes(self) -> FloatArray:
        ...

    @property
    def n_points(self) -> int:
        ...

    @property
    def spacing_min(self) -> float:
        ...

    def quadrature_weights(self) -> FloatArray:
        ...


def trapezoid_weights(nodes: FloatArray) -> FloatArray:
    """Composite trapezoid weights for (possibly nonuniform) sorted nodes."""

    nodes = np.asarray(nodes, dtype=float)
    widths = np.diff(nodes)
    weights = np.zeros_like(nodes)
    weights[:-1] += 0.5 * widths
    weights[1:] += 0.5 * widths
    return weights


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid ``origin + k * spacing`` for ``k = 0 .. n_points - 1``."""

    n_points: int
    spacing: float
    origin: float = 0.0

    def __post_init__(self) -> None:
        if int(self.n_points) != self.n_points or self.n_points < 3:
            raise GridError(f"a grid needs at least 3 nodes, got {self.n_points}")
        if not np.isfinite(self.spacing) or self.spacing <= 0:
            raise GridError(f"grid spacing must be positive, got {self.spacing}")
        if not np.isfinite(self.origin):
            raise GridError("grid origin must be finite")
        object.__setattr__(self, "n_points", int(self.n_points))
        object.__setattr__(self, "spacing", float(self.spacing))
        object.__setattr__(self, "origin", float(self.origin))

    @classmethod
    def from_length(cls, length: float, spacing: float, *, origin: float = 0.0) -> "Grid1D":
        if length <= 0 or spacing <= 0:
            raise GridError("length and spacing must be positive")
        intervals = int(round(length / spacing))
        if abs(intervals * spacing - length) > _NODE_TOL * max(1.0, length):
            raise GridError(f"length {length} is not a multiple of spacing {spacing}")
        return cls(intervals + 1, spacing, origin)

    @classmethod
    def symmetric(cls, half_width: float, spacing: float) -> "Grid1D":
        """Grid on ``[-half_width, half_width]`` with a node exactly at zero."""

        if half_width <= 0 or spacing <= 0:
            raise GridError("half_width and spacing must be positive")
        half = int(round(half_width / spacing))
        if abs(half * spacing - half_width) > _NODE_TOL * max(1.0, half_width):
            raise GridError(f"half width {half_width} is not a multiple of spacing {spacing}")
        return cls(2 * half + 1, spacing, -(half * spacing))

    @property
    def truncation_length(self) -> float:
        return (self.n_points - 1) * self.spacing

    @property
    def end(self) -> float:
        return self.origin + self.truncation_length

    @property
    def nodes(self) -> FloatArray:
        return self.origin + self.spacing * np.arange(self.n_points, dtype=float)

    @property
    def spacing_min(self) -> float:
        return self.spacing

    def quadrature_weights(self) -> FloatArray:
        weights = np.full(self.n_points, self.spacing)
        weights[0] = weights[-1] = 0.5 * self.spacing
        return weights

    def index_of(self, value: float) -> int:
        position = (value - self.origin) / self.spacing
        index = int(round(position))
        if abs(position - index) > _NODE_TOL or not 0 <= index < self.n_points:
            raise GridError(f"{value} is not a node of the grid")
        return index

    def to_dict(self) -> dict:
        return {"n_points": self.n_points, "spacing": self.spacing, "origin": self.origin}


@dataclass(frozen=True, eq=False)
class LayerAxis:
    """Piecewise-uniform axis resolving a layer of width ``scale * fast.truncation_length``.

    Inside the window the nodes are the fast-grid nodes times ``scale`` (so
    fast-variable fields are sampled without interpolation); outside it the
    physical nodes are kept. ``fast_index`` maps each node to its fast-grid
    index, or ``-1`` outside the window.
    """

    nodes: FloatArray
    fast_index: IntArray
    scale: float
    fast: Grid1D
    physical: Grid1D

    @classmethod
    def build(cls, physical: Grid1D, fast: Grid1D, scale: float) -> "LayerAxis":
        if not np.isfinite(scale) or scale <= 0:
            raise DomainError(f"layer scale must be positive, got {scale}")
        mapped = fast.nodes * scale
        lo, hi = physical.origin, physical.end
        slack = _NODE_TOL * max(1.0, abs(lo), abs(hi))
        keep = (mapped >= lo - slack) & (mapped <= hi + slack)
        if not np.any(keep):
            raise GridError("the fast window does not intersect the physical axis")
        window = mapped[keep]
        outer = physical.nodes
        half_cell = 0.5 * physical.spacing
        outside = (outer < window[0] - half_cell) | (outer > window[-1] + half_cell)
        nodes = np.concatenate([window, outer[outside]])
        index = np.concatenate([np.flatnonzero(keep), np.full(int(outside.sum()), -1)])
        order = np.argsort(nodes, kind="stable")
        nodes = nodes[order]
        index = index[order].astype(np.int64)
        nodes.setflags(write=False)
        index.setflags(write=False)
        return cls(nodes=nodes, fast_index=index, scale=float(scale), fast=fast, physical=physical)

    @property
    def n_points(self) -> int:
        return int(self.nodes.size)

    @property
    def spacing_min(self) -> float:
        return float(np.min(np.diff(self.nodes)))

    @property
    def window(self) -> Tuple[float, float]:
        inside = self.nodes[self.fast_index >= 0]
        return float(inside[0]), float(inside[-1])

    def quadrature_weights(self) -> FloatArray:
        return trapezoid_weights(self.nodes)

    def sample_fast(self, values: FloatArray, *, axis: int = 0) -> FloatArray:
        """Pick fast-grid values at the window nodes; zero outside the window."""

        values = np.moveaxis(np.asarray(values, dtype=float), axis, 0)
        out = np.zeros((self.n_points,) + values.shape[1:])
        inside = self.fast_index >= 0
        out[inside] = values[self.fast_index[inside]]
        return np.moveaxis(out, 0, axis)


def _zero_index(nodes: FloatArray) -> int:
    scale = max(1.0, float(np.max(np.abs(nodes))))
    hits = np.flatnonzero(np.abs(nodes) <= _NODE_TOL * scale)
    if hits.size != 1:
        raise GridError("the x axis must have exactly one node at x = 0")
    return int(hits[0])


@dataclass(frozen=True, eq=False)
class Grid2D:
    """Tensor grid over ``x`` (with a node at the interface ``x = 0``) and ``z >= 0``."""

    x_axis: Axis
    z_axis: Axis
    interface_index: int = field(init=False)

    def __post_init__(self) -> None:
        index = _zero_index(self.x_axis.nodes)
        if index < 2 or self.x_axis.n_points - 1 - index < 2:
            raise GridError("each side of the interface needs at least 3 nodes")
        z_nodes = self.z_axis.nodes
        if abs(z_nodes[0]) > _NODE_TOL or np.any(np.diff(z_nodes) <= 0):
            raise GridError("the z axis must start at the wall z = 0 and increase")
        object.__setattr__(self, "interface_index", index)

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.x_axis.n_points, self.z_axis.n_points)

    @property
    def x_left(self) -> FloatArray:
        return self.x_axis.nodes[: self.interface_index + 1]

    @property
    def x_right(self) -> FloatArray:
        return self.x_axis.nodes[self.interface_index :]

    def quadrature_weights(self) -> FloatArray:
        return np.outer(self.x_axis.quadrature_weights(), self.z_axis.quadrature_weights())


def _frozen(values: object, *, what: str) -> FloatArray:
    array = np.array(values, dtype=float)
    if not np.all(np.isfinite(array)):
        raise DomainError(f"{what} must be finite")
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Field1D:
    axis: Axis
    values: FloatArray

    def __post_init__(self) -> None:
        values = _frozen(self.values, what="field values")
        if values.shape != (self.axis.n_points,):
            raise GridError(f"expected {self.axis.n_points} values, got shape {values.shape}")
        object.__setattr__(self, "values", values)

    @property
    def grid(self) -> Axis:
        return self.axis

    @classmethod
    def zeros(cls, axis: Axis) -> "Field1D":
        return cls(axis, np.zeros(axis.n_points))

    @classmethod
    def from_function(cls, axis: Axis, function: Callable[[FloatArray], FloatArray]) -> "Field1D":
        return cls(axis, np.broadcast_to(function(axis.nodes), (axis.n_points,)))

    def power_integral(self, p: float) -> float:
        return float(np.sum(self.axis.quadrature_weights() * np.abs(self.values) ** p))

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def _check(self, other: "Field1D") -> None:
        if other.axis is not self.axis and other.axis != self.axis:
            raise GridError("fields live on different grids")

    def __add__(self, other: Union["Field1D", float]) -> "Field1D":
        if isinstance(other, Field1D):
            self._check(other)
            return Field1D(self.axis, self.values + other.values)
        return Field1D(self.axis, self.values + other)

    def __sub__(self, other: Union["Field1D", float]) -> "Field1D":
        if isinstance(other, Field1D):
            self._check(other)
            return Field1D(self.axis, self.values - other.values)
        return Field1D(self.axis, self.values - other)

    def __neg__(self) -> "Field1D":
        return Field1D(self.axis, -self.values)

    def __mul__(self, other: Union[float, FloatArray]) -> "Field1D":
        return Field1D(self.axis, self.values * other)

    __rmul__ = __mul__


def _edge_slope(nodes: FloatArray, values: FloatArray, *, at_end: bool) -> FloatArray:
    """Second-order one-sided x-derivative at the first or last row."""

    if at_end:
        return np.gradient(values[-3:], nodes[-3:], axis=0, edge_order=2)[-1]
    return np.gradient(values[:3], nodes[:3], axis=0, edge_order=2)[0]


@dataclass(frozen=True, eq=False)
class TwoSidedField2D:
    """Field on a :class:`Grid2D` that may jump across ``x = 0``.

    ``left`` holds the rows ``x <= 0`` with the left limit in its last row and
    ``right`` the rows ``x >= 0`` with the right limit in its first row, so each
    side is differenced on its own. ``slopes`` optionally pins the two one-sided
    x-derivative traces when they are known more accurately than a one-sided
    stencil can give them.
    """

    grid: Grid2D
    left: FloatArray
    right: FloatArray
    slopes: Optional[Tuple[FloatArray, FloatArray]] = None

    def __post_init__(self) -> None:
        nx, nz = self.grid.shape
        i0 = self.grid.interface_index
        left = _frozen(self.left, what="left values")
        right = _frozen(self.right, what="right values")
        if left.shape != (i0 + 1, nz) or right.shape != (nx - i0, nz):
            raise GridError(
                f"side shapes {left.shape}/{right.shape} do not match grid {self.grid.shape} split at {i0}"
            )
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)
        if self.slopes is not None:
            pair = (_frozen(self.slopes[0], what="slopes"), _frozen(self.slopes[1], what="slopes"))
            if pair[0].shape != (nz,) or pair[1].shape != (nz,):
                raise GridError("slope traces must have one value per z node")
            object.__setattr__(self, "slopes", pair)

    # Construction ------------------------------------------------------------
    @classmethod
    def continuous(
        cls,
        grid: Grid2D,
        values: FloatArray,
        *,
        slope: Optional[FloatArray] = None,
    ) -> "TwoSidedField2D":
        values = np.asarray(values, dtype=float)
        if values.shape != grid.shape:
            raise GridError(f"expected shape {grid.shape}, got {values.shape}")
        i0 = grid.interface_index
        slopes = None if slope is None else (slope, slope)
        return cls(grid, values[: i0 + 1], values[i0:], slopes)

    @classmethod
    def from_functions(cls, grid: Grid2D, minus: PlaneFunction, plus: PlaneFunction) -> "TwoSidedField2D":
        z = grid.z_axis.nodes[None, :]
        xl = grid.x_left[:, None]
        xr = grid.x_right[:, None]
        left = np.broadcast_to(minus(xl, z), (xl.shape[0], z.shape[1]))
        right = np.broadcast_to(plus(xr, z), (xr.shape[0], z.shape[1]))
        return cls(grid, left, right)

    @classmethod
    def zeros(cls, grid: Grid2D) -> "TwoSidedField2D":
        nx, nz = grid.shape
        i0 = grid.interface_index
        return cls(grid, np.zeros((i0 + 1, nz)), np.zeros((nx - i0, nz)))

    # Views -------------------------------------------------------------------
    @property
    def values(self) -> FloatArray:
        """Nodal values; the interface row averages the two limits (norms only)."""

        middle = 0.5 * (self.left[-1] + self.right[0])
        return np.concatenate([self.left[:-1], middle[None, :], self.right[1:]], axis=0)

    @property
    def left_trace(self) -> FloatArray:
        return self.left[-1]

    @property
    def right_trace(self) -> FloatArray:
        return self.right[0]

    @property
    def jump(self) -> FloatArray:
        return self.right[0] - self.left[-1]

    @property
    def left_xderiv_trace(self) -> FloatArray:
        if self.slopes is not None:
            return self.slopes[0]
        return _edge_slope(self.grid.x_left, self.left, at_end=True)

    @property
    def right_xderiv_trace(self) -> FloatArray:
        if self.slopes is not None:
            return self.slopes[1]
        return _edge_slope(self.grid.x_right, self.right, at_end=False)

    @property
    def xderiv_jump(self) -> FloatArray:
        return self.right_xderiv_trace - self.left_xderiv_trace

    def power_integral(self, p: float) -> float:
        return float(np.sum(self.grid.quadrature_weights() * np.abs(self.values) ** p))

    def sup_norm(self) -> float:
        return float(max(np.max(np.abs(self.left)), np.max(np.abs(self.right))))

    # Arithmetic --------------------------------------------------------------
    def _check(self, other: "TwoSidedField2D") -> None:
        if other.grid is not self.grid:
            raise GridError("fields live on different grids")

    def _slope_pair(self) -> Tuple[FloatArray, FloatArray]:
        return (self.left_xderiv_trace, self.right_xderiv_trace)

    def _combine(self, other: "TwoSidedField2D", sign: float) -> "TwoSidedField2D":
        self._check(other)
        slopes = None
        if self.slopes is not None or other.slopes is not None:
            mine, theirs = self._slope_pair(), other._slope_pair()
            slopes = (mine[0] + sign * theirs[0], mine[1] + sign * theirs[1])
        return TwoSidedField2D(self.grid, self.left + sign * other.left, self.right + sign * other.right, slopes)

    def __add__(self, other: "TwoSidedField2D") -> "TwoSidedField2D":
        return self._combine(other, 1.0)

    def __sub__(self, other: "TwoSidedField2D") -> "TwoSidedField2D":
        return self._combine(other, -1.0)

    def __neg__(self) -> "TwoSidedField2D":
        return self * -1.0

    def __mul__(self, other: Union[float, FloatArray]) -> "TwoSidedField2D":
        """Scale by a scalar, a per-z coefficient ``(nz,)`` or a full ``(nx, nz)`` coefficient."""

        coefficient = np.asarray(other, dtype=float)
        i0 = self.grid.interface_index
        if coefficient.ndim == 0:
            slopes = None if self.slopes is None else (self.slopes[0] * other, self.slopes[1] * other)
            return TwoSidedField2D(self.grid, self.left * other, self.right * other, slopes)
        if coefficient.ndim == 1:
            slopes = None if self.slopes is None else (self.slopes[0] * coefficient, self.slopes[1] * coefficient)
            return TwoSidedField2D(self.grid, self.left * coefficient, self.right * coefficient, slopes)
        full = np.broadcast_to(coefficient, self.grid.shape)
        return TwoSidedField2D(self.grid, self.left * full[: i0 + 1], self.right * full[i0:])

    __rmul__ = __mul__

    def with_slopes(self, left: FloatArray, right: FloatArray) -> "TwoSidedField2D":
        return TwoSidedField2D(self.grid, self.left, self.right, (left, right))


F = TypeVar("F")


@dataclass(frozen=True, eq=False)
class TimeSeries(Generic[F]):
    """Snapshots of a field at increasing times."""

    times: FloatArray
    snapshots: Tuple[F, ...]

    def __post_init__(self) -> None:
        times = np.array(self.times, dtype=float)
        if times.ndim != 1 or times.size == 0:
            raise DomainError("a time series needs at least one time")
        if np.any(np.diff(times) <= 0):
            raise DomainError("store times must be strictly increasing")
        snapshots = tuple(self.snapshots)
        if len(snapshots) != times.size:
            raise DomainError(f"{times.size} times but {len(snapshots)} snapshots")
        times.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "snapshots", snapshots)

    def __len__(self) -> int:
        return len(self.snapshots)

    def __iter__(self) -> Iterator[Tuple[float, F]]:
        return iter(zip(self.times.tolist(), self.snapshots))

    def __getitem__(self, index: int) -> F:
        return self.snapshots[index]

    @property
    def final(self) -> F:
        return self.snapshots[-1]

    def index_of(self, t: float, *, tol: float = 1e-12) -> Optional[int]:
        position = bisect.bisect_left(self.times.tolist(), t - tol)
        if position < self.times.size and abs(self.times[position] - t) <= tol * max(1.0, abs(t)):
            return position
        return None

    def at(self, t: float) -> F:
        """Stored snapshot at ``t``, or linear interpolation between neighbours."""

        index = self.index_of(t)
        if index is not None:
            return self.snapshots[index]
        if t < self.times[0] or t > self.times[-1]:
            raise DomainError(f"t={t} lies outside the stored range [{self.times[0]}, {self.times[-1]}]")
        upper = int(np.searchsorted(self.times, t))
        t0, t1 = self.times[upper - 1], self.times[upper]
        weight = (t - t0) / (t1 - t0)
        before, after = self.snapshots[upper - 1], self.snapshots[upper]
        return before * (1.0 - weight) + after * weight  # type: ignore[operator]

    def map(self, function: Callable[[F], object]) -> "TimeSeries":
        return TimeSeries(self.times, tuple(function(s) for s in self.snapshots))
