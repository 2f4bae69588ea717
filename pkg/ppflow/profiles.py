from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from .box_layer import (
    BoxLayerSolution,
    JumpSources,
    KelvinHelmholtzWallTrace,
    WallJumpHistory,
    solve_box_layer,
)
from .calculus import fd_derivative, implicit_line_solve, normalize_store_times, step_schedule, w1p_norm
from .config import StudyConfig
from .errors import DomainError, GridError
from .grids import Field1D, Grid1D, Grid2D, TimeSeries, TwoSidedField2D
from .initial_data import InitialData, InterfaceGeometry, WallTrace
from .kernels import DEFAULT_SIGMA_NODES, duhamel_exponential, unit_wall_profile
from .types import FloatArray, ProgressLogger

__all__ = [
    "ProfileMethod",
    "ProfileGrids",
    "ProfileSet",
    "ProfileNormReport",
    "unit_profile_history",
    "solve_Up",
    "solve_Vp",
    "solve_Vkh",
    "build_profiles",
    "profile_norm_report",
]

logger = logging.getLogger(__name__)


class ProfileMethod(str, Enum):
    """How the single-layer heat profiles are evaluated."""

    DUHAMEL = "duhamel"
    FINITE_DIFFERENCE = "finite-difference"


MethodLike = Union[ProfileMethod, str]


def _method(method: MethodLike) -> ProfileMethod:
    try:
        return ProfileMethod(method)
    except ValueError as exc:
        raise DomainError(f"unknown profile method {method!r}") from exc


def _unit_profile_fd(times: FloatArray, nodes: FloatArray, dt: float) -> FloatArray:
    """Backward-Euler unit wall profile at ``times`` (which must start at 0)."""

    phi = -np.exp(-nodes)
    phi[-1] = 0.0
    out = np.empty((times.size, nodes.size))
    out[0] = phi
    for interval in step_schedule(times, dt):
        for _ in range(interval.n_steps):
            phi = implicit_line_solve(phi, nodes, interval.dt, lower=-1.0, upper=0.0)
        out[interval.store_index] = phi
    return out


def unit_profile_history(
    T: float,
    grid_Z: Grid1D,
    dt: Optional[float] = None,
    *,
    store_times: Optional[Sequence[float]] = None,
    method: MethodLike = ProfileMethod.DUHAMEL,
    n_sigma: int = DEFAULT_SIGMA_NODES,
) -> TimeSeries:
    """Unit wall profile ``Phi`` (wall value ``-1``, initial data ``-e^{-Z}``) at the store times."""

    times = normalize_store_times(store_times, T)
    Z = grid_Z.nodes
    if _method(method) is ProfileMethod.DUHAMEL:
        snapshots = [Field1D(grid_Z, unit_wall_profile(t, Z, n_sigma=n_sigma)) for t in times]
    else:
        values = _unit_profile_fd(times, Z, dt or grid_Z.spacing**2)
        snapshots = [Field1D(grid_Z, row) for row in values]
    return TimeSeries(times, tuple(snapshots))


def solve_Up(
    u0_at_0: float,
    T: float,
    grid_Z: Grid1D,
    dt: Optional[float] = None,
    *,
    store_times: Optional[Sequence[float]] = None,
    method: MethodLike = ProfileMethod.DUHAMEL,
    n_sigma: int = DEFAULT_SIGMA_NODES,
    unit: Optional[TimeSeries] = None,
) -> TimeSeries:
    """Wall layer of the shear flow: ``d_t U = d_Z^2 U``, ``U(t, 0) = -u0(0)``, ``U(0) = -u0(0) e^{-Z}``."""

    if unit is None:
        unit = unit_profile_history(T, grid_Z, dt, store_times=store_times, method=method, n_sigma=n_sigma)
    return unit.map(lambda phi: phi * float(u0_at_0))


def _columns(amplitudes: FloatArray, profile: FloatArray) -> FloatArray:
    unique, inverse = np.unique(amplitudes, return_inverse=True)
    block = unique[:, None] * profile[None, :]
    return block[inverse.reshape(-1)]


def solve_Vp(
    trace_v0_at_z0: WallTrace,
    T: float,
    grid_x: Grid1D,
    grid_Z: Grid1D,
    dt: Optional[float] = None,
    *,
    store_times: Optional[Sequence[float]] = None,
    method: MethodLike = ProfileMethod.DUHAMEL,
    n_sigma: int = DEFAULT_SIGMA_NODES,
    unit: Optional[TimeSeries] = None,
) -> TimeSeries:
    """Wall layer of the cross flow, one heat problem per ``x`` column with wall value ``-v0(x, 0)``.

    Columns whose wall traces coincide share one solution; both sides of
    ``x = 0`` get their own column.
    """

    if unit is None:
        unit = unit_profile_history(T, grid_Z, dt, store_times=store_times, method=method, n_sigma=n_sigma)
    grid = Grid2D(grid_x, grid_Z)
    left_amplitudes = trace_v0_at_z0.left_values(grid.x_left)
    right_amplitudes = trace_v0_at_z0.right_values(grid.x_right)
    split = left_amplitudes.size
    amplitudes = np.concatenate([left_amplitudes, right_amplitudes])
    snapshots: List[TwoSidedField2D] = []
    for _, phi in unit:
        block = _columns(amplitudes, phi.values)
        snapshots.append(TwoSidedField2D(grid, block[:split], block[split:]))
    return TimeSeries(unit.times, tuple(snapshots))


def _require_symmetric(grid_X: Grid1D) -> None:
    nodes = grid_X.nodes
    if not np.allclose(nodes, -nodes[::-1], rtol=0.0, atol=1e-9 * max(1.0, abs(nodes[0]))):
        raise GridError("the transition layer needs an X grid symmetric about 0")


def solve_Vkh(
    jump_v0: Field1D,
    geometry: InterfaceGeometry,
    T: float,
    grid_X: Grid1D,
    grid_z: Grid1D,
    dt: Optional[float] = None,
    *,
    store_times: Optional[Sequence[float]] = None,
    method: MethodLike = ProfileMethod.DUHAMEL,
    n_sigma: int = DEFAULT_SIGMA_NODES,
    chunk_size: int = 32,
) -> TimeSeries:
    """Transition layer across ``X = 0`` at each height ``z``.

    At height ``z`` the layer is the odd extension of
    ``-(jump(z) / 2) (e^{-X} + phi(t~, X))`` evaluated at the stretched time
    ``t~ = t + t^3 u0'(z)^2 / 3``, so its traces jump by ``-jump(z)`` and its
    ``X``-derivative is continuous.
    """

    _require_symmetric(grid_X)
    times = normalize_store_times(store_times, T)
    grid = Grid2D(grid_X, grid_z)
    i0 = grid.interface_index
    X_right = grid.x_right
    z = grid_z.nodes
    if jump_v0.axis.n_points != z.size or not np.allclose(jump_v0.axis.nodes, z):
        raise GridError("the jump must live on the z grid of the transition layer")
    half = -0.5 * jump_v0.values
    stretched = np.stack([geometry.rescaled_time(float(t), z) for t in times])
    if _method(method) is ProfileMethod.FINITE_DIFFERENCE:
        phi_of = _stretched_fd_profile(stretched, X_right, dt or grid_X.spacing**2)
    else:
        phi_of = None
    snapshots: List[TwoSidedField2D] = []
    for k in range(times.size):
        right = np.empty((X_right.size, z.size))
        if phi_of is not None:
            right[:] = phi_of[k].T
        else:
            for start in range(0, z.size, chunk_size):
                stop = min(start + chunk_size, z.size)
                right[:, start:stop] = duhamel_exponential(
                    stretched[k, start:stop][None, :], X_right[:, None], n_sigma=n_sigma
                )
        right = half[None, :] * (np.exp(-X_right)[:, None] + right)
        left = -right[::-1]
        slope = np.gradient(right[:3], X_right[:3], axis=0, edge_order=2)[0]
        snapshots.append(TwoSidedField2D(grid, left, right, (slope, slope)))
        logger.debug("transition layer stored t=%.4f", times[k])
    return TimeSeries(times, tuple(snapshots))


def _stretched_fd_profile(stretched: FloatArray, X: FloatArray, dt: float) -> FloatArray:
    """``phi(t~, X)`` by backward Euler, for every stretched time in the ``(times, z)`` table."""

    targets, inverse = np.unique(np.round(stretched, 14), return_inverse=True)
    times = normalize_store_times(targets, float(targets[-1])) if targets[-1] > 0 else np.zeros(1)
    if times.size == 1:
        table = np.zeros((1, X.size))
    else:
        # the unit profile is -(e^{-X} + phi); phi carries zero wall and initial data
        table = -_unit_profile_fd(times, X, dt) - np.exp(-X)[None, :]
        table[:, -1] = 0.0
    positions = np.clip(np.searchsorted(times, targets - 1e-12), 0, times.size - 1)
    phi = table[positions][inverse.reshape(stretched.shape)]
    return phi


@dataclass(frozen=True)
class ProfileGrids:
    """Fast grids of the layer profiles and the physical grids of the study."""

    fast_X: Grid1D
    fast_Z: Grid1D
    phys_x: Grid1D
    phys_z: Grid1D

    @classmethod
    def from_config(cls, config: StudyConfig) -> "ProfileGrids":
        return cls(
            fast_X=Grid1D.symmetric(config.fast_length, config.h_X),
            fast_Z=Grid1D.from_length(config.fast_length, config.h_Z),
            phys_x=Grid1D.symmetric(config.L_x, config.h_x),
            phys_z=Grid1D.from_length(config.L_z, config.h_z),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {name: getattr(self, name).to_dict() for name in ("fast_X", "fast_Z", "phys_x", "phys_z")}


@dataclass(frozen=True, eq=False)
class ProfileSet:
    """All epsilon-independent layer profiles at the store times."""

    store_times: FloatArray
    grids: ProfileGrids
    data_name: str
    wall_unit: TimeSeries
    U_P: TimeSeries
    V_P: TimeSeries
    V_KH: TimeSeries
    box: BoxLayerSolution
    method: ProfileMethod
    n_sigma: int
    fingerprint: str

    @property
    def V_b(self) -> TimeSeries:
        return self.box.V_b

    def index_of(self, t: float) -> int:
        index = self.U_P.index_of(t)
        if index is None:
            raise DomainError(f"t={t} is not a store time of the profiles")
        return index

    def vp_jump(self, t: float) -> Field1D:
        field = self.V_P.at(t)
        return Field1D(self.grids.fast_Z, field.jump)

    def series(self) -> Dict[str, TimeSeries]:
        return {"wall_unit": self.wall_unit, "U_P": self.U_P, "V_P": self.V_P, "V_KH": self.V_KH, "V_b": self.V_b}


def _arrays_of(snapshot: Union[Field1D, TwoSidedField2D]) -> List[FloatArray]:
    if isinstance(snapshot, Field1D):
        return [snapshot.values]
    return [snapshot.left, snapshot.right]


def fingerprint_series(series: Dict[str, TimeSeries]) -> str:
    digest = hashlib.sha256()
    for name in sorted(series):
        digest.update(name.encode("utf-8"))
        digest.update(np.ascontiguousarray(series[name].times, dtype="<f8").tobytes())
        for snapshot in series[name].snapshots:
            for array in _arrays_of(snapshot):
                digest.update(np.ascontiguousarray(array, dtype="<f8").tobytes())
    return digest.hexdigest()


def build_profiles(
    data: InitialData,
    config: Optional[StudyConfig] = None,
    *,
    progress: Optional[ProgressLogger] = None,
) -> ProfileSet:
    """Build ``U_P``, ``V_P``, ``V_KH`` and the corner layer once for every epsilon."""

    config = config or StudyConfig()
    method = _method(config.profile_method)
    grids = ProfileGrids.from_config(config)
    if config.store_times is not None:
        requested: Sequence[float] = config.store_times
    else:
        requested = np.linspace(0.0, config.T, config.n_store)
    times = normalize_store_times(requested, config.T)
    dt = config.profile_dt or config.h_Z**2

    def report(message: str) -> None:
        logger.info(message)
        if progress is not None:
            progress(message)

    report(f"building {method.value} profiles for '{data.name}' at {times.size} store times")
    geometry = data.geometry()
    wall = data.wall_trace()
    corner_jump = wall.jump
    u0_at_0 = float(np.asarray(data.u0(np.zeros(1))).ravel()[0])

    unit = unit_profile_history(config.T, grids.fast_Z, dt, store_times=times, method=method, n_sigma=config.n_sigma)
    U_P = solve_Up(u0_at_0, config.T, grids.fast_Z, unit=unit)
    V_P = solve_Vp(wall, config.T, grids.phys_x, grids.fast_Z, unit=unit)
    report("wall layers ready")
    V_KH = solve_Vkh(
        data.jump_field(grids.phys_z),
        geometry,
        config.T,
        grids.fast_X,
        grids.phys_z,
        config.profile_dt or config.h_X**2,
        store_times=times,
        method=method,
        n_sigma=config.n_sigma,
    )
    report("transition layer ready")

    vp_jump = V_P.map(lambda field: Field1D(grids.fast_Z, field.jump))
    if method is ProfileMethod.DUHAMEL:
        history = WallJumpHistory(corner_jump, grids.fast_Z, n_sigma=config.n_sigma)
        sources = JumpSources.from_history(history, geometry, times, grids.fast_Z)
        wall_trace: Any = KelvinHelmholtzWallTrace(corner_jump, geometry.wall_shear, grids.fast_X, n_sigma=config.n_sigma)
    else:
        sources = JumpSources.from_snapshots(vp_jump, geometry)
        wall_trace = V_KH.map(lambda field: Field1D(grids.fast_X, field.values[:, 0]))
    box = solve_box_layer(
        sources,
        wall_trace,
        vp_jump,
        corner_jump,
        geometry,
        config.T,
        grids.fast_X,
        grids.fast_Z,
        config.box_dt,
        store_times=times,
        progress=None,
    )
    report("corner layer ready")

    partial = {"wall_unit": unit, "U_P": U_P, "V_P": V_P, "V_KH": V_KH, "V_b": box.V_b}
    profiles = ProfileSet(
        store_times=times,
        grids=grids,
        data_name=data.name,
        wall_unit=unit,
        U_P=U_P,
        V_P=V_P,
        V_KH=V_KH,
        box=box,
        method=method,
        n_sigma=config.n_sigma,
        fingerprint=fingerprint_series(partial),
    )
    report(f"profiles fingerprint {profiles.fingerprint[:12]}")
    return profiles


@dataclass(frozen=True)
class ProfileNormReport:
    """Sup-in-time profile norms, the matching data norms, and their ratios."""

    p: float
    norms: Dict[str, float]
    data_norms: Dict[str, float]

    @property
    def ratios(self) -> Dict[str, float]:
        out: Dict[str, float] = {}
        for key, value in self.norms.items():
            reference = self.data_norms.get(key, 0.0)
            out[key] = value / reference if reference > 0 else 0.0
        return out

    def to_dict(self) -> Dict[str, Any]:
        return {"p": self.p, "norms": dict(self.norms), "data_norms": dict(self.data_norms), "ratios": self.ratios}


def _x_derivative(field: TwoSidedField2D, order: int) -> TwoSidedField2D:
    return field if order == 0 else fd_derivative(field, "x", order)


def _z_derivative(field: TwoSidedField2D, order: int) -> TwoSidedField2D:
    return field if order == 0 else fd_derivative(field, "z", order)


def profile_norm_report(
    profiles: ProfileSet,
    p: float,
    *,
    data: Optional[InitialData] = None,
    orders: Sequence[int] = (0, 1, 2),
) -> ProfileNormReport:
    """Sup over the store times of the norms bounded by the layer estimates.

    ``U_P`` in ``W^{1,p}_Z``; ``d_x^k V_P`` in ``L^p_x W^{1,p}_Z``; the jump
    ``[V_P]`` in ``W^{1,p}_Z``; ``d_z^k V_KH`` in ``L^p_z W^{1,p}_X``. With
    ``data`` the matching data norms are reported for ratios.
    """

    norms: Dict[str, float] = {"U_P": 0.0, "V_P_jump": 0.0}
    for k in orders:
        norms[f"V_P_dx{k}"] = 0.0
        norms[f"V_KH_dz{k}"] = 0.0
    for t in profiles.store_times:
        norms["U_P"] = max(norms["U_P"], w1p_norm(profiles.U_P.at(t), p))
        V_P = profiles.V_P.at(t)
        norms["V_P_jump"] = max(norms["V_P_jump"], w1p_norm(Field1D(profiles.grids.fast_Z, V_P.jump), p))
        V_KH = profiles.V_KH.at(t)
        for k in orders:
            norms[f"V_P_dx{k}"] = max(norms[f"V_P_dx{k}"], w1p_norm(_x_derivative(V_P, k), p, axes=("z",)))
            norms[f"V_KH_dz{k}"] = max(norms[f"V_KH_dz{k}"], w1p_norm(_z_derivative(V_KH, k), p, axes=("x",)))

    data_norms: Dict[str, float] = {}
    if data is not None:
        data_norms["U_P"] = abs(float(np.asarray(data.u0(np.zeros(1))).ravel()[0]))
        x_grid = Grid2D(profiles.grids.phys_x, Grid1D(3, 1.0))
        trace = data.wall_trace()
        left = np.repeat(trace.left_values(x_grid.x_left)[:, None], 3, axis=1)
        right = np.repeat(trace.right_values(x_grid.x_right)[:, None], 3, axis=1)
        wall = TwoSidedField2D(x_grid, left, right)
        data_norms["V_P_jump"] = abs(trace.jump)
        for k in orders:
            derivative = _x_derivative(wall, k)
            data_norms[f"V_P_dx{k}"] = float(
                np.sum(x_grid.x_axis.quadrature_weights() * np.abs(derivative.values[:, 0]) ** p) ** (1.0 / p)
            )
            jump = Field1D(profiles.grids.phys_z, data.jump_v0(profiles.grids.phys_z.nodes))
            jump_derivative = jump if k == 0 else fd_derivative(jump, 0, k)
            data_norms[f"V_KH_dz{k}"] = float(jump_derivative.power_integral(p) ** (1.0 / p))
    return ProfileNormReport(p=float(p), norms=norms, data_norms=data_norms)
