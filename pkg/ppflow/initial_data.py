from __future__ import annotations

import importlib
import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np

from .calculus import derivative_along, lp_norm, sample_pchip
from .errors import DomainError, InitialDataError
from .grids import Axis, Field1D, Grid1D, Grid2D, TwoSidedField2D
from .kernels import rescaled_time
from .types import FloatArray, PlaneFunction, ScalarFunction

__all__ = [
    "WallTrace",
    "InterfaceGeometry",
    "InitialData",
    "InitialDataFactory",
    "register_initial_data_preset",
    "get_initial_data_preset",
    "list_initial_data_presets",
    "load_initial_data",
    "default_initial_data",
    "validation_grid",
]

logger = logging.getLogger(__name__)

_DERIVATIVE_STEP = 1e-5


@dataclass(frozen=True)
class WallTrace:
    """The two one-sided wall traces ``x -> v0_(+/-)(x, 0)``."""

    minus: ScalarFunction
    plus: ScalarFunction

    @property
    def jump(self) -> float:
        zero = np.zeros(1)
        return float(self.plus(zero)[0] - self.minus(zero)[0])

    def left_values(self, x: FloatArray) -> FloatArray:
        return np.broadcast_to(self.minus(np.asarray(x, dtype=float)), np.shape(x)).astype(float)

    def right_values(self, x: FloatArray) -> FloatArray:
        return np.broadcast_to(self.plus(np.asarray(x, dtype=float)), np.shape(x)).astype(float)


@dataclass(frozen=True)
class InterfaceGeometry:
    """Straightening map ``psi(t, z) = t * u0(z)`` and its z-derivatives."""

    u0: ScalarFunction
    u0_z: ScalarFunction
    u0_zz: ScalarFunction

    def psi(self, t: float, z: FloatArray) -> FloatArray:
        return t * np.asarray(self.u0(np.asarray(z, dtype=float)), dtype=float)

    def psi_z(self, t: float, z: FloatArray) -> FloatArray:
        return t * np.asarray(self.u0_z(np.asarray(z, dtype=float)), dtype=float)

    def psi_zz(self, t: float, z: FloatArray) -> FloatArray:
        return t * np.asarray(self.u0_zz(np.asarray(z, dtype=float)), dtype=float)

    @property
    def wall_shear(self) -> float:
        return float(np.asarray(self.u0_z(np.zeros(1)), dtype=float).ravel()[0])

    def psi_z_wall(self, t: float) -> float:
        return t * self.wall_shear

    def rescaled_time(self, t: float, z: FloatArray) -> FloatArray:
        """``t + t^3 u0'(z)^2 / 3``, the time felt by the transition layer at height ``z``."""

        return rescaled_time(t, self.u0_z(np.asarray(z, dtype=float)))

    @classmethod
    def from_field(cls, u0: Field1D) -> "InterfaceGeometry":
        """Geometry from sampled data; derivatives by finite differences, evaluation by PCHIP."""

        nodes = u0.axis.nodes
        first = derivative_along(u0.values, nodes, order=1)
        second = derivative_along(u0.values, nodes, order=2)

        def sampler(values: FloatArray) -> ScalarFunction:
            return lambda z: sample_pchip(values, nodes, np.clip(z, nodes[0], nodes[-1]))

        return cls(u0=sampler(u0.values), u0_z=sampler(first), u0_zz=sampler(second))


@dataclass(frozen=True)
class InitialData:
    """Shear flow ``u0(z)`` plus a cross flow ``v0`` that jumps across ``x = 0``.

    ``v0_minus`` and ``v0_plus`` are the formulas used on ``x <= 0`` and
    ``x >= 0``. Each must be smooth in a neighbourhood of ``x = 0`` so its
    one-sided normal derivative can be taken by a symmetric difference.
    """

    name: str
    u0: ScalarFunction
    u0_z: ScalarFunction
    u0_zz: ScalarFunction
    v0_minus: PlaneFunction
    v0_plus: PlaneFunction

    def _side(self, function: PlaneFunction, x: FloatArray, z: FloatArray) -> FloatArray:
        x, z = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(z, dtype=float))
        return np.broadcast_to(function(x, z), x.shape).astype(float)

    def jump_v0(self, z: FloatArray) -> FloatArray:
        z = np.asarray(z, dtype=float)
        return self._side(self.v0_plus, np.zeros_like(z), z) - self._side(self.v0_minus, np.zeros_like(z), z)

    def normal_derivative_traces(self, z: FloatArray) -> Tuple[FloatArray, FloatArray]:
        """One-sided ``d/dx v0`` at ``x = 0`` from each side's formula."""

        z = np.asarray(z, dtype=float)
        step = np.full_like(z, _DERIVATIVE_STEP)

        def slope(function: PlaneFunction) -> FloatArray:
            return (self._side(function, step, z) - self._side(function, -step, z)) / (2.0 * _DERIVATIVE_STEP)

        return slope(self.v0_minus), slope(self.v0_plus)

    def normal_derivative_jump(self, z: FloatArray) -> FloatArray:
        left, right = self.normal_derivative_traces(z)
        return right - left

    def wall_trace(self) -> WallTrace:
        minus, plus = self.v0_minus, self.v0_plus
        return WallTrace(
            minus=lambda x: self._side(minus, x, np.zeros_like(np.asarray(x, dtype=float))),
            plus=lambda x: self._side(plus, x, np.zeros_like(np.asarray(x, dtype=float))),
        )

    def wall_derivative_traces(self) -> Tuple[float, float]:
        left, right = self.normal_derivative_traces(np.zeros(1))
        return float(left[0]), float(right[0])

    def u0_field(self, axis: Axis) -> Field1D:
        return Field1D(axis, np.broadcast_to(self.u0(axis.nodes), (axis.n_points,)))

    def jump_field(self, axis: Axis) -> Field1D:
        return Field1D(axis, self.jump_v0(axis.nodes))

    def v0_field(self, grid: Grid2D) -> TwoSidedField2D:
        field = TwoSidedField2D.from_functions(grid, self.v0_minus, self.v0_plus)
        return field.with_slopes(*self.normal_derivative_traces(grid.z_axis.nodes))

    def geometry(self) -> InterfaceGeometry:
        return InterfaceGeometry(u0=self.u0, u0_z=self.u0_z, u0_zz=self.u0_zz)

    def validate(self, grid: Grid2D, *, p: float = 2.0, tolerance: float = 1e-6) -> "InitialData":
        """Check the hypotheses of the layer construction on ``grid``; returns ``self``."""

        z = grid.z_axis.nodes
        jump = self.jump_v0(z)
        if not np.all(np.isfinite(jump)) or float(np.max(np.abs(jump))) <= tolerance:
            raise InitialDataError(
                f"initial data '{self.name}' has no jump across x = 0",
                condition="nonzero-interface-jump",
                payload={"max_jump": float(np.max(np.abs(jump)))},
            )
        derivative_jump = self.normal_derivative_jump(z)
        scale = max(1.0, float(np.max(np.abs(jump))))
        worst = float(np.max(np.abs(derivative_jump)))
        if not np.isfinite(worst) or worst > tolerance * scale:
            raise InitialDataError(
                f"initial data '{self.name}' has a jump in the normal derivative across x = 0 ({worst:.3e})",
                condition="continuous-normal-derivative",
                payload={"max_derivative_jump": worst},
            )
        try:
            for function in (self.u0, self.u0_z, self.u0_zz):
                lp_norm(Field1D(grid.z_axis, np.broadcast_to(function(z), z.shape)), p)
            v0 = self.v0_field(grid)
            lp_norm(v0, p)
            for field in (derivative_along(v0.left, grid.x_left, order=2), derivative_along(v0.right, grid.x_right, order=2)):
                if not np.all(np.isfinite(field)):
                    raise DomainError("second x-derivative is not finite")
            for side in (v0.left, v0.right):
                if not np.all(np.isfinite(derivative_along(side, z, axis=1, order=2))):
                    raise DomainError("second z-derivative is not finite")
        except DomainError as exc:
            raise InitialDataError(
                f"initial data '{self.name}' is not in the discrete Sobolev class: {exc}",
                condition="finite-sobolev-norm",
            ) from exc
        return self


InitialDataFactory = Callable[[], InitialData]

_REGISTRY: Dict[str, InitialDataFactory] = {}


def register_initial_data_preset(name: str, factory: InitialDataFactory, *, override: bool = False) -> None:
    normalized = name.lower()
    if not override and normalized in _REGISTRY:
        raise ValueError(f"Initial data preset '{name}' is already registered")
    _REGISTRY[normalized] = factory


def get_initial_data_preset(name: str) -> InitialDataFactory:
    normalized = name.lower()
    if normalized not in _REGISTRY:
        raise KeyError(f"Initial data preset '{name}' is not registered")
    return _REGISTRY[normalized]


def list_initial_data_presets() -> List[str]:
    return sorted(_REGISTRY.keys())


def load_initial_data(reference: Union[str, InitialData]) -> InitialData:
    """Resolve a preset name or a ``module:attribute`` reference to initial data."""

    if isinstance(reference, InitialData):
        return reference
    if ":" in reference:
        module_name, _, attribute = reference.partition(":")
        target = getattr(importlib.import_module(module_name), attribute)
        data = target if isinstance(target, InitialData) else target()
        if not isinstance(data, InitialData):
            raise TypeError(f"'{reference}' did not produce InitialData")
        return data
    return get_initial_data_preset(reference)()


def validation_grid() -> Grid2D:
    return Grid2D(Grid1D.symmetric(8.0, 1.0 / 64), Grid1D.from_length(8.0, 1.0 / 64))


def default_initial_data(preset: str = "gaussian-jump", *, grid: Optional[Grid2D] = None) -> InitialData:
    """Load ``preset`` and validate it; rejected data name the violated condition."""

    data = load_initial_data(preset)
    logger.debug("validating initial data %s", data.name)
    return data.validate(grid or validation_grid())


def _gaussian_jump() -> InitialData:
    return InitialData(
        name="gaussian-jump",
        u0=lambda z: np.exp(-z),
        u0_z=lambda z: -np.exp(-z),
        u0_zz=lambda z: np.exp(-z),
        v0_minus=lambda x, z: -np.exp(-(x**2)) * np.exp(-z),
        v0_plus=lambda x, z: np.exp(-(x**2)) * np.exp(-z),
    )


def _no_jump() -> InitialData:
    return InitialData(
        name="no-jump",
        u0=lambda z: np.exp(-z),
        u0_z=lambda z: -np.exp(-z),
        u0_zz=lambda z: np.exp(-z),
        v0_minus=lambda x, z: np.exp(-(x**2)) * np.exp(-z),
        v0_plus=lambda x, z: np.exp(-(x**2)) * np.exp(-z),
    )


def _kinked_jump() -> InitialData:
    return InitialData(
        name="kinked-jump",
        u0=lambda z: np.exp(-z),
        u0_z=lambda z: -np.exp(-z),
        u0_zz=lambda z: np.exp(-z),
        v0_minus=lambda x, z: -np.exp(-(x**2)) * np.exp(-z),
        v0_plus=lambda x, z: (1.0 + x) * np.exp(-(x**2)) * np.exp(-z),
    )


register_initial_data_preset("gaussian-jump", _gaussian_jump)
register_initial_data_preset("no-jump", _no_jump)
register_initial_data_preset("kinked-jump", _kinked_jump)
