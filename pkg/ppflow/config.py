from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Union

from .errors import ConfigError

__all__ = [
    "StudyMode",
    "ProfileMethodName",
    "StudyConfig",
    "DEFAULT_EPSILONS",
    "load_config",
    "resolve_config",
]

DEFAULT_EPSILONS: Tuple[float, ...] = (1e-2, 10**-2.5, 1e-3, 10**-3.5, 1e-4)

ProfileMethodName = str
_PROFILE_METHODS = ("duhamel", "finite-difference")
_OUTPUT_FORMATS = ("csv", "json")


class StudyMode(str, Enum):
    """What a study computes.

    ``main`` runs the full sweep and needs ``1 < p < 2``; ``singular`` only
    measures the singular transport term and accepts any ``p > 1``.
    """

    MAIN = "main"
    SINGULAR = "singular"


def _require_toml() -> Any:
    try:
        import tomllib  # type: ignore[import-not-found]
    except ModuleNotFoundError:  # pragma: no cover - python < 3.11
        try:
            import tomli as tomllib  # type: ignore[no-redef]
        except ImportError as exc:
            raise ImportError("Install ppflow's tomli dependency to read config files on Python < 3.11") from exc
    return tomllib


@dataclass(frozen=True)
class StudyConfig:
    p: float = 1.5
    T: float = 1.0
    epsilons: Tuple[float, ...] = DEFAULT_EPSILONS
    h_x: float = 1.0 / 64
    h_z: float = 1.0 / 64
    h_X: float = 1.0 / 16
    h_Z: float = 1.0 / 16
    fast_length: float = 20.0
    L_x: float = 8.0
    L_z: float = 8.0
    n_store: int = 11
    store_times: Optional[Tuple[float, ...]] = None
    profile_dt: Optional[float] = None
    box_dt: Optional[float] = None
    flow_dt: Optional[float] = None
    profile_method: ProfileMethodName = "duhamel"
    n_sigma: int = 129
    preset: str = "gaussian-jump"
    mode: StudyMode = StudyMode.MAIN
    max_workers: int = 2
    output_dir: str = "ppflow-out"
    output_format: str = "csv"

    def __post_init__(self) -> None:
        try:
            mode = StudyMode(self.mode)
        except ValueError as exc:
            raise ConfigError(f"unknown mode {self.mode!r}") from exc
        object.__setattr__(self, "mode", mode)
        object.__setattr__(self, "epsilons", tuple(sorted((float(e) for e in self.epsilons), reverse=True)))
        if self.store_times is not None:
            object.__setattr__(self, "store_times", tuple(float(t) for t in self.store_times))
        self._validate()

    def _validate(self) -> None:
        if not self.p > 1:
            raise ConfigError(f"p must exceed 1, got {self.p}")
        if self.mode is StudyMode.MAIN and not self.p < 2:
            raise ConfigError(f"the main study needs 1 < p < 2, got p={self.p}; use mode 'singular' for p >= 2")
        if not self.T > 0:
            raise ConfigError(f"T must be positive, got {self.T}")
        if not self.epsilons:
            raise ConfigError("epsilons must not be empty")
        if any(not e > 0 for e in self.epsilons):
            raise ConfigError("epsilons must be positive")
        if len(set(self.epsilons)) != len(self.epsilons):
            raise ConfigError("epsilons must be distinct")
        for name in ("h_x", "h_z", "h_X", "h_Z", "fast_length", "L_x", "L_z"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("profile_dt", "box_dt", "flow_dt"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ConfigError(f"{name} must be positive when set, got {value}")
        if self.n_store < 2:
            raise ConfigError("n_store must be at least 2")
        if self.n_sigma < 3 or self.n_sigma % 2 == 0:
            raise ConfigError("n_sigma must be an odd integer >= 3")
        if self.profile_method not in _PROFILE_METHODS:
            raise ConfigError(f"profile_method must be one of {_PROFILE_METHODS}, got {self.profile_method!r}")
        if self.max_workers < 1:
            raise ConfigError("max_workers must be at least 1")
        if self.output_format not in _OUTPUT_FORMATS:
            raise ConfigError(f"output_format must be one of {_OUTPUT_FORMATS}, got {self.output_format!r}")

    @classmethod
    def keys(cls) -> Tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    @classmethod
    def from_mapping(cls, payload: Mapping[str, Any]) -> "StudyConfig":
        unknown = sorted(set(payload) - set(cls.keys()))
        if unknown:
            raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
        values: Dict[str, Any] = {}
        for key, value in payload.items():
            if value is None:
                continue
            values[key] = _coerce(key, value)
        try:
            return cls(**values)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> Dict[str, Any]:
        payload: Dict[str, Any] = {}
        for key in self.keys():
            value = getattr(self, key)
            if isinstance(value, tuple):
                value = list(value)
            elif isinstance(value, Enum):
                value = value.value
            payload[key] = value
        return payload

    def replace(self, **changes: Any) -> "StudyConfig":
        return dataclasses.replace(self, **changes)


_FLOAT_KEYS = {"p", "T", "h_x", "h_z", "h_X", "h_Z", "fast_length", "L_x", "L_z", "profile_dt", "box_dt", "flow_dt"}
_INT_KEYS = {"n_store", "n_sigma", "max_workers"}
_LIST_KEYS = {"epsilons", "store_times"}


def _coerce(key: str, value: Any) -> Any:
    try:
        if key in _FLOAT_KEYS:
            return float(value)
        if key in _INT_KEYS:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(f"{value} is not an integer")
            return int(value)
        if key in _LIST_KEYS:
            if isinstance(value, str):
                value = [part for part in value.replace(",", " ").split() if part]
            return tuple(float(item) for item in value)
        if key == "mode":
            return StudyMode(value)
        return str(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid value for {key}: {value!r} ({exc})") from exc


def load_config(path: Union[str, Path]) -> StudyConfig:
    """Read a flat TOML file of study keys."""

    tomllib = _require_toml()
    source = Path(path)
    try:
        with source.open("rb") as handle:
            payload = tomllib.load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {source}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config file {source}: {exc}") from exc
    nested = [key for key, value in payload.items() if isinstance(value, dict)]
    if nested:
        raise ConfigError(f"config files are flat; found tables {', '.join(sorted(nested))}")
    return StudyConfig.from_mapping(payload)


def resolve_config(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> StudyConfig:
    """File values (if any) overlaid by explicit ``overrides``; ``None`` overrides are ignored."""

    base = load_config(path).to_dict() if path is not None else {}
    for key, value in (overrides or {}).items():
        if value is not None:
            base[key] = value
    return StudyConfig.from_mapping(base)
