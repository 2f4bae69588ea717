from __future__ import annotations

from typing import Any, Dict, Optional

__all__ = [
    "PPFlowError",
    "DomainError",
    "GridError",
    "StabilityError",
    "CFLViolation",
    "InitialDataError",
    "ConfigError",
]


class PPFlowError(Exception):
    """Raised when a numerical operation cannot honour its contract."""

    code = "ppflow"

    def __init__(self, message: str, *, payload: Optional[Dict[str, Any]] = None) -> None:
        super().__init__(message)
        self.message = message
        self.payload: Dict[str, Any] = dict(payload or {})

    def to_dict(self) -> Dict[str, Any]:
        return {"code": self.code, "message": self.message, "payload": self.payload}


class DomainError(PPFlowError, ValueError):
    """An argument lies outside the domain of the operation (t <= 0, p <= 1, ...)."""

    code = "domain"


class GridError(PPFlowError, ValueError):
    """A grid is degenerate or incompatible with the field placed on it."""

    code = "grid"


class StabilityError(PPFlowError, RuntimeError):
    """An explicit part of a time step would exceed its stability bound."""

    code = "stability"

    def __init__(
        self,
        message: str,
        *,
        suggested_dt: float,
        payload: Optional[Dict[str, Any]] = None,
    ) -> None:
        merged = dict(payload or {})
        merged.setdefault("suggested_dt", suggested_dt)
        super().__init__(message, payload=merged)
        self.suggested_dt = suggested_dt


class CFLViolation(StabilityError):
    code = "cfl"


class InitialDataError(PPFlowError, ValueError):
    """Initial data violate one of the hypotheses the layer construction needs."""

    code = "initial-data"

    def __init__(self, message: str, *, condition: str, payload: Optional[Dict[str, Any]] = None) -> None:
        merged = dict(payload or {})
        merged.setdefault("condition", condition)
        super().__init__(message, payload=merged)
        self.condition = condition


class ConfigError(PPFlowError, ValueError):
    code = "config"
