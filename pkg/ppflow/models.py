from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Tuple

from .rates import RateFit

__all__ = ["CaseResult", "ConvergenceReport", "METRICS", "CSV_COLUMNS"]

METRICS: Tuple[str, ...] = (
    "err_u_L2",
    "err_u_vs_ansatz_L2",
    "err_v_Lp",
    "err_v_vs_ansatz_Lp",
    "residual_integral",
    "singular_norm",
    "eu_norm",
)

CSV_COLUMNS: Tuple[str, ...] = (
    "epsilon",
    "err_u_L2",
    "err_v_Lp",
    "err_v_vs_ansatz_Lp",
    "residual_integral",
    "singular_norm",
)


def _optional_float(value: Any) -> Optional[float]:
    return None if value is None else float(value)


@dataclass(frozen=True)
class CaseResult:
    """Measurements of one epsilon-case of a convergence study.

    Errors are sups over the store times. ``runtime`` is informational and
    never serialized, so exported reports stay byte-stable.
    """

    epsilon: float
    status: str = "succeeded"
    err_u_L2: Optional[float] = None
    err_u_vs_ansatz_L2: Optional[float] = None
    err_v_Lp: Optional[float] = None
    err_v_vs_ansatz_Lp: Optional[float] = None
    residual_integral: Optional[float] = None
    singular_norm: Optional[float] = None
    eu_norm: Optional[float] = None
    c_in: Optional[float] = None
    profile_fingerprint: Optional[str] = None
    error: Optional[Dict[str, Any]] = None
    runtime: float = field(default=0.0, compare=False)

    @property
    def succeeded(self) -> bool:
        return self.status == "succeeded"

    def metric(self, name: str) -> Optional[float]:
        if name not in METRICS:
            raise KeyError(f"Unknown metric '{name}'")
        return getattr(self, name)

    @classmethod
    def failed(cls, epsilon: float, error: Dict[str, Any], *, runtime: float = 0.0) -> "CaseResult":
        return cls(epsilon=float(epsilon), status="failed", error=dict(error), runtime=runtime)

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "CaseResult":
        if "epsilon" not in payload:
            raise ValueError("case payload is missing an 'epsilon' field")
        return cls(
            epsilon=float(payload["epsilon"]),
            status=str(payload.get("status") or "succeeded"),
            err_u_L2=_optional_float(payload.get("err_u_L2")),
            err_u_vs_ansatz_L2=_optional_float(payload.get("err_u_vs_ansatz_L2")),
            err_v_Lp=_optional_float(payload.get("err_v_Lp")),
            err_v_vs_ansatz_Lp=_optional_float(payload.get("err_v_vs_ansatz_Lp")),
            residual_integral=_optional_float(payload.get("residual_integral")),
            singular_norm=_optional_float(payload.get("singular_norm")),
            eu_norm=_optional_float(payload.get("eu_norm")),
            c_in=_optional_float(payload.get("c_in")),
            profile_fingerprint=payload.get("profile_fingerprint"),
            error=payload.get("error"),
        )

    def to_dict(self) -> Dict[str, Any]:
        payload: Dict[str, Any] = {"epsilon": self.epsilon, "status": self.status}
        for name in METRICS:
            payload[name] = getattr(self, name)
        payload["c_in"] = self.c_in
        payload["profile_fingerprint"] = self.profile_fingerprint
        payload["error"] = self.error
        return payload


@dataclass(frozen=True)
class ConvergenceReport:
    """Per-epsilon results, fitted rates and the configuration that produced them.

    ``slopes`` holds fits with ``r^2 >= 0.98``; poorer fits land in ``flagged``.
    """

    cases: Tuple[CaseResult, ...]
    slopes: Dict[str, RateFit] = field(default_factory=dict)
    flagged: Dict[str, RateFit] = field(default_factory=dict)
    config: Dict[str, Any] = field(default_factory=dict)
    version: str = ""
    fingerprint: Optional[str] = None
    notes: Tuple[str, ...] = ()

    @property
    def epsilons(self) -> List[float]:
        return [case.epsilon for case in self.cases]

    @property
    def failed(self) -> List[CaseResult]:
        return [case for case in self.cases if not case.succeeded]

    def series(self, name: str) -> List[Tuple[float, float]]:
        """``(epsilon, value)`` for every succeeded case that measured ``name``."""

        pairs: List[Tuple[float, float]] = []
        for case in self.cases:
            value = case.metric(name)
            if case.succeeded and value is not None:
                pairs.append((case.epsilon, value))
        return pairs

    def rate(self, name: str) -> Optional[RateFit]:
        return self.slopes.get(name) or self.flagged.get(name)

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "ConvergenceReport":
        cases: Iterable[Any] = payload.get("cases") or []
        return cls(
            cases=tuple(CaseResult.from_dict(item) for item in cases if isinstance(item, dict)),
            slopes={name: RateFit.from_dict(fit) for name, fit in (payload.get("slopes") or {}).items()},
            flagged={name: RateFit.from_dict(fit) for name, fit in (payload.get("flagged") or {}).items()},
            config=dict(payload.get("config") or {}),
            version=str(payload.get("version") or ""),
            fingerprint=payload.get("fingerprint"),
            notes=tuple(payload.get("notes") or ()),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "cases": [case.to_dict() for case in self.cases],
            "slopes": {name: fit.to_dict() for name, fit in self.slopes.items()},
            "flagged": {name: fit.to_dict() for name, fit in self.flagged.items()},
            "config": dict(self.config),
            "version": self.version,
            "fingerprint": self.fingerprint,
            "notes": list(self.notes),
        }
