"""Epsilon sweeps: run every case, fit the rates, persist the report."""

from __future__ import annotations

import asyncio
import csv
import io
import json
import logging
import time
from pathlib import Path
from typing import Any, Coroutine, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from . import __version__
from .calculus import lp_norm
from .config import StudyConfig, StudyMode
from .errors import DomainError
from .flow import assemble_ansatz, euler_solution, layer_grid, solve_depleted_ns
from .grids import Field1D, TwoSidedField2D
from .initial_data import InitialData, default_initial_data
from .models import CSV_COLUMNS, METRICS, CaseResult, ConvergenceReport
from .orchestration import CaseScheduler, CaseSpec, InProcessCaseScheduler
from .profiles import ProfileSet, build_profiles
from .rates import RateFit, fit_loglog_rate
from .residuals import residual_report
from .storage import LocalDirectoryStorage, StorageAdapter, StorageAdapterRegistry
from .types import ProgressLogger

__all__ = [
    "run_case",
    "summarize_cases",
    "run_convergence_study",
    "run_convergence_study_async",
    "render_report",
    "export_report",
    "import_report",
    "dump_profiles",
    "read_snapshot",
    "resolve_storage",
    "expected_slopes",
]

logger = logging.getLogger(__name__)

StorageTarget = Union[StorageAdapter, str, Path]


def expected_slopes(p: float) -> Dict[str, float]:
    """Rates the layer analysis predicts; ``err_v_Lp`` is a derived expectation."""

    return {
        "eu_norm": 1.0,
        "residual_integral": 1.0 - p / 2.0,
        "singular_norm": 1.0 / p - 0.5,
        "err_v_Lp": 1.0 / (2.0 * p),
        "err_u_vs_ansatz_L2": 1.0,
    }


def run_case(profiles: ProfileSet, data: InitialData, config: StudyConfig, epsilon: float) -> CaseResult:
    """One epsilon: viscous solve from the assembled data, errors, residual norms."""

    start = time.perf_counter()
    grid = layer_grid(profiles.grids, epsilon)
    p = config.p
    if config.mode is StudyMode.SINGULAR:
        report = residual_report(profiles, data, epsilon, p, grid=grid, singular_only=True)
        return CaseResult(
            epsilon=float(epsilon),
            singular_norm=report.singular_sup,
            eu_norm=report.eu_sup,
            profile_fingerprint=profiles.fingerprint,
            runtime=time.perf_counter() - start,
        )

    initial = assemble_ansatz(profiles, data, epsilon, 0.0, grid=grid)
    trajectory = solve_depleted_ns(
        initial,
        epsilon,
        data.geometry(),
        config.T,
        config.flow_dt,
        store_times=profiles.store_times,
    )
    u0: Field1D = initial.u0
    euler = euler_solution(data, 0.0, grid)
    errors: Dict[str, float] = {name: 0.0 for name in ("u", "u_app", "v", "v_app")}
    for index, t in enumerate(profiles.store_times):
        ansatz = initial if index == 0 else assemble_ansatz(profiles, data, epsilon, float(t), grid=grid)
        u: Field1D = trajectory.u[index]
        v: TwoSidedField2D = trajectory.v[index]
        errors["u"] = max(errors["u"], lp_norm(u - u0, 2.0))
        errors["u_app"] = max(errors["u_app"], lp_norm(u - ansatz.u_app, 2.0))
        errors["v"] = max(errors["v"], lp_norm(v - euler, p))
        errors["v_app"] = max(errors["v_app"], lp_norm(v - ansatz.v_app, p))
    residuals = residual_report(profiles, data, epsilon, p, grid=grid)
    return CaseResult(
        epsilon=float(epsilon),
        err_u_L2=errors["u"],
        err_u_vs_ansatz_L2=errors["u_app"],
        err_v_Lp=errors["v"],
        err_v_vs_ansatz_Lp=errors["v_app"],
        residual_integral=residuals.ev_integral,
        singular_norm=residuals.singular_sup,
        eu_norm=residuals.eu_sup,
        c_in=residuals.c_in,
        profile_fingerprint=profiles.fingerprint,
        runtime=time.perf_counter() - start,
    )


def summarize_cases(
    cases: Sequence[CaseResult],
    config: StudyConfig,
    fingerprint: Optional[str] = None,
) -> ConvergenceReport:
    """Sort by decreasing epsilon and fit every metric with at least three values."""

    ordered = tuple(sorted(cases, key=lambda case: case.epsilon, reverse=True))
    draft = ConvergenceReport(cases=ordered)
    slopes: Dict[str, RateFit] = {}
    flagged: Dict[str, RateFit] = {}
    notes: List[str] = []
    expected = expected_slopes(config.p)
    for name in METRICS:
        pairs = draft.series(name)
        if len(pairs) < 3:
            continue
        try:
            fit = fit_loglog_rate(pairs)
        except DomainError as exc:
            notes.append(f"{name}: no rate ({exc})")
            continue
        if fit.reliable:
            slopes[name] = fit
        else:
            flagged[name] = fit
            logger.warning("rate for %s flagged: r^2 = %.4f", name, fit.r_squared)
        if name in expected:
            label = "derived expectation" if name == "err_v_Lp" else "expected"
            notes.append(f"{name}: slope {fit.slope:.4f}, {label} {expected[name]:.4f}")
    for case in ordered:
        if not case.succeeded:
            notes.append(f"eps={case.epsilon:.6g} failed: {(case.error or {}).get('message', 'unknown error')}")
    return ConvergenceReport(
        cases=ordered,
        slopes=slopes,
        flagged=flagged,
        config=config.to_dict(),
        version=__version__,
        fingerprint=fingerprint,
        notes=tuple(notes),
    )


async def run_convergence_study_async(
    config: Optional[StudyConfig] = None,
    *,
    data: Optional[InitialData] = None,
    profiles: Optional[ProfileSet] = None,
    scheduler: Optional[CaseScheduler] = None,
    logger: Optional[ProgressLogger] = None,
) -> ConvergenceReport:
    """Build the profiles once and run every epsilon-case through ``scheduler``."""

    config = config or StudyConfig()
    data = data or default_initial_data(config.preset)
    if profiles is None:
        profiles = await asyncio.get_running_loop().run_in_executor(
            None, lambda: build_profiles(data, config, progress=logger)
        )
    owned: Optional[InProcessCaseScheduler] = None
    if scheduler is None:
        owned = InProcessCaseScheduler(
            lambda spec: run_case(profiles, data, config, spec.epsilon),
            max_workers=config.max_workers,
        )
        scheduler = owned
    try:
        handles = [
            await scheduler.schedule(CaseSpec(epsilon=epsilon, idempotency_key=f"eps-{epsilon:.6e}"))
            for epsilon in config.epsilons
        ]
        statuses = await asyncio.gather(*(scheduler.wait(handle) for handle in handles))
    finally:
        if owned is not None:
            owned.close()
    cases: List[CaseResult] = []
    for spec_epsilon, status in zip(config.epsilons, statuses):
        if status.result is None:
            cases.append(CaseResult.failed(spec_epsilon, {"code": status.state.value, "message": "no result"}))
        else:
            cases.append(status.result)
        if logger is not None:
            logger(f"eps={spec_epsilon:.3e}: {status.state.value}")
    return summarize_cases(cases, config, profiles.fingerprint)


def _run_blocking(coro: Coroutine[Any, Any, ConvergenceReport]) -> ConvergenceReport:
    try:
        asyncio.get_running_loop()
    except RuntimeError:
        return asyncio.run(coro)
    coro.close()
    raise RuntimeError("An event loop is already running. Call run_convergence_study_async instead.")


def run_convergence_study(config: Optional[StudyConfig] = None, **kwargs: Any) -> ConvergenceReport:
    return _run_blocking(run_convergence_study_async(config, **kwargs))


def _csv_cell(value: Optional[float]) -> str:
    return "" if value is None else format(float(value), ".17g")


def render_report(report: ConvergenceReport, fmt: str = "csv") -> bytes:
    if fmt == "csv":
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for case in report.cases:
            writer.writerow([_csv_cell(getattr(case, column)) for column in CSV_COLUMNS])
        return buffer.getvalue().encode("utf-8")
    if fmt == "json":
        return (json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n").encode("utf-8")
    raise ValueError(f"unknown report format {fmt!r}; use 'csv' or 'json'")


def resolve_storage(target: StorageTarget, *, registry: Optional[StorageAdapterRegistry] = None) -> StorageAdapter:
    """An adapter, a registered adapter name, or a directory path."""

    if isinstance(target, StorageAdapter):
        return target
    if registry is not None and isinstance(target, str) and target in registry:
        return registry.get(target)
    return LocalDirectoryStorage(Path(target))


def export_report(
    report: ConvergenceReport,
    fmt: str,
    path: Union[str, Path],
    *,
    storage: Optional[StorageAdapter] = None,
) -> str:
    """Write the report; without ``storage`` ``path`` is a file path. Returns the key written."""

    payload = render_report(report, fmt)
    if storage is None:
        target = Path(path)
        storage, key = LocalDirectoryStorage(target.parent), target.name
    else:
        key = str(path)
    storage.put_object(key, payload)
    logger.info("report written to %s (%s, %d cases)", key, fmt, len(report.cases))
    return key


def import_report(path: Union[str, Path], *, storage: Optional[StorageAdapter] = None) -> ConvergenceReport:
    if storage is None:
        target = Path(path)
        storage, key = LocalDirectoryStorage(target.parent), target.name
    else:
        key = str(path)
    return ConvergenceReport.from_dict(json.loads(storage.get_object(key).as_text()))


def _snapshot_arrays(snapshot: Union[Field1D, TwoSidedField2D]) -> Tuple[np.ndarray, Dict[str, Any]]:
    if isinstance(snapshot, Field1D):
        return snapshot.values, {"axes": {"z": snapshot.axis.to_dict()}}  # type: ignore[attr-defined]
    grid = snapshot.grid
    stacked = np.concatenate([snapshot.left, snapshot.right], axis=0)
    split = snapshot.left.shape[0]
    return stacked, {
        "axes": {"x": grid.x_axis.to_dict(), "z": grid.z_axis.to_dict()},  # type: ignore[attr-defined]
        "sides": {"left": [0, split], "right": [split, stacked.shape[0]]},
    }


def dump_profiles(profiles: ProfileSet, target: StorageTarget) -> List[str]:
    """Every profile snapshot as ``<name>_t<k>.bin`` (little-endian float64) plus a JSON sidecar."""

    storage = resolve_storage(target)
    keys: List[str] = []
    for name, series in sorted(profiles.series().items()):
        for index, (t, snapshot) in enumerate(series):
            values, layout = _snapshot_arrays(snapshot)
            stem = f"{name}_t{index}"
            data = np.ascontiguousarray(values, dtype="<f8")
            sidecar = {
                "name": name,
                "index": index,
                "time": t,
                "shape": list(data.shape),
                "dtype": "<f8",
                "order": "C",
                "fingerprint": profiles.fingerprint,
                **layout,
            }
            storage.put_object(f"{stem}.bin", data.tobytes())
            storage.put_object(f"{stem}.json", (json.dumps(sidecar, sort_keys=True, indent=2) + "\n").encode("utf-8"))
            keys.append(f"{stem}.bin")
    logger.info("dumped %d profile snapshots", len(keys))
    return keys


def read_snapshot(target: StorageTarget, key: str) -> Tuple[np.ndarray, Dict[str, Any]]:
    """Load a dumped snapshot and its sidecar."""

    storage = resolve_storage(target)
    sidecar = json.loads(storage.get_object(key[: -len(".bin")] + ".json").as_text())
    values = np.frombuffer(storage.get_object(key).data, dtype="<f8").reshape(sidecar["shape"])
    return values, sidecar
