from __future__ import annotations

import json
from pathlib import Path
from typing import Dict, List

import numpy as np
import pytest

from ppflow.config import StudyConfig
from ppflow.initial_data import InitialData
from ppflow.models import CaseResult, ConvergenceReport
from ppflow.orchestration import CaseHandle, CaseSpec, CaseState, CaseStatus
from ppflow.profiles import ProfileSet
from ppflow.rates import fit_loglog_rate
from ppflow.storage import InMemoryStorage, LocalDirectoryStorage, StorageAdapterRegistry
from ppflow.study import (
    dump_profiles,
    expected_slopes,
    export_report,
    import_report,
    read_snapshot,
    render_report,
    resolve_storage,
    run_case,
    run_convergence_study,
    run_convergence_study_async,
    summarize_cases,
)
from ppflow.verification import VerificationContext, reduced_config, run_verification


class FakeScheduler:
    """Answers every case from a table; epsilons missing from it come back without a result."""

    def __init__(self, table: Dict[float, CaseResult]) -> None:
        self.name = "fake"
        self.table = table
        self.scheduled: List[CaseSpec] = []

    async def schedule(self, spec: CaseSpec) -> CaseHandle:
        self.scheduled.append(spec)
        return CaseHandle(reference=spec.idempotency_key or "", scheduler=self.name)

    async def get_status(self, handle: CaseHandle) -> CaseStatus:
        spec = next(item for item in self.scheduled if item.idempotency_key == handle.reference)
        result = self.table.get(spec.epsilon)
        state = CaseState.SUCCEEDED if result is not None else CaseState.CANCELLED
        return CaseStatus(state=state, reference=handle.reference, scheduler=self.name, result=result)

    async def cancel(self, handle: CaseHandle) -> None:
        return None

    async def wait(self, handle: CaseHandle) -> CaseStatus:
        return await self.get_status(handle)


def synthetic_cases(p: float) -> List[CaseResult]:
    cases = []
    for index, eps in enumerate((1e-2, 1e-3, 1e-4)):
        cases.append(
            CaseResult(
                epsilon=eps,
                eu_norm=0.7 * eps,
                singular_norm=2.0 * eps ** (1.0 / p - 0.5),
                err_v_Lp=(1.0, 5.0, 0.5)[index],
            )
        )
    return cases


def test_expected_slopes() -> None:
    slopes = expected_slopes(1.5)
    assert slopes["eu_norm"] == 1.0
    assert slopes["residual_integral"] == pytest.approx(0.25)
    assert slopes["singular_norm"] == pytest.approx(1.0 / 1.5 - 0.5)
    assert slopes["err_v_Lp"] == pytest.approx(1.0 / 3.0)


def test_summarize_fits_and_flags(tiny_config: StudyConfig) -> None:
    cases = synthetic_cases(tiny_config.p)
    cases.append(CaseResult.failed(1e-5, {"code": "cfl", "message": "step too large", "payload": {}}))

    report = summarize_cases(list(reversed(cases)), tiny_config, "abc")

    assert report.epsilons == [1e-2, 1e-3, 1e-4, 1e-5]
    assert report.slopes["eu_norm"].slope == pytest.approx(1.0)
    assert report.slopes["singular_norm"].slope == pytest.approx(1.0 / 1.5 - 0.5)
    assert "err_v_Lp" in report.flagged
    assert "err_u_L2" not in report.slopes
    assert report.fingerprint == "abc"
    assert report.config == tiny_config.to_dict()
    assert any("failed: step too large" in note for note in report.notes)
    assert any(note.startswith("err_v_Lp:") and "derived expectation" in note for note in report.notes)


def test_csv_rendering() -> None:
    report = ConvergenceReport(cases=(CaseResult(epsilon=0.25, err_u_L2=0.5),))
    text = render_report(report, "csv").decode("utf-8")
    assert text == "epsilon,err_u_L2,err_v_Lp,err_v_vs_ansatz_Lp,residual_integral,singular_norm\n0.25,0.5,,,,\n"


def test_json_rendering_is_sorted_and_terminated(tiny_config: StudyConfig) -> None:
    report = summarize_cases(synthetic_cases(tiny_config.p), tiny_config)
    rendered = render_report(report, "json")
    assert rendered.endswith(b"\n")
    assert json.loads(rendered)["slopes"]["eu_norm"]["reliable"] is True
    assert render_report(report, "json") == rendered
    with pytest.raises(ValueError):
        render_report(report, "xml")


def test_export_and_import_through_files_and_adapters(tmp_path: Path, tiny_config: StudyConfig) -> None:
    report = summarize_cases(synthetic_cases(tiny_config.p), tiny_config, "fp")

    key = export_report(report, "json", tmp_path / "out" / "report.json")
    assert key == "report.json"
    assert import_report(tmp_path / "out" / "report.json") == report

    storage = InMemoryStorage()
    export_report(report, "csv", "reports/report.csv", storage=storage)
    assert storage.get_object("reports/report.csv").data == render_report(report, "csv")


def test_resolve_storage(tmp_path: Path) -> None:
    memory = InMemoryStorage()
    registry = StorageAdapterRegistry()
    registry.register("scratch", memory)

    assert resolve_storage(memory) is memory
    assert resolve_storage("scratch", registry=registry) is memory
    assert isinstance(resolve_storage(tmp_path), LocalDirectoryStorage)


def test_singular_case(profiles: ProfileSet, data: InitialData, tiny_config: StudyConfig) -> None:
    result = run_case(profiles, data, tiny_config.replace(mode="singular", p=2.0), 1e-2)

    assert result.succeeded
    assert result.singular_norm is not None and result.singular_norm > 0
    assert result.eu_norm is not None and result.eu_norm > 0
    assert result.err_v_Lp is None
    assert result.profile_fingerprint == profiles.fingerprint


def test_main_case(profiles: ProfileSet, data: InitialData, tiny_config: StudyConfig) -> None:
    result = run_case(profiles, data, tiny_config, 1e-2)

    for name in ("err_u_L2", "err_u_vs_ansatz_L2", "err_v_Lp", "err_v_vs_ansatz_Lp", "residual_integral", "c_in"):
        value = getattr(result, name)
        assert value is not None and np.isfinite(value) and value >= 0, name
    assert result.err_u_L2 > 0
    assert result.runtime > 0


def test_study_is_byte_stable(profiles: ProfileSet, data: InitialData, tiny_config: StudyConfig) -> None:
    first = run_convergence_study(tiny_config, data=data, profiles=profiles)
    second = run_convergence_study(tiny_config, data=data, profiles=profiles)

    assert not first.failed
    assert first.epsilons == list(tiny_config.epsilons)
    assert render_report(first, "json") == render_report(second, "json")
    assert len(render_report(first, "csv").decode("utf-8").splitlines()) == 4


@pytest.mark.asyncio
async def test_blocking_entry_point_refuses_running_loop(tiny_config: StudyConfig) -> None:
    with pytest.raises(RuntimeError):
        run_convergence_study(tiny_config)


@pytest.mark.asyncio
async def test_custom_scheduler_and_missing_results(
    profiles: ProfileSet, data: InitialData, tiny_config: StudyConfig
) -> None:
    table = {case.epsilon: case for case in synthetic_cases(tiny_config.p)[:2]}
    config = tiny_config.replace(epsilons=(1e-2, 1e-3, 1e-4))
    scheduler = FakeScheduler(table)
    messages: List[str] = []

    report = await run_convergence_study_async(
        config, data=data, profiles=profiles, scheduler=scheduler, logger=messages.append
    )

    assert [spec.idempotency_key for spec in scheduler.scheduled] == ["eps-1.000000e-02", "eps-1.000000e-03", "eps-1.000000e-04"]
    assert [case.epsilon for case in report.failed] == [1e-4]
    assert report.failed[0].error["code"] == "cancelled"
    assert messages[-1] == "eps=1.000e-04: cancelled"


def test_profile_dump(profiles: ProfileSet) -> None:
    storage = InMemoryStorage()

    keys = dump_profiles(profiles, storage)

    assert len(keys) == 5 * profiles.store_times.size
    values, sidecar = read_snapshot(storage, "U_P_t2.bin")
    np.testing.assert_array_equal(values, profiles.U_P[2].values)
    assert sidecar["time"] == pytest.approx(0.25)
    assert sidecar["fingerprint"] == profiles.fingerprint

    values, sidecar = read_snapshot(storage, "V_KH_t1.bin")
    left_rows, right_rows = sidecar["sides"]["left"], sidecar["sides"]["right"]
    np.testing.assert_array_equal(values[left_rows[0] : left_rows[1]], profiles.V_KH[1].left)
    np.testing.assert_array_equal(values[right_rows[0] : right_rows[1]], profiles.V_KH[1].right)
    assert set(sidecar["axes"]) == {"x", "z"}


def test_reduced_sweep_meets_the_predicted_rates(data: InitialData) -> None:
    ctx = VerificationContext(reduced_config(), data)
    report = ctx.study

    assert not report.failed
    residual = fit_loglog_rate(report.series("residual_integral"))
    assert residual.slope == pytest.approx(expected_slopes(1.5)["residual_integral"], abs=0.08)
    assert residual.r_squared >= 0.98
    err_v = [value for _, value in report.series("err_v_Lp")]
    assert all(later < earlier for earlier, later in zip(err_v, err_v[1:]))
    assert fit_loglog_rate(report.series("err_v_Lp")).slope > 0
    assert fit_loglog_rate(report.series("err_u_vs_ansatz_L2")).slope >= 0.9

    for result in run_verification(["residual-rate", "error-trends"], context=ctx):
        assert result.passed, result.detail
