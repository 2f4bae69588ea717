from __future__ import annotations

import pytest

from ppflow.models import CSV_COLUMNS, METRICS, CaseResult, ConvergenceReport
from ppflow.rates import RateFit


def test_case_result_serialization_drops_runtime() -> None:
    case = CaseResult(epsilon=1e-2, err_u_L2=0.5, singular_norm=0.1, runtime=3.2)
    payload = case.to_dict()

    assert "runtime" not in payload
    assert set(METRICS) <= set(payload)
    assert CaseResult.from_dict(payload) == case


def test_case_result_metric_lookup() -> None:
    case = CaseResult(epsilon=1e-2, err_v_Lp=0.25)
    assert case.metric("err_v_Lp") == 0.25
    assert case.metric("eu_norm") is None
    with pytest.raises(KeyError):
        case.metric("runtime")
    with pytest.raises(ValueError):
        CaseResult.from_dict({"status": "succeeded"})


def test_failed_case() -> None:
    case = CaseResult.failed(1e-3, {"code": "cfl", "message": "too fast", "payload": {}})
    assert not case.succeeded
    assert case.error == {"code": "cfl", "message": "too fast", "payload": {}}


def test_report_series_skips_failed_and_missing_values() -> None:
    report = ConvergenceReport(
        cases=(
            CaseResult(epsilon=1e-2, err_u_L2=1.0),
            CaseResult(epsilon=1e-3),
            CaseResult.failed(1e-4, {"code": "x", "message": "", "payload": {}}),
        ),
        slopes={"err_u_L2": RateFit(1.0, 0.0, 1.0, 3)},
        flagged={"singular_norm": RateFit(0.1, 0.0, 0.5, 3)},
    )

    assert report.epsilons == [1e-2, 1e-3, 1e-4]
    assert report.series("err_u_L2") == [(1e-2, 1.0)]
    assert [case.epsilon for case in report.failed] == [1e-4]
    assert report.rate("err_u_L2").slope == 1.0
    assert report.rate("singular_norm").r_squared == 0.5
    assert report.rate("eu_norm") is None
    assert ConvergenceReport.from_dict(report.to_dict()) == report


def test_csv_columns_start_with_epsilon() -> None:
    assert CSV_COLUMNS[0] == "epsilon"
    assert set(CSV_COLUMNS[1:]) <= set(METRICS)
