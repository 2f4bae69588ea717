from __future__ import annotations

import numpy as np
import pytest

from ppflow.calculus import lp_norm
from ppflow.config import StudyConfig
from ppflow.errors import DomainError
from ppflow.flow import layer_grid
from ppflow.grids import Field1D, Grid1D
from ppflow.initial_data import InitialData
from ppflow.profiles import ProfileSet, build_profiles
from ppflow.residuals import (
    EV_TERMS,
    ResidualReport,
    compute_Eu,
    compute_Ev,
    direct_residual_u,
    direct_residual_v,
    residual_report,
    scaling_check,
    singular_term_norm,
)

STEP = 1.0 / 256
CLUSTERED = (0.0, 0.125 - STEP, 0.125, 0.125 + STEP, 0.25)


@pytest.fixture(scope="module")
def clustered(data: InitialData, tiny_config: StudyConfig) -> ProfileSet:
    return build_profiles(data, tiny_config.replace(store_times=CLUSTERED))


def test_shear_residual_is_viscous_curvature() -> None:
    axis = Grid1D.from_length(4.0, 1.0 / 64)
    u0 = Field1D(axis, np.exp(-axis.nodes))
    np.testing.assert_allclose(compute_Eu(u0, 1e-2).values, 1e-2 * np.exp(-axis.nodes), atol=1e-5)


def test_scaling_identity_on_own_nodes() -> None:
    profile = Field1D.from_function(Grid1D.from_length(20.0, 1.0 / 64), lambda Z: np.exp(-Z))

    measured, predicted = scaling_check(profile, 1e-2, 2.0)

    assert measured == pytest.approx(predicted, rel=1e-12)
    assert predicted == pytest.approx(0.1**0.5 / np.sqrt(2.0), rel=1e-3)


def test_scaling_identity_on_a_physical_axis() -> None:
    profile = Field1D.from_function(Grid1D.from_length(20.0, 1.0 / 64), lambda Z: np.exp(-Z))
    measured, predicted = scaling_check(profile, 1e-2, 2.0, physical=Grid1D.from_length(2.0, 1.0 / 256))
    assert measured == pytest.approx(predicted, rel=1e-3)
    with pytest.raises(DomainError):
        scaling_check(profile, 0.0, 2.0)


def test_cross_flow_residual_breakdown(profiles: ProfileSet, data: InitialData) -> None:
    total, breakdown = compute_Ev(profiles, data, data.geometry(), 1e-2, 0.125, 1.5)

    assert set(breakdown) == set(EV_TERMS) | {"total"}
    assert all(np.isfinite(value) and value >= 0 for value in breakdown.values())
    assert np.all(np.isfinite(total.values))
    assert breakdown["transport_singular_kh"] == pytest.approx(singular_term_norm(profiles, 1e-2, 0.125, 1.5))


def test_singular_only_report(profiles: ProfileSet, data: InitialData) -> None:
    report = residual_report(profiles, data, 1e-2, 1.5, singular_only=True)

    assert report.ev_norms.size == 0
    assert report.ev_integral == 0.0
    assert report.singular_norms.shape == (3,)
    assert report.breakdown == {}
    assert report.singular_sup > 0


def test_full_report(profiles: ProfileSet, data: InitialData) -> None:
    report = residual_report(profiles, data, 1e-2, 1.5)

    assert report.ev_norms.shape == (3,)
    assert report.ev_integral > 0
    assert report.c_in == pytest.approx(report.ev_integral / 1e-2**0.25)
    assert report.eu_sup == pytest.approx(report.eu_norms[0])
    payload = report.to_dict()
    assert set(payload["breakdown"]) == set(EV_TERMS) | {"total"}
    assert payload["c_in"] == pytest.approx(report.c_in)


def test_direct_residual_needs_interior_store_time(profiles: ProfileSet, data: InitialData) -> None:
    with pytest.raises(DomainError):
        direct_residual_u(profiles, data, 1e-2, 0.0)
    residual = direct_residual_u(profiles, data, 1e-2, 0.125)
    assert np.all(np.isfinite(residual.values))


def test_direct_cross_flow_residual_is_finite(profiles: ProfileSet, data: InitialData) -> None:
    geometry = data.geometry()
    with pytest.raises(DomainError):
        direct_residual_v(profiles, data, geometry, 1e-2, 0.25)
    residual = direct_residual_v(profiles, data, geometry, 1e-2, 0.125)
    assert np.all(np.isfinite(residual.left)) and np.all(np.isfinite(residual.right))


def test_report_rejects_negative_norms() -> None:
    with pytest.raises(DomainError):
        ResidualReport(
            epsilon=1e-2,
            p=1.5,
            times=np.array([0.0]),
            eu_norms=np.array([-1.0]),
            ev_norms=np.zeros(0),
            ev_integral=0.0,
            singular_norms=np.zeros(1),
            breakdown={},
        )


@pytest.mark.parametrize("epsilon", [1e-2, 1e-3])
def test_direct_cross_flow_residual_matches_the_term_sum(
    clustered: ProfileSet, data: InitialData, epsilon: float
) -> None:
    geometry = data.geometry()
    _, breakdown = compute_Ev(clustered, data, geometry, epsilon, 0.125, 1.5)
    direct = direct_residual_v(clustered, data, geometry, epsilon, 0.125)

    assert lp_norm(direct, 1.5) == pytest.approx(breakdown["total"], rel=0.05)


def test_direct_shear_residual_converges_under_wall_grid_refinement(
    clustered: ProfileSet, data: InitialData, tiny_config: StudyConfig
) -> None:
    refined = build_profiles(data, tiny_config.replace(store_times=CLUSTERED, h_Z=tiny_config.h_Z / 4.0))

    def window_error(profiles: ProfileSet) -> float:
        grid = layer_grid(profiles.grids, 1e-2)
        z = grid.z_axis.nodes
        inside = (z > 0.0) & (z <= 0.6 * grid.z_axis.window[1])
        direct = direct_residual_u(profiles, data, 1e-2, 0.125, grid=grid)
        expected = compute_Eu(data.u0_field(grid.z_axis), 1e-2)
        return float(np.max(np.abs(direct.values - expected.values)[inside]))

    coarse = window_error(clustered)
    fine = window_error(refined)
    assert fine < 0.5 * coarse
