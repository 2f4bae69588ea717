from __future__ import annotations

import logging
from typing import List

import numpy as np
import pytest

from ppflow.errors import DomainError, GridError
from ppflow.grids import Field1D, Grid1D
from ppflow.initial_data import InitialData
from ppflow.profiles import (
    ProfileGrids,
    ProfileMethod,
    ProfileSet,
    build_profiles,
    fingerprint_series,
    profile_norm_report,
    solve_Up,
    solve_Vkh,
    solve_Vp,
    unit_profile_history,
)


def test_store_times_and_grids(profiles: ProfileSet, tiny_config) -> None:
    np.testing.assert_allclose(profiles.store_times, [0.0, 0.125, 0.25])
    assert profiles.method is ProfileMethod.DUHAMEL
    assert profiles.grids == ProfileGrids.from_config(tiny_config)


def test_shear_layer_cancels_u0_on_the_wall(profiles: ProfileSet) -> None:
    for _, snapshot in profiles.U_P:
        assert snapshot.values[0] == pytest.approx(-1.0, abs=1e-14)


def test_wall_layer_jump_is_the_corner_jump_times_the_unit_profile(profiles: ProfileSet) -> None:
    for k, t in enumerate(profiles.store_times):
        np.testing.assert_allclose(profiles.vp_jump(t).values, 2.0 * profiles.wall_unit[k].values, atol=1e-14)


def test_transition_layer_undoes_the_data_jump(profiles: ProfileSet, data: InitialData) -> None:
    z = profiles.grids.phys_z.nodes
    for _, snapshot in profiles.V_KH:
        np.testing.assert_allclose(snapshot.jump, -data.jump_v0(z), atol=1e-13)
        np.testing.assert_allclose(snapshot.xderiv_jump, 0.0, atol=1e-13)


def test_fingerprint_matches_the_series(profiles: ProfileSet) -> None:
    assert fingerprint_series(profiles.series()) == profiles.fingerprint
    assert len(profiles.fingerprint) == 64


def test_index_of_requires_a_store_time(profiles: ProfileSet) -> None:
    assert profiles.index_of(0.25) == 2
    with pytest.raises(DomainError):
        profiles.index_of(0.1)


def test_finite_difference_unit_profile_tracks_duhamel() -> None:
    grid = Grid1D.from_length(8.0, 1.0 / 32)
    exact = unit_profile_history(0.25, grid, store_times=[0.1, 0.25])
    approx = unit_profile_history(0.25, grid, 1e-4, store_times=[0.1, 0.25], method="finite-difference")
    for (_, left), (_, right) in zip(exact, approx):
        np.testing.assert_allclose(left.values, right.values, atol=2e-3)


def test_unknown_method_is_rejected() -> None:
    with pytest.raises(DomainError):
        unit_profile_history(1.0, Grid1D.from_length(1.0, 0.25), method="spectral")


def test_transition_layer_needs_symmetric_grid(data: InitialData) -> None:
    grid_z = Grid1D.from_length(1.0, 0.25)
    with pytest.raises(GridError):
        solve_Vkh(data.jump_field(grid_z), data.geometry(), 0.5, Grid1D(5, 0.5, origin=-0.5), grid_z)
    with pytest.raises(GridError):
        solve_Vkh(
            Field1D(Grid1D.from_length(2.0, 0.25), np.ones(9)),
            data.geometry(),
            0.5,
            Grid1D.symmetric(1.0, 0.25),
            grid_z,
        )


def test_norm_report_lists_every_profile(profiles: ProfileSet, data: InitialData) -> None:
    report = profile_norm_report(profiles, 1.5, data=data)

    expected = {"U_P", "V_P_jump"} | {f"V_P_dx{k}" for k in (0, 1, 2)} | {f"V_KH_dz{k}" for k in (0, 1, 2)}
    assert set(report.norms) == expected
    assert set(report.data_norms) == expected
    assert all(np.isfinite(value) and value > 0 for value in report.norms.values())
    assert report.data_norms["V_P_jump"] == pytest.approx(2.0)
    assert set(report.to_dict()["ratios"]) == expected


def test_shear_layer_scales_the_unit_profile() -> None:
    grid_Z = Grid1D.from_length(4.0, 0.25)
    U_P = solve_Up(2.0, 0.25, grid_Z, store_times=[0.125], n_sigma=33)

    np.testing.assert_allclose(U_P.times, [0.0, 0.125, 0.25])
    np.testing.assert_allclose(U_P[0].values, -2.0 * np.exp(-grid_Z.nodes), atol=1e-10)
    for _, snapshot in U_P:
        assert snapshot.values[0] == pytest.approx(-2.0, abs=1e-13)


def test_cross_flow_layer_has_one_column_per_wall_value(data: InitialData) -> None:
    grid_x = Grid1D.symmetric(1.0, 0.25)
    grid_Z = Grid1D.from_length(4.0, 0.25)
    unit = unit_profile_history(0.25, grid_Z, n_sigma=33)
    V_P = solve_Vp(data.wall_trace(), 0.25, grid_x, grid_Z, unit=unit)

    final = V_P.final
    x_left, x_right = final.grid.x_left, final.grid.x_right
    np.testing.assert_allclose(final.left, -np.exp(-x_left**2)[:, None] * unit.final.values[None, :], rtol=1e-12)
    np.testing.assert_allclose(final.right, np.exp(-x_right**2)[:, None] * unit.final.values[None, :], rtol=1e-12)
    np.testing.assert_allclose(final.left[:, 0], np.exp(-x_left**2), atol=1e-13)


def test_build_reports_progress_through_the_module_logger(
    data: InitialData, tiny_config, caplog: pytest.LogCaptureFixture
) -> None:
    messages: List[str] = []

    with caplog.at_level(logging.INFO, logger="ppflow.profiles"):
        build_profiles(data, tiny_config.replace(n_store=2), progress=messages.append)

    assert messages[0].startswith("building duhamel profiles for 'gaussian-jump'")
    logged = [record.getMessage() for record in caplog.records if record.name == "ppflow.profiles"]
    assert messages[0] in logged
