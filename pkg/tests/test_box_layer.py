from __future__ import annotations

import math

import numpy as np
import pytest

from ppflow.box_layer import (
    JumpSources,
    KelvinHelmholtzWallTrace,
    SkewOperator,
    WallJumpHistory,
    box_second_derivative_integrability,
    compute_J_pm,
    energy_monitor,
    jump_sources_from_arrays,
    solve_box_layer,
    stable_box_dt,
)
from ppflow.errors import CFLViolation, DomainError, InitialDataError
from ppflow.grids import Field1D, Grid1D, Grid2D, TimeSeries, TwoSidedField2D
from ppflow.initial_data import InitialData, InterfaceGeometry
from ppflow.profiles import ProfileSet

GRID_X = Grid1D.symmetric(2.0, 0.5)
GRID_Z = Grid1D.from_length(2.0, 0.5)
TIMES = np.array([0.0, 0.25])


def small_problem(data: InitialData):
    geometry = data.geometry()
    history = WallJumpHistory(2.0, GRID_Z, n_sigma=33)
    sources = JumpSources.from_history(history, geometry, TIMES, GRID_Z)
    trace = KelvinHelmholtzWallTrace(2.0, geometry.wall_shear, GRID_X, n_sigma=33)
    return geometry, history, sources, trace


def test_jump_sources() -> None:
    q = np.array([1.0, 2.0])
    q_Z = np.array([0.5, -1.0])
    J_plus, J_minus = jump_sources_from_arrays(0.5, q, q_Z)

    np.testing.assert_allclose(J_plus - J_minus, -1.25 * q)
    np.testing.assert_allclose(J_plus + J_minus, -q_Z)


def test_sources_follow_the_wall_shear(data: InitialData) -> None:
    axis = Grid1D.from_length(2.0, 0.5)
    q = Field1D.from_function(axis, lambda Z: np.exp(-Z))
    q_Z = Field1D.from_function(axis, lambda Z: -np.exp(-Z))
    geometry = data.geometry()

    J_plus, J_minus = compute_J_pm(geometry, q, q_Z, 0.0)
    np.testing.assert_allclose(J_plus.values, -0.5 * q.values)
    np.testing.assert_allclose(J_minus.values, 0.5 * q.values)

    # psi_z = -1 on the wall at t = 1
    J_plus, J_minus = compute_J_pm(geometry, q, q_Z, 1.0)
    np.testing.assert_allclose(J_plus.values, -2.0 * q.values)
    np.testing.assert_allclose(J_minus.values, 0.0, atol=1e-15)


def test_skew_operator() -> None:
    X = np.linspace(-1.0, 1.0, 9)
    Z = np.linspace(0.0, 1.0, 5)
    bilinear = X[:, None] * Z[None, :]

    assert SkewOperator(0.0).is_laplacian
    np.testing.assert_allclose(SkewOperator(0.0).mixed(bilinear, X, Z), 0.0)
    np.testing.assert_allclose(SkewOperator(1.0).apply(bilinear, X, Z), -2.0, atol=1e-9)
    np.testing.assert_allclose(SkewOperator(1.0).apply(X[:, None] ** 2 + Z[None, :] ** 2, X, Z), 6.0, atol=1e-9)


def test_stable_box_dt() -> None:
    assert stable_box_dt(Grid1D.symmetric(1.0, 0.5), Grid1D.from_length(1.0, 0.25), 1.0) == pytest.approx(1.0 / 128)


def test_box_layer_rejects_large_steps(data: InitialData) -> None:
    geometry, history, sources, trace = small_problem(data)
    bound = stable_box_dt(GRID_X, GRID_Z, 0.25)
    with pytest.raises(CFLViolation) as excinfo:
        solve_box_layer(sources, trace, history, 2.0, geometry, 0.25, GRID_X, GRID_Z, 2.0 * bound, store_times=TIMES)
    assert excinfo.value.suggested_dt == pytest.approx(bound)


def test_box_layer_rejects_incompatible_corner(data: InitialData) -> None:
    geometry, history, sources, trace = small_problem(data)
    with pytest.raises(InitialDataError) as excinfo:
        solve_box_layer(sources, trace, history, 1.0, geometry, 0.25, GRID_X, GRID_Z, store_times=TIMES)
    assert excinfo.value.condition == "corner-compatibility"


def test_small_box_layer_keeps_wall_and_interface_conditions(data: InitialData) -> None:
    geometry, history, sources, trace = small_problem(data)
    solution = solve_box_layer(sources, trace, history, 2.0, geometry, 0.25, GRID_X, GRID_Z, store_times=TIMES)

    assert solution.n_steps > 0
    np.testing.assert_allclose(solution.store_times, TIMES)
    final = solution.V_b.final
    np.testing.assert_allclose(final.jump, -history(0.25)[0], atol=1e-12)
    np.testing.assert_allclose(final.xderiv_jump, 0.0, atol=1e-12)


def test_corner_layer_continuity(profiles: ProfileSet) -> None:
    for t, V_b in profiles.V_b:
        np.testing.assert_allclose(V_b.jump + profiles.vp_jump(t).values, 0.0, atol=1e-8)
        np.testing.assert_allclose(V_b.xderiv_jump, 0.0, atol=1e-8)


def test_corner_layer_cancels_transition_layer_on_the_wall(profiles: ProfileSet) -> None:
    for (_, V_b), (_, V_KH) in zip(profiles.V_b, profiles.V_KH):
        np.testing.assert_allclose(V_b.left[:, 0] + V_KH.left[:, 0], 0.0, atol=1e-10)
        np.testing.assert_allclose(V_b.right[:, 0] + V_KH.right[:, 0], 0.0, atol=1e-10)


def test_energy_monitor_is_finite(profiles: ProfileSet) -> None:
    report = energy_monitor(profiles.box, profiles.box.sources, 1.5)

    assert np.isfinite(report.constant)
    assert np.isfinite(report.x_constant)
    assert report.source_integral > 0
    assert set(report.to_dict()) >= {"lhs", "rhs", "constant", "x_constant", "source_integral"}
    with pytest.raises(DomainError):
        energy_monitor(profiles.box, profiles.box.sources, 1.0)


def test_second_derivative_integrability(profiles: ProfileSet) -> None:
    value = box_second_derivative_integrability(profiles.box, 1.5)
    assert np.isfinite(value) and value > 0
    with pytest.raises(DomainError):
        box_second_derivative_integrability(profiles.box, 0.0)


def constant_shear(shear: float) -> InterfaceGeometry:
    return InterfaceGeometry(
        u0=lambda z: shear * np.asarray(z, dtype=float),
        u0_z=lambda z: np.full(np.shape(z), shear, dtype=float),
        u0_zz=lambda z: np.zeros(np.shape(z)),
    )


def forced_box(shear: float, amplitude: float, T: float, grid_X: Grid1D, grid_Z: Grid1D):
    """Box layer with quiet wall data driven by ``J_+ = -J_- = -amplitude/2 * Z e^{-Z}``."""

    Z = grid_Z.nodes
    profile = amplitude * Z * np.exp(-Z)
    times = np.array([0.0, T])
    geometry = constant_shear(shear)

    def evaluate(t: float):
        return -0.5 * profile, 0.5 * profile

    sources = JumpSources(
        J_plus=TimeSeries(times, (Field1D(grid_Z, -0.5 * profile),) * 2),
        J_minus=TimeSeries(times, (Field1D(grid_Z, 0.5 * profile),) * 2),
        wall_shear=shear,
        evaluator=evaluate,
    )
    quiet = np.zeros(grid_Z.n_points)
    return solve_box_layer(
        sources,
        lambda t: np.zeros(grid_X.n_points),
        lambda t: (quiet, quiet),
        0.0,
        geometry,
        T,
        grid_X,
        grid_Z,
        store_times=times,
    )


def test_second_derivative_jumps_by_the_source_jump() -> None:
    grid_X = Grid1D.symmetric(4.0, 1.0 / 16)
    grid_Z = Grid1D.from_length(6.0, 1.0 / 16)
    solution = forced_box(0.0, 1.0, 0.25, grid_X, grid_Z)
    w = solution.w.final.values
    h = grid_X.spacing
    i0 = grid_X.index_of(0.0)

    right = (2.0 * w[i0] - 5.0 * w[i0 + 1] + 4.0 * w[i0 + 2] - w[i0 + 3]) / h**2
    left = (2.0 * w[i0] - 5.0 * w[i0 - 1] + 4.0 * w[i0 - 2] - w[i0 - 3]) / h**2
    J_plus, J_minus = solution.sources.at(0.25)
    inner = (grid_Z.nodes > 0.0) & (grid_Z.nodes <= 3.0)

    # (1 + a^2) [d_XX w] = -(J_+ - J_-) with a = 0
    np.testing.assert_allclose((right - left)[inner], -(J_plus - J_minus)[inner], atol=1e-2)


def test_box_layer_mirrors_under_x_reflection() -> None:
    grid_X = Grid1D.symmetric(2.0, 0.25)
    grid_Z = Grid1D.from_length(2.0, 0.25)

    still = forced_box(0.0, 1.0, 0.25, grid_X, grid_Z).w.final.values
    np.testing.assert_allclose(still, -still[::-1], atol=1e-12)

    sheared = forced_box(-1.0, 1.0, 0.25, grid_X, grid_Z).w.final.values
    mirrored = forced_box(1.0, 1.0, 0.25, grid_X, grid_Z).w.final.values
    assert np.max(np.abs(sheared)) > 1e-3
    np.testing.assert_allclose(sheared, -mirrored[::-1], atol=1e-12)


def test_box_layer_stays_zero_without_sources() -> None:
    grid_X = Grid1D.symmetric(2.0, 0.25)
    grid_Z = Grid1D.from_length(2.0, 0.25)
    solution = forced_box(-1.0, 0.0, 0.25, grid_X, grid_Z)

    for _, snapshot in solution.w:
        assert np.max(np.abs(snapshot.values)) <= 1e-14
    for _, V_b in solution.V_b:
        assert np.max(np.abs(V_b.left)) <= 1e-14
        assert np.max(np.abs(V_b.right)) <= 1e-14


def monitor_on(values: np.ndarray, grid: Grid2D, p: float):
    quiet = Field1D(grid.z_axis, np.zeros(grid.z_axis.n_points))
    times = np.array([0.0])
    sources = JumpSources(J_plus=TimeSeries(times, (quiet,)), J_minus=TimeSeries(times, (quiet,)), wall_shear=0.0)
    return energy_monitor(TimeSeries(times, (TwoSidedField2D.continuous(grid, values),)), sources, p)


def test_energy_dissipation_matches_the_closed_form() -> None:
    p, length = 1.5, 3.0
    grid = Grid2D(Grid1D.symmetric(4.0, 1.0 / 32), Grid1D.from_length(length, 1.0 / 32))
    X = grid.x_axis.nodes[:, None]
    Z = grid.z_axis.nodes[None, :]
    report = monitor_on(np.exp(-(X**2) - Z), grid, p)

    # |w|^{p-2} |grad w|^2 = w^p (4 X^2 + 1)
    expected = math.sqrt(math.pi / p) * (1.0 + 2.0 / p) * (1.0 - math.exp(-p * length)) / p
    assert report.dissipation[0] == pytest.approx(expected, rel=1e-2)


def test_energy_dissipation_ignores_round_off_next_to_a_sign_change() -> None:
    p, length = 1.5, 3.0
    grid = Grid2D(Grid1D.symmetric(4.0, 1.0 / 64), Grid1D.from_length(length, 1.0 / 32))
    X = grid.x_axis.nodes[:, None]
    Z = grid.z_axis.nodes[None, :]
    exact_zero = monitor_on(X * np.exp(-(X**2) - Z), grid, p)
    near_zero = monitor_on((X - 1e-12) * np.exp(-(X**2) - Z), grid, p)

    # |w|^{p-2} |grad w|^2 = |X|^{p-2} e^{-p X^2} (1 - 3 X^2 + 4 X^4) e^{-p Z}
    shift = 0.5 * (p - 1.0)
    x_part = sum(c * math.gamma(shift + k) / p ** (shift + k) for k, c in enumerate((1.0, -3.0, 4.0)))
    expected = x_part * (1.0 - math.exp(-p * length)) / p
    assert near_zero.dissipation[0] == pytest.approx(exact_zero.dissipation[0], rel=1e-6)
    assert near_zero.dissipation[0] == pytest.approx(expected, rel=0.15)
    assert near_zero.dissipation_z[0] == pytest.approx(near_zero.dissipation[0], rel=0.15)
