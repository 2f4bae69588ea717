"""Named invariant checks run by ``ppflow verify`` on a reduced grid."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence

import numpy as np
from scipy.integrate import quad

from .box_layer import (
    BoxLayerSolution,
    JumpSources,
    KelvinHelmholtzWallTrace,
    WallJumpHistory,
    box_second_derivative_integrability,
    energy_monitor,
    solve_box_layer,
)
from .calculus import lp_norm
from .config import StudyConfig
from .flow import assemble_ansatz, euler_solution, layer_grid
from .grids import Field1D, Grid1D, Grid2D
from .initial_data import InitialData, default_initial_data
from .profiles import ProfileGrids, ProfileMethod, ProfileSet, build_profiles, unit_profile_history
from .models import ConvergenceReport
from .rates import MIN_R_SQUARED, fit_loglog_rate
from .residuals import compute_Eu, scaling_check, singular_term_norm
from .study import expected_slopes, run_convergence_study

__all__ = [
    "CheckResult",
    "VerificationContext",
    "reduced_config",
    "register_check",
    "get_check",
    "list_checks",
    "run_verification",
]

logger = logging.getLogger(__name__)

ENERGY_CONSTANT_BOUND = 10.0
RESIDUAL_SLOPE_TOLERANCE = 0.08
MONOTONE_SLACK = 0.02
ANSATZ_ERROR_MIN_SLOPE = 0.9


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    measured: float
    tolerance: float
    detail: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "passed": self.passed,
            "measured": self.measured,
            "tolerance": self.tolerance,
            "detail": self.detail,
        }


def reduced_config(base: Optional[StudyConfig] = None) -> StudyConfig:
    """A grid small enough for the whole suite to finish in a few minutes."""

    base = base or StudyConfig()
    return base.replace(
        T=min(base.T, 0.5),
        h_x=1.0 / 32,
        h_z=1.0 / 32,
        h_X=1.0 / 8,
        h_Z=1.0 / 8,
        fast_length=8.0,
        L_x=3.0,
        L_z=3.0,
        n_store=6,
        store_times=None,
        profile_dt=None,
        box_dt=None,
        flow_dt=None,
    )


class VerificationContext:
    """Configuration, initial data and the lazily built profiles shared by all checks."""

    def __init__(self, config: StudyConfig, data: Optional[InitialData] = None) -> None:
        self.config = config
        self.data = data or default_initial_data(config.preset)

    @cached_property
    def profiles(self) -> ProfileSet:
        return build_profiles(self.data, self.config)

    @cached_property
    def study(self) -> ConvergenceReport:
        return run_convergence_study(self.config, data=self.data, profiles=self.profiles)


Check = Callable[[VerificationContext], CheckResult]

_CHECKS: Dict[str, Check] = {}


def register_check(name: str, check: Check, *, override: bool = False) -> None:
    normalized = name.lower()
    if not override and normalized in _CHECKS:
        raise ValueError(f"Verification check '{name}' is already registered")
    _CHECKS[normalized] = check


def get_check(name: str) -> Check:
    normalized = name.lower()
    if normalized not in _CHECKS:
        raise KeyError(f"Verification check '{name}' is not registered")
    return _CHECKS[normalized]


def list_checks() -> List[str]:
    return sorted(_CHECKS.keys())


def _within(name: str, measured: float, tolerance: float, detail: str = "") -> CheckResult:
    passed = bool(np.isfinite(measured) and measured <= tolerance)
    return CheckResult(name=name, passed=passed, measured=float(measured), tolerance=tolerance, detail=detail)


def _slope_check(name: str, pairs: Sequence[tuple], expected: float, tolerance: float) -> CheckResult:
    fit = fit_loglog_rate(pairs)
    deviation = abs(fit.slope - expected)
    return _within(name, deviation, tolerance, f"slope {fit.slope:.4f} (expected {expected:.4f}, r^2 {fit.r_squared:.4f})")


def check_eu_order(ctx: VerificationContext) -> CheckResult:
    grids = ProfileGrids.from_config(ctx.config)
    pairs = []
    for epsilon in ctx.config.epsilons:
        axis = layer_grid(grids, epsilon).z_axis
        pairs.append((epsilon, lp_norm(compute_Eu(ctx.data.u0_field(axis), epsilon), 2.0)))
    return _slope_check("eu-order", pairs, 1.0, 0.01)


def _singular_pairs(ctx: VerificationContext, p: float) -> List[tuple]:
    profiles = ctx.profiles
    pairs = []
    for epsilon in ctx.config.epsilons:
        grid = layer_grid(profiles.grids, epsilon)
        norms = [singular_term_norm(profiles, epsilon, float(t), p, grid=grid) for t in profiles.store_times]
        pairs.append((epsilon, max(norms)))
    return pairs


def check_singular_order(ctx: VerificationContext) -> CheckResult:
    p = ctx.config.p
    return _slope_check("singular-order", _singular_pairs(ctx, p), 1.0 / p - 0.5, 0.05)


def check_singular_order_p2(ctx: VerificationContext) -> CheckResult:
    """At ``p = 2`` the singular transport term no longer decays."""

    return _slope_check("singular-order-p2", _singular_pairs(ctx, 2.0), 0.0, 0.05)


def check_ansatz_compatibility(ctx: VerificationContext) -> CheckResult:
    profiles = ctx.profiles
    worst_u = worst_v = worst_jump = 0.0
    for epsilon in ctx.config.epsilons:
        grid = layer_grid(profiles.grids, epsilon)
        for t in profiles.store_times:
            ansatz = assemble_ansatz(profiles, ctx.data, epsilon, float(t), grid=grid)
            worst_u = max(worst_u, ansatz.wall_defect_u())
            worst_v = max(worst_v, ansatz.wall_defect_v())
            worst_jump = max(worst_jump, *ansatz.interface_defects())
    passed = worst_u <= 1e-12 and worst_v <= 1e-8 and worst_jump <= 1e-6
    return CheckResult(
        name="ansatz-compatibility",
        passed=passed,
        measured=max(worst_v, worst_jump),
        tolerance=1e-6,
        detail=f"|u_app(0)| {worst_u:.2e}, |v_app(z=0)| {worst_v:.2e}, interface {worst_jump:.2e}",
    )


def check_up_oracle(ctx: VerificationContext) -> CheckResult:
    """Backward-Euler wall profile against the Duhamel formula."""

    config = ctx.config
    grid_Z = Grid1D.from_length(max(config.fast_length, 12.0), 1.0 / 32)
    times = np.linspace(0.0, config.T, 5)
    reference = unit_profile_history(config.T, grid_Z, store_times=times, method=ProfileMethod.DUHAMEL, n_sigma=config.n_sigma)
    fd = unit_profile_history(config.T, grid_Z, 1e-4, store_times=times, method=ProfileMethod.FINITE_DIFFERENCE)
    worst = 0.0
    for exact, approximate in zip(reference.snapshots, fd.snapshots):
        scale = max(float(np.max(np.abs(exact.values))), 1e-300)
        worst = max(worst, float(np.max(np.abs(exact.values - approximate.values))) / scale)
    return _within("up-oracle", worst, 1e-3, "relative sup difference over the store times")


def check_scaling_identity(ctx: VerificationContext) -> CheckResult:
    fine = Grid1D.from_length(ctx.config.fast_length, 1.0 / 64)
    measured, _ = scaling_check(Field1D.from_function(fine, lambda Z: np.exp(-Z)), 0.01, 2.0)
    oracle = abs(measured / (0.01**0.25 / math.sqrt(2.0)) - 1.0)
    profiles = ctx.profiles
    ratio = 0.0
    for epsilon in ctx.config.epsilons:
        axis = layer_grid(profiles.grids, epsilon).z_axis
        got, predicted = scaling_check(profiles.U_P.final, epsilon, ctx.config.p, physical=axis)
        ratio = max(ratio, abs(got / predicted - 1.0))
    return _within(
        "scaling-identity",
        max(oracle, ratio),
        1e-3,
        f"e^-Z at eps=0.01: {measured:.5f}; worst layer-grid ratio deviation {ratio:.2e}",
    )


def check_euler_conservation(ctx: VerificationContext) -> CheckResult:
    config = ctx.config
    grid = Grid2D(Grid1D.symmetric(config.L_x + 1.0, 1.0 / 64), Grid1D.from_length(config.L_z, 1.0 / 64))
    p = config.p
    reference = euler_solution(ctx.data, 0.0, grid, coordinates="original").power_integral(p) ** (1.0 / p)
    worst = 0.0
    for t in np.linspace(0.0, config.T, 3)[1:]:
        moved = euler_solution(ctx.data, float(t), grid, coordinates="original")
        worst = max(worst, abs(moved.power_integral(p) ** (1.0 / p) / reference - 1.0))
    return _within("euler-conservation", worst, 1e-4, "relative change of ||v||_p along the inviscid flow")


def check_rescaled_time(ctx: VerificationContext) -> CheckResult:
    geometry = ctx.data.geometry()
    z = np.linspace(0.0, ctx.config.L_z, 17)
    T = ctx.config.T
    closed = geometry.rescaled_time(T, z)
    shear = np.broadcast_to(geometry.u0_z(z), z.shape)
    numeric = np.array([quad(lambda s, a=a: 1.0 + (s * a) ** 2, 0.0, T, epsabs=1e-13, epsrel=1e-13)[0] for a in shear])
    return _within("rescaled-time", float(np.max(np.abs(closed - numeric))), 1e-8)


def check_box_continuity(ctx: VerificationContext) -> CheckResult:
    """The corner profile cancels the wall-layer jump and keeps ``d_X`` continuous."""

    profiles = ctx.profiles
    worst = 0.0
    for t, V_b in profiles.V_b:
        worst = max(worst, float(np.max(np.abs(V_b.jump + profiles.vp_jump(t).values))))
        worst = max(worst, float(np.max(np.abs(V_b.xderiv_jump))))
    return _within("box-continuity", worst, 1e-8)


def check_box_energy(ctx: VerificationContext) -> CheckResult:
    box = ctx.profiles.box
    report = energy_monitor(box, box.sources, ctx.config.p)
    constant = max(report.constant, report.x_constant)
    detail = f"C = {report.constant:.3f}, C_x = {report.x_constant:.3f}"
    return _within("box-energy", constant, ENERGY_CONSTANT_BOUND, detail)


def _duhamel_box(ctx: VerificationContext, spacing: float) -> BoxLayerSolution:
    config = ctx.config
    grid_X = Grid1D.symmetric(config.fast_length, spacing)
    grid_Z = Grid1D.from_length(config.fast_length, spacing)
    geometry = ctx.data.geometry()
    corner_jump = ctx.data.wall_trace().jump
    history = WallJumpHistory(corner_jump, grid_Z, n_sigma=config.n_sigma)
    times = ctx.profiles.store_times
    return solve_box_layer(
        JumpSources.from_history(history, geometry, times, grid_Z),
        KelvinHelmholtzWallTrace(corner_jump, geometry.wall_shear, grid_X, n_sigma=config.n_sigma),
        history,
        corner_jump,
        geometry,
        config.T,
        grid_X,
        grid_Z,
        store_times=times,
    )


def check_box_refinement(ctx: VerificationContext) -> CheckResult:
    p = ctx.config.p
    coarse = box_second_derivative_integrability(_duhamel_box(ctx, ctx.config.h_X), p)
    fine = box_second_derivative_integrability(_duhamel_box(ctx, ctx.config.h_X / 2.0), p)
    change = abs(fine - coarse) / max(abs(fine), 1e-300)
    return _within("box-refinement", change, 0.05, f"coarse {coarse:.5g}, refined {fine:.5g}")


def check_residual_rate(ctx: VerificationContext) -> CheckResult:
    """Slope of the time-integrated cross-flow residual over the sweep."""

    fit = fit_loglog_rate(ctx.study.series("residual_integral"))
    expected = expected_slopes(ctx.config.p)["residual_integral"]
    deviation = abs(fit.slope - expected)
    return CheckResult(
        name="residual-rate",
        passed=bool(deviation <= RESIDUAL_SLOPE_TOLERANCE and fit.r_squared >= MIN_R_SQUARED),
        measured=deviation,
        tolerance=RESIDUAL_SLOPE_TOLERANCE,
        detail=f"slope {fit.slope:.4f} (expected {expected:.4f}, r^2 {fit.r_squared:.4f})",
    )


def check_error_trends(ctx: VerificationContext) -> CheckResult:
    """``err_v`` falls along the sweep and the remainder of ``u`` is first order."""

    report = ctx.study
    err_v = [value for _, value in report.series("err_v_Lp")]
    monotone = all(later <= earlier * (1.0 + MONOTONE_SLACK) for earlier, later in zip(err_v, err_v[1:]))
    v_fit = fit_loglog_rate(report.series("err_v_Lp"))
    u_fit = fit_loglog_rate(report.series("err_u_vs_ansatz_L2"))
    return CheckResult(
        name="error-trends",
        passed=bool(monotone and v_fit.slope > 0 and u_fit.slope >= ANSATZ_ERROR_MIN_SLOPE),
        measured=u_fit.slope,
        tolerance=ANSATZ_ERROR_MIN_SLOPE,
        detail=(
            f"err_v {'decreasing' if monotone else 'not monotone'} with slope {v_fit.slope:.4f}; "
            f"err_u_vs_ansatz slope {u_fit.slope:.4f}"
        ),
    )


for _name, _check in (
    ("eu-order", check_eu_order),
    ("singular-order", check_singular_order),
    ("singular-order-p2", check_singular_order_p2),
    ("ansatz-compatibility", check_ansatz_compatibility),
    ("up-oracle", check_up_oracle),
    ("scaling-identity", check_scaling_identity),
    ("euler-conservation", check_euler_conservation),
    ("rescaled-time", check_rescaled_time),
    ("box-continuity", check_box_continuity),
    ("box-energy", check_box_energy),
    ("box-refinement", check_box_refinement),
    ("residual-rate", check_residual_rate),
    ("error-trends", check_error_trends),
):
    register_check(_name, _check)


def run_verification(
    names: Optional[Iterable[str]] = None,
    config: Optional[StudyConfig] = None,
    *,
    data: Optional[InitialData] = None,
    context: Optional[VerificationContext] = None,
) -> List[CheckResult]:
    """Run the named checks (all by default); a check that raises is reported as failed."""

    context = context or VerificationContext(config or reduced_config(), data)
    results: List[CheckResult] = []
    for name in names or list_checks():
        check = get_check(name)
        try:
            result = check(context)
        except Exception as exc:
            logger.warning("check %s raised %s: %s", name, type(exc).__name__, exc)
            result = CheckResult(name=name, passed=False, measured=math.nan, tolerance=math.nan, detail=str(exc))
        logger.info("check %s: %s (%s)", result.name, "ok" if result.passed else "FAILED", result.detail or result.measured)
        results.append(result)
    return results
