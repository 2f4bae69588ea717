"""Layer profiles, viscous solves and convergence studies for plane-parallel flows."""

__version__ = "0.1.0"

from .box_layer import (
    EnergyMonitorReport,
    JumpSources,
    SkewOperator,
    box_second_derivative_integrability,
    compute_J_pm,
    energy_monitor,
    solve_box_layer,
)
from .calculus import fd_derivative, lp_norm, sample_pchip, w1p_norm
from .config import StudyConfig, StudyMode, load_config, resolve_config
from .errors import (
    CFLViolation,
    ConfigError,
    DomainError,
    GridError,
    InitialDataError,
    PPFlowError,
    StabilityError,
)
from .flow import AnsatzField, ShearedField2D, TrajectoryField, assemble_ansatz, euler_solution, layer_grid, solve_depleted_ns
from .grids import Field1D, Grid1D, Grid2D, LayerAxis, TimeSeries, TwoSidedField2D
from .initial_data import (
    InitialData,
    InterfaceGeometry,
    default_initial_data,
    get_initial_data_preset,
    list_initial_data_presets,
    load_initial_data,
    register_initial_data_preset,
)
from .kernels import duhamel_exponential, heat_kernel_free, heat_kernel_halfline
from .models import CaseResult, ConvergenceReport
from .orchestration import CaseScheduler, CaseSpec, CaseState, InProcessCaseScheduler
from .profiles import ProfileMethod, ProfileSet, build_profiles, profile_norm_report, solve_Up, solve_Vkh, solve_Vp
from .rates import RateFit, fit_loglog_rate
from .residuals import (
    ResidualReport,
    compute_Eu,
    compute_Ev,
    direct_residual_u,
    direct_residual_v,
    residual_report,
    scaling_check,
    singular_term_norm,
)
from .storage import InMemoryStorage, LocalDirectoryStorage, StorageAdapter, StorageAdapterRegistry, StorageObject
from .study import (
    dump_profiles,
    export_report,
    import_report,
    read_snapshot,
    render_report,
    run_case,
    run_convergence_study,
    run_convergence_study_async,
)
from .verification import CheckResult, list_checks, register_check, run_verification

__all__ = [
    "__version__",
    "AnsatzField",
    "CFLViolation",
    "CaseResult",
    "CaseScheduler",
    "CaseSpec",
    "CaseState",
    "CheckResult",
    "ConfigError",
    "ConvergenceReport",
    "DomainError",
    "EnergyMonitorReport",
    "Field1D",
    "Grid1D",
    "Grid2D",
    "GridError",
    "InMemoryStorage",
    "InProcessCaseScheduler",
    "InitialData",
    "InitialDataError",
    "InterfaceGeometry",
    "JumpSources",
    "LayerAxis",
    "LocalDirectoryStorage",
    "PPFlowError",
    "ProfileMethod",
    "ProfileSet",
    "RateFit",
    "ResidualReport",
    "ShearedField2D",
    "SkewOperator",
    "StabilityError",
    "StorageAdapter",
    "StorageAdapterRegistry",
    "StorageObject",
    "StudyConfig",
    "StudyMode",
    "TimeSeries",
    "TrajectoryField",
    "TwoSidedField2D",
    "assemble_ansatz",
    "box_second_derivative_integrability",
    "build_profiles",
    "compute_Eu",
    "compute_Ev",
    "compute_J_pm",
    "default_initial_data",
    "direct_residual_u",
    "direct_residual_v",
    "dump_profiles",
    "duhamel_exponential",
    "energy_monitor",
    "euler_solution",
    "export_report",
    "fd_derivative",
    "fit_loglog_rate",
    "get_initial_data_preset",
    "heat_kernel_free",
    "heat_kernel_halfline",
    "import_report",
    "layer_grid",
    "list_checks",
    "list_initial_data_presets",
    "load_config",
    "load_initial_data",
    "lp_norm",
    "profile_norm_report",
    "read_snapshot",
    "register_check",
    "register_initial_data_preset",
    "render_report",
    "residual_report",
    "resolve_config",
    "run_case",
    "run_convergence_study",
    "run_convergence_study_async",
    "run_verification",
    "sample_pchip",
    "scaling_check",
    "singular_term_norm",
    "solve_Up",
    "solve_Vkh",
    "solve_Vp",
    "solve_box_layer",
    "solve_depleted_ns",
    "w1p_norm",
]
