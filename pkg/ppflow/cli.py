"""Command line entry point: ``ppflow <profiles|solve|residuals|study|verify>``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from . import __version__
from .config import StudyConfig, resolve_config
from .errors import PPFlowError
from .flow import layer_grid
from .initial_data import default_initial_data, list_initial_data_presets
from .profiles import build_profiles
from .residuals import residual_report
from .study import dump_profiles, export_report, run_case, run_convergence_study
from .verification import list_checks, reduced_config, run_verification

__all__ = ["main", "build_parser"]

logger = logging.getLogger("ppflow")


def _epsilon_list(text: str) -> List[float]:
    try:
        values = [float(part) for part in text.replace(",", " ").split() if part]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}") from exc
    if not values:
        raise argparse.ArgumentTypeError("at least one epsilon is required")
    return values


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="Flat TOML file of study keys.")
    common.add_argument("--preset", default=None, help=f"Initial data preset ({', '.join(list_initial_data_presets())}).")
    common.add_argument("--epsilon", type=_epsilon_list, default=None, help="Comma-separated viscosities.")
    common.add_argument("--p", type=float, default=None, help="Integrability exponent.")
    common.add_argument("--out", type=Path, default=None, help="Output directory.")
    common.add_argument("--format", choices=("csv", "json"), default=None, help="Report format.")
    common.add_argument("--workers", type=int, default=None, help="Concurrent epsilon cases.")
    common.add_argument("--mode", choices=("main", "singular"), default=None, help="Study mode.")
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="Log per-step details.")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="Only log warnings and errors.")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = argparse.ArgumentParser(prog="ppflow", description="Layer profiles and inviscid-limit studies.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("profiles", parents=[common], help="Build the layer profiles and dump every snapshot.")
    commands.add_parser("solve", parents=[common], help="Viscous solve and error norms for one epsilon.")
    commands.add_parser("residuals", parents=[common], help="Residual norms for one epsilon.")
    commands.add_parser("study", parents=[common], help="Run the full epsilon sweep and export the report.")
    verify = commands.add_parser("verify", parents=[common], help="Run the invariant checks on a reduced grid.")
    verify.add_argument("--check", action="append", choices=list_checks(), default=None, help="Check to run. Repeatable.")
    return parser


def _configure_logging(args: argparse.Namespace) -> None:
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(format="[ppflow] %(levelname)s %(name)s: %(message)s", level=level, stream=sys.stderr)


def _config_from(args: argparse.Namespace) -> StudyConfig:
    overrides: Dict[str, Any] = {
        "preset": args.preset,
        "epsilons": args.epsilon,
        "p": args.p,
        "output_format": args.format,
        "max_workers": args.workers,
        "mode": args.mode,
        "output_dir": str(args.out) if args.out is not None else None,
    }
    return resolve_config(args.config, overrides)


def _write_json(payload: Dict[str, Any], config: StudyConfig, name: str) -> Path:
    target = Path(config.output_dir) / name
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return target


def _cmd_profiles(config: StudyConfig) -> int:
    data = default_initial_data(config.preset)
    profiles = build_profiles(data, config)
    keys = dump_profiles(profiles, Path(config.output_dir) / "profiles")
    print(f"{len(keys)} snapshots, fingerprint {profiles.fingerprint}")
    return 0


def _cmd_solve(config: StudyConfig) -> int:
    epsilon = config.epsilons[-1]
    data = default_initial_data(config.preset)
    result = run_case(build_profiles(data, config), data, config, epsilon)
    path = _write_json(result.to_dict(), config, f"case_eps{epsilon:.3e}.json")
    print(json.dumps(result.to_dict(), sort_keys=True, indent=2))
    logger.info("case written to %s", path)
    return 0 if result.succeeded else 1


def _cmd_residuals(config: StudyConfig) -> int:
    epsilon = config.epsilons[-1]
    data = default_initial_data(config.preset)
    profiles = build_profiles(data, config)
    report = residual_report(
        profiles,
        data,
        epsilon,
        config.p,
        grid=layer_grid(profiles.grids, epsilon),
        singular_only=config.mode.value == "singular",
    )
    path = _write_json(report.to_dict(), config, f"residuals_eps{epsilon:.3e}.json")
    print(f"eps={epsilon:.3e}  int ||E^v||^p dt = {report.ev_integral:.6e}  C_in = {report.c_in:.6e}")
    print(f"sup ||E^u|| = {report.eu_sup:.6e}  sup singular = {report.singular_sup:.6e}")
    logger.info("residual report written to %s", path)
    return 0


def _cmd_study(config: StudyConfig) -> int:
    report = run_convergence_study(config, logger=logger.info)
    target = Path(config.output_dir) / f"report.{config.output_format}"
    export_report(report, config.output_format, target)
    for name, fit in sorted({**report.slopes, **report.flagged}.items()):
        marker = "" if name in report.slopes else "  (flagged)"
        print(f"{name:>22}: slope {fit.slope:+.4f}  r^2 {fit.r_squared:.4f}{marker}")
    for note in report.notes:
        print(f"note: {note}")
    return 1 if report.failed else 0


def _cmd_verify(config: StudyConfig, checks: Optional[Sequence[str]]) -> int:
    results = run_verification(checks, reduced_config(config))
    for result in results:
        status = "ok" if result.passed else "FAIL"
        print(f"[{status:>4}] {result.name:<22} measured {result.measured:.3e}  tol {result.tolerance:.1e}  {result.detail}")
    failed = [result.name for result in results if not result.passed]
    if failed:
        print(f"{len(failed)} check(s) failed: {', '.join(failed)}")
        return 1
    print(f"all {len(results)} checks passed")
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args)
    try:
        config = _config_from(args)
        if args.command == "profiles":
            return _cmd_profiles(config)
        if args.command == "solve":
            return _cmd_solve(config)
        if args.command == "residuals":
            return _cmd_residuals(config)
        if args.command == "study":
            return _cmd_study(config)
        return _cmd_verify(config, args.check)
    except PPFlowError as exc:
        logger.error("%s (%s)", exc.message, exc.code)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
