from __future__ import annotations

import json
from pathlib import Path

import pytest

from ppflow.cli import build_parser, main

TINY_TOML = """
T = 0.25
epsilons = [0.01, 0.001]
h_x = 0.125
h_z = 0.125
h_X = 0.25
h_Z = 0.25
fast_length = 4.0
L_x = 2.0
L_z = 2.0
n_store = 3
n_sigma = 33
"""


@pytest.fixture
def tiny_toml(tmp_path: Path) -> Path:
    path = tmp_path / "tiny.toml"
    path.write_text(TINY_TOML, encoding="utf-8")
    return path


def test_parser_accepts_common_options() -> None:
    args = build_parser().parse_args(["study", "--epsilon", "1e-2,1e-3", "--p", "1.25", "-q"])
    assert args.command == "study"
    assert args.epsilon == [1e-2, 1e-3]
    assert args.quiet and not args.verbose


def test_verbose_and_quiet_are_exclusive() -> None:
    with pytest.raises(SystemExit):
        build_parser().parse_args(["study", "-v", "-q"])


def test_invalid_exponent_exits_with_config_error() -> None:
    assert main(["residuals", "--p", "2.5"]) == 2


def test_verify_single_check(capsys: pytest.CaptureFixture[str]) -> None:
    assert main(["verify", "--check", "rescaled-time", "-q"]) == 0
    assert "all 1 checks passed" in capsys.readouterr().out


def test_profiles_command_dumps_snapshots(tiny_toml: Path, tmp_path: Path) -> None:
    out = tmp_path / "out"

    assert main(["profiles", "--config", str(tiny_toml), "--out", str(out), "-q"]) == 0

    sidecar = json.loads((out / "profiles" / "U_P_t0.json").read_text(encoding="utf-8"))
    assert sidecar["dtype"] == "<f8"
    assert (out / "profiles" / "V_b_t2.bin").exists()


def test_residuals_command_writes_report(tiny_toml: Path, tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    out = tmp_path / "out"

    assert main(["residuals", "--config", str(tiny_toml), "--out", str(out), "--mode", "singular", "-q"]) == 0

    payload = json.loads((out / "residuals_eps1.000e-03.json").read_text(encoding="utf-8"))
    assert payload["epsilon"] == pytest.approx(1e-3)
    assert payload["ev_norms"] == []
    assert "sup singular" in capsys.readouterr().out
