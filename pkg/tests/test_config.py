from __future__ import annotations

import unittest
from pathlib import Path

import pytest

from ppflow.config import DEFAULT_EPSILONS, StudyConfig, StudyMode, load_config, resolve_config
from ppflow.errors import ConfigError


class StudyConfigTests(unittest.TestCase):
    def test_defaults(self) -> None:
        config = StudyConfig()
        self.assertEqual(config.p, 1.5)
        self.assertEqual(config.epsilons, DEFAULT_EPSILONS)
        self.assertIs(config.mode, StudyMode.MAIN)
        self.assertEqual(config.output_format, "csv")

    def test_epsilons_are_sorted_descending(self) -> None:
        config = StudyConfig(epsilons=(1e-4, 1e-2, 1e-3))
        self.assertEqual(config.epsilons, (1e-2, 1e-3, 1e-4))

    def test_main_mode_needs_p_below_two(self) -> None:
        with self.assertRaises(ConfigError):
            StudyConfig(p=2.0)
        config = StudyConfig(p=2.0, mode="singular")
        self.assertIs(config.mode, StudyMode.SINGULAR)

    def test_invalid_values(self) -> None:
        for changes in (
            {"p": 1.0},
            {"epsilons": (1e-2, 1e-2)},
            {"epsilons": ()},
            {"n_store": 1},
            {"n_sigma": 64},
            {"profile_method": "spectral"},
            {"output_format": "xml"},
            {"max_workers": 0},
            {"h_x": 0.0},
            {"box_dt": -1.0},
            {"mode": "other"},
        ):
            with self.subTest(changes=changes):
                with self.assertRaises(ConfigError):
                    StudyConfig(**changes)

    def test_mapping_round_trip_and_string_lists(self) -> None:
        config = StudyConfig.from_mapping({"epsilons": "1e-2, 1e-3 1e-4", "n_store": 5.0, "mode": "singular", "p": "2.5"})
        self.assertEqual(config.epsilons, (1e-2, 1e-3, 1e-4))
        self.assertEqual(config.n_store, 5)
        self.assertEqual(StudyConfig.from_mapping(config.to_dict()), config)

    def test_mapping_rejects_unknown_keys_and_bad_values(self) -> None:
        with self.assertRaises(ConfigError):
            StudyConfig.from_mapping({"viscosity": 1.0})
        with self.assertRaises(ConfigError):
            StudyConfig.from_mapping({"n_store": 2.5})
        with self.assertRaises(ConfigError):
            StudyConfig.from_mapping({"T": "soon"})


def test_load_and_override(tmp_path: Path) -> None:
    path = tmp_path / "study.toml"
    path.write_text('p = 1.25\nepsilons = [0.01, 0.001, 0.0001]\noutput_format = "json"\n', encoding="utf-8")

    config = resolve_config(path, {"p": None, "max_workers": 4})

    assert config.p == 1.25
    assert config.epsilons == (1e-2, 1e-3, 1e-4)
    assert config.output_format == "json"
    assert config.max_workers == 4
    assert load_config(path).max_workers == 2


def test_config_files_are_flat(tmp_path: Path) -> None:
    path = tmp_path / "nested.toml"
    path.write_text("[grid]\nh_x = 0.1\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(path)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.toml")
