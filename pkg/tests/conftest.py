from __future__ import annotations

import pytest

from ppflow.config import StudyConfig
from ppflow.initial_data import InitialData, default_initial_data
from ppflow.profiles import ProfileSet, build_profiles

TINY = StudyConfig(
    T=0.25,
    epsilons=(1e-2, 10**-2.5, 1e-3),
    h_x=1.0 / 8,
    h_z=1.0 / 8,
    h_X=1.0 / 4,
    h_Z=1.0 / 4,
    fast_length=4.0,
    L_x=2.0,
    L_z=2.0,
    n_store=3,
    n_sigma=33,
)


@pytest.fixture(scope="session")
def tiny_config() -> StudyConfig:
    return TINY


@pytest.fixture(scope="session")
def data() -> InitialData:
    return default_initial_data("gaussian-jump")


@pytest.fixture(scope="session")
def profiles(data: InitialData, tiny_config: StudyConfig) -> ProfileSet:
    return build_profiles(data, tiny_config)
