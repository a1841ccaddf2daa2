"""
Pytest configuration and fixtures for the CESTRADE test suite.
"""

import logging
import os
import sys

import numpy as np
import pytest
import yaml

# Add parent directory to path for imports
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from CESTRADE.core.scenario import (  # noqa: E402
    CommunitySettings,
    build_scenario,
    synthesize_scenario,
)
from CESTRADE.models import CesParams, Tariff, TimeGrid, UserProfile  # noqa: E402

# Four slots: all-deficit, all-surplus, all-deficit, mixed.
TINY_PROFILES = [
    {
        "id": 0,
        "demand": [1.0, 1.0, 2.0, 2.0],
        "generation": [0.0, 3.0, 0.0, 3.0],
        "participating": True,
    },
    {
        "id": 1,
        "demand": [1.0, 1.0, 1.0, 2.0],
        "generation": [0.0, 2.0, 0.0, 0.0],
        "participating": True,
    },
    {
        "id": 2,
        "demand": [2.0, 4.0, 3.0, 3.0],
        "generation": [0.0, 0.0, 0.0, 0.0],
        "participating": False,
    },
]
TINY_PHI = [1.0, 1.0, 1.5, 1.5]
TINY_DELTA = [10.0, 10.0, 10.0, 10.0]


def tiny_ces(capacity: float = 10.0) -> CesParams:
    """Lossy storage with no leakage, filled to a quarter."""
    return CesParams(Q_M=capacity, q0=0.25 * capacity, alpha=1.0, beta_plus=0.95, beta_minus=1.05)


@pytest.fixture
def tiny_scenario():
    """Two participants and one non-participant over four slots with an explicit tariff."""
    return build_scenario(
        TimeGrid(H=4, dt=0.5, peak_window=(2, 4)),
        [UserProfile.from_dict(p) for p in TINY_PROFILES],
        tiny_ces(),
        tariff=Tariff(phi=TINY_PHI, delta=TINY_DELTA),
        L_max=20.0,
    )


@pytest.fixture
def tiny_config_data():
    """Scenario document describing the tiny scenario."""
    return {
        "grid": {"slots": 4, "slot_hours": 0.5, "peak_window": [2, 4], "max_load": 20.0},
        "tariff": {"phi": list(TINY_PHI), "delta": list(TINY_DELTA)},
        "ces": {
            "capacity": 10.0,
            "initial_charge": 2.5,
            "alpha": 1.0,
            "beta_plus": 0.95,
            "beta_minus": 1.05,
        },
        "users": {"seed": 3, "profiles": [dict(p) for p in TINY_PROFILES]},
        "solver": {"tau": 0.002, "max_rounds": 20},
    }


@pytest.fixture
def tiny_config_file(tmp_path, tiny_config_data):
    """The tiny scenario written as a YAML file."""
    path = tmp_path / "tiny.yaml"
    path.write_text(yaml.safe_dump(tiny_config_data, sort_keys=False), encoding="utf-8")
    return path


@pytest.fixture
def small_settings():
    """Default community settings with ten households."""
    return CommunitySettings(user_count=10)


@pytest.fixture
def small_community(small_settings):
    """A synthetic ten-household community with 40% participation."""
    return synthesize_scenario(seed=11, participation=0.4, settings=small_settings)


@pytest.fixture(scope="session")
def default_community():
    """The default 40-household synthetic community."""
    return synthesize_scenario(seed=7, participation=0.4)


@pytest.fixture
def rng():
    """Seeded random generator."""
    return np.random.default_rng(1234)


@pytest.fixture
def restore_logging():
    """Put the root logger back the way the test found it."""
    root = logging.getLogger()
    handlers, level = root.handlers[:], root.level
    yield root
    for handler in root.handlers[:]:
        root.removeHandler(handler)
        if handler not in handlers:
            handler.close()
    for handler in handlers:
        root.addHandler(handler)
    root.setLevel(level)
    logging.captureWarnings(False)
