import json
import math
import shutil

import numpy as np
import pytest

import definitions
from src.core.hilbert import StateVector
from src.core.lab import SRLab
from src.utils.config_manager import ConfigManager

SQRT_HALF = 1 / math.sqrt(2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def up():
    return StateVector.basis(0, 2)


@pytest.fixture
def down():
    return StateVector.basis(1, 2)


@pytest.fixture
def plus():
    return StateVector(np.array([SQRT_HALF, SQRT_HALF]))


@pytest.fixture
def config_dir(tmp_path):
    """Copy of the shipped config with logs redirected into tmp_path"""
    target = tmp_path / "config"
    shutil.copytree(definitions.CONFIG_DIR, target)

    settings_path = target / "settings.json"
    settings = json.loads(settings_path.read_text(encoding="utf-8"))
    settings["logging"]["log_dir"] = str(tmp_path / "logs")
    settings["logging"]["console_output"] = False
    settings["ensemble"]["block_size"] = 4096
    settings_path.write_text(json.dumps(settings, indent=4), encoding="utf-8")
    return target


@pytest.fixture
def config(config_dir):
    return ConfigManager(str(config_dir))


@pytest.fixture
def lab(config):
    return SRLab(config)
