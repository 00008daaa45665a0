import json
from typing import Dict, Any, Optional
from pathlib import Path
import logging
import definitions

from src.core.errors import ConfigError


class ConfigManager:
    def __init__(self, config_dir: str = definitions.CONFIG_DIR):
        self.logger = logging.getLogger("SRLab.Config")
        self.config_dir = Path(config_dir)
        self.settings: Dict[str, Any] = {}
        self.presets: Dict[str, Any] = {}
        self.load_configs()

    def load_configs(self):
        """Load settings.json and presets.json"""
        self.settings = self._read_json(self.config_dir / "settings.json")
        self.presets = self._read_json(self.config_dir / "presets.json")
        self.logger.debug(f"Configuration loaded from {self.config_dir}")

    def _read_json(self, path: Path) -> Dict[str, Any]:
        try:
            with open(path, 'r', encoding='utf-8') as f:
                data = json.load(f)
        except FileNotFoundError as e:
            self.logger.error(f"Config file not found: {e}")
            raise ConfigError(f"config file not found: {path}") from e
        except json.JSONDecodeError as e:
            self.logger.error(f"Malformed config file {path}: {e}")
            raise ConfigError(f"{path}: malformed JSON: {e}") from e

        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be an object")
        return data

    @staticmethod
    def _lookup(tree: Dict[str, Any], path: str, default: Any) -> Any:
        try:
            value = tree
            for key in path.split('.'):
                value = value[key]
            return value
        except (KeyError, TypeError):
            return default

    def get_setting(self, path: str, default: Any = None) -> Any:
        """Setting by dot path
        Example: config.get_setting("ensemble.block_size")
        """
        return self._lookup(self.settings, path, default)

    def get_preset(self, path: str, default: Any = None) -> Any:
        """Preset by dot path
        Example: config.get_preset("angle_sets.chsh-optimal")
        """
        return self._lookup(self.presets, path, default)

    def load_experiment(self, path: str) -> Dict[str, Any]:
        """Read an experiment descriptor; relative paths are tried against the config dir"""
        experiment_path = Path(path)
        if not experiment_path.exists() and not experiment_path.is_absolute():
            candidate = self.config_dir / "experiments" / experiment_path
            if candidate.exists():
                experiment_path = candidate
        data = self._read_json(experiment_path)
        self.logger.info(f"Experiment loaded: {experiment_path}")
        return data

    @property
    def models_dir(self) -> Path:
        return self.config_dir / self.get_setting("paths.models_dir", "models")

    def validate_configs(self) -> bool:
        """Check that the required settings and presets exist"""
        required_settings = [
            "lab.tool_version",
            "ensemble.block_size",
            "ensemble.workers",
            "experiments.default_trials",
            "logging.log_dir",
        ]
        for setting in required_settings:
            if self.get_setting(setting) is None:
                self.logger.error(f"Missing required setting: {setting}")
                return False

        required_presets = ["models", "angle_sets", "scenarios", "states"]
        for preset in required_presets:
            if self.get_preset(preset) is None:
                self.logger.error(f"Missing preset section: {preset}")
                return False

        return True
