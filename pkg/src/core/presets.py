"""Built-in and config-defined building blocks for experiment descriptors.

Every value an experiment names (a state, an angle set, a parity scenario,
a measurement setting, an observable or a detection model) is either a
preset name from presets.json / the built-in tables, or an inline mapping.
"""
import logging
import math
import re
from typing import Any, Callable, Dict, Mapping, Optional, Sequence

import numpy as np

from src.core.bell import ParityScenario
from src.core.errors import ConfigError
from src.core.hilbert import StateVector, ghz_state, singlet_state
from src.core.statespace import (MeasurementSetting, Observable, observable_from_matrices,
                                 pauli_observable, spin_observable)
from src.models.detection import DetectionModel
from src.models.factory import BUILTIN_MODELS, create_model
from src.utils.config_manager import ConfigManager

ANGLE_KEYS = ("a", "a_prime", "b", "b_prime")

BUILTIN_STATES: Dict[str, Callable[[], StateVector]] = {
    "singlet": singlet_state,
    "ghz": ghz_state,
    "phi-plus": lambda: StateVector(np.array([1, 0, 0, 1]) / math.sqrt(2), (2, 2)),
    "up-up": lambda: StateVector.basis(0, 4),
}

_SPIN_ALONG = re.compile(
    r"^spin-along\(\s*([-+]?[\d.]+(?:e[-+]?\d+)?)\s*(?:,\s*([-+]?[\d.]+(?:e[-+]?\d+)?)\s*)?\)$")


def parse_amplitude(value: Any) -> complex:
    """A number, a [re, im] pair or a complex literal such as "0.5-0.5j" """
    if isinstance(value, bool):
        raise ConfigError(f"amplitude must be numeric, got {value!r}")
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    if isinstance(value, str):
        try:
            return complex(value.replace(" ", ""))
        except ValueError:
            pass
    raise ConfigError(f"cannot read amplitude {value!r}")


class PresetLibrary:
    def __init__(self, config: ConfigManager):
        self.logger = logging.getLogger("SRLab.Config")
        self.config = config

    def _preset(self, section: str, name: str) -> Optional[Mapping[str, Any]]:
        entry = self.config.get_preset(f"{section}.{name}")
        return entry if isinstance(entry, Mapping) else None

    def state(self, spec: Any) -> StateVector:
        """Named state or {"amplitudes": [...], "dims": [...], "normalize": bool}"""
        if isinstance(spec, str):
            entry = self._preset("states", spec)
            if entry is not None and "amplitudes" in entry:
                return self.state(entry)
            if spec in BUILTIN_STATES:
                return BUILTIN_STATES[spec]()
            raise ConfigError(f"unknown state {spec!r}")

        if isinstance(spec, Mapping) and "amplitudes" in spec:
            amplitudes = [parse_amplitude(a) for a in spec["amplitudes"]]
            dims = tuple(spec.get("dims", ()))
            if spec.get("normalize", False):
                return StateVector.from_unnormalized(amplitudes, dims)
            return StateVector(np.array(amplitudes), dims)

        raise ConfigError(f"state must be a name or an amplitude list, got {spec!r}")

    def angles(self, spec: Any) -> Dict[str, float]:
        """CHSH plane angles in degrees"""
        if isinstance(spec, str):
            entry = self._preset("angle_sets", spec)
            if entry is None:
                raise ConfigError(f"unknown angle set {spec!r}")
            spec = entry
        if not isinstance(spec, Mapping):
            raise ConfigError(f"angles must be a name or a mapping, got {spec!r}")

        missing = [k for k in ANGLE_KEYS if k not in spec]
        if missing:
            raise ConfigError(f"angle set is missing {missing}")
        return {k: float(spec[k]) for k in ANGLE_KEYS}

    def scenario(self, spec: Any) -> ParityScenario:
        if isinstance(spec, str):
            entry = self._preset("scenarios", spec)
            if entry is None:
                raise ConfigError(f"unknown parity scenario {spec!r}")
            spec = entry
        if not isinstance(spec, Mapping) or "contexts" not in spec or "parities" not in spec:
            raise ConfigError(f"scenario needs contexts and parities, got {spec!r}")
        try:
            return ParityScenario(tuple(spec["contexts"]), tuple(spec["parities"]))
        except ValueError as e:
            raise ConfigError(f"invalid parity scenario: {e}") from e

    def setting(self, spec: Any, party: str = "A") -> MeasurementSetting:
        """{"party", "theta", "phi", "label"} or {"party", "pauli"}"""
        if not isinstance(spec, Mapping):
            raise ConfigError(f"setting must be a mapping, got {spec!r}")
        party = str(spec.get("party", party))
        try:
            if "pauli" in spec:
                return MeasurementSetting.pauli(party, str(spec["pauli"]))
            if "axis" in spec:
                return MeasurementSetting(party, tuple(spec["axis"]), str(spec.get("label", "")))
            return MeasurementSetting.from_angles(party, float(spec.get("theta", 0.0)),
                                                  float(spec.get("phi", 0.0)), spec.get("label"))
        except ValueError as e:
            raise ConfigError(f"invalid measurement setting: {e}") from e

    def direction(self, spec: Any) -> Sequence[float]:
        """Unit 3-vector from a list or from {"theta", "phi"} in degrees"""
        if isinstance(spec, Mapping):
            return MeasurementSetting.from_angles("A", float(spec.get("theta", 0.0)),
                                                  float(spec.get("phi", 0.0))).axis
        if isinstance(spec, (list, tuple)) and len(spec) == 3:
            vector = np.array(spec, dtype=float)
            norm = np.linalg.norm(vector)
            if norm == 0:
                raise ConfigError("direction must be a nonzero vector")
            return tuple(vector / norm)
        raise ConfigError(f"direction must be a 3-vector or angles, got {spec!r}")

    def observable(self, spec: Any) -> Observable:
        """"spin-along(theta, phi)", a Pauli name or explicit projector matrices"""
        if isinstance(spec, str):
            match = _SPIN_ALONG.match(spec.strip())
            if match:
                theta = float(match.group(1))
                phi = float(match.group(2) or 0.0)
                axis = MeasurementSetting.from_angles("A", theta, phi).axis
                return spin_observable(axis, spec.strip())
            if spec.upper() in ("X", "Y", "Z", "SIGMA_X", "SIGMA_Y", "SIGMA_Z"):
                return pauli_observable(spec.upper()[-1])
            raise ConfigError(f"unknown observable {spec!r}")

        if isinstance(spec, Mapping) and "projectors" in spec:
            matrices = [[[parse_amplitude(x) for x in row] for row in m] for m in spec["projectors"]]
            return observable_from_matrices(str(spec.get("label", "observable")),
                                            spec["eigenvalues"], matrices,
                                            float(spec.get("a0", 0.0)))

        raise ConfigError(f"observable must be a name or projector matrices, got {spec!r}")

    def model(self, spec: Any, context_parities: Optional[Mapping[str, int]] = None) -> DetectionModel:
        """Built-in model, preset alias (table or script) or inline definition"""
        if isinstance(spec, str) and spec not in BUILTIN_MODELS:
            entry = self._preset("models", spec)
            if entry is not None and ("table" in entry or "script" in entry):
                spec = entry
        return create_model(spec, context_parities, str(self.config.models_dir))

    def describe(self) -> Dict[str, Dict[str, str]]:
        """Name -> description for every preset section"""
        listing: Dict[str, Dict[str, str]] = {}
        models = {name: cls.description for name, cls in BUILTIN_MODELS.items()}
        for name, entry in (self.config.get_preset("models") or {}).items():
            models[name] = entry.get("description", models.get(name, ""))
        listing["models"] = models

        for section in ("angle_sets", "scenarios", "states"):
            listing[section] = {name: entry.get("description", "")
                                for name, entry in (self.config.get_preset(section) or {}).items()}
        for name in BUILTIN_STATES:
            listing["states"].setdefault(name, "built-in state")
        return listing
