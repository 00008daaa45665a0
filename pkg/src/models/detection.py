import logging
from abc import ABC, abstractmethod
from typing import Any, Dict, List, Mapping, Sequence, Tuple

import numpy as np

from src.core.errors import ModelError
from src.core.statespace import MeasurementSetting

_GOLDEN = (1 + 5 ** 0.5) / 2

# Twelve icosahedron vertices; the singlet models bin lambda by nearest vertex
ICOSAHEDRON = np.array([
    (0, 1, _GOLDEN), (0, -1, _GOLDEN), (0, 1, -_GOLDEN), (0, -1, -_GOLDEN),
    (1, _GOLDEN, 0), (-1, _GOLDEN, 0), (1, -_GOLDEN, 0), (-1, -_GOLDEN, 0),
    (_GOLDEN, 0, 1), (-_GOLDEN, 0, 1), (_GOLDEN, 0, -1), (-_GOLDEN, 0, -1),
]) / np.sqrt(1 + _GOLDEN ** 2)


class DetectionModel(ABC):
    """Local deterministic hidden-variable model with a no-registration rule.

    Every method works on a batch of hidden states: `hidden` is an array whose
    first axis runs over physical objects.
    """

    name: str = "abstract"
    description: str = ""
    parties: Tuple[str, ...] = ()
    deterministic: bool = True

    def __init__(self):
        self.logger = logging.getLogger("SRLab.Models")

    @abstractmethod
    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """Draw the hidden data of n objects"""

    @abstractmethod
    def cells(self, hidden: np.ndarray) -> np.ndarray:
        """Index of the microscopic cell each object belongs to"""

    @abstractmethod
    def value_map(self, hidden: np.ndarray, setting: MeasurementSetting) -> np.ndarray:
        """Predetermined outcome of each object, detection ignored"""

    @abstractmethod
    def detect_probability(self, hidden: np.ndarray, setting: MeasurementSetting) -> np.ndarray:
        """Probability that the apparatus for setting reacts to each object"""

    def detect_flags(self, hidden: np.ndarray, settings: Sequence[MeasurementSetting],
                     draws: np.ndarray) -> np.ndarray:
        """Detection flag per object and setting; draws has one column per setting"""
        columns = [draws[:, j] < self.detect_probability(hidden, s)
                   for j, s in enumerate(settings)]
        return np.column_stack(columns)

    def _check_party(self, setting: MeasurementSetting):
        if setting.party not in self.parties:
            raise ModelError(f"{self.name} has no party {setting.party}")

    def describe(self) -> Dict[str, Any]:
        return {"name": self.name, "parties": list(self.parties),
                "description": self.description}


class SingletReferenceModel(DetectionModel):
    name = "singlet-reference"
    description = ("lambda uniform on the sphere; A = -sign(a.l) detected with "
                   "probability |a.l|, B = sign(b.l) always detected")
    parties = ("A", "B")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        v = rng.normal(size=(n, 3))
        return v / np.linalg.norm(v, axis=1, keepdims=True)

    def cells(self, hidden: np.ndarray) -> np.ndarray:
        return np.argmax(hidden @ ICOSAHEDRON.T, axis=1)

    def _projection(self, hidden: np.ndarray, setting: MeasurementSetting) -> np.ndarray:
        self._check_party(setting)
        return hidden @ setting.axis_array

    def value_map(self, hidden: np.ndarray, setting: MeasurementSetting) -> np.ndarray:
        sign = np.where(self._projection(hidden, setting) >= 0.0, 1.0, -1.0)
        return -sign if setting.party == "A" else sign

    def detect_probability(self, hidden: np.ndarray, setting: MeasurementSetting) -> np.ndarray:
        projection = self._projection(hidden, setting)
        if setting.party == "A":
            return np.minimum(np.abs(projection), 1.0)
        return np.ones(len(hidden))


class AlwaysDetectModel(SingletReferenceModel):
    name = "always-detect"
    description = "same value maps as singlet-reference, every object detected"

    def detect_probability(self, hidden: np.ndarray, setting: MeasurementSetting) -> np.ndarray:
        self._check_party(setting)
        return np.ones(len(hidden))


class GhzContextualModel(DetectionModel):
    """Six predetermined +-1 values (X and Y per party), uniformly random.

    Detection happens at coincidence level: the apparatus triple registers a
    run iff the values satisfy the parity required for the measured context.
    """

    name = "ghz-contextual"
    description = ("uniform random X/Y values for three parties; the triple is "
                   "detected iff the measured context's parity holds")
    parties = ("A", "B", "C")

    def __init__(self, context_parities: Mapping[str, int]):
        super().__init__()
        self.context_parities = {str(k).upper(): int(v) for k, v in context_parities.items()}

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return (rng.integers(0, 2, size=(n, 6)) * 2 - 1).astype(np.int8)

    def cells(self, hidden: np.ndarray) -> np.ndarray:
        bits = (hidden > 0).astype(np.int64)
        return bits @ (1 << np.arange(6))

    def _column(self, setting: MeasurementSetting) -> int:
        self._check_party(setting)
        if setting.label not in ("X", "Y"):
            raise ModelError(f"{self.name} only predetermines X and Y, got {setting.label}")
        return self.parties.index(setting.party) * 2 + (0 if setting.label == "X" else 1)

    def value_map(self, hidden: np.ndarray, setting: MeasurementSetting) -> np.ndarray:
        return hidden[:, self._column(setting)].astype(float)

    def detect_probability(self, hidden: np.ndarray, setting: MeasurementSetting) -> np.ndarray:
        raise ModelError(f"{self.name} detects triples jointly, not single parties")

    def detect_flags(self, hidden: np.ndarray, settings: Sequence[MeasurementSetting],
                     draws: np.ndarray) -> np.ndarray:
        if tuple(s.party for s in settings) != self.parties:
            raise ModelError(f"{self.name} needs one setting per party A, B, C")
        context = "".join(s.label for s in settings)
        if context not in self.context_parities:
            raise ModelError(f"{self.name} has no parity rule for context {context}")

        parity = np.prod([self.value_map(hidden, s) for s in settings], axis=0)
        hit = parity == self.context_parities[context]
        return np.column_stack([hit] * len(settings))


class TableModel(DetectionModel):
    """Finite microstate space given as a table.

    definition = {
        "name": str, "parties": [...],
        "microstates": [{"weight": w, "values": {"A:a": +1, ...},
                         "detect": {"A:a": p, ...}}, ...]
    }
    Missing detect entries mean the object is always detected.
    """

    description = "finite microstate table"

    def __init__(self, definition: Mapping[str, Any]):
        super().__init__()
        self.name = str(definition.get("name", "table"))
        self.parties = tuple(definition.get("parties", ("A", "B")))

        rows: List[Mapping[str, Any]] = list(definition.get("microstates", []))
        if not rows:
            raise ModelError(f"{self.name}: a table model needs at least one microstate")

        weights = np.array([float(r.get("weight", 1.0)) for r in rows])
        if np.any(weights < 0) or weights.sum() <= 0:
            raise ModelError(f"{self.name}: weights must be non-negative with positive sum")
        self.weights = weights / weights.sum()

        self.values: Dict[str, np.ndarray] = {}
        self.detect: Dict[str, np.ndarray] = {}
        keys = {k for r in rows for k in r.get("values", {})}
        for key in sorted(keys):
            column = []
            for i, r in enumerate(rows):
                if key not in r.get("values", {}):
                    raise ModelError(f"{self.name}: microstate {i} has no value for {key}")
                value = float(r["values"][key])
                if value not in (1.0, -1.0):
                    raise ModelError(f"{self.name}: values must be +1 or -1, got {value}")
                column.append(value)
            self.values[key] = np.array(column)

            probabilities = np.array([float(r.get("detect", {}).get(key, 1.0)) for r in rows])
            if np.any(probabilities < 0) or np.any(probabilities > 1):
                raise ModelError(f"{self.name}: detect probabilities must lie in [0, 1]")
            self.detect[key] = probabilities

        self.logger.debug(f"Table model {self.name}: {len(rows)} microstates, keys {sorted(keys)}")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.choice(len(self.weights), size=n, p=self.weights)

    def cells(self, hidden: np.ndarray) -> np.ndarray:
        return np.asarray(hidden, dtype=np.int64)

    def _lookup(self, table: Dict[str, np.ndarray], setting: MeasurementSetting) -> np.ndarray:
        self._check_party(setting)
        if setting.key not in table:
            raise ModelError(f"{self.name} has no entry for setting {setting.key}")
        return table[setting.key]

    def value_map(self, hidden: np.ndarray, setting: MeasurementSetting) -> np.ndarray:
        return self._lookup(self.values, setting)[hidden]

    def detect_probability(self, hidden: np.ndarray, setting: MeasurementSetting) -> np.ndarray:
        return self._lookup(self.detect, setting)[hidden]
