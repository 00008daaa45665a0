"""Kinematics of the SR model.

Observables carry an extra no-registration value a0 next to their
eigenvalues. A property is a window (A0, Delta) on such an observable; only
windows that leave a0 out are represented by projectors.
"""
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import FrozenSet, Iterable, Optional, Sequence, Tuple

import numpy as np

from src.core.errors import DimensionError, InvalidOperatorError, NoRepresentationError
from src.core.hilbert import Projector, StateVector, projector, spin_projector
from src.core.tolerances import ATOL

PARTIES = ("A", "B", "C")

PAULI_AXES = {
    "X": (1.0, 0.0, 0.0),
    "Y": (0.0, 1.0, 0.0),
    "Z": (0.0, 0.0, 1.0),
}


class CertaintyClass(Enum):
    CERTAINLY_TRUE = "certainly_true"
    CERTAINLY_FALSE = "certainly_false"
    INDETERMINATE = "indeterminate"


@dataclass(frozen=True, eq=False)
class Observable:
    label: str
    eigenvalues: Tuple[float, ...]
    projectors: Tuple[Projector, ...]
    no_registration_value: float = 0.0

    def __post_init__(self):
        eigenvalues = tuple(float(a) for a in self.eigenvalues)
        projectors = tuple(self.projectors)
        object.__setattr__(self, "eigenvalues", eigenvalues)
        object.__setattr__(self, "projectors", projectors)

        if not eigenvalues or len(eigenvalues) != len(projectors):
            raise InvalidOperatorError(
                f"{self.label}: {len(eigenvalues)} eigenvalues for {len(projectors)} projectors")
        if len(set(eigenvalues)) != len(eigenvalues):
            raise InvalidOperatorError(f"{self.label}: eigenvalues must be distinct")
        if float(self.no_registration_value) in eigenvalues:
            raise InvalidOperatorError(f"{self.label}: a0 collides with an eigenvalue")

        dim = projectors[0].dim
        if any(p.dim != dim for p in projectors):
            raise DimensionError(f"{self.label}: projectors of different dimensions")
        for i, p in enumerate(projectors):
            for q in projectors[i + 1:]:
                if not np.allclose(p.matrix @ q.matrix, 0.0, atol=ATOL, rtol=0):
                    raise InvalidOperatorError(f"{self.label}: projectors are not orthogonal")
        total = sum(p.matrix for p in projectors)
        if not np.allclose(total, np.eye(dim), atol=ATOL, rtol=0):
            raise InvalidOperatorError(f"{self.label}: projectors do not resolve the identity")

    @property
    def dim(self) -> int:
        return self.projectors[0].dim

    def index_of(self, value: float) -> int:
        try:
            return self.eigenvalues.index(float(value))
        except ValueError:
            raise InvalidOperatorError(f"{value} is not an eigenvalue of {self.label}") from None

    def window(self, values: Iterable[float], includes_a0: bool = False) -> "PropertyWindow":
        """Shorthand for PropertyWindow(self, values, includes_a0)"""
        return PropertyWindow(self, frozenset(float(v) for v in values), includes_a0)


@dataclass(frozen=True, eq=False)
class PropertyWindow:
    observable: Observable
    window: FrozenSet[float] = field(default_factory=frozenset)
    includes_a0: bool = False

    def __post_init__(self):
        window = frozenset(float(v) for v in self.window)
        if self.observable.no_registration_value in window:
            # a0 given as a value is folded into the flag
            window = window - {self.observable.no_registration_value}
            object.__setattr__(self, "includes_a0", True)
        unknown = window - set(self.observable.eigenvalues)
        if unknown:
            raise ValueError(f"window values {sorted(unknown)} are not eigenvalues "
                             f"of {self.observable.label}")
        object.__setattr__(self, "window", window)

    @property
    def representable(self) -> bool:
        return not self.includes_a0

    def eigen_matrix(self) -> np.ndarray:
        """Sum of the eigenprojectors over the window, a0 ignored"""
        matrix = np.zeros((self.observable.dim, self.observable.dim), dtype=complex)
        for value, p in zip(self.observable.eigenvalues, self.observable.projectors):
            if value in self.window:
                matrix = matrix + p.matrix
        return matrix

    def contains(self, values: np.ndarray) -> np.ndarray:
        """Elementwise membership of outcome values in the eigenvalue part"""
        return np.isin(values, sorted(self.window))

    def describe(self) -> str:
        parts = [f"{v:+g}" for v in sorted(self.window)]
        if self.includes_a0:
            parts.append("a0")
        return f"({self.observable.label}, {{{', '.join(parts)}}})"


@dataclass(frozen=True)
class MeasurementSetting:
    party: str
    axis: Tuple[float, float, float]
    label: str = ""

    def __post_init__(self):
        if self.party not in PARTIES:
            raise ValueError(f"party must be one of {PARTIES}, got {self.party!r}")
        axis = tuple(float(c) for c in self.axis)
        if len(axis) != 3:
            raise ValueError(f"axis must be a 3-vector, got {axis}")
        norm = math.sqrt(sum(c * c for c in axis))
        if abs(norm - 1.0) > ATOL:
            raise ValueError(f"axis norm is {norm:.12g}, expected 1")
        object.__setattr__(self, "axis", axis)
        if not self.label:
            object.__setattr__(self, "label", "(" + ",".join(f"{c:.6g}" for c in axis) + ")")

    @classmethod
    def from_angles(cls, party: str, theta: float, phi: float = 0.0,
                    label: Optional[str] = None) -> "MeasurementSetting":
        """Axis from polar angle theta and azimuth phi, both in degrees"""
        t, p = math.radians(theta), math.radians(phi)
        axis = (math.sin(t) * math.cos(p), math.sin(t) * math.sin(p), math.cos(t))
        return cls(party, axis, label or f"{theta:g}deg")

    @classmethod
    def pauli(cls, party: str, name: str) -> "MeasurementSetting":
        try:
            return cls(party, PAULI_AXES[name.upper()], name.upper())
        except KeyError:
            raise ValueError(f"unknown Pauli axis {name!r}") from None

    @property
    def key(self) -> str:
        """Lookup key used by table models"""
        return f"{self.party}:{self.label}"

    @property
    def axis_array(self) -> np.ndarray:
        return np.array(self.axis)


def spin_observable(axis: Sequence[float], label: str = "spin") -> Observable:
    """Dichotomic spin observable along axis, outcomes +1 / -1, a0 = 0"""
    return Observable(label, (1.0, -1.0),
                      (spin_projector(axis, +1), spin_projector(axis, -1)), 0.0)


def setting_observable(setting: MeasurementSetting) -> Observable:
    return spin_observable(setting.axis, f"{setting.party}.spin[{setting.label}]")


def support_observable(s: StateVector) -> Observable:
    """Dichotomic support test: outcome 1 iff the object possesses F_S"""
    support = support_of(s)
    complement = Projector(np.eye(s.dim) - support.matrix)
    return Observable("support", (1.0, 0.0), (support, complement), -1.0)


def pauli_observable(name: str) -> Observable:
    return spin_observable(PAULI_AXES[name.upper()], f"sigma_{name.lower()}")


def property_projector(f: PropertyWindow) -> Projector:
    """Projector representing (A0, Delta); only exists when a0 is not in Delta"""
    if f.includes_a0:
        raise NoRepresentationError(
            f"property {f.describe()} contains a0 and has no mathematical representation")
    return Projector(f.eigen_matrix())


def classify_certainty(s: StateVector, f: PropertyWindow) -> CertaintyClass:
    if s.dim != f.observable.dim:
        raise DimensionError(f"state dim {s.dim} vs observable dim {f.observable.dim}")

    image = f.eigen_matrix() @ s.amplitudes
    if f.includes_a0:
        if np.linalg.norm(image - s.amplitudes) < ATOL:
            return CertaintyClass.CERTAINLY_TRUE
    elif np.linalg.norm(image) < ATOL:
        return CertaintyClass.CERTAINLY_FALSE
    return CertaintyClass.INDETERMINATE


def support_of(s: StateVector) -> Projector:
    """F_S, the rank-1 projector onto the state's ray"""
    return projector(s)


def consistent(s1: StateVector, s2: StateVector) -> bool:
    """Two pure states are consistent iff their vectors are not orthogonal"""
    return abs(s1.inner(s2)) > ATOL


def observable_from_matrices(label: str, eigenvalues: Sequence[float],
                             matrices: Sequence[Sequence[Sequence[complex]]],
                             no_registration_value: float = 0.0) -> Observable:
    """Observable from explicit projector matrices, as read from a config file"""
    projectors = tuple(Projector(np.array(m, dtype=complex)) for m in matrices)
    return Observable(label, tuple(eigenvalues), projectors, no_registration_value)

