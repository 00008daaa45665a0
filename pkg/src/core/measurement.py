"""Measurement dynamics with a no-registration branch.

The premeasurement maps |phi_i>|psi_0> to t_i |phi_i>|psi_i> + t_i' |phi_i>|psi_0>:
the apparatus either moves to pointer psi_i or stays ready, which is the
no-registration outcome. The observer keeps the registered branch only; the
entangled state that survives is compared with its biorthogonal mixture.
"""
import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.core.ensemble import Outcome, block_rng
from src.core.errors import (BranchingError, DimensionError, ImpossibleOutcomeError,
                             NoDetectionsError, NormalizationError)
from src.core.hilbert import (DensityOperator, Projector, StateVector, born_probability,
                              mixture_from_schmidt, partial_trace, projector, random_unitary,
                              schmidt_decompose)
from src.core.statespace import Observable, support_of
from src.core.tolerances import ATOL, CLAMP_TOL, ZERO_WEIGHT

logger = logging.getLogger("SRLab.Measurement")

PROJECTOR_SEED = 20020
RANDOM_PROJECTORS = 20
RECOGNIZE_STREAM = 7


def _orthonormal(vectors: Sequence[StateVector]) -> bool:
    matrix = np.column_stack([v.amplitudes for v in vectors])
    return np.allclose(matrix.conj().T @ matrix, np.eye(len(vectors)), atol=ATOL, rtol=0)


@dataclass(frozen=True, eq=False)
class MeasurementBranching:
    system_basis: Tuple[StateVector, ...]
    apparatus_ready: StateVector
    apparatus_pointer: Tuple[StateVector, ...]
    t: Tuple[complex, ...]
    c: Tuple[complex, ...]

    def __post_init__(self):
        object.__setattr__(self, "system_basis", tuple(self.system_basis))
        object.__setattr__(self, "apparatus_pointer", tuple(self.apparatus_pointer))
        object.__setattr__(self, "t", tuple(complex(x) for x in self.t))
        object.__setattr__(self, "c", tuple(complex(x) for x in self.c))

        k = len(self.c)
        if k < 1 or not (len(self.t) == len(self.system_basis) == len(self.apparatus_pointer) == k):
            raise BranchingError("c, t, system basis and pointer states must have equal length")
        if any(v.dim != self.system_basis[0].dim for v in self.system_basis):
            raise BranchingError("system basis vectors differ in dimension")
        if any(v.dim != self.apparatus_ready.dim for v in self.apparatus_pointer):
            raise BranchingError("pointer states and ready state differ in dimension")
        if not _orthonormal(self.system_basis):
            raise BranchingError("system basis is not orthonormal")
        if not _orthonormal((self.apparatus_ready,) + self.apparatus_pointer):
            raise BranchingError("ready and pointer states are not orthonormal")
        if any(abs(x) > 1.0 + ATOL for x in self.t):
            raise BranchingError("|t_i| must not exceed 1")
        total = sum(abs(x) ** 2 for x in self.c)
        if abs(total - 1.0) > ATOL:
            raise BranchingError(f"sum |c_i|^2 is {total:.12g}, expected 1")

    @classmethod
    def standard(cls, c: Sequence[complex], t: Sequence[complex],
                 system_dim: Optional[int] = None,
                 apparatus_dim: Optional[int] = None) -> "MeasurementBranching":
        """Computational bases: phi_i = |i>, psi_0 = |0>, psi_i = |i+1>"""
        k = len(c)
        system_dim = system_dim or k
        apparatus_dim = apparatus_dim or k + 1
        if system_dim < k or apparatus_dim < k + 1:
            raise BranchingError(f"{k} branches need system_dim >= {k} and apparatus_dim >= {k + 1}")
        return cls(tuple(StateVector.basis(i, system_dim) for i in range(k)),
                   StateVector.basis(0, apparatus_dim),
                   tuple(StateVector.basis(i + 1, apparatus_dim) for i in range(k)),
                   tuple(t), tuple(c))

    @property
    def t_prime(self) -> Tuple[float, ...]:
        """No-registration amplitudes, phase fixed to zero"""
        return tuple(math.sqrt(max(1.0 - abs(x) ** 2, 0.0)) for x in self.t)

    @property
    def dims(self) -> Tuple[int, int]:
        return self.system_basis[0].dim, self.apparatus_ready.dim


def random_branching(rng: np.random.Generator, branches: int, system_dim: Optional[int] = None,
                     apparatus_dim: Optional[int] = None) -> MeasurementBranching:
    """Random coefficients, attenuations and bases"""
    system_dim = system_dim or branches
    apparatus_dim = apparatus_dim or branches + 1
    c = rng.normal(size=branches) + 1j * rng.normal(size=branches)
    c = c / np.linalg.norm(c)
    t = rng.uniform(0, 1, size=branches) * np.exp(2j * np.pi * rng.uniform(size=branches))
    u_s = random_unitary(rng, system_dim)
    u_a = random_unitary(rng, apparatus_dim)
    return MeasurementBranching(
        tuple(StateVector(u_s[:, i]) for i in range(branches)),
        StateVector(u_a[:, 0]),
        tuple(StateVector(u_a[:, i + 1]) for i in range(branches)),
        tuple(t), tuple(c))


def evolve_premeasurement(b: MeasurementBranching) -> StateVector:
    """chi_f = sum c_i t_i |phi_i>|psi_i> + sum c_i t_i' |phi_i>|psi_0>"""
    ready = b.apparatus_ready.amplitudes
    chi = np.zeros(b.dims[0] * b.dims[1], dtype=complex)
    for phi, psi, c, t, t_prime in zip(b.system_basis, b.apparatus_pointer, b.c, b.t, b.t_prime):
        chi += c * t * np.kron(phi.amplitudes, psi.amplitudes)
        chi += c * t_prime * np.kron(phi.amplitudes, ready)
    try:
        return StateVector(chi, b.dims)
    except NormalizationError as e:
        raise BranchingError(f"premeasurement is not an isometry: {e}") from e


def branch_probabilities(b: MeasurementBranching) -> Tuple[float, float]:
    """(registered, no-registration) squared norms of the two branches"""
    registered = sum(abs(c * t) ** 2 for c, t in zip(b.c, b.t))
    unregistered = sum(abs(c * tp) ** 2 for c, tp in zip(b.c, b.t_prime))
    return registered, unregistered


def select_detected(chi_f: StateVector, b: MeasurementBranching) -> StateVector:
    """S_f: the registered branch the observer keeps, renormalized"""
    if chi_f.dim != b.dims[0] * b.dims[1]:
        raise DimensionError(f"state dim {chi_f.dim} does not match branching dims {b.dims}")
    ready = b.apparatus_ready.amplitudes
    not_ready = np.eye(b.dims[1]) - np.outer(ready, ready.conj())
    registered = np.kron(np.eye(b.dims[0]), not_ready) @ chi_f.amplitudes

    norm = np.linalg.norm(registered)
    if norm <= ZERO_WEIGHT:
        raise NoDetectionsError("every branch is a no-registration branch")
    return StateVector(registered / norm, b.dims)


def projection_mixture(b: MeasurementBranching) -> DensityOperator:
    """System state predicted by the projection postulate on registered outcomes"""
    weights = np.array([abs(c * t) ** 2 for c, t in zip(b.c, b.t)])
    if weights.sum() <= ZERO_WEIGHT:
        raise NoDetectionsError("every branch is a no-registration branch")
    weights = weights / weights.sum()
    matrix = sum(w * np.outer(phi.amplitudes, phi.amplitudes.conj())
                 for w, phi in zip(weights, b.system_basis))
    return DensityOperator(matrix)


def projection_postulate(s: StateVector, obs: Observable, eigenvalue_index: int) -> StateVector:
    """P_j s / ||P_j s|| for the outcome a_j"""
    if s.dim != obs.dim:
        raise DimensionError(f"state dim {s.dim} vs observable dim {obs.dim}")
    if not 0 <= eigenvalue_index < len(obs.eigenvalues):
        raise IndexError(f"{obs.label} has no eigenvalue index {eigenvalue_index}")

    p = obs.projectors[eigenvalue_index]
    if born_probability(s, p) <= CLAMP_TOL:
        raise ImpossibleOutcomeError(
            f"outcome {obs.eigenvalues[eigenvalue_index]:+g} of {obs.label} has probability 0")
    return StateVector.from_unnormalized(p.apply(s), s.dims)


def local_projectors(dim: int) -> List[Projector]:
    """Fixed local projectors: three bases plus seeded random rank-1 projectors"""
    rng = np.random.default_rng(PROJECTOR_SEED + dim)
    fourier = np.exp(2j * np.pi * np.outer(np.arange(dim), np.arange(dim)) / dim) / math.sqrt(dim)
    hermitian = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    _, eigenbasis = np.linalg.eigh(hermitian + hermitian.conj().T)

    projectors = []
    for basis in (np.eye(dim), fourier, eigenbasis):
        projectors.extend(projector(basis[:, i]) for i in range(dim))
    for _ in range(RANDOM_PROJECTORS):
        v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
        projectors.append(projector(v / np.linalg.norm(v)))
    return projectors


@dataclass(frozen=True)
class FappReport:
    local_prob_max_diff: float
    support_prob_pure: float
    support_prob_mixture: float
    purity_gap: float
    schmidt_weights: Tuple[float, ...]

    def to_dict(self) -> Dict[str, Any]:
        return {"local_prob_max_diff": self.local_prob_max_diff,
                "support_prob_pure": self.support_prob_pure,
                "support_prob_mixture": self.support_prob_mixture,
                "purity_gap": self.purity_gap,
                "schmidt_rank": len(self.schmidt_weights),
                "schmidt_weights": list(self.schmidt_weights)}


def fapp_compare(s_f: StateVector, dims: Sequence[int]) -> FappReport:
    """The pure S_f against its biorthogonal mixture M.

    Local probabilities agree on both factors; only the support test of S_f
    tells the two apart: probability 1 for the pure state, sum p_i^2 for M.
    """
    terms = schmidt_decompose(s_f, dims)
    mixture = mixture_from_schmidt(terms)
    pure = s_f.density()

    max_diff = 0.0
    for keep, dim in (("A", dims[0]), ("B", dims[1])):
        reduced_pure = partial_trace(pure, dims, keep).matrix
        reduced_mix = partial_trace(mixture, dims, keep).matrix
        for local in local_projectors(dim):
            diff = abs(np.trace(local.matrix @ reduced_pure) - np.trace(local.matrix @ reduced_mix))
            max_diff = max(max_diff, float(diff))

    support = support_of(s_f)
    support_mixture = float(np.real(np.trace(mixture.matrix @ support.matrix)))
    return FappReport(max_diff, born_probability(s_f, support), support_mixture,
                      pure.purity() - mixture.purity(), tuple(t.weight for t in terms))


def recognize_state(outcomes: Sequence[Outcome], min_detected: int) -> bool:
    """Accept the candidate state when every detected support test says 1"""
    detected = [o for o in outcomes if o.registered]
    if not detected or len(detected) < min_detected:
        logger.info(f"Recognition undecided: {len(detected)} detected, {min_detected} required")
        return False
    return all(o.value == 1.0 for o in detected)


def simulate_support_tests(state: StateVector, candidate: StateVector, n: int, seed: int,
                           detection_efficiency: float = 1.0) -> List[Outcome]:
    """Support tests of candidate's F_S on n objects prepared in state"""
    if not 0.0 <= detection_efficiency <= 1.0:
        raise ValueError(f"detection efficiency must lie in [0, 1], got {detection_efficiency}")
    p_support = born_probability(state, support_of(candidate))
    rng = block_rng(seed, RECOGNIZE_STREAM)
    registered = rng.random(n) < detection_efficiency
    possessed = rng.random(n) < p_support
    return [Outcome.of(1.0 if hit else 0.0) if seen else Outcome.no_registration()
            for seen, hit in zip(registered, possessed)]
