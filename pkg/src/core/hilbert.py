"""Exact finite-dimensional quantum mechanics on dense numpy matrices.

This is the standard-QM oracle of the lab: states, projectors, Born
probabilities, tensor products, partial traces and the biorthogonal
(Schmidt) decomposition of bipartite pure states. Every value is immutable
after construction and every function is pure.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.core.errors import DimensionError, InvalidOperatorError, NormalizationError
from src.core.tolerances import ATOL, CLAMP_TOL, ZERO_WEIGHT

logger = logging.getLogger("SRLab.Hilbert")

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def _frozen(matrix: np.ndarray) -> np.ndarray:
    matrix = np.array(matrix, dtype=complex)
    matrix.setflags(write=False)
    return matrix


@dataclass(frozen=True, eq=False)
class StateVector:
    amplitudes: np.ndarray
    dims: Tuple[int, ...] = field(default=())

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size < 1:
            raise DimensionError("a state vector needs at least one amplitude")
        if not np.all(np.isfinite(amps)):
            raise NormalizationError("state amplitudes must be finite")

        dims = tuple(int(d) for d in self.dims) if self.dims else (amps.size,)
        if any(d < 1 for d in dims) or math.prod(dims) != amps.size:
            raise DimensionError(f"dims {dims} do not factor dimension {amps.size}")

        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > ATOL:
            raise NormalizationError(f"state norm is {norm:.12g}, expected 1")

        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "dims", dims)

    @classmethod
    def from_unnormalized(cls, amplitudes: Iterable[complex],
                          dims: Sequence[int] = ()) -> "StateVector":
        """Normalize raw amplitudes into a state"""
        amps = np.array(list(amplitudes), dtype=complex)
        norm = np.linalg.norm(amps)
        if not np.isfinite(norm) or norm <= ZERO_WEIGHT:
            raise NormalizationError("cannot normalize a null vector")
        return cls(amps / norm, tuple(dims))

    @classmethod
    def basis(cls, index: int, dim: int) -> "StateVector":
        """Computational basis vector |index> in dimension dim"""
        if not 0 <= index < dim:
            raise DimensionError(f"basis index {index} outside dimension {dim}")
        amps = np.zeros(dim, dtype=complex)
        amps[index] = 1.0
        return cls(amps)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def inner(self, other: "StateVector") -> complex:
        """<self|other>"""
        _check_dims(self.dim, other.dim)
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def density(self) -> "DensityOperator":
        return DensityOperator(np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass(frozen=True, eq=False)
class DensityOperator:
    matrix: np.ndarray

    def __post_init__(self):
        matrix = _frozen(self.matrix)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.shape[0] < 1:
            raise DimensionError(f"density operator must be square, got {matrix.shape}")
        if not np.allclose(matrix, matrix.conj().T, atol=ATOL, rtol=0):
            raise InvalidOperatorError("density operator is not Hermitian")
        trace = np.trace(matrix).real
        if abs(trace - 1.0) > ATOL:
            raise InvalidOperatorError(f"density operator trace is {trace:.12g}")
        smallest = np.linalg.eigvalsh(matrix).min()
        if smallest < -ATOL:
            raise InvalidOperatorError(f"density operator has eigenvalue {smallest:.3g}")
        object.__setattr__(self, "matrix", matrix)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def purity(self) -> float:
        """Tr(rho^2)"""
        return float(np.real(np.trace(self.matrix @ self.matrix)))


@dataclass(frozen=True, eq=False)
class Projector:
    matrix: np.ndarray

    def __post_init__(self):
        matrix = _frozen(self.matrix)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise DimensionError(f"projector must be square, got {matrix.shape}")
        if not np.allclose(matrix, matrix.conj().T, atol=ATOL, rtol=0):
            raise InvalidOperatorError("projector is not Hermitian")
        if not np.allclose(matrix @ matrix, matrix, atol=ATOL, rtol=0):
            raise InvalidOperatorError("projector is not idempotent")
        object.__setattr__(self, "matrix", matrix)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def apply(self, v: StateVector) -> np.ndarray:
        """P|v> as a raw (generally unnormalized) vector"""
        _check_dims(self.dim, v.dim)
        return self.matrix @ v.amplitudes


@dataclass(frozen=True, eq=False)
class SchmidtTerm:
    weight: float
    left: StateVector
    right: StateVector

    def __post_init__(self):
        if not self.weight > 0:
            raise NormalizationError(f"Schmidt weight must be positive, got {self.weight}")


def _check_dims(expected: int, actual: int):
    if expected != actual:
        raise DimensionError(f"dimension mismatch: {expected} vs {actual}")


def _factor(dims: Sequence[int], dim: int) -> Tuple[int, int]:
    if len(dims) != 2:
        raise DimensionError(f"expected a bipartite factorization, got {tuple(dims)}")
    d_a, d_b = int(dims[0]), int(dims[1])
    if d_a < 1 or d_b < 1 or d_a * d_b != dim:
        raise DimensionError(f"dims ({d_a}, {d_b}) do not factor dimension {dim}")
    return d_a, d_b


def tensor_product(a: StateVector, b: StateVector) -> StateVector:
    return StateVector(np.kron(a.amplitudes, b.amplitudes), a.dims + b.dims)


def kron_all(states: Sequence[StateVector]) -> StateVector:
    """Tensor product of several states, left to right"""
    result = states[0]
    for state in states[1:]:
        result = tensor_product(result, state)
    return result


def projector(v: Union[StateVector, Sequence[complex]]) -> Projector:
    """Rank-1 projector |v><v|"""
    if not isinstance(v, StateVector):
        amps = np.array(v, dtype=complex).reshape(-1)
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > ATOL:
            raise NormalizationError(f"cannot project on a vector of norm {norm:.12g}")
        v = StateVector(amps)
    return Projector(np.outer(v.amplitudes, v.amplitudes.conj()))


def born_probability(s: StateVector, p: Projector) -> float:
    """<s|P|s>, clamped into [0, 1] when rounding pushes it just outside"""
    _check_dims(p.dim, s.dim)
    value = float(np.real(np.vdot(s.amplitudes, p.matrix @ s.amplitudes)))
    if -CLAMP_TOL <= value < 0.0:
        return 0.0
    if 1.0 < value <= 1.0 + CLAMP_TOL:
        return 1.0
    return min(max(value, 0.0), 1.0)


def expectation(s: StateVector, operator: np.ndarray) -> float:
    """<s|O|s> for a Hermitian operator O"""
    operator = np.asarray(operator, dtype=complex)
    _check_dims(operator.shape[0], s.dim)
    return float(np.real(np.vdot(s.amplitudes, operator @ s.amplitudes)))


def partial_trace(rho: DensityOperator, dims: Sequence[int], keep: str = "A") -> DensityOperator:
    """Reduced density operator of the kept factor of a bipartite system"""
    d_a, d_b = _factor(dims, rho.dim)
    tensor = rho.matrix.reshape(d_a, d_b, d_a, d_b)
    if keep == "A":
        reduced = np.einsum("ijkj->ik", tensor)
    elif keep == "B":
        reduced = np.einsum("ijil->jl", tensor)
    else:
        raise ValueError(f"keep must be 'A' or 'B', got {keep!r}")
    return DensityOperator(reduced)


def schmidt_decompose(v: StateVector, dims: Optional[Sequence[int]] = None) -> List[SchmidtTerm]:
    """Biorthogonal decomposition v = sum_i sqrt(p_i) |left_i>|right_i>.

    Weights come out sorted in descending order; weights below ZERO_WEIGHT
    are dropped. Inside a degenerate block the vectors are any orthonormal
    basis the SVD happens to return.
    """
    d_a, d_b = _factor(dims if dims is not None else v.dims, v.dim)
    u, singular, vh = np.linalg.svd(v.amplitudes.reshape(d_a, d_b))

    terms = []
    for i, s in enumerate(singular):
        weight = float(s * s)
        if weight < ZERO_WEIGHT:
            continue
        terms.append(SchmidtTerm(weight, StateVector(u[:, i]), StateVector(vh[i, :])))

    logger.debug(f"Schmidt rank {len(terms)} for dims ({d_a}, {d_b})")
    return terms


def reconstruct_from_schmidt(terms: Sequence[SchmidtTerm]) -> np.ndarray:
    """sum_i sqrt(p_i) |left_i> (x) |right_i> as raw amplitudes"""
    return sum(math.sqrt(t.weight) * np.kron(t.left.amplitudes, t.right.amplitudes)
               for t in terms)


def mixture_from_schmidt(terms: Sequence[SchmidtTerm]) -> DensityOperator:
    """The mixture sum_i p_i |left_i right_i><left_i right_i| of a decomposition"""
    if not terms:
        raise NormalizationError("empty Schmidt decomposition")
    total = sum(t.weight for t in terms)
    if abs(total - 1.0) > ATOL:
        raise NormalizationError(f"Schmidt weights sum to {total:.12g}")

    dim = terms[0].left.dim * terms[0].right.dim
    matrix = np.zeros((dim, dim), dtype=complex)
    for t in terms:
        product = np.kron(t.left.amplitudes, t.right.amplitudes)
        matrix += t.weight * np.outer(product, product.conj())
    return DensityOperator(matrix)


def states_equal(u: StateVector, v: StateVector) -> bool:
    """Equality up to a global phase: |<u|v>| = 1"""
    return abs(abs(u.inner(v)) - 1.0) <= ATOL


def spin_operator(axis: Sequence[float]) -> np.ndarray:
    """n . sigma for a unit 3-vector n"""
    nx, ny, nz = (float(c) for c in axis)
    return nx * PAULI["X"] + ny * PAULI["Y"] + nz * PAULI["Z"]


def spin_projector(axis: Sequence[float], sign: int) -> Projector:
    """Projector on spin sign*1/2 along axis: (I + sign n.sigma)/2"""
    return Projector((PAULI["I"] + sign * spin_operator(axis)) / 2.0)


def local_operator(operators: Sequence[np.ndarray]) -> np.ndarray:
    """Kronecker product of single-site operators"""
    result = np.array([[1.0]], dtype=complex)
    for op in operators:
        result = np.kron(result, op)
    return result


def singlet_state() -> StateVector:
    """(|01> - |10>)/sqrt(2), with |0> spin up along z"""
    return StateVector(np.array([0, 1, -1, 0], dtype=complex) / math.sqrt(2), (2, 2))


def ghz_state(parties: int = 3) -> StateVector:
    """(|0...0> + |1...1>)/sqrt(2)"""
    amps = np.zeros(2 ** parties, dtype=complex)
    amps[0] = amps[-1] = 1 / math.sqrt(2)
    return StateVector(amps, (2,) * parties)


def random_state(rng: np.random.Generator, dims: Sequence[int]) -> StateVector:
    """Haar-random pure state on the given factorization"""
    dim = math.prod(dims)
    amps = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return StateVector.from_unnormalized(amps, tuple(dims))


def random_unitary(rng: np.random.Generator, dim: int) -> np.ndarray:
    """Haar-random unitary from the QR decomposition of a Ginibre matrix"""
    z = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    phases = np.diag(r) / np.abs(np.diag(r))
    return q * phases
