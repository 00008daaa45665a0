"""Nonlocality arguments run three ways.

Every scenario is evaluated with the exact quantum oracle, on the detected
subensemble of a detection model, and on the full ensemble of predetermined
values. The detected statistics reproduce quantum mechanics while the full
ensemble obeys the local bounds.
"""
import itertools
import logging
import math
import zlib
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from src.core.ensemble import (DETECT_STREAM, MICRO_STREAM, Block, RunOptions, block_rng,
                               run_blocks)
from src.core.errors import DimensionError, NoDetectionsError
from src.core.hilbert import (PAULI, Projector, StateVector, born_probability, expectation,
                              local_operator, spin_projector)
from src.core.statespace import MeasurementSetting
from src.models.detection import DetectionModel

logger = logging.getLogger("SRLab.Bell")

PC_STREAM = 1


@dataclass(frozen=True)
class SettingPair:
    alice: MeasurementSetting
    bob: MeasurementSetting
    sign: int = 1

    @property
    def name(self) -> str:
        return f"{self.alice.label},{self.bob.label}"

    @property
    def identity(self) -> str:
        return f"{self.alice.key}{self.alice.axis}|{self.bob.key}{self.bob.axis}|{self.sign}"


def chsh_pairs(a: MeasurementSetting, a_prime: MeasurementSetting,
               b: MeasurementSetting, b_prime: MeasurementSetting) -> List[SettingPair]:
    """The four pairs of S = E(a,b) + E(a,b') + E(a',b) - E(a',b')"""
    return [SettingPair(a, b, 1), SettingPair(a, b_prime, 1),
            SettingPair(a_prime, b, 1), SettingPair(a_prime, b_prime, -1)]


def chsh_pairs_from_angles(angles: Mapping[str, float]) -> List[SettingPair]:
    """Pairs from plane angles in degrees keyed a, a_prime, b, b_prime"""
    return chsh_pairs(MeasurementSetting.from_angles("A", angles["a"], label="a"),
                      MeasurementSetting.from_angles("A", angles["a_prime"], label="a'"),
                      MeasurementSetting.from_angles("B", angles["b"], label="b"),
                      MeasurementSetting.from_angles("B", angles["b_prime"], label="b'"))


def _stream_keys(identities: Sequence[str]) -> List[Tuple[int, int]]:
    """Content-derived stream keys, with an occurrence index for repeats"""
    seen: Dict[int, int] = {}
    keys = []
    for identity in identities:
        base = zlib.crc32(identity.encode("utf-8"))
        keys.append((base, seen.get(base, 0)))
        seen[base] = seen.get(base, 0) + 1
    return keys


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float


# Quantum oracle

def quantum_correlation(state: StateVector, alice: MeasurementSetting,
                        bob: MeasurementSetting) -> float:
    """E(a,b) = sum_{i,j=+-1} i j P(i,j) from Born probabilities"""
    if state.dim != 4:
        raise DimensionError(f"a two-qubit state has dimension 4, got {state.dim}")
    total = 0.0
    for i in (1, -1):
        for j in (1, -1):
            joint = Projector(np.kron(spin_projector(alice.axis, i).matrix,
                                      spin_projector(bob.axis, j).matrix))
            total += i * j * born_probability(state, joint)
    return total


def quantum_chsh(state: StateVector, pairs: Sequence[SettingPair]) -> float:
    if state.dim != 4:
        raise DimensionError(f"a two-qubit state has dimension 4, got {state.dim}")
    return sum(p.sign * quantum_correlation(state, p.alice, p.bob) for p in pairs)


# CHSH on a detection model

@dataclass
class _PairCounts:
    trials: int = 0
    both_detected: int = 0
    alice_detected: int = 0
    bob_detected: int = 0
    detected_product_sum: int = 0
    full_product_sum: int = 0
    s_sum: int = 0
    s_square_sum: int = 0
    s_min: int = 4
    s_max: int = -4

    def __add__(self, other: "_PairCounts") -> "_PairCounts":
        return _PairCounts(
            self.trials + other.trials, self.both_detected + other.both_detected,
            self.alice_detected + other.alice_detected, self.bob_detected + other.bob_detected,
            self.detected_product_sum + other.detected_product_sum,
            self.full_product_sum + other.full_product_sum,
            self.s_sum + other.s_sum, self.s_square_sum + other.s_square_sum,
            min(self.s_min, other.s_min), max(self.s_max, other.s_max))


@dataclass(frozen=True)
class PairCorrelation:
    pair: SettingPair
    trials: int
    detected: Optional[Estimate]
    full: Estimate
    quantum: Optional[float]
    pair_detection_rate: float
    alice_detection_rate: float
    bob_detection_rate: float
    fair_sampling_z: Optional[float]

    def to_row(self) -> Dict[str, Any]:
        return {
            "pair": self.pair.name, "sign": self.pair.sign, "trials": self.trials,
            "detected": self.detected.value if self.detected else None,
            "detected_stderr": self.detected.stderr if self.detected else None,
            "full": self.full.value, "full_stderr": self.full.stderr,
            "quantum": self.quantum,
            "pair_detection_rate": self.pair_detection_rate,
            "alice_detection_rate": self.alice_detection_rate,
            "bob_detection_rate": self.bob_detection_rate,
            "fair_sampling_z": self.fair_sampling_z,
        }


@dataclass(frozen=True)
class ChshReport:
    pairs: Tuple[PairCorrelation, ...]
    s_detected: Optional[Estimate]
    s_full: Estimate
    s_full_pairs: Estimate
    s_quantum: Optional[float]
    trials: int
    per_trial_bound_holds: bool
    s_min: int
    s_max: int

    def require_detected(self) -> Estimate:
        if self.s_detected is None:
            missing = [p.pair.name for p in self.pairs if p.detected is None]
            raise NoDetectionsError(f"no doubly-detected trials for pairs {missing}")
        return self.s_detected

    def to_dict(self) -> Dict[str, Any]:
        return {
            "summary": {
                "s_detected": self.s_detected.value if self.s_detected else None,
                "s_detected_stderr": self.s_detected.stderr if self.s_detected else None,
                "s_full": self.s_full.value, "s_full_stderr": self.s_full.stderr,
                "s_full_pairs": self.s_full_pairs.value,
                "s_full_pairs_stderr": self.s_full_pairs.stderr,
                "s_quantum": self.s_quantum, "trials_per_pair": self.trials,
                "per_trial_bound_holds": self.per_trial_bound_holds,
                "s_min": self.s_min, "s_max": self.s_max,
            },
            "table": [p.to_row() for p in self.pairs],
        }


def _correlation_stderr(e: float, count: int) -> float:
    return math.sqrt(max(1.0 - e * e, 0.0) / count)


def run_chsh(model: DetectionModel, pairs: Sequence[SettingPair], trials: int, seed: int,
             state: Optional[StateVector] = None,
             options: RunOptions = RunOptions()) -> ChshReport:
    """CHSH on four disjoint subensembles, one per setting pair.

    Detected correlations condition on both parties registering; full
    correlations use the predetermined values of every object. The full S is
    the mean of s(lambda) over all objects, each evaluated on all four pairs.
    s_full_pairs sums the per-pair full correlations of the disjoint
    subensembles; it equals s_detected exactly when every object is detected.
    """
    if trials < 1:
        raise ValueError(f"trials must be positive, got {trials}")

    keys = _stream_keys([p.identity for p in pairs])
    logger.info(f"CHSH on {model.name}: {len(pairs)} pairs x {trials} trials, seed {seed}")

    def s_of(hidden: np.ndarray) -> np.ndarray:
        cache: Dict[MeasurementSetting, np.ndarray] = {}
        for setting in {s for p in pairs for s in (p.alice, p.bob)}:
            cache[setting] = model.value_map(hidden, setting).astype(np.int64)
        return sum(p.sign * cache[p.alice] * cache[p.bob] for p in pairs)

    def count_pair(pair: SettingPair, key: Tuple[int, int]) -> _PairCounts:
        def count_block(block: Block) -> _PairCounts:
            hidden = model.sample(block_rng(seed, *key, MICRO_STREAM, block.index), block.size)
            draws = block_rng(seed, *key, DETECT_STREAM, block.index).random((block.size, 2))
            flags = model.detect_flags(hidden, (pair.alice, pair.bob), draws)
            product = (model.value_map(hidden, pair.alice).astype(np.int64)
                       * model.value_map(hidden, pair.bob).astype(np.int64))
            both = flags.all(axis=1)
            s = s_of(hidden)
            return _PairCounts(block.size, int(both.sum()), int(flags[:, 0].sum()),
                               int(flags[:, 1].sum()), int(product[both].sum()),
                               int(product.sum()), int(s.sum()), int((s * s).sum()),
                               int(s.min()), int(s.max()))

        total = _PairCounts()
        for partial in run_blocks(count_block, trials, options):
            total = total + partial
        return total

    correlations = []
    pooled = _PairCounts()
    for pair, key in zip(pairs, keys):
        counts = count_pair(pair, key)
        pooled = pooled + counts

        full_value = counts.full_product_sum / counts.trials
        full = Estimate(full_value, _correlation_stderr(full_value, counts.trials))
        detected = None
        fair_z = None
        if counts.both_detected > 0:
            value = counts.detected_product_sum / counts.both_detected
            detected = Estimate(value, _correlation_stderr(value, counts.both_detected))
            spread = math.hypot(detected.stderr, full.stderr)
            fair_z = (detected.value - full.value) / spread if spread > 0 else None
        else:
            logger.warning(f"Pair {pair.name}: no doubly-detected trials out of {counts.trials}")

        quantum = quantum_correlation(state, pair.alice, pair.bob) if state is not None else None
        correlations.append(PairCorrelation(
            pair, counts.trials, detected, full, quantum,
            counts.both_detected / counts.trials, counts.alice_detected / counts.trials,
            counts.bob_detected / counts.trials, fair_z))

    s_detected = None
    if all(c.detected is not None for c in correlations):
        s_detected = Estimate(sum(c.pair.sign * c.detected.value for c in correlations),
                              math.sqrt(sum(c.detected.stderr ** 2 for c in correlations)))

    s_full_pairs = Estimate(sum(c.pair.sign * c.full.value for c in correlations),
                            math.sqrt(sum(c.full.stderr ** 2 for c in correlations)))

    mean_s = pooled.s_sum / pooled.trials
    variance = max(pooled.s_square_sum / pooled.trials - mean_s * mean_s, 0.0)
    s_full = Estimate(mean_s, math.sqrt(variance / pooled.trials))
    s_quantum = quantum_chsh(state, pairs) if state is not None else None

    report = ChshReport(tuple(correlations), s_detected, s_full, s_full_pairs, s_quantum, trials,
                        max(abs(pooled.s_min), abs(pooled.s_max)) <= 2,
                        pooled.s_min, pooled.s_max)
    logger.info(f"CHSH done: S_detected={s_detected.value if s_detected else None} "
                f"S_full={s_full.value} S_quantum={s_quantum}")
    return report


# Perfect correlation law

@dataclass(frozen=True)
class PcResult:
    trials: int
    detected_pairs: int
    anticorrelated_pairs: int
    anticorrelation_rate_detected: Optional[float]
    pair_detection_rate: float

    def to_dict(self) -> Dict[str, Any]:
        return {"summary": {
            "trials": self.trials, "detected_pairs": self.detected_pairs,
            "anticorrelated_pairs": self.anticorrelated_pairs,
            "anticorrelation_rate_detected": self.anticorrelation_rate_detected,
            "pair_detection_rate": self.pair_detection_rate}}


def run_singlet_pc(model: DetectionModel, direction: Sequence[float], trials: int, seed: int,
                   label: str = "u", options: RunOptions = RunOptions()) -> PcResult:
    """Both parties measure along the same direction"""
    if trials < 1:
        raise ValueError(f"trials must be positive, got {trials}")
    alice = MeasurementSetting("A", tuple(direction), label)
    bob = MeasurementSetting("B", tuple(direction), label)

    def count_block(block: Block) -> Tuple[int, int]:
        hidden = model.sample(block_rng(seed, PC_STREAM, MICRO_STREAM, block.index), block.size)
        draws = block_rng(seed, PC_STREAM, DETECT_STREAM, block.index).random((block.size, 2))
        both = model.detect_flags(hidden, (alice, bob), draws).all(axis=1)
        product = model.value_map(hidden, alice) * model.value_map(hidden, bob)
        return int(both.sum()), int((product[both] == -1).sum())

    partials = run_blocks(count_block, trials, options)
    detected = sum(d for d, _ in partials)
    anticorrelated = sum(a for _, a in partials)
    rate = anticorrelated / detected if detected else None
    if rate is None:
        logger.warning(f"PC on {model.name}: no doubly-detected pairs")
    return PcResult(trials, detected, anticorrelated, rate, detected / trials)


# GHZ / Mermin parity scenario

@dataclass(frozen=True)
class ParityScenario:
    contexts: Tuple[str, ...]
    parities: Tuple[int, ...]
    parties: Tuple[str, ...] = field(default=("A", "B", "C"))

    def __post_init__(self):
        contexts = tuple(c.upper() for c in self.contexts)
        parities = tuple(int(p) for p in self.parities)
        if len(contexts) != 4 or len(parities) != 4:
            raise ValueError("a parity scenario has exactly four contexts and four parities")
        for context in contexts:
            if len(context) != len(self.parties) or set(context) - {"X", "Y"}:
                raise ValueError(f"context {context!r} must assign X or Y to each of three parties")
        if set(parities) - {1, -1}:
            raise ValueError(f"required parities must be +1 or -1, got {parities}")
        object.__setattr__(self, "contexts", contexts)
        object.__setattr__(self, "parities", parities)

    @classmethod
    def standard(cls) -> "ParityScenario":
        """XXX = +1, XYY = YXY = YYX = -1, as for (|000> + |111>)/sqrt(2)"""
        return cls(("XXX", "XYY", "YXY", "YYX"), (1, -1, -1, -1))

    def parity_map(self) -> Dict[str, int]:
        return dict(zip(self.contexts, self.parities))

    def settings(self, context: str) -> Tuple[MeasurementSetting, ...]:
        return tuple(MeasurementSetting.pauli(p, c) for p, c in zip(self.parties, context))


@dataclass(frozen=True)
class MerminResult:
    satisfiable: bool
    max_satisfied: int
    assignment_count: int
    assignments_total: int
    algebraic_obstruction: bool

    def to_dict(self) -> Dict[str, Any]:
        return {"summary": {
            "satisfiable": self.satisfiable, "max_satisfied": self.max_satisfied,
            "assignment_count": self.assignment_count,
            "assignments_total": self.assignments_total,
            "algebraic_obstruction": self.algebraic_obstruction}}


def mermin_bruteforce(scenario: ParityScenario) -> MerminResult:
    """Try every +-1 assignment of the six local X and Y values"""
    variables = [(p, axis) for p in scenario.parties for axis in ("X", "Y")]
    best = 0
    satisfying = 0
    total = 0
    for values in itertools.product((1, -1), repeat=len(variables)):
        assignment = dict(zip(variables, values))
        satisfied = sum(
            1 for context, parity in zip(scenario.contexts, scenario.parities)
            if math.prod(assignment[(p, c)] for p, c in zip(scenario.parties, context)) == parity)
        best = max(best, satisfied)
        satisfying += satisfied == len(scenario.contexts)
        total += 1

    # Every variable used an even number of times makes the left-hand
    # product +1, so a -1 right-hand product cannot be met
    uses = {v: 0 for v in variables}
    for context in scenario.contexts:
        for p, c in zip(scenario.parties, context):
            uses[(p, c)] += 1
    obstruction = all(k % 2 == 0 for k in uses.values()) and math.prod(scenario.parities) == -1

    logger.info(f"Mermin enumeration: {satisfying}/{total} assignments satisfy all contexts")
    return MerminResult(satisfying > 0, best, satisfying, total, obstruction)


def quantum_parities(state: StateVector, scenario: ParityScenario) -> List[float]:
    """<sigma sigma sigma> for every context of the scenario"""
    if state.dim != 2 ** len(scenario.parties):
        raise DimensionError(f"a three-qubit state has dimension 8, got {state.dim}")
    return [expectation(state, local_operator([PAULI[c] for c in context]))
            for context in scenario.contexts]


@dataclass(frozen=True)
class GhzContextResult:
    context: str
    required_parity: int
    trials: int
    detected: int
    parity_rate_detected: Optional[float]
    detection_rate: float
    parity_rate_full: float
    quantum_parity: Optional[float]

    def to_row(self) -> Dict[str, Any]:
        return {"context": self.context, "required_parity": self.required_parity,
                "trials": self.trials, "detected": self.detected,
                "parity_rate_detected": self.parity_rate_detected,
                "detection_rate": self.detection_rate,
                "parity_rate_full": self.parity_rate_full,
                "quantum_parity": self.quantum_parity}


@dataclass(frozen=True)
class GhzReport:
    contexts: Tuple[GhzContextResult, ...]

    @property
    def min_full_rate(self) -> float:
        return min(c.parity_rate_full for c in self.contexts)

    def to_dict(self) -> Dict[str, Any]:
        return {"summary": {"contexts": len(self.contexts), "min_parity_rate_full": self.min_full_rate},
                "table": [c.to_row() for c in self.contexts]}


def run_ghz(model: DetectionModel, scenario: ParityScenario, trials: int, seed: int,
            state: Optional[StateVector] = None,
            options: RunOptions = RunOptions()) -> GhzReport:
    """One fresh subensemble per context; parity rates detected and full"""
    if trials < 1:
        raise ValueError(f"trials must be positive, got {trials}")
    oracle = quantum_parities(state, scenario) if state is not None else [None] * 4
    keys = _stream_keys(list(scenario.contexts))

    results = []
    for context, parity, key, quantum in zip(scenario.contexts, scenario.parities, keys, oracle):
        settings = scenario.settings(context)

        def count_block(block: Block) -> Tuple[int, int, int]:
            hidden = model.sample(block_rng(seed, *key, MICRO_STREAM, block.index), block.size)
            draws = block_rng(seed, *key, DETECT_STREAM, block.index).random((block.size, 3))
            detected = model.detect_flags(hidden, settings, draws).all(axis=1)
            product = np.prod([model.value_map(hidden, s) for s in settings], axis=0)
            satisfied = product == parity
            return int(detected.sum()), int((satisfied & detected).sum()), int(satisfied.sum())

        partials = run_blocks(count_block, trials, options)
        detected = sum(p[0] for p in partials)
        detected_ok = sum(p[1] for p in partials)
        full_ok = sum(p[2] for p in partials)
        if detected == 0:
            logger.warning(f"GHZ context {context}: no detected triples")

        results.append(GhzContextResult(
            context, parity, trials, detected,
            detected_ok / detected if detected else None,
            detected / trials, full_ok / trials, quantum))

    report = GhzReport(tuple(results))
    logger.info(f"GHZ on {model.name}: min full parity rate {report.min_full_rate}")
    return report
