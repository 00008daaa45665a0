"""Ensembles of physical objects with hidden microscopic properties.

Objects are sampled from a detection model, measured one setting at a time,
and counted per microscopic cell. The counts are the integers N, N0, N^(i),
N0^(i), N_F^(i); from them come the total, detection and conditional
probabilities, with total = detection * conditional at every finite N.

Randomness is counter based: trials are cut into fixed-size blocks and every
block draws from its own Philox stream keyed by (seed, sub-ensemble, purpose,
block). Results therefore do not depend on worker count or evaluation order.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, TypeVar

import numpy as np

from src.core.errors import EmptyEnsembleError, NoDetectionsError
from src.core.statespace import MeasurementSetting, PropertyWindow, property_projector
from src.models.detection import DetectionModel

logger = logging.getLogger("SRLab.Ensemble")

MICRO_STREAM = 0
DETECT_STREAM = 1
DEFAULT_BLOCK_SIZE = 1 << 16
FAIR_SAMPLING_Z = 5.0

T = TypeVar("T")


@dataclass(frozen=True)
class RunOptions:
    block_size: int = DEFAULT_BLOCK_SIZE
    workers: int = 1

    def __post_init__(self):
        if self.block_size < 1 or self.workers < 1:
            raise ValueError("block_size and workers must be positive")


@dataclass(frozen=True)
class Block:
    index: int
    start: int
    size: int


def block_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent Philox stream for one (seed, key...) address"""
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=key)))


def trial_blocks(n: int, block_size: int = DEFAULT_BLOCK_SIZE) -> List[Block]:
    return [Block(i, start, min(block_size, n - start))
            for i, start in enumerate(range(0, n, block_size))]


def run_blocks(fn: Callable[[Block], T], n: int, options: RunOptions = RunOptions()) -> List[T]:
    """Evaluate fn on every block; results come back in block order"""
    blocks = trial_blocks(n, options.block_size)
    if options.workers <= 1 or len(blocks) <= 1:
        return [fn(block) for block in blocks]
    with ThreadPoolExecutor(max_workers=options.workers) as pool:
        return list(pool.map(fn, blocks))


@dataclass(frozen=True, eq=False)
class MicroState:
    hidden: np.ndarray
    cell: int


class MicroEnsemble(Sequence[MicroState]):
    """Sampled objects, stored as one hidden-data array plus their cells"""

    def __init__(self, hidden: np.ndarray, cells: np.ndarray):
        self.hidden = hidden
        self.cells = np.asarray(cells, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.hidden)

    def __getitem__(self, index):
        if isinstance(index, slice):
            return MicroEnsemble(self.hidden[index], self.cells[index])
        return MicroState(self.hidden[index], int(self.cells[index]))

    def cell_counts(self) -> Dict[int, int]:
        cells, counts = np.unique(self.cells, return_counts=True)
        return {int(c): int(k) for c, k in zip(cells, counts)}


@dataclass(frozen=True)
class Outcome:
    """Either a registered eigenvalue or the no-registration outcome a0"""
    value: Optional[float] = None

    @classmethod
    def no_registration(cls) -> "Outcome":
        return cls(None)

    @classmethod
    def of(cls, value: float) -> "Outcome":
        return cls(float(value))

    @property
    def registered(self) -> bool:
        return self.value is not None

    def __str__(self) -> str:
        return "a0" if self.value is None else f"{self.value:+g}"


def sample_ensemble(model: DetectionModel, n: int, seed: int, stream: int = 0,
                    options: RunOptions = RunOptions()) -> MicroEnsemble:
    """n objects prepared in the model's state, reproducible from (seed, stream)"""
    if n == 0:
        raise EmptyEnsembleError("an ensemble needs at least one object")
    if n < 0:
        raise ValueError(f"ensemble size must be positive, got {n}")

    def sample_block(block: Block) -> np.ndarray:
        return model.sample(block_rng(seed, stream, MICRO_STREAM, block.index), block.size)

    hidden = np.concatenate(run_blocks(sample_block, n, options))
    return MicroEnsemble(hidden, model.cells(hidden))


def measure_object(model: DetectionModel, micro: MicroState, setting: MeasurementSetting,
                   draw: float) -> Outcome:
    """One measurement: no registration iff draw >= detection probability"""
    if not 0.0 <= draw < 1.0:
        raise ValueError(f"draw must lie in [0, 1), got {draw}")
    hidden = np.asarray(micro.hidden)[np.newaxis, ...]
    if draw >= float(model.detect_probability(hidden, setting)[0]):
        return Outcome.no_registration()
    return Outcome.of(model.value_map(hidden, setting)[0])


@dataclass(frozen=True)
class CellTally:
    cell: int
    value: float
    n: int
    n0: int
    nf: int
    in_window: bool

    @property
    def detected(self) -> int:
        return self.n - self.n0

    def identity_holds(self) -> bool:
        """N_F/N = ((N - N0)/N) * (N_F/(N - N0)) in exact rational arithmetic"""
        if self.detected == 0:
            return self.nf == 0
        left = Fraction(self.nf, self.n)
        right = Fraction(self.detected, self.n) * Fraction(self.nf, self.detected)
        return left == right

    def dichotomic(self) -> bool:
        return self.nf * (self.detected - self.nf) == 0


@dataclass(frozen=True)
class TallyCounts:
    n: int
    n0: int
    rows: Tuple[CellTally, ...]
    window: str = ""

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(sorted(self.rows, key=lambda r: (r.cell, r.value))))
        if self.n != sum(r.n for r in self.rows):
            raise ValueError("N must equal the sum of the cell counts")
        if self.n0 != sum(r.n0 for r in self.rows):
            raise ValueError("N0 must equal the sum of the cell no-registration counts")
        for r in self.rows:
            if not 0 <= r.nf <= r.n - r.n0 or r.n0 < 0:
                raise ValueError(f"cell {r.cell}: counts violate 0 <= N_F <= N - N0")

    @property
    def nf(self) -> int:
        return sum(r.nf for r in self.rows)

    @property
    def detected(self) -> int:
        return self.n - self.n0

    @property
    def full_window_count(self) -> int:
        """Objects whose predetermined value lies in the window, detected or not"""
        return sum(r.n for r in self.rows if r.in_window)

    def cell_identities_hold(self) -> bool:
        return all(r.identity_holds() for r in self.rows)

    def aggregate_identity_holds(self) -> bool:
        """(1/N) sum N_F^(i) = ((N - N0)/N) sum (N_F^(i)/(N - N0)), exactly"""
        if self.detected == 0:
            return self.nf == 0
        left = Fraction(self.nf, self.n)
        right = Fraction(self.detected, self.n) * sum(
            (Fraction(r.nf, self.detected) for r in self.rows), Fraction(0))
        return left == right

    def dichotomic(self) -> bool:
        return all(r.dichotomic() for r in self.rows)

    def __add__(self, other: "TallyCounts") -> "TallyCounts":
        merged: Dict[Tuple[int, float], List[int]] = {}
        flags: Dict[Tuple[int, float], bool] = {}
        for r in self.rows + other.rows:
            counts = merged.setdefault((r.cell, r.value), [0, 0, 0])
            counts[0] += r.n
            counts[1] += r.n0
            counts[2] += r.nf
            flags[(r.cell, r.value)] = r.in_window
        rows = tuple(CellTally(c, v, k[0], k[1], k[2], flags[(c, v)])
                     for (c, v), k in merged.items())
        return TallyCounts(self.n + other.n, self.n0 + other.n0, rows, self.window or other.window)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "summary": {"window": self.window, "N": self.n, "N0": self.n0, "N_F": self.nf,
                        "cells": len(self.rows),
                        "cell_identities_hold": self.cell_identities_hold(),
                        "aggregate_identity_holds": self.aggregate_identity_holds(),
                        "dichotomic": self.dichotomic()},
            "table": [{"cell": r.cell, "value": r.value, "N": r.n, "N0": r.n0, "N_F": r.nf,
                       "in_window": r.in_window} for r in self.rows],
        }


def tally_counts(model: DetectionModel, setting: MeasurementSetting, window: PropertyWindow,
                 n: int, seed: int, stream: int = 0,
                 options: RunOptions = RunOptions()) -> TallyCounts:
    """Measure setting on n fresh objects and count them per microscopic cell.

    A cell groups objects sharing the model cell and the predetermined value
    under the measured setting, which keeps N_F^(i) in {0, N^(i) - N0^(i)}
    for deterministic value maps.
    """
    property_projector(window)
    if n < 1:
        raise EmptyEnsembleError("a tally needs at least one object")

    def tally_block(block: Block) -> TallyCounts:
        hidden = model.sample(block_rng(seed, stream, MICRO_STREAM, block.index), block.size)
        draws = block_rng(seed, stream, DETECT_STREAM, block.index).random(block.size)
        cells = model.cells(hidden)
        values = model.value_map(hidden, setting)
        detected = draws < model.detect_probability(hidden, setting)
        in_window = window.contains(values)

        keys, inverse = np.unique(np.column_stack([cells, values]), axis=0, return_inverse=True)
        inverse = np.asarray(inverse).reshape(-1)
        n_i = np.bincount(inverse, minlength=len(keys))
        n0_i = np.bincount(inverse[~detected], minlength=len(keys))
        nf_i = np.bincount(inverse[detected & in_window], minlength=len(keys))

        rows = tuple(CellTally(int(k[0]), float(k[1]), int(a), int(b), int(c),
                               float(k[1]) in window.window)
                     for k, a, b, c in zip(keys, n_i, n0_i, nf_i))
        logger.debug(f"Tally block {block.index}: {block.size} objects, {int((~detected).sum())} a0")
        return TallyCounts(block.size, int((~detected).sum()), rows)

    partials = run_blocks(tally_block, n, options)
    total = partials[0]
    for partial in partials[1:]:
        total = total + partial
    return TallyCounts(total.n, total.n0, total.rows, window.describe())


def _binomial_stderr(p: float, count: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / count) if count > 0 else 0.0


@dataclass(frozen=True)
class ProbabilityEstimates:
    p_total: float
    p_detect: float
    p_conditional: Optional[float]
    se_total: float
    se_detect: float
    se_conditional: Optional[float]

    def require_conditional(self) -> float:
        if self.p_conditional is None:
            raise NoDetectionsError("no detected objects: the conditional probability is undefined")
        return self.p_conditional

    def to_dict(self) -> Dict[str, Any]:
        return {"p_total": self.p_total, "p_detect": self.p_detect,
                "p_conditional": self.p_conditional, "se_total": self.se_total,
                "se_detect": self.se_detect, "se_conditional": self.se_conditional}


def estimate_probabilities(t: TallyCounts) -> ProbabilityEstimates:
    """Total, detection and conditional probability estimates from tallies.

    p_total is formed as p_detect * p_conditional, so the factorization holds
    bit for bit; it equals N_F/N up to rounding.
    """
    if t.n <= 0:
        raise EmptyEnsembleError("cannot estimate probabilities from an empty tally")

    p_detect = t.detected / t.n
    if t.detected == 0:
        logger.warning(f"No detections among {t.n} objects; conditional probability undefined")
        return ProbabilityEstimates(0.0, p_detect, None, 0.0, _binomial_stderr(p_detect, t.n), None)

    p_conditional = t.nf / t.detected
    p_total = p_detect * p_conditional
    return ProbabilityEstimates(
        p_total, p_detect, p_conditional,
        _binomial_stderr(p_total, t.n), _binomial_stderr(p_detect, t.n),
        _binomial_stderr(p_conditional, t.detected))


@dataclass(frozen=True)
class FairSamplingCheck:
    full_frequency: float
    detected_frequency: Optional[float]
    z_score: Optional[float]

    @property
    def rejected(self) -> bool:
        """True when the detected subensemble is not a fair sample"""
        return self.z_score is not None and abs(self.z_score) > FAIR_SAMPLING_Z

    def to_dict(self) -> Dict[str, Any]:
        return {"full_frequency": self.full_frequency,
                "detected_frequency": self.detected_frequency,
                "z_score": self.z_score, "fair_sampling_rejected": self.rejected}


def fair_sampling_check(t: TallyCounts) -> FairSamplingCheck:
    """Detected window frequency against the full-ensemble predetermined one"""
    full = t.full_window_count / t.n
    if t.detected == 0:
        return FairSamplingCheck(full, None, None)
    detected = t.nf / t.detected
    se = math.hypot(_binomial_stderr(full, t.n), _binomial_stderr(detected, t.detected))
    z = (detected - full) / se if se > 0 else None
    return FairSamplingCheck(full, detected, z)

