import logging
import time
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, Mapping, Optional

import numpy as np

from src.core.bell import (chsh_pairs_from_angles, mermin_bruteforce, quantum_parities, run_chsh,
                           run_ghz, run_singlet_pc)
from src.core.ensemble import (DEFAULT_BLOCK_SIZE, RunOptions, block_rng, estimate_probabilities,
                               fair_sampling_check, tally_counts)
from src.core.errors import ConfigError, ExperimentError, SRLabError
from src.core.hilbert import born_probability, partial_trace, random_state
from src.core.measurement import (MeasurementBranching, branch_probabilities,
                                  evolve_premeasurement, fapp_compare, projection_mixture,
                                  random_branching, recognize_state, select_detected,
                                  simulate_support_tests)
from src.core.presets import PresetLibrary, parse_amplitude
from src.core.statespace import setting_observable, support_of
from src.utils.config_manager import ConfigManager

KINDS = ("chsh", "ghz", "pc", "mermin-bruteforce", "tally", "measure", "fapp", "recognize")
STOCHASTIC_KINDS = frozenset({"chsh", "ghz", "pc", "tally", "fapp", "recognize"})
FORMATS = ("json", "csv", "text")
TOP_LEVEL_KEYS = ("kind", "model", "trials", "seed", "output", "format")

DEFAULT_MODELS = {
    "chsh": "singlet-reference",
    "pc": "singlet-reference",
    "tally": "singlet-reference",
    "ghz": "ghz-contextual",
}

FAPP_STREAM = 11


def _is_int(value: Any) -> bool:
    return isinstance(value, (int, np.integer)) and not isinstance(value, bool)


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    model: Any = None
    trials: int = 1
    seed: Optional[int] = None
    params: Dict[str, Any] = field(default_factory=dict)
    output: Optional[str] = None
    format: str = "json"
    source: Optional[str] = None

    def __post_init__(self):
        if not isinstance(self.kind, str) or self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; expected one of {KINDS}")
        if not _is_int(self.trials) or self.trials < 1:
            raise ConfigError(f"trials must be a positive integer, got {self.trials!r}")
        if self.seed is None:
            if self.kind in STOCHASTIC_KINDS:
                raise ConfigError(f"{self.kind} experiments need an explicit seed")
        elif not _is_int(self.seed) or self.seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed!r}")
        if self.format not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}, got {self.format!r}")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], source: Optional[str] = None,
                  default_trials: int = 100000) -> "ExperimentConfig":
        if not isinstance(data, Mapping) or "kind" not in data:
            raise ConfigError("experiment descriptor needs a kind")
        kind = data["kind"]
        if not isinstance(kind, str):
            raise ConfigError(f"experiment kind must be a string, got {kind!r}")
        seed = data.get("seed")
        if seed is None and kind not in STOCHASTIC_KINDS:
            seed = 0
        return cls(kind=kind,
                   model=data.get("model", DEFAULT_MODELS.get(kind)),
                   trials=data.get("trials", default_trials),
                   seed=seed,
                   params={k: v for k, v in data.items() if k not in TOP_LEVEL_KEYS},
                   output=data.get("output"),
                   format=data.get("format", "json"),
                   source=source)

    def with_overrides(self, trials: Optional[int] = None, seed: Optional[int] = None,
                       format: Optional[str] = None, output: Optional[str] = None) -> "ExperimentConfig":
        """Command-line flags replace descriptor values"""
        changes = {k: v for k, v in (("trials", trials), ("seed", seed),
                                     ("format", format), ("output", output)) if v is not None}
        return replace(self, **changes)

    def to_dict(self) -> Dict[str, Any]:
        """Config echo; replaying it through from_dict gives the same experiment"""
        echo = dict(self.params)
        echo.update({"kind": self.kind, "trials": self.trials, "seed": self.seed,
                     "format": self.format})
        if self.model is not None:
            echo["model"] = self.model
        return echo


@dataclass(frozen=True)
class RunReport:
    config: ExperimentConfig
    result: Dict[str, Any]
    tool_version: str
    block_size: int = DEFAULT_BLOCK_SIZE
    elapsed_seconds: float = 0.0

    @property
    def kind(self) -> str:
        return self.config.kind

    def to_dict(self) -> Dict[str, Any]:
        """Canonical payload; elapsed time is left out"""
        return {"tool_version": self.tool_version, "kind": self.kind,
                "block_size": self.block_size, "config": self.config.to_dict(),
                "result": self.result}


class SRLab:
    def __init__(self, config: Optional[ConfigManager] = None):
        self.logger = logging.getLogger("SRLab.Lab")

        # Config
        self.config = config or ConfigManager()
        self.presets = PresetLibrary(self.config)
        self.tool_version = str(self.config.get_setting("lab.tool_version", "0.0.0"))
        self.default_trials = int(self.config.get_setting("experiments.default_trials", 100000))

        # Trial blocks and workers
        self.options = RunOptions(
            block_size=int(self.config.get_setting("ensemble.block_size", DEFAULT_BLOCK_SIZE)),
            workers=int(self.config.get_setting("ensemble.workers", 1)))

        self.handlers: Dict[str, Callable[[ExperimentConfig], Dict[str, Any]]] = {
            "chsh": self._run_chsh,
            "ghz": self._run_ghz,
            "pc": self._run_pc,
            "mermin-bruteforce": self._run_mermin,
            "tally": self._run_tally,
            "measure": self._run_measure,
            "fapp": self._run_fapp,
            "recognize": self._run_recognize,
        }

        # Lab metrics
        self.metrics = {
            "experiments": 0,
            "failures": 0,
            "runtime": 0.0,
        }

    def load_experiment(self, path: str, **overrides) -> ExperimentConfig:
        """Read a descriptor and apply command-line overrides"""
        try:
            data = self.config.load_experiment(path)
            experiment = ExperimentConfig.from_dict(data, source=str(path),
                                                    default_trials=self.default_trials)
            return experiment.with_overrides(**overrides)
        except ConfigError as e:
            self.logger.error(f"Experiment config error: {e}")
            raise

    def run_experiment(self, experiment: ExperimentConfig) -> RunReport:
        """Dispatch one experiment to its module and wrap the result"""
        handler = self.handlers.get(experiment.kind)
        if handler is None:
            raise ConfigError(f"unknown experiment kind {experiment.kind!r}")

        self.logger.info(f"Running {experiment.kind} (trials={experiment.trials}, "
                         f"seed={experiment.seed}, source={experiment.source or '<inline>'})")
        start = time.perf_counter()
        try:
            result = handler(experiment)
        except ConfigError as e:
            self.metrics["failures"] += 1
            self.logger.error(f"Invalid experiment parameters: {e}")
            raise ConfigError(f"{experiment.source or '<inline config>'}: {e}") from e
        except (KeyError, TypeError, ValueError) as e:
            self.metrics["failures"] += 1
            self.logger.error(f"Invalid experiment parameters: {e!r}")
            raise ConfigError(f"{experiment.source or '<inline config>'}: {e!r}") from e
        except SRLabError as e:
            self.metrics["failures"] += 1
            self.logger.error(f"Experiment failed: {type(e).__name__}: {e}")
            raise ExperimentError(experiment.source, e) from e

        elapsed = time.perf_counter() - start
        self.metrics["experiments"] += 1
        self.metrics["runtime"] += elapsed
        self.logger.info(f"{experiment.kind} finished in {elapsed:.3f}s")
        return RunReport(experiment, result, self.tool_version, self.options.block_size, elapsed)

    # Bell-type experiments

    def _optional_state(self, experiment: ExperimentConfig, default: str):
        spec = experiment.params.get("state", default)
        return self.presets.state(spec) if spec is not None else None

    def _run_chsh(self, experiment: ExperimentConfig) -> Dict[str, Any]:
        model = self.presets.model(experiment.model)
        pairs = chsh_pairs_from_angles(self.presets.angles(experiment.params.get("angles", "chsh-optimal")))
        state = self._optional_state(experiment, "singlet")
        return run_chsh(model, pairs, experiment.trials, experiment.seed, state, self.options).to_dict()

    def _run_pc(self, experiment: ExperimentConfig) -> Dict[str, Any]:
        model = self.presets.model(experiment.model)
        direction = self.presets.direction(experiment.params.get("direction", [0.0, 0.0, 1.0]))
        return run_singlet_pc(model, direction, experiment.trials, experiment.seed,
                              options=self.options).to_dict()

    def _run_ghz(self, experiment: ExperimentConfig) -> Dict[str, Any]:
        scenario = self.presets.scenario(experiment.params.get("scenario", "ghz-standard"))
        model = self.presets.model(experiment.model, scenario.parity_map())
        state = self._optional_state(experiment, "ghz")
        return run_ghz(model, scenario, experiment.trials, experiment.seed, state,
                       self.options).to_dict()

    def _run_mermin(self, experiment: ExperimentConfig) -> Dict[str, Any]:
        scenario = self.presets.scenario(experiment.params.get("scenario", "ghz-standard"))
        result = mermin_bruteforce(scenario).to_dict()
        state = self._optional_state(experiment, "ghz")
        quantum = quantum_parities(state, scenario) if state is not None else [None] * 4
        result["table"] = [{"context": c, "required_parity": p, "quantum_parity": q}
                           for c, p, q in zip(scenario.contexts, scenario.parities, quantum)]
        return result

    # Ensemble statistics

    def _run_tally(self, experiment: ExperimentConfig) -> Dict[str, Any]:
        model = self.presets.model(experiment.model)
        setting = self.presets.setting(
            experiment.params.get("setting", {"party": "A", "theta": 0.0, "label": "a"}))
        window_spec = experiment.params.get("window", {"values": [1]})
        window = setting_observable(setting).window(window_spec.get("values", []),
                                                    bool(window_spec.get("includes_a0", False)))

        tallies = tally_counts(model, setting, window, experiment.trials, experiment.seed,
                               options=self.options)
        result = tallies.to_dict()
        result["summary"].update(estimate_probabilities(tallies).to_dict())
        result["summary"].update(fair_sampling_check(tallies).to_dict())
        return result

    # Measurement dynamics

    def _branching(self, spec: Mapping[str, Any]) -> MeasurementBranching:
        if "c" not in spec or "t" not in spec:
            raise ConfigError("branching needs coefficient lists c and t")
        return MeasurementBranching.standard([parse_amplitude(x) for x in spec["c"]],
                                             [parse_amplitude(x) for x in spec["t"]],
                                             spec.get("system_dim"), spec.get("apparatus_dim"))

    def _run_measure(self, experiment: ExperimentConfig) -> Dict[str, Any]:
        b = self._branching(experiment.params.get("branching", {}))
        chi_f = evolve_premeasurement(b)
        registered, unregistered = branch_probabilities(b)
        s_f = select_detected(chi_f, b)
        fapp = fapp_compare(s_f, b.dims)

        reduced = partial_trace(s_f.density(), b.dims, "A").matrix
        gap = float(np.max(np.abs(reduced - projection_mixture(b).matrix)))

        summary = {"final_state_norm": float(np.linalg.norm(chi_f.amplitudes)),
                   "registered_probability": registered,
                   "no_registration_probability": unregistered,
                   "branch_probability_sum": registered + unregistered,
                   "projection_mixture_gap": gap}
        summary.update(fapp.to_dict())

        table = []
        for i, (c, t, t_prime) in enumerate(zip(b.c, b.t, b.t_prime)):
            weight = abs(c * t) ** 2
            table.append({"branch": i + 1, "abs_c": abs(c), "abs_t": abs(t), "t_prime": t_prime,
                          "registered_weight": weight,
                          "selected_weight": weight / registered if registered else 0.0})
        return {"summary": summary, "table": table}

    def _run_fapp(self, experiment: ExperimentConfig) -> Dict[str, Any]:
        """Pure S_f against its mixture for seeded random final states"""
        source = experiment.params.get("source", "branching")
        if source not in ("branching", "haar"):
            raise ConfigError(f"fapp source must be branching or haar, got {source!r}")
        branches = int(experiment.params.get("branches", 2))
        dims = tuple(experiment.params.get("dims", (2, 2)))
        rng = block_rng(experiment.seed, FAPP_STREAM)

        table = []
        for i in range(experiment.trials):
            if source == "haar":
                s_f = random_state(rng, dims)
                sample_dims = dims
            else:
                b = random_branching(rng, branches)
                s_f = select_detected(evolve_premeasurement(b), b)
                sample_dims = b.dims
            report = fapp_compare(s_f, sample_dims)
            row = {"sample": i, "schmidt_rank": len(report.schmidt_weights)}
            row.update({k: v for k, v in report.to_dict().items()
                        if k not in ("schmidt_weights", "schmidt_rank")})
            row["support_identity_error"] = abs(report.support_prob_mixture
                                                - sum(w * w for w in report.schmidt_weights))
            table.append(row)

        summary = {
            "samples": len(table), "source": source,
            "max_local_prob_diff": max(r["local_prob_max_diff"] for r in table),
            "max_support_identity_error": max(r["support_identity_error"] for r in table),
            "min_support_prob_pure": min(r["support_prob_pure"] for r in table),
            "max_support_prob_mixture": max(r["support_prob_mixture"] for r in table),
        }
        return {"summary": summary, "table": table}

    def _run_recognize(self, experiment: ExperimentConfig) -> Dict[str, Any]:
        if "state" not in experiment.params:
            raise ConfigError("recognize needs the prepared state")
        state = self.presets.state(experiment.params["state"])
        candidate = self.presets.state(experiment.params.get("candidate", experiment.params["state"]))
        efficiency = float(experiment.params.get("detection_efficiency", 1.0))
        min_detected = int(experiment.params.get("min_detected", 1))

        outcomes = simulate_support_tests(state, candidate, experiment.trials, experiment.seed,
                                          efficiency)
        detected = [o for o in outcomes if o.registered]
        hits = sum(1 for o in detected if o.value == 1.0)
        return {"summary": {
            "trials": experiment.trials, "detected": len(detected), "support_hits": hits,
            "counterexamples": len(detected) - hits,
            "support_probability": born_probability(state, support_of(candidate)),
            "min_detected": min_detected,
            "recognized": recognize_state(outcomes, min_detected)}}
