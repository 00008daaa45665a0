"""End-to-end checks at full sample sizes.

The million-trial cases are marked slow; run them with ``pytest -m slow``.
"""
import math

import numpy as np
import pytest

from src.core.bell import (ParityScenario, SettingPair, chsh_pairs_from_angles, mermin_bruteforce,
                           quantum_chsh, quantum_parities, run_chsh, run_ghz, run_singlet_pc)
from src.core.ensemble import estimate_probabilities, tally_counts
from src.core.hilbert import ghz_state, singlet_state
from src.core.lab import ExperimentConfig
from src.core.statespace import MeasurementSetting, setting_observable
from src.models.detection import GhzContextualModel, SingletReferenceModel
from src.models.factory import STANDARD_GHZ_PARITIES
from src.utils.report_writer import emit_report, parse_report

MILLION = 1_000_000
OPTIMAL_ANGLES = {"a": 0, "a_prime": 90, "b": 45, "b_prime": 315}


class TestOracles:
    def test_optimal_chsh(self):
        assert quantum_chsh(singlet_state(), chsh_pairs_from_angles(OPTIMAL_ANGLES)) == pytest.approx(
            -2 * math.sqrt(2), abs=1e-9)

    def test_ghz_parities(self):
        assert quantum_parities(ghz_state(), ParityScenario.standard()) == pytest.approx(
            [1, -1, -1, -1], abs=1e-9)

    def test_no_noncontextual_assignment(self):
        result = mermin_bruteforce(ParityScenario.standard())
        assert (result.assignments_total, result.assignment_count, result.satisfiable) == (64, 0, False)


class TestReplay:
    @pytest.mark.parametrize("descriptor", [
        {"kind": "chsh", "trials": 4000, "seed": 42},
        {"kind": "ghz", "trials": 4000, "seed": 7},
        {"kind": "pc", "trials": 4000, "seed": 3, "direction": {"theta": 30, "phi": 45}},
        {"kind": "tally", "trials": 4000, "seed": 11, "model": "biased-pair",
         "setting": {"party": "A", "axis": [0, 0, 1], "label": "a"}},
        {"kind": "mermin-bruteforce", "scenario": "all-even"},
        {"kind": "measure", "branching": {"c": [0.6, 0.8], "t": [0.9, "0.6+0.3j"]}},
        {"kind": "fapp", "trials": 5, "seed": 2024, "branches": 3},
        {"kind": "recognize", "trials": 500, "seed": 5, "state": "phi-plus",
         "detection_efficiency": 0.5},
    ])
    def test_stored_config_replays_byte_identical(self, lab, descriptor):
        stored = emit_report(lab.run_experiment(ExperimentConfig.from_dict(descriptor)))
        replay = ExperimentConfig.from_dict(parse_report(stored)["config"])
        assert emit_report(lab.run_experiment(replay)) == stored


class TestSlowSelection:
    def test_default_run_deselects_slow_cases(self, pytestconfig):
        assert pytestconfig.getini("addopts") == ["-m", "not slow"]
        assert any(line.startswith("slow:") for line in pytestconfig.getini("markers"))


@pytest.mark.slow
class TestSingletReference:
    model = SingletReferenceModel()

    def test_factorized_probabilities(self):
        setting = MeasurementSetting.from_angles("A", 0, label="a")
        window = setting_observable(setting).window([1])
        estimates = estimate_probabilities(tally_counts(self.model, setting, window, MILLION, seed=17))
        assert estimates.p_total == estimates.p_detect * estimates.p_conditional
        assert estimates.p_detect == pytest.approx(0.5, abs=0.005)
        assert estimates.p_conditional == pytest.approx(0.5, abs=0.005)

    @pytest.mark.parametrize("theta", [0, 30, 60, 90, 120, 180])
    def test_detected_correlation_follows_cosine(self, theta):
        pair = SettingPair(MeasurementSetting.from_angles("A", 0, label="a"),
                           MeasurementSetting.from_angles("B", theta, label="b"))
        correlation = run_chsh(self.model, [pair], MILLION, seed=theta + 1).pairs[0].detected
        expected = -math.cos(math.radians(theta))
        assert abs(correlation.value - expected) <= 3 * correlation.stderr + 1e-12

    def test_perfect_anticorrelation(self):
        assert run_singlet_pc(self.model, [0, 0, 1], MILLION, seed=3).anticorrelation_rate_detected == 1.0

    def test_chsh_contrast(self):
        report = run_chsh(self.model, chsh_pairs_from_angles(OPTIMAL_ANGLES), MILLION, seed=42,
                          state=singlet_state())
        assert report.require_detected().value == pytest.approx(-2 * math.sqrt(2), abs=0.02)
        assert abs(report.s_full.value) <= 2
        assert report.per_trial_bound_holds
        assert {report.s_min, report.s_max} <= {-2, 2}
        assert report.s_quantum == pytest.approx(-2 * math.sqrt(2), abs=1e-9)


@pytest.mark.slow
def test_ghz_contextual_detection():
    report = run_ghz(GhzContextualModel(STANDARD_GHZ_PARITIES), ParityScenario.standard(),
                     MILLION, seed=7, state=ghz_state())
    for context in report.contexts:
        assert context.parity_rate_detected == 1.0
        assert context.detection_rate == pytest.approx(0.5, abs=0.005)
    assert np.allclose([c.quantum_parity for c in report.contexts], [1, -1, -1, -1], atol=1e-9)
