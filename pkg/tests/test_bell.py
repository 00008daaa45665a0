import math

import numpy as np
import pytest

from src.core.bell import (ParityScenario, SettingPair, chsh_pairs, chsh_pairs_from_angles,
                           mermin_bruteforce, quantum_chsh, quantum_correlation, quantum_parities,
                           run_chsh, run_ghz, run_singlet_pc)
from src.core.ensemble import RunOptions
from src.core.errors import DimensionError, NoDetectionsError
from src.core.hilbert import ghz_state, singlet_state
from src.core.statespace import MeasurementSetting
from src.models.detection import (AlwaysDetectModel, GhzContextualModel, SingletReferenceModel,
                                  TableModel)
from src.models.factory import STANDARD_GHZ_PARITIES

OPTIMAL = {"a": 0, "a_prime": 90, "b": 45, "b_prime": 315}
OPTIONS = RunOptions(block_size=4096)


class TestSettingPairs:
    def test_chsh_signs(self):
        assert [p.sign for p in chsh_pairs_from_angles(OPTIMAL)] == [1, 1, 1, -1]

    def test_names(self):
        assert [p.name for p in chsh_pairs_from_angles(OPTIMAL)] == ["a,b", "a,b'", "a',b", "a',b'"]

    def test_chsh_pairs_order(self):
        a, a2 = MeasurementSetting.pauli("A", "X"), MeasurementSetting.pauli("A", "Z")
        b, b2 = MeasurementSetting.pauli("B", "X"), MeasurementSetting.pauli("B", "Z")
        pairs = chsh_pairs(a, a2, b, b2)
        assert pairs[3] == SettingPair(a2, b2, -1)


class TestQuantumOracle:
    @pytest.mark.parametrize("theta", [0, 30, 60, 90, 120, 180])
    def test_singlet_correlation(self, theta):
        a = MeasurementSetting.from_angles("A", 0)
        b = MeasurementSetting.from_angles("B", theta)
        assert quantum_correlation(singlet_state(), a, b) == pytest.approx(
            -math.cos(math.radians(theta)), abs=1e-9)

    def test_optimal_chsh(self):
        assert quantum_chsh(singlet_state(), chsh_pairs_from_angles(OPTIMAL)) == pytest.approx(
            -2 * math.sqrt(2), abs=1e-9)

    def test_chsh_needs_two_qubits(self):
        with pytest.raises(DimensionError):
            quantum_chsh(ghz_state(3), chsh_pairs_from_angles(OPTIMAL))

    def test_ghz_parities(self):
        parities = quantum_parities(ghz_state(3), ParityScenario.standard())
        assert parities == pytest.approx([1, -1, -1, -1], abs=1e-9)


class TestRunChsh:
    def test_detected_violation_full_bound(self):
        report = run_chsh(SingletReferenceModel(), chsh_pairs_from_angles(OPTIMAL), 20000, 42,
                          singlet_state(), OPTIONS)
        assert report.require_detected().value == pytest.approx(-2 * math.sqrt(2), abs=0.1)
        assert abs(report.s_full.value) <= 2
        assert report.per_trial_bound_holds
        assert report.s_min in (-2, 2) and report.s_max in (-2, 2)
        assert report.s_quantum == pytest.approx(-2 * math.sqrt(2), abs=1e-9)

    def test_detection_rates(self):
        report = run_chsh(SingletReferenceModel(), chsh_pairs_from_angles(OPTIMAL), 20000, 1,
                          options=OPTIONS)
        for pair in report.pairs:
            assert pair.bob_detection_rate == 1.0
            assert pair.alice_detection_rate == pytest.approx(0.5, abs=0.02)
            assert pair.pair_detection_rate == pair.alice_detection_rate
        assert report.s_quantum is None

    def test_pair_order_does_not_change_values(self):
        pairs = chsh_pairs_from_angles(OPTIMAL)
        forward = run_chsh(SingletReferenceModel(), pairs, 5000, 9, options=OPTIONS)
        backward = run_chsh(SingletReferenceModel(), pairs[::-1], 5000, 9, options=OPTIONS)
        assert [p.pair.name for p in backward.pairs] == [p.pair.name for p in forward.pairs][::-1]
        assert backward.s_detected.value == pytest.approx(forward.s_detected.value, abs=1e-12)
        assert backward.s_full.value == forward.s_full.value

    def test_worker_count_does_not_change_report(self):
        pairs = chsh_pairs_from_angles(OPTIMAL)
        serial = run_chsh(SingletReferenceModel(), pairs, 10000, 5, options=RunOptions(1000, 1))
        threaded = run_chsh(SingletReferenceModel(), pairs, 10000, 5, options=RunOptions(1000, 4))
        assert serial.to_dict() == threaded.to_dict()

    def test_always_detect_has_no_gap(self):
        report = run_chsh(AlwaysDetectModel(), chsh_pairs_from_angles(OPTIMAL), 5000, 3,
                          options=OPTIONS)
        for pair in report.pairs:
            assert pair.detected.value == pair.full.value
            assert pair.pair_detection_rate == 1.0
        assert report.s_detected.value == report.s_full_pairs.value
        assert abs(report.s_full.value) <= 2
        assert abs(report.s_detected.value) <= 2 + 3 * report.s_detected.stderr
        spread = math.hypot(report.s_detected.stderr, report.s_full.stderr)
        assert abs(report.s_detected.value - report.s_full.value) <= 4 * spread

    def test_reference_model_fails_fair_sampling(self):
        report = run_chsh(SingletReferenceModel(), chsh_pairs_from_angles(OPTIMAL), 20000, 42,
                          options=OPTIONS)
        assert all(abs(pair.fair_sampling_z) > 5 for pair in report.pairs)

    @pytest.mark.parametrize("angles", [
        OPTIMAL,
        {"a": 0, "a_prime": 0, "b": 0, "b_prime": 0},
        {"a": 0, "a_prime": 90, "b": 45, "b_prime": 135},
        {"a": 0, "a_prime": 60, "b": 30, "b_prime": 90},
        {"a": 20, "a_prime": 110, "b": 65, "b_prime": 335},
    ])
    def test_detected_s_matches_oracle(self, angles):
        pairs = chsh_pairs_from_angles(angles)
        report = run_chsh(SingletReferenceModel(), pairs, 20000, 17, singlet_state(), OPTIONS)
        detected = report.require_detected()
        assert abs(detected.value - quantum_chsh(singlet_state(), pairs)) <= 3 * detected.stderr + 1e-9

    def test_no_detections(self):
        model = TableModel({"parties": ["A", "B"], "microstates": [{
            "values": {"A:a": 1, "A:a'": 1, "B:b": 1, "B:b'": -1},
            "detect": {"A:a": 0, "A:a'": 0}}]})
        report = run_chsh(model, chsh_pairs_from_angles(OPTIMAL), 100, 1, options=OPTIONS)
        assert report.s_detected is None
        assert report.s_full.value == 2
        with pytest.raises(NoDetectionsError):
            report.require_detected()

    def test_trials_must_be_positive(self):
        with pytest.raises(ValueError):
            run_chsh(SingletReferenceModel(), chsh_pairs_from_angles(OPTIMAL), 0, 1)


class TestPerfectCorrelation:
    def test_detected_pairs_always_anticorrelate(self):
        direction = MeasurementSetting.from_angles("A", 37, 120).axis
        result = run_singlet_pc(SingletReferenceModel(), direction, 20000, 4, options=OPTIONS)
        assert result.anticorrelation_rate_detected == 1.0
        assert result.pair_detection_rate == pytest.approx(0.5, abs=0.02)

    def test_rate_is_exact_in_random_directions(self, rng):
        for _ in range(3):
            direction = rng.normal(size=3)
            direction /= np.linalg.norm(direction)
            result = run_singlet_pc(SingletReferenceModel(), direction, 5000, 8, options=OPTIONS)
            assert result.anticorrelation_rate_detected == 1.0


class TestParityScenario:
    def test_needs_four_contexts(self):
        with pytest.raises(ValueError):
            ParityScenario(("XXX",), (1,))

    def test_contexts_use_x_and_y(self):
        with pytest.raises(ValueError):
            ParityScenario(("XXZ", "XYY", "YXY", "YYX"), (1, -1, -1, -1))

    def test_settings(self):
        settings = ParityScenario.standard().settings("XYY")
        assert [s.key for s in settings] == ["A:X", "B:Y", "C:Y"]


class TestMerminBruteforce:
    def test_standard_scenario_is_unsatisfiable(self):
        result = mermin_bruteforce(ParityScenario.standard())
        assert not result.satisfiable
        assert result.assignment_count == 0
        assert result.assignments_total == 64
        assert result.max_satisfied == 3
        assert result.algebraic_obstruction

    def test_even_scenario_is_satisfiable(self):
        result = mermin_bruteforce(ParityScenario(("XXX", "XYY", "YXY", "YYX"), (1, 1, 1, 1)))
        assert result.satisfiable
        assert result.assignment_count == 8
        assert not result.algebraic_obstruction


class TestRunGhz:
    def test_detected_parities_are_perfect(self):
        report = run_ghz(GhzContextualModel(STANDARD_GHZ_PARITIES), ParityScenario.standard(),
                         20000, 7, ghz_state(3), OPTIONS)
        for context in report.contexts:
            assert context.parity_rate_detected == 1.0
            assert context.detection_rate == pytest.approx(0.5, abs=0.02)
            assert context.parity_rate_full == pytest.approx(0.5, abs=0.02)
        assert [c.quantum_parity for c in report.contexts] == pytest.approx([1, -1, -1, -1], abs=1e-9)
        assert report.to_dict()["summary"]["contexts"] == 4
