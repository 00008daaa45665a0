import numpy as np
import pytest

from src.core.ensemble import (CellTally, MicroState, Outcome, RunOptions, TallyCounts, block_rng,
                               estimate_probabilities, fair_sampling_check, measure_object,
                               run_blocks, sample_ensemble, tally_counts, trial_blocks)
from src.core.errors import EmptyEnsembleError, NoDetectionsError, NoRepresentationError
from src.core.statespace import MeasurementSetting, setting_observable
from src.models.detection import AlwaysDetectModel, SingletReferenceModel, TableModel

A_UP = MeasurementSetting("A", (0, 0, 1), "a")

BIASED_TABLE = {
    "name": "biased",
    "parties": ["A", "B"],
    "microstates": [
        {"values": {"A:a": 1}, "detect": {"A:a": 0.9}},
        {"values": {"A:a": -1}, "detect": {"A:a": 0.1}},
    ],
}


def up_window(setting=A_UP, includes_a0=False):
    return setting_observable(setting).window([1], includes_a0)


class TestCounterBasedStreams:
    def test_same_key_same_draws(self):
        np.testing.assert_array_equal(block_rng(5, 1, 2).random(10), block_rng(5, 1, 2).random(10))

    def test_different_keys_differ(self):
        assert not np.array_equal(block_rng(5, 1, 2).random(10), block_rng(5, 1, 3).random(10))

    def test_negative_seed(self):
        with pytest.raises(ValueError):
            block_rng(-1)

    def test_trial_blocks(self):
        assert [b.size for b in trial_blocks(10, 4)] == [4, 4, 2]
        assert [b.start for b in trial_blocks(10, 4)] == [0, 4, 8]

    def test_run_blocks_keeps_block_order(self):
        result = run_blocks(lambda b: b.index, 100, RunOptions(block_size=7, workers=4))
        assert result == list(range(15))

    def test_run_options_validation(self):
        with pytest.raises(ValueError):
            RunOptions(block_size=0)


class TestSampleEnsemble:
    def test_empty_ensemble(self):
        with pytest.raises(EmptyEnsembleError):
            sample_ensemble(SingletReferenceModel(), 0, seed=1)

    def test_reproducible(self):
        a = sample_ensemble(SingletReferenceModel(), 500, seed=9)
        b = sample_ensemble(SingletReferenceModel(), 500, seed=9)
        np.testing.assert_array_equal(a.hidden, b.hidden)

    def test_worker_count_does_not_matter(self):
        serial = sample_ensemble(SingletReferenceModel(), 1000, 3, options=RunOptions(100, 1))
        threaded = sample_ensemble(SingletReferenceModel(), 1000, 3, options=RunOptions(100, 4))
        np.testing.assert_array_equal(serial.hidden, threaded.hidden)

    def test_sequence_access(self):
        ensemble = sample_ensemble(SingletReferenceModel(), 20, seed=2)
        assert len(ensemble) == 20
        assert len(ensemble[5:10]) == 5
        assert ensemble[0].cell == ensemble.cells[0]
        assert sum(ensemble.cell_counts().values()) == 20


class TestMeasureObject:
    def test_draw_range(self):
        micro = sample_ensemble(SingletReferenceModel(), 1, seed=1)[0]
        with pytest.raises(ValueError):
            measure_object(SingletReferenceModel(), micro, A_UP, 1.0)

    def test_no_registration_above_detection_probability(self):
        micro = MicroState(np.array([0.0, 0.6, 0.8]), 0)
        assert not measure_object(SingletReferenceModel(), micro, A_UP, 0.85).registered
        assert measure_object(SingletReferenceModel(), micro, A_UP, 0.5) == Outcome.of(-1)

    def test_outcome_str(self):
        assert str(Outcome.no_registration()) == "a0"
        assert str(Outcome.of(-1)) == "-1"


class TestTallyCounts:
    def test_counts_add_up(self):
        t = tally_counts(SingletReferenceModel(), A_UP, up_window(), 5000, seed=1)
        assert t.n == 5000
        assert sum(r.n for r in t.rows) == 5000
        assert t.cell_identities_hold()
        assert t.aggregate_identity_holds()
        assert t.dichotomic()

    def test_window_with_a0_is_rejected(self):
        with pytest.raises(NoRepresentationError):
            tally_counts(SingletReferenceModel(), A_UP, up_window(includes_a0=True), 100, seed=1)

    def test_empty_tally(self):
        with pytest.raises(EmptyEnsembleError):
            tally_counts(SingletReferenceModel(), A_UP, up_window(), 0, seed=1)

    def test_random_configurations_satisfy_identities(self):
        """Both identities hold exactly and every cell is dichotomic"""
        rng = np.random.default_rng(77)
        for _ in range(100):
            theta, phi = rng.uniform(0, 180), rng.uniform(0, 360)
            setting = MeasurementSetting.from_angles(str(rng.choice(["A", "B"])), theta, phi)
            window = setting_observable(setting).window([float(rng.choice([1, -1]))])
            t = tally_counts(SingletReferenceModel(), setting, window, int(rng.integers(50, 2000)),
                             seed=int(rng.integers(0, 2 ** 31)), options=RunOptions(block_size=256))
            assert t.cell_identities_hold()
            assert t.aggregate_identity_holds()
            assert t.dichotomic()

    def test_worker_count_does_not_matter(self):
        serial = tally_counts(SingletReferenceModel(), A_UP, up_window(), 3000, 8,
                              options=RunOptions(500, 1))
        threaded = tally_counts(SingletReferenceModel(), A_UP, up_window(), 3000, 8,
                                options=RunOptions(500, 3))
        assert serial == threaded

    def test_inconsistent_totals(self):
        with pytest.raises(ValueError):
            TallyCounts(5, 0, (CellTally(0, 1.0, 4, 0, 4, True),))

    def test_nf_bounded_by_detected(self):
        with pytest.raises(ValueError):
            TallyCounts(4, 2, (CellTally(0, 1.0, 4, 2, 3, True),))

    def test_addition_merges_cells(self):
        a = TallyCounts(4, 1, (CellTally(0, 1.0, 4, 1, 3, True),))
        b = TallyCounts(6, 2, (CellTally(0, 1.0, 2, 0, 2, True), CellTally(1, -1.0, 4, 2, 0, False)))
        total = a + b
        assert (total.n, total.n0, total.nf) == (10, 3, 5)
        assert [(r.cell, r.n) for r in total.rows] == [(0, 6), (1, 4)]

    def test_to_dict_table(self):
        t = tally_counts(SingletReferenceModel(), A_UP, up_window(), 1000, seed=1)
        table = t.to_dict()["table"]
        assert set(table[0]) == {"cell", "value", "N", "N0", "N_F", "in_window"}


class TestEstimateProbabilities:
    def test_factorization_is_exact(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            t = tally_counts(SingletReferenceModel(), A_UP, up_window(), int(rng.integers(200, 3000)),
                             seed=int(rng.integers(0, 10 ** 6)))
            p = estimate_probabilities(t)
            assert p.p_total == p.p_detect * p.p_conditional
            assert p.p_total == pytest.approx(t.nf / t.n, rel=1e-12)

    def test_no_detections(self):
        t = TallyCounts(10, 10, (CellTally(0, 1.0, 10, 10, 0, True),))
        p = estimate_probabilities(t)
        assert p.p_conditional is None
        assert p.p_total == 0.0
        with pytest.raises(NoDetectionsError):
            p.require_conditional()

    def test_always_detect(self):
        t = tally_counts(AlwaysDetectModel(), A_UP, up_window(), 2000, seed=5)
        p = estimate_probabilities(t)
        assert p.p_detect == 1.0
        assert p.p_total == p.p_conditional


class TestFairSamplingCheck:
    def test_singlet_window_is_fair(self):
        t = tally_counts(SingletReferenceModel(), A_UP, up_window(), 20000, seed=2)
        check = fair_sampling_check(t)
        assert check.full_frequency == pytest.approx(0.5, abs=0.02)
        assert not check.rejected

    def test_biased_table_is_unfair(self):
        t = tally_counts(TableModel(BIASED_TABLE), A_UP, up_window(), 10000, seed=2)
        check = fair_sampling_check(t)
        assert check.detected_frequency == pytest.approx(0.9, abs=0.03)
        assert check.rejected

    def test_no_detections(self):
        check = fair_sampling_check(TallyCounts(3, 3, (CellTally(0, 1.0, 3, 3, 0, True),)))
        assert check.detected_frequency is None
        assert not check.rejected
