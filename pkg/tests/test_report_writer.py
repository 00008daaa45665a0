import csv
import io
import json

import numpy as np
import pytest

from src.core.errors import FormatError
from src.core.lab import ExperimentConfig, RunReport
from src.utils.report_writer import emit_report, parse_report, to_plain


@pytest.fixture
def chsh_report(lab):
    return lab.run_experiment(ExperimentConfig.from_dict({"kind": "chsh", "trials": 2000, "seed": 3}))


@pytest.fixture
def pc_report(lab):
    return lab.run_experiment(ExperimentConfig.from_dict({"kind": "pc", "trials": 2000, "seed": 3}))


class TestJson:
    def test_keys_are_sorted(self, chsh_report):
        payload = json.loads(emit_report(chsh_report))
        assert list(payload) == sorted(payload)
        assert payload["kind"] == "chsh"

    def test_elapsed_time_is_not_serialized(self, chsh_report):
        assert b"elapsed" not in emit_report(chsh_report)

    @pytest.mark.parametrize("indent", [None, 2])
    def test_round_trip(self, chsh_report, indent):
        data = emit_report(chsh_report, "json", indent)
        assert emit_report(parse_report(data), "json", indent) == data

    def test_floats_round_trip_exactly(self, chsh_report):
        payload = parse_report(emit_report(chsh_report))
        assert payload["result"]["summary"]["s_full"] == chsh_report.result["summary"]["s_full"]


class TestCsv:
    def test_one_row_per_pair_plus_summary(self, chsh_report):
        rows = list(csv.DictReader(io.StringIO(emit_report(chsh_report, "csv").decode("utf-8"))))
        assert [r["row"] for r in rows] == ["table"] * 4 + ["summary"]
        assert rows[0]["pair"] == "a,b"
        assert rows[-1]["s_full"] != ""

    def test_tally_columns(self, lab):
        report = lab.run_experiment(ExperimentConfig.from_dict({"kind": "tally", "trials": 2000, "seed": 1}))
        reader = csv.DictReader(io.StringIO(emit_report(report, "csv").decode("utf-8")))
        assert {"cell", "N", "N0", "N_F"} <= set(reader.fieldnames)

    def test_non_tabular_payload(self, pc_report):
        with pytest.raises(FormatError):
            emit_report(pc_report, "csv")


class TestText:
    def test_summary_and_elapsed(self, chsh_report):
        text = emit_report(chsh_report, "text").decode("utf-8")
        assert text.startswith("sr-lab")
        assert "elapsed:" in text
        assert "s_detected" in text

    def test_summary_only_payload(self, pc_report):
        assert "anticorrelation_rate_detected" in emit_report(pc_report, "text").decode("utf-8")


class TestErrors:
    def test_unknown_format(self, chsh_report):
        with pytest.raises(FormatError):
            emit_report(chsh_report, "xml")

    def test_non_finite_values(self):
        report = RunReport(ExperimentConfig.from_dict({"kind": "mermin-bruteforce"}),
                           {"summary": {"x": float("nan")}}, "1.0.0")
        with pytest.raises(FormatError):
            emit_report(report)

    def test_parse_garbage(self):
        with pytest.raises(FormatError):
            parse_report(b"{not json")

    def test_parse_needs_result(self):
        with pytest.raises(FormatError):
            parse_report(b"[1, 2]")


class TestToPlain:
    def test_numpy_values(self):
        plain = to_plain({"a": np.float64(0.5), "b": np.int64(3), "c": np.array([1, 2]),
                          "d": (np.bool_(True),), "e": 1 + 2j})
        assert plain == {"a": 0.5, "b": 3, "c": [1, 2], "d": [True], "e": [1.0, 2.0]}
        assert type(plain["b"]) is int
