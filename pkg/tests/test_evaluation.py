import csv
import io
import logging

import pytest

from serpmine import EvalCounts, Record, TruthManifest, emit_table, precision, recall, score_run
from serpmine.evaluation import (TABLE4, EvalReport, EvalRow, TruthError, read_export,
                                 standard_recall, table4_report)


def counts(tr, er, cr, attribute="Name"):
    return EvalCounts(attribute, tr, er, cr)


class TestRatios:
    def test_depta_name_precision(self):
        assert float(precision(counts(18234, 18204, 17325))) == pytest.approx(0.9517, abs=1e-4)

    def test_wdics_name_precision(self):
        assert precision(counts(18234, 18234, 18234)) == 1

    def test_precision_undefined(self):
        assert precision(counts(10, 0, 0)) is None

    def test_wdics_model_recall(self):
        assert float(recall(counts(18234, 18060, 18060))) == pytest.approx(0.9905, abs=1e-4)

    def test_depta_spec_version_recall(self):
        assert float(recall(counts(5508, 5410, 5016))) == pytest.approx(0.9822, abs=1e-4)

    def test_recall_undefined(self):
        assert recall(counts(0, 0, 0)) is None

    def test_over_extraction_warns_without_clamping(self, caplog):
        with caplog.at_level(logging.WARNING):
            assert recall(counts(10, 12, 9)) > 1
        assert "ER > TR" in caplog.text

    def test_invalid_counts(self):
        with pytest.raises(ValueError):
            counts(10, 5, 6)
        with pytest.raises(ValueError):
            counts(-1, 0, 0)

    def test_standard_recall(self):
        assert standard_recall(counts(100, 90, 80)) == pytest.approx(0.8)


class TestTable4:
    def test_ten_rows(self):
        rows = list(csv.DictReader(io.StringIO(emit_table(table4_report()))))
        assert len(rows) == 10
        by = {(r["attribute"], r["system"]): r for r in rows}
        assert by[("Name", "DEPTA")]["precision"] == "0.9517"
        assert by[("Model", "WDICS")]["recall"] == "0.9905"
        assert by[("Spec Version", "DEPTA")]["recall"] == "0.9822"

    def test_wdics_precision_never_below_depta(self):
        report = table4_report()
        for attribute in TABLE4:
            assert report.row(attribute, "WDICS").precision >= report.row(attribute, "DEPTA").precision


class TestEmitTable:
    def test_empty(self):
        assert emit_table(EvalReport()) == "attribute,system,TR,ER,CR,precision,recall,recall_standard\n"

    def test_na(self):
        text = emit_table(EvalReport([EvalRow(EvalCounts("Name", 5, 0, 0, "X"))]))
        row = list(csv.DictReader(io.StringIO(text)))[0]
        assert row["precision"] == "NA" and row["recall"] == "0.0000"


def manifest():
    m = TruthManifest(("K", "A", "B"), ("K",))
    m.add(Record({"K": {"1"}, "A": {"x"}, "B": {"p", "q"}}), ["https://s.example/1"])
    m.add(Record({"K": {"2"}, "A": {"y\tz"}, "B": set()}), ["https://s.example/2"])
    m.conflicts.append((("1",), "B"))
    return m


class TestTruthManifest:
    def test_round_trip(self):
        m = manifest()
        again = TruthManifest.loads(m.dumps())
        assert again.records == m.records
        assert again.urls == m.urls
        assert again.conflicts == [(("1",), "B")]

    @pytest.mark.parametrize("text", [
        "",
        "garbage\n",
        "# serpmine-truth v1\n1\tK=1\n",
        "# serpmine-truth v1\n# attributes\tK\n# key\tK\n1\tK=1\n1\tK=1\n",
        "# serpmine-truth v1\n# attributes\tK\n# key\tK\n1\tZ=1\n",
        "# serpmine-truth v1\n# attributes\tK\n# key\tK\n2\tK=1\n",
        "# serpmine-truth v1\n# attributes\tK\n# key\tK\n1\tK1\n",
    ])
    def test_malformed(self, text):
        with pytest.raises(TruthError):
            TruthManifest.loads(text)


class TestScoreRun:
    def export(self, rows):
        return "K,A,B\n" + "".join(",".join(r) + "\n" for r in rows)

    def test_perfect(self):
        report = score_run(self.export([("1", "x", "p\x1fq"), ("2", '"y\tz"', "")]), manifest())
        for row in report.rows:
            assert row.precision == 1 and row.recall == 1

    def test_partial(self):
        report = score_run(self.export([("1", "x", "p"), ("3", "w", "")]), manifest())
        b = report.row("B")
        assert (b.counts.total_records, b.counts.extracted_records, b.counts.correct_records) == (1, 1, 0)
        a = report.row("A")
        assert (a.counts.total_records, a.counts.extracted_records, a.counts.correct_records) == (2, 2, 1)

    def test_empty_store(self):
        report = score_run("K,A,B\n", manifest())
        for row in report.rows:
            assert row.precision is None and row.recall == 0

    def test_pure(self):
        e = self.export([("1", "x", "p")])
        assert emit_table(score_run(e, manifest())) == emit_table(score_run(e, manifest()))

    def test_corrupted_names(self, tmp_path):
        from conftest import build_pipeline
        from serpmine import SiteSpec
        run = build_pipeline(tmp_path, SiteSpec(seed=42, corruption_count=5, noise_pages=0))
        row = score_run(run["store"].export_csv(), run["truth"]).row("Name")
        assert (row.counts.extracted_records, row.counts.correct_records) == (150, 145)
        assert float(row.precision) == pytest.approx(0.9667, abs=1e-4)

    def test_read_export(self):
        header, records = read_export("K,A\n1,a\x1fb\n")
        assert header == ("K", "A") and records[0].values["A"] == {"a", "b"}
