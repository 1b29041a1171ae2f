import json
import math
import os

import numpy as np
import pytest

from freqsketch.errors import InvalidParameter, LineError
from freqsketch.harness import (
    ExperimentConfig,
    build_sketch,
    ingest,
    load_source,
    run_experiment,
    variance_bound,
    zipf_stream,
)
from freqsketch import cli
from freqsketch.finalize import produce_sample

from conftest import sketch_state


class TestIngest:
    def test_tab_separated_and_default_value(self, tmp_path):
        path = tmp_path / "data.tsv"
        path.write_text("dog\t3\ncat\nfish\t0.5\n", encoding="utf-8")
        assert list(ingest(str(path))) == [("dog", 3.0), ("cat", 1.0), ("fish", 0.5)]

    def test_bad_value_fails_fast_with_line_number(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("dog\t3\ncat\t-1\n", encoding="utf-8")
        with pytest.raises(LineError) as err:
            list(ingest(str(path)))
        assert err.value.lineno == 2

    def test_unparseable_value(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("dog\tx\n", encoding="utf-8")
        with pytest.raises(LineError):
            list(ingest(str(path)))


class TestZipf:
    def test_deterministic_and_unit_values(self):
        k1, v1 = zipf_stream(1.5, 5000, 3)
        k2, _ = zipf_stream(1.5, 5000, 3)
        assert k1 == k2
        assert v1.sum() == 5000
        k3, _ = zipf_stream(1.5, 5000, 4)
        assert k3 != k1

    def test_empty_stream(self):
        keys, vals = zipf_stream(1.5, 0, 1)
        assert keys == [] and len(vals) == 0

    def test_alpha_guard(self):
        with pytest.raises(InvalidParameter):
            zipf_stream(1.0, 10, 1)

    def test_distinct_scale(self):
        keys, _ = zipf_stream(1.5, 2_000_000, 5)
        distinct = len(set(keys))
        # order-of-magnitude check against the expected tens of thousands
        assert 1e4 < distinct < 5e4


def test_variance_bound_values():
    assert f"{variance_bound(25, 0.5):.3f}" == "0.834"
    assert f"{variance_bound(50, 0.5):.3f}" == "0.577"
    assert f"{variance_bound(75, 0.5):.3f}" == "0.468"
    assert f"{variance_bound(100, 0.5):.3f}" == "0.404"


def test_load_source_zipf_spec():
    label, keys, vals = load_source("zipf:1.5:1000:7")
    assert label == "zipf1.5-n1000"
    assert len(keys) == 1000 and vals.sum() == 1000


def test_partitioned_build_equals_sequential():
    keys, vals = zipf_stream(1.3, 3000, 9)
    seq = build_sketch(keys, vals, 6, 0.5, "sqrt", seed=5)
    for parts in (2, 3, 7):
        merged = build_sketch(keys, vals, 6, 0.5, "sqrt", seed=5, partitions=parts)
        assert sketch_state(merged) == sketch_state(seq)
        assert produce_sample(merged).entries == produce_sample(seq).entries


class TestRunExperiment:
    def _config(self, **kw):
        base = dict(
            source="zipf:1.2:2000:3",
            fn_name="sqrt",
            ks=(5,),
            eps=0.5,
            reps=8,
            seed=12,
        )
        base.update(kw)
        return ExperimentConfig(**base)

    def test_report_structure_and_bound(self):
        report = run_experiment(self._config())
        row = report.rows[0]
        assert row.k == 5 and row.reps == 8
        assert row.bound == pytest.approx(variance_bound(5, 0.5))
        assert row.keys_max >= row.keys_avg > 0
        assert row.elems_max >= row.elems_avg > 0
        assert len(report.raw["5"]["estimates"]) == 8

    def test_single_key_degenerate_has_zero_error(self, tmp_path):
        path = tmp_path / "one.tsv"
        path.write_text("only\t2\n" * 50, encoding="utf-8")
        report = run_experiment(self._config(source=str(path), ks=(3,), reps=3))
        assert report.rows[0].nrmse == pytest.approx(0.0, abs=1e-12)
        assert report.rows[0].nrmse_ppswor == pytest.approx(0.0, abs=1e-12)
        assert report.rows[0].nrmse_priority == pytest.approx(0.0, abs=1e-12)

    def test_identical_config_identical_bytes(self):
        a = run_experiment(self._config())
        b = run_experiment(self._config())
        assert a.to_csv() == b.to_csv()
        assert a.to_json() == b.to_json()

    def test_parallel_matches_serial(self):
        serial = run_experiment(self._config())
        parallel = run_experiment(self._config(jobs=2))
        assert serial.to_csv() == parallel.to_csv()

    def test_collector_second_pass_matches_table(self):
        a = run_experiment(self._config(second_pass="collector"))
        b = run_experiment(self._config(second_pass="table"))
        assert a.to_csv() == b.to_csv()

    def test_domain_prefix_restricts_truth(self):
        full = run_experiment(self._config())
        dom = run_experiment(self._config(domain_prefix="1"))
        assert dom.truth["statistic"] < full.truth["statistic"]

    def test_partitioned_experiment_runs(self):
        report = run_experiment(self._config(partitions=3, reps=2))
        assert len(report.raw["5"]["estimates"]) == 2

    def test_config_validation(self):
        with pytest.raises(InvalidParameter):
            self._config(reps=0)
        with pytest.raises(InvalidParameter):
            self._config(ks=(2,))
        with pytest.raises(InvalidParameter):
            self._config(second_pass="magic")


class TestCli:
    def test_gen_sketch_sample_estimate_chain(self, tmp_path, capsys):
        data = tmp_path / "data.tsv"
        assert cli.main(["gen-zipf", "--alpha", "1.5", "--n", "2000", "--seed", "3",
                         "--output", str(data)]) == 0
        sketch_path = tmp_path / "sk.json"
        assert cli.main([
            "sketch", "--input", str(data), "--k", "5", "--eps", "0.5",
            "--fn", "sqrt", "--seed", "11", "--output", str(sketch_path),
        ]) == 0
        sample_path = tmp_path / "sample.json"
        assert cli.main(["sample", "--input", str(sketch_path), "--output", str(sample_path)]) == 0
        assert cli.main(["estimate", "--sample", str(sample_path), "--input", str(data)]) == 0
        out = capsys.readouterr().out
        payload = json.loads(out.strip().splitlines()[-1])
        truth = sum(math.sqrt(v) for v in np.unique(
            np.array([line.split("\t")[0] for line in data.read_text().splitlines()]),
            return_counts=True,
        )[1])
        assert payload["estimate"] == pytest.approx(truth, rel=0.8)

    def test_experiment_writes_csv_and_json(self, tmp_path):
        out = tmp_path / "report"
        code = cli.main([
            "experiment", "--input", "zipf:1.5:1500:2", "--k", "4,6", "--reps", "4",
            "--seed", "5", "--output", str(out),
        ])
        assert code == 0
        csv_text = (tmp_path / "report.csv").read_text()
        assert csv_text.splitlines()[0].startswith("dataset,fn,k")
        assert len(csv_text.splitlines()) == 3
        payload = json.loads((tmp_path / "report.json").read_text())
        assert set(payload["raw"]) == {"4", "6"}

    def test_errors_exit_nonzero(self, tmp_path, capsys):
        missing = tmp_path / "nope.tsv"
        missing.write_text("a\t-3\n", encoding="utf-8")
        code = cli.main([
            "sketch", "--input", str(missing), "--k", "5", "--output", str(tmp_path / "s.json"),
        ])
        assert code == 2
        assert "error:" in capsys.readouterr().err
