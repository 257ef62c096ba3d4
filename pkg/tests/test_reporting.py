"""
Tests for reports, plots and provenance
=======================================
"""

import json

import numpy as np
import pandas as pd
import pytest

from dualaug.config import DataConfig, RunConfig
from dualaug.evalgen import build_benchmark
from dualaug.reporting import (
    AGENT_LOG_COLUMNS,
    ReportGenerator,
    agent_log_frame,
    proportions_frame,
    spectrum_frame,
    write_compare,
)
from dualaug.trainer import run
from dualaug.verification import OutputVerifier, sanitize_for_json
from dualaug.visualizer import Visualizer
from dualaug.windows import Action


@pytest.fixture(scope="module")
def finished_run():
    data = DataConfig(n_points=600, n_anomalies=6, anomaly_length=(10, 20), n_hard=2, hard_length=(10, 20))
    cfg = RunConfig(w=12, e=1, k=50, n_iters=10, warm_start_steps=8, m=32, max_epochs=2, patience=1,
                    reference_epochs=1, detector={'hidden_sizes': [6], 'bottleneck': 3, 'batch_size': 16},
                    agent={'hidden_sizes': [8], 'minibatch': 8})
    bench = build_benchmark(data, 0)
    _, report = run(bench.train, cfg, seed=0, x_test=bench.test)
    return bench, report


class TestReportGenerator:

    def test_writes_all_artifacts(self, finished_run, tmp_path):
        bench, report = finished_run
        data_file = tmp_path / "train.csv"
        bench.train.write_csv(data_file)
        paths = ReportGenerator(tmp_path / "run").write_run(report, [data_file], series=bench.train)
        names = {p.name for p in paths}
        assert names == {"report.json", "epochs.csv", "samples.csv", "rewards.csv", "agent_log.csv",
                         "spectrum.csv", "proportions.csv", "summary.md"}

        samples = pd.read_csv(tmp_path / "run" / "samples.csv")
        assert list(samples.columns) == ["id", "start", "w"]
        assert len(samples) == report.final_samples

        log = pd.read_csv(tmp_path / "run" / "agent_log.csv")
        assert list(log.columns) == AGENT_LOG_COLUMNS
        assert len(log) == 10
        assert set(log["action"]) <= {"expand", "preserve", "delete"}
        assert (log["epoch"] == 0).all()

        epochs = pd.read_csv(tmp_path / "run" / "epochs.csv")
        assert {"n_expand", "n_preserve", "n_delete"} <= set(epochs.columns)

        summary = (tmp_path / "run" / "summary.md").read_text()
        assert "Point-adjusted best F1" in summary
        assert "train.csv (SHA-256)" in summary

    def test_signed_report_verifies(self, finished_run, tmp_path):
        bench, report = finished_run
        data_file = tmp_path / "train.csv"
        bench.train.write_csv(data_file)
        ReportGenerator(tmp_path).write_run(report, [data_file])
        verifier = OutputVerifier()
        assert verifier.verify_report(tmp_path / "report.json")["valid"]

        body = json.loads((tmp_path / "report.json").read_text())
        body["final_samples"] += 1
        (tmp_path / "report.json").write_text(json.dumps(body))
        assert not verifier.verify_report(tmp_path / "report.json")["valid"]

    def test_modified_data_file_detected(self, finished_run, tmp_path):
        bench, report = finished_run
        data_file = tmp_path / "train.csv"
        bench.train.write_csv(data_file)
        ReportGenerator(tmp_path).write_run(report, [data_file])
        data_file.write_text("x0\n0\n")
        assert not OutputVerifier().verify_report(tmp_path / "report.json")["valid"]


class TestFrames:

    def test_proportions_start_at_initial_set(self, finished_run):
        _, report = finished_run
        frame = proportions_frame(report)
        assert frame["epoch"].tolist() == [-1, 0]
        assert frame["ac_frac"].iloc[0] == pytest.approx(report.initial_ac_frac)

    def test_agent_log_rows(self, finished_run):
        _, report = finished_run
        frame = agent_log_frame(report)
        assert frame["iteration"].tolist() == list(range(10))
        assert frame["reward"].between(0.0, 1.0).all()
        assert frame["agent_loss"].notna().all()

    def test_spectrum_per_class(self, finished_run):
        bench, report = finished_run
        frame = spectrum_frame(bench.train, 12, report.behavior_records)
        assert set(frame["class"]) <= {"simple", "hard", "contamination"}
        assert (frame.groupby("class").size() == 7).all()

    def test_unlabeled_records_grouped_as_all(self, sine_series):
        frame = spectrum_frame(sine_series, 12, [{"start": 0}, {"start": 12}])
        assert set(frame["class"]) == {"all"}

    def test_write_compare(self, tmp_path):
        rows = [{"seed": 0, "arm": "orig", "f1": 0.5}, {"seed": 0, "arm": "plda", "f1": 0.6}]
        write_compare(rows, {"improvement_pct": 20.0}, tmp_path)
        assert len(pd.read_csv(tmp_path / "compare.csv")) == 2
        assert json.loads((tmp_path / "compare.json").read_text())["summary"]["improvement_pct"] == 20.0


class TestVisualizer:

    def test_generate_all(self, finished_run, tmp_path):
        bench, report = finished_run
        paths = Visualizer().generate_all(report, tmp_path, series=bench.train)
        assert {p.name for p in paths} == {"proportions.png", "rewards.png", "spectrum.png"}
        assert all(p.stat().st_size > 0 for p in paths)


def test_sanitize_for_json():
    out = sanitize_for_json({"a": np.arange(2), "b": np.float32(1.5), "c": (Action.DELETE, np.bool_(True))})
    assert out == {"a": [0, 1], "b": 1.5, "c": [2, True]}
