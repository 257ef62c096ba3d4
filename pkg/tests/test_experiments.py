"""
Tests for paired comparisons
============================
"""

import pytest

from dualaug.config import ConfigError, DataConfig, RunConfig
from dualaug.experiments import compare, contamination_sweep, improvement, summarize, sweep_summary


class TestSummaries:

    def test_improvement(self):
        assert improvement(0.5, 0.6) == pytest.approx(20.0)
        assert improvement(0.0, 0.6) is None

    def test_summarize(self):
        rows = [
            {"seed": 0, "arm": "orig", "f1": 0.4},
            {"seed": 1, "arm": "orig", "f1": 0.6},
            {"seed": 0, "arm": "plda", "f1": 0.6},
            {"seed": 1, "arm": "plda", "f1": 0.6},
        ]
        summary, imp = summarize(rows)
        assert summary["orig"] == {"mean": pytest.approx(0.5), "std": pytest.approx(0.1414213562), "n": 2}
        assert summary["plda"]["std"] == pytest.approx(0.0)
        assert imp == pytest.approx(20.0)

    def test_needs_two_seeds(self, tiny_data, tiny_run):
        with pytest.raises(ConfigError):
            compare(tiny_data, tiny_run, [0])

    def test_sweep_ratio_range(self, tiny_data, tiny_run):
        with pytest.raises(ConfigError):
            contamination_sweep(tiny_data, tiny_run, [0, 1], [0.8])


@pytest.mark.slow
class TestCompare:

    def test_paired_rows(self, tiny_data, tiny_run):
        result = compare(tiny_data, tiny_run, [0, 1])
        assert [(r["seed"], r["arm"]) for r in result.rows] == [(0, "orig"), (0, "plda"), (1, "orig"), (1, "plda")]
        assert result.summary["orig"]["n"] == 2
        # both arms see the same benchmark per seed
        assert result.rows[0]["achieved_ratio"] == result.rows[1]["achieved_ratio"]

    def test_parallel_matches_sequential(self, tiny_data, tiny_run):
        sequential = compare(tiny_data, tiny_run, [0, 1])
        parallel = compare(tiny_data, tiny_run, [0, 1], n_workers=2)
        strip = lambda rows: [{k: v for k, v in r.items() if k != "wall_clock"} for r in rows]  # noqa: E731
        assert strip(sequential.rows) == strip(parallel.rows)

    def test_sweep_summary(self, tiny_data, tiny_run):
        rows = sweep_summary(contamination_sweep(tiny_data, tiny_run, [0, 1], [0.05, 0.1]))
        assert [r["contamination"] for r in rows] == [0.05, 0.1]
        assert {"orig_mean", "plda_mean", "improvement_pct"} <= set(rows[0])

    def test_augmentation_improves_best_f1(self):
        result = compare(DataConfig(contamination=0.1), RunConfig(), range(5))
        assert result.improvement_pct is not None
        assert result.improvement_pct > 0
        assert result.summary["plda"]["mean"] >= result.summary["orig"]["mean"]
