"""
Paired Experiments
==================

ORIG vs. augmented runs over several seeds on freshly generated synthetic
benchmarks, and the contamination-ratio sweep built on top of them.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple
import logging

import pandas as pd

from .config import ConfigError, DataConfig, RunConfig
from .evalgen.synthetic import build_benchmark
from .performance import configure_threads, parallel_map
from .trainer import baseline_run, run

logger = logging.getLogger(__name__)

ORIG = "orig"


@dataclass
class CompareResult:
    """Per-seed rows plus the aggregated summary of one paired comparison."""

    rows: List[dict] = field(default_factory=list)
    summary: Dict[str, dict] = field(default_factory=dict)
    improvement_pct: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            'rows': self.rows,
            'summary': self.summary,
            'improvement_pct': self.improvement_pct,
        }


def _paired_seed(job: Tuple[dict, dict, int]) -> List[dict]:
    # runs in a worker process: configs travel as plain dicts
    data_dict, run_dict, seed = job
    configure_threads(1)
    data = DataConfig.model_validate(data_dict)
    cfg = RunConfig.model_validate(run_dict)
    bench = build_benchmark(data, seed)

    rows = []
    arms = ((ORIG, baseline_run), (cfg.variant.value, run))
    for arm, fn in arms:
        _, report = fn(bench.train, cfg, seed=seed, x_test=bench.test)
        rows.append({
            'seed': seed,
            'arm': arm,
            'contamination': data.contamination,
            'achieved_ratio': bench.achieved_ratio,
            'f1': report.evaluation['f1'],
            'threshold': report.evaluation['threshold'],
            'final_samples': report.final_samples,
            'data_usage': report.data_usage,
            'wall_clock': report.wall_clock,
        })
    logger.info(f"Seed {seed}: " + ", ".join(f"{r['arm']} F1 {r['f1']:.4f}" for r in rows))
    return rows


def improvement(orig_mean: float, new_mean: float) -> Optional[float]:
    """Relative improvement in percent; None when the baseline is zero."""
    if orig_mean == 0:
        return None
    return 100.0 * (new_mean - orig_mean) / orig_mean


def summarize(rows: Sequence[dict]) -> Tuple[Dict[str, dict], Optional[float]]:
    frame = pd.DataFrame(list(rows))
    stats = frame.groupby('arm')['f1'].agg(['mean', 'std', 'count'])
    summary = {
        arm: {'mean': float(r['mean']), 'std': float(r['std']), 'n': int(r['count'])}
        for arm, r in stats.iterrows()
    }
    arms = [a for a in summary if a != ORIG]
    imp = improvement(summary[ORIG]['mean'], summary[arms[0]]['mean']) if ORIG in summary and arms else None
    return summary, imp


def compare(
    data: DataConfig,
    cfg: RunConfig,
    seeds: Sequence[int],
    n_workers: int = 1,
) -> CompareResult:
    """
    Run ORIG and the configured variant once per seed on the benchmark
    generated with that seed.

    Args:
        data: Benchmark settings
        cfg: Run settings for the augmented arm (ORIG uses e = 0)
        seeds: At least two seeds
        n_workers: Worker processes (1 runs sequentially)

    Returns:
        CompareResult with |seeds| rows per arm
    """
    seeds = list(seeds)
    if len(seeds) < 2:
        raise ConfigError(f"paired comparison needs at least 2 seeds, got {len(seeds)}")
    if cfg.e == 0:
        logger.warning("e = 0: both arms run the same pipeline")

    jobs = [(data.model_dump(mode="json"), cfg.model_dump(mode="json"), seed) for seed in seeds]
    per_seed = parallel_map(_paired_seed, jobs, n_workers=n_workers, use_processes=True)
    rows = [row for group in per_seed for row in group]

    summary, imp = summarize(rows)
    logger.info(f"Compared over {len(seeds)} seeds: {summary}, improvement {imp}")
    return CompareResult(rows, summary, imp)


def contamination_sweep(
    data: DataConfig,
    cfg: RunConfig,
    seeds: Sequence[int],
    ratios: Sequence[float],
    n_workers: int = 1,
) -> Dict[float, CompareResult]:
    """Paired comparison at each contamination ratio."""
    results = {}
    for ratio in ratios:
        if not 0.0 <= ratio <= 0.5:
            raise ConfigError(f"contamination ratio must be in [0, 0.5], got {ratio}")
        results[ratio] = compare(data.model_copy(update={'contamination': ratio}), cfg, seeds, n_workers)
    return results


def sweep_rows(results: Dict[float, CompareResult]) -> List[dict]:
    return [row for result in results.values() for row in result.rows]


def sweep_summary(results: Dict[float, CompareResult]) -> List[dict]:
    """One row per ratio: mean F1 per arm and the improvement."""
    out = []
    for ratio, result in results.items():
        row = {'contamination': ratio, 'improvement_pct': result.improvement_pct}
        for arm, stats in result.summary.items():
            row[f'{arm}_mean'] = stats['mean']
            row[f'{arm}_std'] = stats['std']
        out.append(row)
    return out

