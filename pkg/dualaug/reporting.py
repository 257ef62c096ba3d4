"""
REPORT GENERATION
━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━
Writes run reports as JSON, per-epoch and per-sample CSVs, plot-data CSVs
and a short Markdown summary.
"""

import json
from pathlib import Path
from typing import Iterable, List, Optional
import logging

import numpy as np
import pandas as pd

from .evalgen.spectral import spectrum
from .trainer import RunReport
from .verification import OutputVerifier, sanitize_for_json
from .windows import TimeSeries

logger = logging.getLogger(__name__)

AGENT_LOG_COLUMNS = ['epoch', 'iteration', 'sample_id', 'start', 'action', 'reward', 'agent_loss']


def write_json(data: dict, path):
    with open(path, 'w') as f:
        json.dump(sanitize_for_json(data), f, indent=2, sort_keys=True)
        f.write("\n")


def epoch_frame(report: RunReport) -> pd.DataFrame:
    rows = []
    for record in report.epochs:
        row = {k: v for k, v in vars(record).items() if k != 'actions'}
        for action, count in record.actions.items():
            row[f"n_{action}"] = count
        rows.append(row)
    return pd.DataFrame(rows)


def agent_log_frame(report: RunReport) -> pd.DataFrame:
    """One row per augmentation iteration: (epoch, iteration, sample_id, start, action, reward, agent_loss)."""
    return pd.DataFrame(report.agent_log, columns=AGENT_LOG_COLUMNS)


def proportions_frame(report: RunReport) -> pd.DataFrame:
    """(epoch, ac_frac, hs_frac) with the initial set as epoch -1."""
    rows = [{'epoch': -1, 'ac_frac': report.initial_ac_frac, 'hs_frac': report.initial_hs_frac}]
    rows += [{'epoch': r.epoch, 'ac_frac': r.ac_frac, 'hs_frac': r.hs_frac} for r in report.augment_epochs]
    return pd.DataFrame(rows)


def spectrum_frame(series: TimeSeries, w: int, records: List[dict]) -> pd.DataFrame:
    """Mean window amplitude per frequency bin for each sample class, columns (class, f, amplitude)."""
    frame = pd.DataFrame(records)
    classes = frame["class"].fillna("all") if "class" in frame else pd.Series(["all"] * len(frame))
    parts = []
    for name, group in frame.groupby(classes):
        amplitudes = [spectrum(series.window(int(start), w))[1] for start in group["start"]]
        mean = np.mean(amplitudes, axis=0)
        parts.append(pd.DataFrame({"class": name, "f": np.arange(mean.size), "amplitude": mean}))
    return pd.concat(parts, ignore_index=True)


class ReportGenerator:
    """Writes every artifact of a run into one directory."""

    def __init__(self, output_dir):
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.verifier = OutputVerifier()

    def write_run(
        self,
        report: RunReport,
        data_files: Optional[Iterable] = None,
        series: Optional[TimeSeries] = None,
    ) -> List[Path]:
        """
        Write report.json, epochs.csv, samples.csv, rewards.csv,
        agent_log.csv, proportions.csv, spectrum.csv (when ``series`` is
        given) and summary.md.

        Returns:
            Paths written
        """
        paths = []

        body = self.verifier.sign_report(report.to_dict(), data_files)
        path = self.output_dir / 'report.json'
        write_json(body, path)
        paths.append(path)

        path = self.output_dir / 'epochs.csv'
        epoch_frame(report).to_csv(path, index=False)
        paths.append(path)

        path = self.output_dir / 'samples.csv'
        pd.DataFrame(report.final_samples_table, columns=['id', 'start']).assign(
            w=report.config['w']
        ).to_csv(path, index=False)
        paths.append(path)

        if report.behavior_records:
            path = self.output_dir / 'rewards.csv'
            pd.DataFrame(report.behavior_records).to_csv(path, index=False)
            paths.append(path)

        if report.agent_log:
            path = self.output_dir / 'agent_log.csv'
            agent_log_frame(report).to_csv(path, index=False)
            paths.append(path)

        if series is not None and report.behavior_records:
            path = self.output_dir / 'spectrum.csv'
            spectrum_frame(series, report.config['w'], report.behavior_records).to_csv(path, index=False)
            paths.append(path)

        if report.initial_ac_frac is not None:
            path = self.output_dir / 'proportions.csv'
            proportions_frame(report).to_csv(path, index=False)
            paths.append(path)

        path = self.output_dir / 'summary.md'
        self.export_markdown(report, path, body['verification'])
        paths.append(path)

        logger.info(f"Wrote {len(paths)} report files to {self.output_dir}")
        return paths

    def export_markdown(self, report: RunReport, output_path, verification: Optional[dict] = None):
        """
        Export a run summary as Markdown.

        Args:
            report: Run report
            output_path: Output file path
            verification: Provenance block to append
        """
        evaluation = report.evaluation or {}
        f1 = f"{evaluation['f1']:.4f}" if 'f1' in evaluation else 'n/a'
        threshold = f"{evaluation['threshold']:.6g}" if 'threshold' in evaluation else 'n/a'

        md_content = f"""# RUN SUMMARY

- **Mode:** {report.mode}
- **Seed:** {report.seed}
- **Augmentation epochs:** {len(report.augment_epochs)}
- **Final training epochs:** {len(report.epochs) - len(report.augment_epochs)}

## TRAINING SET

- **Initial samples:** {report.initial_samples}
- **Final samples:** {report.final_samples}
- **Data usage:** {report.data_usage:.2%}
"""
        if report.initial_ac_frac is not None and report.augment_epochs:
            last = report.augment_epochs[-1]
            md_content += f"""- **Contamination fraction:** {report.initial_ac_frac:.3f} -> {last.ac_frac:.3f}
- **Hard-sample fraction:** {report.initial_hs_frac:.3f} -> {last.hs_frac:.3f}
"""

        md_content += f"""
## EVALUATION

- **Point-adjusted best F1:** {f1}
- **Threshold:** {threshold}
- **Wall clock:** {report.wall_clock:.1f}s
"""

        if verification:
            md_content += f"""
## VERIFICATION

**Timestamp:** {verification['timestamp_utc']}
**Report Hash (SHA-256):** `{verification['report_hash_sha256']}`
"""
            for name, info in verification['data_files'].items():
                md_content += f"**{name} (SHA-256):** `{info['sha256']}`\n"

        with open(output_path, 'w') as f:
            f.write(md_content)


def write_compare(rows: List[dict], summary: dict, output_dir) -> List[Path]:
    """Write compare.csv (one row per seed and arm) and compare.json."""
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    csv_path = output_dir / 'compare.csv'
    pd.DataFrame(rows).to_csv(csv_path, index=False)
    json_path = output_dir / 'compare.json'
    write_json({'rows': rows, 'summary': summary}, json_path)
    return [csv_path, json_path]
