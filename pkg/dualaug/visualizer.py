"""
VISUALIZATION UTILITIES
━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━
Plots of training-set composition, spectra and reward scatter
"""

from pathlib import Path
from typing import List, Optional

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd

from .reporting import proportions_frame, spectrum_frame
from .trainer import RunReport
from .windows import TimeSeries

CLASS_COLORS = {'simple': 'tab:green', 'hard': 'tab:orange', 'contamination': 'tab:red'}


class Visualizer:
    """Generate plots for run reports."""

    def __init__(self, figsize=(8, 5), dpi=100):
        """
        Initialize visualizer.

        Args:
            figsize: Default figure size (width, height)
            dpi: Resolution in dots per inch
        """
        self.figsize = figsize
        self.dpi = dpi

    def generate_all(self, report: RunReport, output_dir, series: Optional[TimeSeries] = None) -> List[Path]:
        """
        Generate every plot the report has data for.

        Returns:
            list: Paths to generated plots
        """
        output_dir = Path(output_dir)
        paths = []
        if report.initial_ac_frac is not None and report.augment_epochs:
            paths.append(self.plot_proportions(report, output_dir / 'proportions.png'))
        if report.behavior_records:
            paths.append(self.plot_rewards(pd.DataFrame(report.behavior_records), output_dir / 'rewards.png'))
            if series is not None:
                frame = spectrum_frame(series, report.config['w'], report.behavior_records)
                paths.append(self.plot_spectrum(frame, output_dir / 'spectrum.png'))
        return paths

    def plot_proportions(self, report: RunReport, path) -> Path:
        frame = proportions_frame(report)
        fig, ax = plt.subplots(figsize=self.figsize)
        ax.plot(frame['epoch'] + 1, frame['ac_frac'], marker='o', color=CLASS_COLORS['contamination'], label='AC')
        ax.plot(frame['epoch'] + 1, frame['hs_frac'], marker='s', color=CLASS_COLORS['hard'], label='HS')
        ax.set_xlabel('augmentation epoch')
        ax.set_ylabel('fraction of training set')
        ax.legend()
        ax.grid(alpha=0.3)
        return self._save(fig, path)

    def plot_rewards(self, records: pd.DataFrame, path) -> Path:
        fig, ax = plt.subplots(figsize=self.figsize)
        classes = records['class'].fillna('unlabeled') if 'class' in records else pd.Series(['unlabeled'] * len(records))
        for name, group in records.groupby(classes):
            ax.scatter(group['r_l'], group['r_p'], s=12, alpha=0.7,
                       color=CLASS_COLORS.get(name, 'tab:gray'), label=name)
        ax.set_xlabel('loss reward r_l')
        ax.set_ylabel('parameter reward r_p')
        ax.legend()
        return self._save(fig, path)

    def plot_spectrum(self, frame: pd.DataFrame, path, log_scale: bool = True) -> Path:
        """One amplitude curve per class in a (class, f, amplitude) frame."""
        fig, ax = plt.subplots(figsize=self.figsize)
        for name, group in frame.groupby('class'):
            ax.plot(group['f'], group['amplitude'], marker='.', color=CLASS_COLORS.get(name, 'tab:gray'), label=name)
        ax.legend()
        if log_scale:
            ax.set_yscale('log')
        ax.set_xlabel('frequency bin')
        ax.set_ylabel('magnitude')
        ax.grid(alpha=0.3)
        return self._save(fig, path)

    def _save(self, fig, path) -> Path:
        path = Path(path)
        fig.tight_layout()
        fig.savefig(path, dpi=self.dpi)
        plt.close(fig)
        return path
