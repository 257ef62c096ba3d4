"""
DUALAUG - Command Line Interface
━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━
Dataset generation, training (ORIG and augmented), evaluation, validation
experiments and paired comparisons.

Usage:
    dualaug gen --config exp.yaml --out data/
    dualaug train --config exp.yaml --data data/ --out runs/ --mode plda
    dualaug eval --checkpoint runs/<run>/detector.npz --test data/test.csv
    dualaug validate --which influence --which decay
    dualaug compare --config exp.yaml --seeds 0,1,2,3,4
"""

from datetime import datetime
from pathlib import Path
from typing import List, Optional
import logging
import sys

import click
from rich import box
from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.table import Table

from .. import __version__
from ..config import ConfigError, ExperimentConfig
from ..detector import Detector
from ..evalgen.labeling import LabelError
from ..evalgen.metrics import best_f1
from ..evalgen.synthetic import build_benchmark
from ..experiments import compare as run_compare
from ..experiments import contamination_sweep, sweep_rows, sweep_summary
from ..performance import configure_threads
from ..reporting import ReportGenerator, write_compare, write_json
from ..trainer import baseline_run, run
from ..validation import CHECKS, run_checks
from ..verification import OutputVerifier, file_digest
from ..visualizer import Visualizer
from ..windows import TimeSeries

logger = logging.getLogger(__name__)

console = Console()

_installed_handlers: List[logging.Handler] = []


def setup_logging(level: str, log_file: Optional[Path] = None):
    """Route library logs to a rich stderr handler and, optionally, a plain file."""
    root = logging.getLogger()
    for handler in _installed_handlers:
        root.removeHandler(handler)
        handler.close()
    _installed_handlers.clear()

    rich_handler = RichHandler(console=Console(stderr=True), show_path=False, rich_tracebacks=False)
    rich_handler.setFormatter(logging.Formatter("%(message)s"))
    _installed_handlers.append(rich_handler)
    if log_file is not None:
        file_handler = logging.FileHandler(log_file)
        file_handler.setFormatter(logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s'))
        _installed_handlers.append(file_handler)

    for handler in _installed_handlers:
        root.addHandler(handler)
    root.setLevel(level.upper())


def _int_list(ctx, param, value):
    if value is None:
        return None
    try:
        return [int(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated integers, got {value!r}")


def _float_list(ctx, param, value):
    if value is None:
        return None
    try:
        return [float(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated numbers, got {value!r}")


def load_config(ctx: click.Context, config_path: Optional[str]) -> ExperimentConfig:
    """Config file (or defaults) with environment overrides; sets threads and logging."""
    base = ExperimentConfig.from_file(config_path) if config_path else ExperimentConfig()
    cfg = ExperimentConfig.from_env(base)
    level = "DEBUG" if ctx.obj.get("verbose") else cfg.log_level
    setup_logging(level, Path(cfg.log_file) if cfg.log_file else None)
    configure_threads(cfg.num_threads)
    return cfg


def make_run_dir(out: Path, seed: int) -> Path:
    """``<out>/<timestamp>-seed<seed>``, suffixed when the name is taken."""
    stamp = datetime.now().strftime("%Y%m%d-%H%M%S")
    run_dir = out / f"{stamp}-seed{seed}"
    n = 1
    while run_dir.exists():
        run_dir = out / f"{stamp}-seed{seed}-{n}"
        n += 1
    run_dir.mkdir(parents=True)
    return run_dir


def attach_run_log(cfg: ExperimentConfig, ctx: click.Context, run_dir: Path):
    level = "DEBUG" if ctx.obj.get("verbose") else cfg.log_level
    setup_logging(level, run_dir / "run.log")


@click.group()
@click.version_option(__version__, prog_name="dualaug")
@click.option('--verbose', '-v', is_flag=True, help='Debug logging')
@click.pass_context
def cli(ctx, verbose):
    """Dual parameter/loss data augmentation for time-series anomaly detection."""
    ctx.ensure_object(dict)
    ctx.obj["verbose"] = verbose


@cli.command()
@click.option('--config', 'config_path', type=click.Path(dir_okay=False), help='JSON or YAML config file')
@click.option('--out', '-o', default='./data', type=click.Path(file_okay=False), help='Dataset directory')
@click.option('--seed', type=int, default=None, help='Override data.seed')
@click.pass_context
def gen(ctx, config_path, out, seed):
    """Generate a contaminated synthetic benchmark (train.csv, test.csv, manifest.json)."""
    cfg = load_config(ctx, config_path)
    data = cfg.data if seed is None else cfg.data.model_copy(update={'seed': seed})
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)

    bench = build_benchmark(data, data.seed)
    train_path, test_path = out / 'train.csv', out / 'test.csv'
    bench.train.write_csv(train_path)
    bench.test.write_csv(test_path)

    manifest = {
        'data': data.model_dump(mode='json'),
        'seed': data.seed,
        'requested_ratio': data.contamination,
        'achieved_ratio': bench.achieved_ratio,
        'anomaly_segments': [
            {'start': s.start, 'length': s.length, 'kind': s.kind.value} for s in bench.spec.anomaly_segments
        ],
        'hard_segments': [
            {'start': s.start, 'length': s.length, 'jitter': s.jitter} for s in bench.spec.hard_segments
        ],
        'files': {p.name: file_digest(p) for p in (train_path, test_path)},
        'package_version': __version__,
    }
    write_json(manifest, out / 'manifest.json')

    console.print(f"[green]✓[/green] Wrote {train_path}, {test_path} "
                  f"(contamination {bench.achieved_ratio:.3f}, target {data.contamination:.3f})")
    return 0


@cli.command()
@click.option('--config', 'config_path', type=click.Path(dir_okay=False), help='JSON or YAML config file')
@click.option('--data', 'data_dir', default='./data', type=click.Path(file_okay=False),
              help='Directory holding train.csv and optionally test.csv')
@click.option('--out', '-o', default='./runs', type=click.Path(file_okay=False), help='Parent of run directories')
@click.option('--seed', type=int, default=None, help='Run seed (defaults to the first configured seed)')
@click.option('--mode', type=click.Choice(['orig', 'plda']), default='plda', help='ORIG baseline or augmented run')
@click.option('--plots', is_flag=True, help='Render PNG plots next to the plot-data CSVs')
@click.pass_context
def train(ctx, config_path, data_dir, out, seed, mode, plots):
    """Train a detector and write checkpoints and reports into a new run directory."""
    cfg = load_config(ctx, config_path)
    seed = cfg.run.seeds[0] if seed is None else seed
    data_dir = Path(data_dir)
    train_path, test_path = data_dir / 'train.csv', data_dir / 'test.csv'
    x_train = TimeSeries.read_csv(train_path)
    x_test = TimeSeries.read_csv(test_path) if test_path.exists() else None

    run_dir = make_run_dir(Path(out), seed)
    attach_run_log(cfg, ctx, run_dir)
    cfg.save(run_dir / 'config.yaml')
    checkpoint_dir = None
    if cfg.run.checkpoints:
        checkpoint_dir = run_dir / 'checkpoints'
        checkpoint_dir.mkdir()

    console.print(f"\n[bold cyan]═══ TRAINING ({mode.upper()}, seed {seed}) ═══[/bold cyan]\n")
    fn = baseline_run if mode == 'orig' else run
    det, report = fn(x_train, cfg.run, seed=seed, x_test=x_test, checkpoint_dir=checkpoint_dir)
    det.save(run_dir / 'detector.npz', {'seed': seed, 'mode': report.mode})

    data_files = [p for p in (train_path, test_path) if p.exists()]
    ReportGenerator(run_dir).write_run(report, data_files, series=x_train)
    if plots:
        Visualizer().generate_all(report, run_dir, series=x_train)

    table = Table(title="Run Summary", box=box.ROUNDED, border_style="cyan")
    table.add_column("Metric", style="cyan", no_wrap=True)
    table.add_column("Value", style="yellow")
    table.add_row("Mode", report.mode)
    table.add_row("Samples", f"{report.initial_samples} -> {report.final_samples}")
    table.add_row("Data usage", f"{report.data_usage:.2%}")
    if report.augment_epochs and report.initial_ac_frac is not None:
        last = report.augment_epochs[-1]
        table.add_row("AC fraction", f"{report.initial_ac_frac:.3f} -> {last.ac_frac:.3f}")
        table.add_row("HS fraction", f"{report.initial_hs_frac:.3f} -> {last.hs_frac:.3f}")
    if report.evaluation:
        table.add_row("Best F1 (PA)", f"{report.evaluation['f1']:.4f}")
    table.add_row("Wall clock", f"{report.wall_clock:.1f}s")
    console.print(table)
    console.print(f"[cyan]📂 Run directory:[/cyan] {run_dir}")
    return 0


@cli.command(name='eval')
@click.option('--checkpoint', required=True, type=click.Path(dir_okay=False), help='Detector checkpoint (.npz)')
@click.option('--test', 'test_path', required=True, type=click.Path(dir_okay=False), help='Labeled series CSV')
@click.option('--out', '-o', default=None, type=click.Path(dir_okay=False),
              help='Result JSON (default: eval.json next to the checkpoint)')
@click.pass_context
def evaluate(ctx, checkpoint, test_path, out):
    """
    Point-adjusted best F1 of a checkpoint on a labeled series.

    When the checkpoint sits in a run directory, its report.json is
    verified first and the outcome is recorded as ``report_verified``.
    """
    setup_logging("DEBUG" if ctx.obj.get("verbose") else "INFO")
    det = Detector.load(checkpoint)
    series = TimeSeries.read_csv(test_path)
    if series.labels is None:
        raise LabelError(f"{test_path} has no label column")

    report_path = Path(checkpoint).with_name('report.json')
    verified = None
    if report_path.exists():
        check = OutputVerifier().verify_report(report_path)
        verified = check['valid']
        if not verified:
            logger.warning(f"{report_path} failed verification: {check['error']}")
            console.print(f"[yellow]⚠ {report_path.name}: {check['error']}[/yellow]")

    result = best_f1(det.anomaly_scores(series), series.labels, adjust=True)
    out = Path(out) if out else Path(checkpoint).with_name('eval.json')
    write_json({
        'checkpoint': Path(checkpoint).name,
        'test': Path(test_path).name,
        'test_sha256': file_digest(test_path),
        'report_verified': verified,
        **result.to_dict(),
    }, out)
    console.print(f"F1 {result.f1:.4f}  threshold {result.threshold:.6g}  "
                  f"precision {result.precision:.4f}  recall {result.recall:.4f}  -> {out}")
    return 0


@cli.command()
@click.option('--which', '-w', multiple=True, type=click.Choice([*CHECKS, 'all']), default=('all',),
              show_default=True, help='Check to run (repeatable)')
@click.option('--out', '-o', default=None, type=click.Path(dir_okay=False), help='Write results as JSON')
@click.pass_context
def validate(ctx, which, out):
    """Run validation experiments and report pass/fail against their thresholds."""
    setup_logging("DEBUG" if ctx.obj.get("verbose") else "INFO")
    configure_threads(1)
    results = run_checks(which)

    table = Table(title="Validation", box=box.ROUNDED, border_style="cyan")
    table.add_column("Check", style="cyan", no_wrap=True)
    table.add_column("Status")
    table.add_column("Metrics", style="yellow")
    table.add_column("Threshold", style="white")
    table.add_column("Time", justify="right")
    for r in results:
        status = "[green]PASS[/green]" if r.passed else "[red]FAIL[/red]"
        metrics = ", ".join(f"{k}={v:.4g}" if isinstance(v, float) else f"{k}={v}" for k, v in r.metrics.items())
        table.add_row(r.name, status, metrics, r.threshold, f"{r.elapsed:.1f}s")
    console.print(table)

    if out:
        write_json({'checks': [r.to_dict() for r in results]}, out)
    return 0


@cli.command(name='compare')
@click.option('--config', 'config_path', type=click.Path(dir_okay=False), help='JSON or YAML config file')
@click.option('--out', '-o', default='./runs', type=click.Path(file_okay=False), help='Parent of run directories')
@click.option('--seeds', callback=_int_list, default=None, help='Comma-separated seeds (default: run.seeds)')
@click.option('--ratios', callback=_float_list, default=None,
              help='Comma-separated contamination ratios for a robustness sweep')
@click.option('--workers', type=int, default=1, show_default=True, help='Parallel seed workers')
@click.pass_context
def compare_cmd(ctx, config_path, out, seeds, ratios, workers):
    """Paired ORIG vs. augmented runs over several seeds."""
    cfg = load_config(ctx, config_path)
    seeds = seeds or list(cfg.run.seeds)
    if len(seeds) < 2:
        raise ConfigError(f"compare needs at least 2 seeds, got {seeds}")

    run_dir = make_run_dir(Path(out), seeds[0])
    attach_run_log(cfg, ctx, run_dir)
    cfg.save(run_dir / 'config.yaml')

    if ratios:
        results = contamination_sweep(cfg.data, cfg.run, seeds, ratios, n_workers=workers)
        summary_rows = sweep_summary(results)
        write_compare(sweep_rows(results), {'by_ratio': summary_rows}, run_dir)

        table = Table(title="Contamination Sweep", box=box.ROUNDED, border_style="cyan")
        table.add_column("Ratio", style="cyan")
        table.add_column("ORIG F1", style="yellow")
        table.add_column("Augmented F1", style="yellow")
        table.add_column("Imp (%)", style="green")
        variant = cfg.run.variant.value
        for row in summary_rows:
            imp = row['improvement_pct']
            table.add_row(
                f"{row['contamination']:.2f}",
                f"{row['orig_mean']:.4f} ± {row['orig_std']:.4f}",
                f"{row[f'{variant}_mean']:.4f} ± {row[f'{variant}_std']:.4f}",
                "n/a" if imp is None else f"{imp:+.2f}",
            )
        console.print(table)
    else:
        result = run_compare(cfg.data, cfg.run, seeds, n_workers=workers)
        write_compare(result.rows, {**result.summary, 'improvement_pct': result.improvement_pct}, run_dir)

        table = Table(title=f"Paired Comparison ({len(seeds)} seeds)", box=box.ROUNDED, border_style="cyan")
        table.add_column("Method", style="cyan")
        table.add_column("Avg F1", style="yellow")
        for arm, stats in result.summary.items():
            table.add_row(arm.upper(), f"{stats['mean']:.4f} ± {stats['std']:.4f}")
        console.print(table)
        imp = result.improvement_pct
        console.print(Panel(
            "n/a (ORIG mean F1 is zero)" if imp is None else f"[bold]Imp (%):[/bold] {imp:+.2f}",
            title="[bold]Improvement[/bold]", border_style="green" if (imp or 0) > 0 else "red",
        ))

    console.print(f"[cyan]📂 Results:[/cyan] {run_dir}")
    return 0


USAGE_ERRORS = (ConfigError, FileNotFoundError, LabelError)


def main(argv: Optional[List[str]] = None) -> int:
    """
    Run the CLI and map failures to exit codes.

    Returns:
        0 on success, 1 for usage or configuration errors, 2 for runtime failures
    """
    try:
        code = cli.main(args=argv, prog_name="dualaug", standalone_mode=False)
    except click.exceptions.Abort:
        console.print("[red]✗ Aborted[/red]")
        return 1
    except click.ClickException as e:
        e.show()
        return 1
    except USAGE_ERRORS as e:
        console.print(f"[red]✗ Error: {e}[/red]")
        return 1
    except Exception as e:
        logger.debug("Runtime failure", exc_info=True)
        console.print(f"[red]✗ {type(e).__name__}: {e}[/red]")
        return 2
    return code if isinstance(code, int) else 0


def run_cli():
    sys.exit(main())


if __name__ == '__main__':
    run_cli()
