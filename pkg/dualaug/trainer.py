"""
TRAINING PIPELINE
━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━━
Alternates detector training with sample-set augmentation for ``e``
epochs, then trains on the augmented set until early stopping.
"""

from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple
import logging
import time

import numpy as np

from .agent import AugmentationEnvironment, ClusterPolicy, QAgent, Transition, feature_size, warm_start
from .behavior import BehaviorInvestigator, BehaviorRecord
from .config import RunConfig, Variant
from .detector import Detector, DetectorConfig
from .evalgen.labeling import classify_start, label_hard_samples, track_proportions, window_overlaps
from .evalgen.metrics import best_f1
from .nncore import OptimizerState
from .performance import PerformanceMonitor
from .windows import Action, SampleSet, TimeSeries, WindowSample, apply_action, initial_windows

logger = logging.getLogger(__name__)

Policy = Callable[[WindowSample], Action]


@dataclass
class EpochRecord:
    """One completed epoch; proportions are measured on the set after the epoch."""

    epoch: int
    phase: str
    loss_mean: float
    loss_max: float
    val_loss: Optional[float]
    n_samples: int
    ac_frac: Optional[float] = None
    hs_frac: Optional[float] = None
    agent_loss: Optional[float] = None
    actions: Dict[str, int] = field(default_factory=dict)
    added: int = 0
    removed: int = 0
    guard_events: int = 0


@dataclass
class IterationRecord:
    """One augmentation step: the visited sample, the action taken and its reward."""

    iteration: int
    sample_id: int
    start: int
    action: str
    reward: float
    agent_loss: Optional[float] = None


@dataclass
class AugmentStats:
    """Outcome of one augmentation call; ``sample_set`` is the mutated set."""

    sample_set: SampleSet
    iterations: int = 0
    actions: Dict[str, int] = field(default_factory=dict)
    added: int = 0
    removed: int = 0
    guard_events: int = 0
    agent_losses: List[float] = field(default_factory=list)
    records: List[BehaviorRecord] = field(default_factory=list)
    log: List[IterationRecord] = field(default_factory=list)

    @property
    def agent_loss(self) -> Optional[float]:
        return float(np.mean(self.agent_losses)) if self.agent_losses else None


@dataclass
class RunReport:
    """Everything a run produced except the trained networks."""

    seed: int
    mode: str
    config: dict
    epochs: List[EpochRecord] = field(default_factory=list)
    initial_samples: int = 0
    final_samples: int = 0
    data_usage: float = 0.0
    initial_ac_frac: Optional[float] = None
    initial_hs_frac: Optional[float] = None
    best_final_epoch: Optional[int] = None
    evaluation: Optional[dict] = None
    behavior_records: List[dict] = field(default_factory=list)
    agent_log: List[dict] = field(default_factory=list)
    final_samples_table: List[Tuple[int, int]] = field(default_factory=list)
    timing: Dict[str, dict] = field(default_factory=dict)
    wall_clock: float = 0.0

    @property
    def augment_epochs(self) -> List[EpochRecord]:
        return [r for r in self.epochs if r.phase == "augment"]

    def to_dict(self, include_timing: bool = True) -> dict:
        out = asdict(self)
        # per-iteration rows go to their own table
        out.pop("agent_log")
        out["final_samples_table"] = [list(row) for row in self.final_samples_table]
        if not include_timing:
            out.pop("timing")
            out.pop("wall_clock")
        return out


@dataclass
class SampleLabels:
    """Contamination and hard-sample flags per stride-1 start of the fit series."""

    ac_points: np.ndarray
    ac_by_start: np.ndarray
    hs_by_start: np.ndarray

    def classify(self, s: WindowSample) -> str:
        return classify_start(s.start, self.ac_by_start, self.hs_by_start)


def _loss_stats(loss_map: Dict[int, float]) -> Tuple[float, float]:
    values = np.fromiter(loss_map.values(), dtype=np.float64)
    return float(values.mean()), float(values.max())


def augment_epoch(
    det: Detector,
    S: SampleSet,
    agent: Optional[QAgent],
    cfg: RunConfig,
    rng: np.random.Generator,
    first_epoch: bool = False,
    labels: Optional[SampleLabels] = None,
    policy: Optional[Policy] = None,
) -> AugmentStats:
    """
    One augmentation pass over ``S`` (mutated in place).

    Key parameters, the behavior center and reward normalizers are computed
    once from the current set. On the first epoch the replay memory is warm
    started. Each iteration scores the current sample, acts on it, moves to
    the next sample, stores the transition and trains the agent. Windows
    created by expansions during this call are not chosen as the nearest or
    farthest next sample while older members remain. With the clustering
    variant and no policy given, a ClusterPolicy over the set's behaviors
    acts instead of the agent.

    Args:
        det: Detector trained at least one epoch on ``S``
        S: Current training set
        agent: Agent choosing actions (unused when a policy acts)
        cfg: Run settings
        rng: Generator for warm start, transitions and replay sampling
        first_epoch: Whether to warm start the replay memory
        labels: Optional ground-truth flags used to tag behavior records
        policy: Frozen policy replacing the agent; no learning happens

    Returns:
        AugmentStats holding the mutated set
    """
    n_iters = len(S) if cfg.n_iters is None else cfg.n_iters
    stats = AugmentStats(sample_set=S)
    if n_iters == 0:
        return stats
    if agent is None and policy is None and cfg.variant is not Variant.CLUS:
        raise ValueError("augmentation needs an agent or a policy")

    investigator = BehaviorInvestigator(
        det, S, cfg.hessian.build(), cfg.k, rng,
        classify=labels.classify if labels is not None else None,
    )
    if policy is None and cfg.variant is Variant.CLUS:
        policy = ClusterPolicy(investigator, list(S), rng)
    env = AugmentationEnvironment(
        investigator,
        alpha=cfg.effective_alpha,
        p_explore=cfg.p_explore,
        state_with_rewards=cfg.agent.state_with_rewards,
        allowed_actions=cfg.allowed_actions,
    )

    if first_epoch and policy is None and cfg.warm_start_steps > 0:
        warm_start(env, S, agent.memory, cfg.warm_start_steps, rng)

    size_before = len(S)
    guards_before = S.guard_events
    counts: Counter = Counter()
    added = removed = 0

    members = list(S)
    s_t = members[int(rng.integers(len(members)))]
    fresh: set = set()
    for it in range(n_iters):
        state = env.features(s_t)
        a_t = policy(s_t) if policy is not None else agent.act(state)
        r_t = env.reward(s_t, a_t)

        before = set(S.starts())
        apply_action(S, s_t, a_t)
        after = set(S.starts())
        if a_t is Action.EXPAND:
            fresh |= after - before
        delta = len(after) - len(before)
        added += max(delta, 0)
        removed += max(-delta, 0)
        counts[a_t.name.lower()] += 1

        s_next = env.next_sample(S, s_t, a_t, rng, exclude=fresh)
        step_loss = None
        if policy is None:
            agent.memory.push(Transition(state, a_t, r_t, env.features(s_next)))
            losses = agent.train_from(agent.memory, cfg.agent.minibatch, cfg.agent.updates_per_iteration, rng)
            stats.agent_losses.extend(losses)
            step_loss = float(np.mean(losses)) if losses else None
        stats.log.append(IterationRecord(it, s_t.id, s_t.start, a_t.name.lower(), r_t, step_loss))
        s_t = s_next

    stats.iterations = n_iters
    stats.actions = {a.name.lower(): counts.get(a.name.lower(), 0) for a in Action}
    stats.added = added
    stats.removed = removed
    stats.guard_events = S.guard_events - guards_before
    stats.records = investigator.records()

    logger.info(
        f"Augmented {size_before} -> {len(S)} samples "
        f"(+{added} / -{removed}, actions {stats.actions})"
    )
    return stats


def split_validation(x: TimeSeries, fraction: float, w: int) -> Tuple[TimeSeries, Optional[np.ndarray]]:
    """
    Hold out the final ``fraction`` of the series for early stopping.

    Returns:
        (fit series, validation windows with stride max(1, w // 2), or None)
    """
    n_val = int(round(fraction * x.n_points))
    if n_val < w or x.n_points - n_val < w:
        return x, None
    fit = x.slice(0, x.n_points - n_val, name=f"{x.name}-fit")
    val = x.slice(x.n_points - n_val, x.n_points, name=f"{x.name}-val")
    return fit, val.all_windows(w)[::max(1, w // 2)]


def reference_labels(
    det: Detector,
    fit: TimeSeries,
    cfg: RunConfig,
    rng: np.random.Generator,
) -> SampleLabels:
    """
    Hard-sample labels from a copy of the initial detector trained without
    augmentation on the no-overlap windows.
    """
    reference = det.clone()
    opt = OptimizerState(lr=cfg.optimizer.lr, kind=cfg.optimizer.kind)
    S0 = initial_windows(fit, cfg.w)
    for _ in range(cfg.reference_epochs):
        reference.train_epoch(S0, opt, cfg.detector.batch_size, rng)

    ac_by_start = window_overlaps(fit.labels, cfg.w)
    hs_by_start = label_hard_samples(reference.window_losses(fit), ac_by_start, cfg.hs_quantile)
    return SampleLabels(fit.labels, ac_by_start, hs_by_start)


def _proportions(S: SampleSet, labels: Optional[SampleLabels]):
    if labels is None:
        return None, None
    return track_proportions(S, labels.ac_points, labels.hs_by_start)


def run(
    x_train: TimeSeries,
    cfg: RunConfig,
    seed: Optional[int] = None,
    x_test: Optional[TimeSeries] = None,
    checkpoint_dir: Optional[Path] = None,
) -> Tuple[Detector, RunReport]:
    """
    Train a detector with ``cfg.e`` rounds of (train, augment), then train
    on the final set until validation loss stops improving.

    Args:
        x_train: Training series; its labels, if any, are contamination flags
        cfg: Run settings
        seed: Run seed (defaults to the first configured seed)
        x_test: Labeled series for the final point-adjusted best F1
        checkpoint_dir: Where per-epoch checkpoints go when enabled

    Returns:
        (trained detector, report)
    """
    seed = cfg.seeds[0] if seed is None else seed
    if x_train.n_points < cfg.w:
        raise ValueError(f"training series has {x_train.n_points} points, shorter than w={cfg.w}")

    monitor = PerformanceMonitor()
    started = time.perf_counter()
    det_rng, shuffle_rng, agent_rng, augment_rng, reference_rng = [
        np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(5)
    ]

    fit, val_windows = split_validation(x_train, cfg.validation_fraction, cfg.w)
    det_config = DetectorConfig(
        w=cfg.w,
        n_features=x_train.n_features,
        bottleneck=cfg.detector.bottleneck,
        hidden_sizes=list(cfg.detector.hidden_sizes),
    )
    det = Detector(det_config, rng=det_rng)
    opt = OptimizerState(lr=cfg.optimizer.lr, kind=cfg.optimizer.kind)
    S = initial_windows(fit, cfg.w)

    report = RunReport(
        seed=seed,
        mode="orig" if cfg.e == 0 else cfg.variant.value,
        config=cfg.model_dump(mode="json"),
        initial_samples=len(S),
    )

    labels = None
    if fit.labels is not None:
        monitor.start("reference")
        labels = reference_labels(det, fit, cfg, reference_rng)
        monitor.end("reference")
    report.initial_ac_frac, report.initial_hs_frac = _proportions(S, labels)

    agent = None
    if cfg.e > 0 and cfg.variant is not Variant.CLUS:
        agent = QAgent(
            feature_size(cfg.w, x_train.n_features, cfg.agent.state_with_rewards),
            agent_rng,
            hidden_sizes=cfg.agent.hidden_sizes,
            gamma=cfg.gamma,
            sync_period=cfg.q,
            double_dqn=cfg.agent.double_dqn,
            lr=cfg.agent.optimizer.lr,
            optimizer=cfg.agent.optimizer.kind,
            allowed_actions=cfg.allowed_actions,
            memory_capacity=cfg.m,
        )

    def validation_loss(loss_map: Dict[int, float]) -> float:
        if val_windows is None:
            return float(np.mean(list(loss_map.values())))
        return float(det.reconstruction_losses(val_windows).mean())

    for i in range(cfg.e):
        monitor.start("train")
        loss_map = det.train_epoch(S, opt, cfg.detector.batch_size, shuffle_rng)
        monitor.end("train")
        mean, peak = _loss_stats(loss_map)

        monitor.start("augment")
        stats = augment_epoch(det, S, agent, cfg, augment_rng, first_epoch=(i == 0), labels=labels)
        monitor.end("augment")

        ac_frac, hs_frac = _proportions(S, labels)
        report.epochs.append(EpochRecord(
            epoch=i,
            phase="augment",
            loss_mean=mean,
            loss_max=peak,
            val_loss=validation_loss(loss_map),
            n_samples=len(S),
            ac_frac=ac_frac,
            hs_frac=hs_frac,
            agent_loss=stats.agent_loss,
            actions=stats.actions,
            added=stats.added,
            removed=stats.removed,
            guard_events=stats.guard_events,
        ))
        report.behavior_records = [r.to_row() for r in stats.records]
        report.agent_log.extend({"epoch": i, **asdict(step)} for step in stats.log)
        logger.info(f"Epoch {i + 1}/{cfg.e}: loss {mean:.5f}, |S| = {len(S)}, AC {ac_frac}, HS {hs_frac}")

        if cfg.checkpoints and checkpoint_dir is not None:
            det.save(Path(checkpoint_dir) / f"detector_epoch{i:03d}.npz", {"epoch": i, "seed": seed})
            if agent is not None:
                agent.save(Path(checkpoint_dir) / f"agent_epoch{i:03d}.npz", {"epoch": i, "seed": seed})

    best_val = float("inf")
    best_params = det.net.flat_params()
    stale = 0
    ac_frac, hs_frac = _proportions(S, labels)
    monitor.start("final")
    for j in range(cfg.max_epochs):
        loss_map = det.train_epoch(S, opt, cfg.detector.batch_size, shuffle_rng)
        mean, peak = _loss_stats(loss_map)
        val = validation_loss(loss_map)
        report.epochs.append(EpochRecord(
            epoch=cfg.e + j,
            phase="final",
            loss_mean=mean,
            loss_max=peak,
            val_loss=val,
            n_samples=len(S),
            ac_frac=ac_frac,
            hs_frac=hs_frac,
        ))
        if val < best_val:
            best_val = val
            best_params = det.net.flat_params()
            report.best_final_epoch = cfg.e + j
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                logger.info(f"Early stop after {j + 1} final epochs (best validation loss {best_val:.5f})")
                break
    monitor.end("final")
    det.net.set_params(best_params)

    report.final_samples = len(S)
    report.data_usage = len(S) / (fit.n_points - cfg.w + 1)
    report.final_samples_table = [(s.id, s.start) for s in S]

    if x_test is not None and x_test.labels is not None:
        result = best_f1(det.anomaly_scores(x_test), x_test.labels, adjust=True)
        report.evaluation = result.to_dict()
        logger.info(f"Point-adjusted best F1 {result.f1:.4f} at threshold {result.threshold:.6g}")

    report.timing = monitor.get_all_stats()
    report.wall_clock = time.perf_counter() - started
    return det, report


def baseline_run(
    x_train: TimeSeries,
    cfg: RunConfig,
    seed: Optional[int] = None,
    x_test: Optional[TimeSeries] = None,
    checkpoint_dir: Optional[Path] = None,
) -> Tuple[Detector, RunReport]:
    """Plain training on the no-overlap windows (``run`` with e = 0)."""
    return run(x_train, cfg.model_copy(update={"e": 0}), seed=seed, x_test=x_test, checkpoint_dir=checkpoint_dir)
