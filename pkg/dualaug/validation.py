"""
Validation Experiments
======================

Fixed-seed experiments checking the numeric core and the method's
properties: influence exactness against ridge retraining, CG against a
dense solve, expansion reachability, per-frequency gradient decay, reward
separation, analytic gradients, toy-MDP policies and augmentation
dynamics. Failures are reported, never raised.
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Sequence
import logging
import time

import numpy as np
import torch

from .agent import QAgent, ReplayMemory, Transition
from .behavior import BehaviorInvestigator, HessianMode, HessianSettings, InverseHessian, parameter_sensitivity
from .config import DataConfig, RunConfig
from .detector import Detector, DetectorConfig
from .evalgen.metrics import separation_auc
from .evalgen.spectral import decay_experiment
from .evalgen.synthetic import build_benchmark
from .nncore import Activation, Network, OptimizerState, as_tensor, batch_loss_fn, hvp, loss_and_grad, mse_loss
from .trainer import reference_labels, run, split_validation
from .windows import initial_windows, reachable_offsets

logger = logging.getLogger(__name__)

# deterministic-reward toy MDP: taking action a moves to state a
TOY_REWARDS = np.array([
    [0.0, 0.1, 0.9],
    [0.6, 0.0, 0.0],
    [1.0, 0.0, 0.3],
])
TOY_GAMMA = 0.9


@dataclass
class CheckResult:
    name: str
    passed: bool
    metrics: Dict[str, float] = field(default_factory=dict)
    threshold: str = ""
    elapsed: float = 0.0

    def to_dict(self) -> dict:
        return {
            'name': self.name,
            'passed': self.passed,
            'metrics': self.metrics,
            'threshold': self.threshold,
            'elapsed': self.elapsed,
        }


def _augmented(x: np.ndarray) -> np.ndarray:
    return np.hstack([x, np.ones((x.shape[0], 1))])


def ridge_fit(x: np.ndarray, y: np.ndarray, lam: float, extra=None, eps: float = 0.0) -> np.ndarray:
    """
    Minimizer of (1/n)[sum of squared errors + eps * loss(extra)] + (lam/2)|theta|^2,
    with theta = [weights..., bias].

    ``extra`` counts with weight ``eps`` inside the mean, so a training
    sample passed as ``extra`` ends up with weight 1 + eps.
    """
    xa = _augmented(x)
    n, p = xa.shape
    lhs = (2.0 / n) * xa.T @ xa + lam * np.eye(p)
    rhs = (2.0 / n) * xa.T @ y
    if extra is not None and eps != 0.0:
        xs, ys = extra
        xs = np.append(xs, 1.0)
        lhs = lhs + (2.0 * eps / n) * np.outer(xs, xs)
        rhs = rhs + (2.0 * eps / n) * xs * ys
    return np.linalg.solve(lhs, rhs)


def check_influence(seed: int = 0, n: int = 64, d: int = 8, lam: float = 1e-2, eps: float = 1e-3,
                    n_samples: int = 5) -> CheckResult:
    """
    Predicted -H^-1 grad L against central-difference ridge retraining.

    Retraining upweights one sample to 1 + eps inside the mean loss, whose
    parameter derivative is -(1/n) H^-1 grad L; the oracle is rescaled by n.
    """
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, d))
    y = x @ rng.normal(size=d) + 0.1 * rng.normal(size=n)

    theta = ridge_fit(x, y, lam)
    net = Network.zeros([d, 1], [Activation.IDENTITY])
    net.set_params(theta)
    settings = HessianSettings(HessianMode.CG, damping=lam, max_iter=500, tol=1e-12, subsample=n)
    inverse = InverseHessian(net, x, y.reshape(-1, 1), settings=settings)

    errors = []
    for i in rng.choice(n, size=n_samples, replace=False):
        predicted = parameter_sensitivity(net, x[i], np.array([y[i]]), inverse)[0]
        plus = ridge_fit(x, y, lam, (x[i], y[i]), eps)
        minus = ridge_fit(x, y, lam, (x[i], y[i]), -eps)
        oracle = n * (plus - minus) / (2 * eps)
        errors.append(np.linalg.norm(predicted - oracle) / np.linalg.norm(oracle))

    worst = float(max(errors))
    return CheckResult('influence', worst < 1e-4, {'max_relative_error': worst}, 'max relative error < 1e-4')


def check_solver(seed: int = 0, n: int = 32) -> CheckResult:
    """CG behavior against a dense (H + damping I)^-1 g, plus fd against autograd products."""
    rng = np.random.default_rng(seed)
    net = Network.build([3, 3, 1], [Activation.TANH, Activation.IDENTITY], rng)
    x = rng.normal(size=(n, 3))
    t = rng.normal(size=(n, 1))

    theta = net.params.detach()
    dense = torch.autograd.functional.hessian(batch_loss_fn(net, as_tensor(x), as_tensor(t)), theta).numpy()
    damping = max(1e-2, 0.1 - float(np.linalg.eigvalsh(dense).min()))

    settings = HessianSettings(HessianMode.CG, damping=damping, max_iter=500, tol=1e-12, subsample=n)
    inverse = InverseHessian(net, x, t, settings=settings)
    predicted = parameter_sensitivity(net, x[:4], t[:4], inverse)

    errors = []
    for i in range(4):
        _, g = loss_and_grad(net, x[i], t[i])
        exact = -np.linalg.solve(dense + damping * np.eye(net.n_params), g)
        errors.append(np.linalg.norm(predicted[i] - exact) / np.linalg.norm(exact))

    v = rng.normal(size=net.n_params)
    auto = hvp(net, (x, t), v)
    fd = hvp(net, (x, t), v, method="fd")
    fd_error = float(np.linalg.norm(fd - auto) / np.linalg.norm(auto))

    worst = float(max(errors))
    return CheckResult(
        'solver', worst < 1e-3,
        {'max_relative_error': worst, 'damping': damping, 'fd_hvp_relative_error': fd_error, 'n_params': net.n_params},
        'max relative error < 1e-3',
    )


def check_reachability(w_min: int = 4, w_max: int = 64) -> CheckResult:
    """Every window length reaches offset +1 within 4w using the expansion steps."""
    failures = [w for w in range(w_min, w_max + 1) if 1 not in reachable_offsets(w, 4 * w)]
    return CheckResult(
        'reachability', not failures,
        {'checked': w_max - w_min + 1, 'failures': len(failures)},
        f'offset +1 reachable within 4w for w in {w_min}..{w_max}',
    )


def check_decay(seed: int = 0) -> CheckResult:
    result = decay_experiment(seed=seed)
    rho = result.spearman
    return CheckResult(
        'decay', bool(rho < -0.8),
        {'spearman': rho, 'active_bins': int(result.active.sum())},
        'Spearman rho < -0.8',
    )


def reward_separation(seed: int, data: DataConfig, cfg: RunConfig, epochs: int = 5) -> Dict[str, float]:
    """Class means of r_l and r_p after ``epochs`` detector epochs, and the AC-vs-HS AUC of r_p."""
    bench = build_benchmark(data, seed)
    det_rng, shuffle_rng, reference_rng, investigate_rng = [
        np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(4)
    ]
    fit, _ = split_validation(bench.train, cfg.validation_fraction, cfg.w)
    det = Detector(
        DetectorConfig(cfg.w, fit.n_features, cfg.detector.bottleneck, list(cfg.detector.hidden_sizes)),
        rng=det_rng,
    )
    labels = reference_labels(det, fit, cfg, reference_rng)

    S = initial_windows(fit, cfg.w)
    opt = OptimizerState(lr=cfg.optimizer.lr, kind=cfg.optimizer.kind)
    for _ in range(epochs):
        det.train_epoch(S, opt, cfg.detector.batch_size, shuffle_rng)

    investigator = BehaviorInvestigator(det, S, cfg.hessian.build(), cfg.k, investigate_rng, classify=labels.classify)
    frame = investigator.to_frame()
    means = frame.groupby('class')[['r_l', 'r_p']].mean()

    out = {}
    for kind in ('simple', 'hard', 'contamination'):
        for column in ('r_l', 'r_p'):
            out[f'{column}_{kind}'] = float(means.loc[kind, column]) if kind in means.index else float('nan')
    ac = frame.loc[frame['class'] == 'contamination', 'r_p']
    hs = frame.loc[frame['class'] == 'hard', 'r_p']
    out['auc_rp_ac_vs_hs'] = separation_auc(ac, hs) if len(ac) and len(hs) else float('nan')
    return out


def check_rewards(seeds: Sequence[int] = range(5), epochs: int = 5) -> CheckResult:
    """Reward separation between simple, hard and contaminated samples, averaged over seeds."""
    data, cfg = DataConfig(), RunConfig()
    per_seed = [reward_separation(seed, data, cfg, epochs) for seed in seeds]
    metrics = {key: float(np.nanmean([r[key] for r in per_seed])) for key in per_seed[0]}
    passed = bool(
        metrics['r_l_contamination'] > metrics['r_l_simple']
        and metrics['r_l_hard'] > metrics['r_l_simple']
        and metrics['auc_rp_ac_vs_hs'] > 0.7
    )
    return CheckResult('rewards', passed, metrics, 'r_l(AC), r_l(HS) > r_l(simple); AUC of r_p > 0.7')


def check_gradients(seed: int = 0, n_nets: int = 50, step: float = 1e-6) -> CheckResult:
    """Analytic parameter gradients against central finite differences on random networks."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_nets):
        sizes = [int(rng.integers(2, 6)), int(rng.integers(2, 6)), int(rng.integers(1, 4))]
        net = Network.build(sizes, [Activation.TANH, Activation.IDENTITY], rng)
        x = rng.normal(size=sizes[0])
        t = rng.normal(size=sizes[-1])
        _, analytic = loss_and_grad(net, x, t)

        theta = net.flat_params()
        xt, tt = as_tensor(x), as_tensor(t)
        numeric = np.empty_like(theta)
        for j in range(theta.size):
            e = np.zeros_like(theta)
            e[j] = step
            up = float(mse_loss(net, as_tensor(theta + e), xt, tt))
            down = float(mse_loss(net, as_tensor(theta - e), xt, tt))
            numeric[j] = (up - down) / (2 * step)
        error = np.linalg.norm(analytic - numeric) / max(np.linalg.norm(analytic), 1e-12)
        worst = max(worst, float(error))
    return CheckResult('gradients', worst < 1e-4, {'max_relative_error': worst, 'networks': n_nets},
                       'max relative error < 1e-4')


def value_iteration(rewards: np.ndarray, gamma: float, tol: float = 1e-12) -> np.ndarray:
    """Optimal Q table of the MDP whose action a leads to state a."""
    q = np.zeros_like(rewards)
    while True:
        updated = rewards + gamma * q.max(axis=1)[None, :]
        if np.max(np.abs(updated - q)) < tol:
            return updated
        q = updated


def check_mdp(seed: int = 0, updates: int = 4000) -> CheckResult:
    """Greedy policy of a TD-trained agent against value iteration on the toy MDP."""
    n_states = TOY_REWARDS.shape[0]
    optimal = value_iteration(TOY_REWARDS, TOY_GAMMA).argmax(axis=1)

    rng = np.random.default_rng(seed)
    agent = QAgent(n_states, rng, hidden_sizes=(32, 32), gamma=TOY_GAMMA, sync_period=20, lr=1e-2)
    states = np.eye(n_states)
    memory = ReplayMemory(n_states * n_states)
    for s in range(n_states):
        for a in range(n_states):
            memory.push(Transition(states[s], a, float(TOY_REWARDS[s, a]), states[a]))
    agent.train_from(memory, len(memory), updates, rng)

    learned = np.array([int(agent.act(states[s])) for s in range(n_states)])
    matches = int((learned == optimal).sum())
    return CheckResult('mdp', matches == n_states,
                       {'matching_states': matches, 'td_steps': agent.td_steps},
                       'greedy policy equals value-iteration policy in every state')


def check_dynamics(seeds: Sequence[int] = range(5), e: int = 10) -> CheckResult:
    """Contamination share falls and hard-sample share rises over the augmentation epochs."""
    data = DataConfig()
    cfg = RunConfig(e=e, max_epochs=1)
    initial_ac, final_ac, initial_hs, final_hs = [], [], [], []
    for seed in seeds:
        bench = build_benchmark(data, seed)
        _, report = run(bench.train, cfg, seed=seed)
        last = report.augment_epochs[-1]
        initial_ac.append(report.initial_ac_frac)
        initial_hs.append(report.initial_hs_frac)
        final_ac.append(last.ac_frac)
        final_hs.append(last.hs_frac)

    metrics = {
        'initial_ac': float(np.mean(initial_ac)),
        'final_ac': float(np.mean(final_ac)),
        'initial_hs': float(np.mean(initial_hs)),
        'final_hs': float(np.mean(final_hs)),
    }
    passed = metrics['final_ac'] <= 0.6 * metrics['initial_ac'] and metrics['final_hs'] > metrics['initial_hs']
    return CheckResult('dynamics', bool(passed), metrics, 'final AC <= 0.6 x initial; final HS > initial')


CHECKS: Dict[str, Callable[[], CheckResult]] = {
    'influence': check_influence,
    'solver': check_solver,
    'reachability': check_reachability,
    'decay': check_decay,
    'rewards': check_rewards,
    'gradients': check_gradients,
    'mdp': check_mdp,
    'dynamics': check_dynamics,
}

# 'all' leaves out the multi-minute augmentation run
ALL_CHECKS = tuple(name for name in CHECKS if name != 'dynamics')


def run_checks(which: Sequence[str]) -> List[CheckResult]:
    """
    Run the named checks in order ('all' expands to every check but dynamics).

    An exception inside a check is reported as a failure with its message.
    """
    names = []
    for name in which:
        names.extend(ALL_CHECKS if name == 'all' else [name])
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise ValueError(f"unknown checks {unknown}, expected any of {sorted(CHECKS)} or 'all'")

    results = []
    for name in dict.fromkeys(names):
        start = time.perf_counter()
        try:
            result = CHECKS[name]()
        except Exception as e:
            logger.exception(f"Check '{name}' raised")
            result = CheckResult(name, False, {}, f"raised {type(e).__name__}: {e}")
        result.elapsed = time.perf_counter() - start
        logger.info(f"Check {name}: {'PASS' if result.passed else 'FAIL'} {result.metrics}")
        results.append(result)
    return results
