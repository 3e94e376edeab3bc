"""Batched policy-gradient ascent over the reshaping meta-parameters."""

from __future__ import annotations

import csv
import io
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .bandit import BanditConfig, sample_instance
from .estimators import BaselineKind, MetricKind, check_pair, gradient_estimates, policy_noise, run_episode
from .evaluation import episode_regret
from .policy import DecayBase, MetaParams, canonical_meta_params, shifted_decay
from .streams import Purpose, RandomStream, blocks, pairwise_sum

logger = logging.getLogger(__name__)


class DivergenceError(RuntimeError):
    """Raised when the batch regret blows up relative to the first iteration."""


@dataclass(frozen=True)
class AdamState:
    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0
    step_size: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def fresh(cls, dim: int, step_size: float = 0.01, **kw) -> "AdamState":
        return cls(np.zeros(dim), np.zeros(dim), 0, step_size, **kw)

    def __post_init__(self):
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("decay rates must lie in (0, 1)")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


def adam_step(state: AdamState, grad) -> tuple[AdamState, np.ndarray]:
    """One bias-corrected Adam step for *ascent*; returns the new state and the parameter delta."""
    g = np.asarray(grad, dtype=np.float64)
    if g.shape != state.first_moment.shape:
        raise ValueError(f"gradient shape {g.shape} does not match state {state.first_moment.shape}")
    if not np.all(np.isfinite(g)):
        raise ValueError("non-finite gradient")
    k = state.step_count + 1
    m = state.beta1 * state.first_moment + (1 - state.beta1) * g
    v = state.beta2 * state.second_moment + (1 - state.beta2) * g * g
    m_hat = m / (1 - state.beta1**k)
    v_hat = v / (1 - state.beta2**k)
    delta = state.step_size * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return replace(state, first_moment=m, second_moment=v, step_count=k), delta


@dataclass
class TrainingRun:
    iterations: int
    batch_size: int
    step_size: float = 0.05
    metric: MetricKind | str = MetricKind.MEAN
    baseline: BaselineKind | str = BaselineKind.SELF
    initial: MetaParams | None = None
    checkpoint_every: int = 0
    max_grad_norm: float | None = None
    divergence_factor: float = 10.0
    n_jobs: int = 1
    decay: DecayBase = field(default=shifted_decay, repr=False)

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iterations must be nonnegative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        self.metric, self.baseline = check_pair(self.metric, self.baseline)


@dataclass
class LearningCurve:
    iteration: list[int] = field(default_factory=list)
    batch_regret: list[float] = field(default_factory=list)
    grad_norm: list[float] = field(default_factory=list)
    wall_ms: list[float] = field(default_factory=list)

    def __len__(self):
        return len(self.iteration)

    def append(self, k, regret, gnorm, ms):
        self.iteration.append(k)
        self.batch_regret.append(regret)
        self.grad_norm.append(gnorm)
        self.wall_ms.append(ms)

    def to_csv(self, timing: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iteration", "batch_regret", "grad_norm", "wall_ms"])
        for k, r, g, ms in zip(self.iteration, self.batch_regret, self.grad_norm, self.wall_ms):
            w.writerow([k, f"{r:.6g}", f"{g:.6g}", f"{ms:.6g}" if timing else "0"])
        return buf.getvalue()


@dataclass
class TrainingResult:
    meta: MetaParams
    curve: LearningCurve
    checkpoints: dict[int, MetaParams]
    episodes_simulated: int


def _block_gradient(meta, config, run, stream, k, block, lo, hi):
    n = hi - lo
    inst = sample_instance(config, stream, size=n, iteration=k, block=block)
    z = policy_noise(stream, config, n, k, block)
    traj = run_episode(meta, inst, config, z, run.decay)
    self_traj = None
    if run.baseline is BaselineKind.SELF:
        z_self = policy_noise(stream, config, n, k, block, purpose=Purpose.SELF_PLAY_NOISE)
        self_traj = run_episode(meta, inst, config, z_self, run.decay, keep_scores=False)
    g = gradient_estimates(traj, config, run.metric, run.baseline, self_traj)
    return g.sum(axis=0), float(np.sum(episode_regret(traj)))


def batch_gradient(meta: MetaParams, config: BanditConfig, run: TrainingRun, stream: RandomStream, k: int):
    """Batch-mean gradient and batch-mean regret for training iteration ``k``."""
    work = blocks(run.batch_size)
    job = lambda w: _block_gradient(meta, config, run, stream, k, *w)  # noqa: E731
    if run.n_jobs > 1 and len(work) > 1:
        with ThreadPoolExecutor(max_workers=run.n_jobs) as ex:
            parts = list(ex.map(job, work))
    else:
        parts = [job(w) for w in work]
    grad = pairwise_sum([p[0] for p in parts]) / run.batch_size
    regret = pairwise_sum([p[1] for p in parts]) / run.batch_size
    return grad, regret


def train(config: BanditConfig, run: TrainingRun, seed: int, callback=None) -> TrainingResult:
    """Optimise the meta-parameters by Adam ascent on batch-mean gradient estimates.

    Iteration ``k`` (1-based) simulates a fresh batch from substream ``(seed, k)``;
    the recorded regret is that of the batch simulated before the update.
    """
    meta = run.initial if run.initial is not None else canonical_meta_params(config)
    if meta.K != config.K:
        raise ValueError("initial meta-parameters do not match the arm count")
    stream = RandomStream(seed)
    state = AdamState.fresh(4 * config.K, run.step_size)
    curve = LearningCurve()
    checkpoints: dict[int, MetaParams] = {}
    per_iter = run.batch_size * (2 if run.baseline is BaselineKind.SELF else 1)
    first_regret = None
    for k in range(1, run.iterations + 1):
        t0 = time.perf_counter()
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            grad, regret = batch_gradient(meta, config, run, stream, k)
        if first_regret is None:
            first_regret = regret
        elif regret > run.divergence_factor * first_regret:
            raise DivergenceError(
                f"iteration {k}: batch regret {regret:.4g} exceeds {run.divergence_factor:g}x "
                f"the first iteration's {first_regret:.4g}"
            )
        if not (np.all(np.isfinite(grad)) and np.isfinite(regret)):
            raise DivergenceError(f"iteration {k}: non-finite gradient or regret")
        gnorm = float(np.linalg.norm(grad))
        if run.max_grad_norm is not None and gnorm > run.max_grad_norm:
            grad = grad * (run.max_grad_norm / gnorm)
        state, delta = adam_step(state, grad)
        meta = MetaParams.from_vector(meta.to_vector() + delta)
        curve.append(k, regret, gnorm, 1000 * (time.perf_counter() - t0))
        if run.checkpoint_every and k % run.checkpoint_every == 0:
            checkpoints[k] = meta
        if callback is not None:
            callback(k, regret, meta)
        logger.debug("iter %d regret %.4f |g| %.4g", k, regret, gnorm)
    return TrainingResult(meta, curve, checkpoints, per_iter * run.iterations)
