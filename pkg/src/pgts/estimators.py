"""Episode rollouts and score-function gradient estimators.

A gradient estimate is ``sum_t S_t * (M_t - B_t)`` where ``S_t`` is the
score of the pseudo-action drawn at epoch ``t``, ``M_t`` a reward metric
for the remaining horizon and ``B_t`` a baseline.  All functions accept a
single episode or a batch with a leading episode axis.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .bandit import BanditConfig, Instance, PosteriorStats, pick, posterior_from_counts, realize_reward, update_posterior
from .policy import (
    DecayBase,
    MetaParams,
    reshape_distribution,
    sample_pseudo_action,
    score,
    select_action,
    shifted_decay,
)
from .streams import Purpose, RandomStream


class MetricKind(str, Enum):
    OBS = "obs"
    MEAN = "mean"
    FIN = "fin"
    BAYES = "bayes"


class BaselineKind(str, Enum):
    NULL = "null"
    ORACLE = "oracle"
    SELF = "self"


def check_pair(metric, baseline) -> tuple[MetricKind, BaselineKind]:
    """Validate a metric/baseline combination; the oracle baseline has no posterior-mean coupling."""
    metric, baseline = MetricKind(metric), BaselineKind(baseline)
    if metric is MetricKind.BAYES and baseline is BaselineKind.ORACLE:
        raise ValueError("the oracle baseline cannot be coupled to the posterior-mean metric")
    return metric, baseline


ADMISSIBLE_PAIRS = tuple(
    (m, b) for m in MetricKind for b in BaselineKind if not (m is MetricKind.BAYES and b is BaselineKind.ORACLE)
)


@dataclass(frozen=True)
class Trajectory:
    """Record of one episode (or a batch of episodes).

    ``reward_sums[..., t-1, :]`` and ``pull_counts[..., t-1, :]`` are the
    statistics *before* epoch ``t``; ``final_stats`` holds them after ``T``.
    ``pseudo_actions`` and ``scores`` are None for trajectories that were not
    produced by a sampling policy (e.g. the oracle's).
    """

    instance: Instance
    actions: np.ndarray
    rewards: np.ndarray
    reward_sums: np.ndarray
    pull_counts: np.ndarray
    final_stats: PosteriorStats
    pseudo_actions: np.ndarray | None = None
    scores: np.ndarray | None = None

    @property
    def T(self) -> int:
        return self.actions.shape[-1]

    def snapshot(self, t: int) -> PosteriorStats:
        """Posterior statistics available when choosing at epoch ``t``."""
        return PosteriorStats(self.reward_sums[..., t - 1, :], self.pull_counts[..., t - 1, :])

    def __getitem__(self, idx) -> "Trajectory":
        if self.actions.ndim == 1:
            raise TypeError("cannot index a single trajectory")
        opt = lambda a: None if a is None else a[idx]  # noqa: E731
        return Trajectory(
            instance=self.instance[idx],
            actions=self.actions[idx],
            rewards=self.rewards[idx],
            reward_sums=self.reward_sums[idx],
            pull_counts=self.pull_counts[idx],
            final_stats=PosteriorStats(self.final_stats.reward_sum[idx], self.final_stats.pull_count[idx]),
            pseudo_actions=opt(self.pseudo_actions),
            scores=opt(self.scores),
        )


def _as_batch(instance: Instance) -> tuple[Instance, bool]:
    if instance.theta.ndim == 1:
        return Instance(instance.theta[None], instance.noise[None]), True
    return instance, False


def policy_noise(
    stream: RandomStream, config: BanditConfig, n: int | None = None, iteration: int = 0, block: int = 0,
    purpose: Purpose = Purpose.POLICY_NOISE,
) -> np.ndarray:
    """Standard-normal variates ``z[..., t-1, a]`` consumed by a sampling policy."""
    shape = () if n is None else (int(n),)
    return stream.generator(purpose, iteration, block).standard_normal(shape + (config.T, config.K))


def run_episode(
    meta: MetaParams,
    instance: Instance,
    config: BanditConfig,
    noise,
    decay: DecayBase = shifted_decay,
    keep_scores: bool = True,
) -> Trajectory:
    """Roll out TS(meta) on ``instance``.

    ``noise`` is either the variate array from :func:`policy_noise` or a
    :class:`RandomStream`, in which case its policy-noise substream is used.
    """
    if meta.K != config.K or instance.K != config.K or instance.T != config.T:
        raise ValueError("meta-parameters, instance and config disagree on K or T")
    if isinstance(noise, RandomStream):
        noise = policy_noise(noise, config, None if instance.theta.ndim == 1 else len(instance))
    batch, single = _as_batch(instance)
    z = np.asarray(noise, dtype=np.float64)
    if single:
        z = z[None]
    n, K, T = batch.theta.shape[0], config.K, config.T
    if z.shape != (n, T, K):
        raise ValueError(f"policy noise has shape {z.shape}, expected {(n, T, K)}")

    # time-major buffers so each epoch writes a contiguous slab
    z = np.moveaxis(z, 1, 0)
    actions = np.empty((T, n), dtype=np.int64)
    rewards = np.empty((T, n))
    sums = np.empty((T, n, K))
    counts = np.empty((T, n, K), dtype=np.int64)
    pseudo = np.empty((T, n, K))
    scores = np.empty((T, n, 4 * K)) if keep_scores else None
    stats = PosteriorStats.empty(K, n)
    for t in range(1, T + 1):
        sums[t - 1] = stats.reward_sum
        counts[t - 1] = stats.pull_count
        dist = reshape_distribution(meta, stats, t, T, decay)
        theta_tilde = sample_pseudo_action(dist, z[t - 1])
        a = select_action(theta_tilde)
        r = realize_reward(batch, config, a, t)
        pseudo[t - 1] = theta_tilde
        if keep_scores:
            scores[t - 1] = score(meta, stats, t, T, theta_tilde, decay, dist=dist)
        actions[t - 1] = a
        rewards[t - 1] = r
        stats = update_posterior(stats, a, r)
    tm = lambda x: None if x is None else np.moveaxis(x, 0, 1)  # noqa: E731
    traj = Trajectory(batch, actions.T, rewards.T, tm(sums), tm(counts), stats, tm(pseudo), tm(scores))
    return traj[0] if single else traj


def fixed_action_trajectory(instance: Instance, config: BanditConfig, actions) -> Trajectory:
    """Trajectory of a predetermined action sequence (no pseudo-actions or scores)."""
    batch, single = _as_batch(instance)
    actions = np.asarray(actions, dtype=np.int64)
    if single:
        actions = actions[None]
    n, K, T = batch.theta.shape[0], config.K, config.T
    actions = np.broadcast_to(actions, (n, T))
    panel = batch.rewards(config)  # (n, K, T)
    rewards = pick(np.swapaxes(panel, 1, 2), actions)
    hit = np.arange(K) == actions[..., None]
    cum_counts = np.cumsum(hit, axis=1)
    cum_sums = np.cumsum(hit * rewards[..., None], axis=1)
    counts = np.concatenate([np.zeros((n, 1, K), dtype=np.int64), cum_counts[:, :-1]], axis=1)
    sums = np.concatenate([np.zeros((n, 1, K)), cum_sums[:, :-1]], axis=1)
    final = PosteriorStats(cum_sums[:, -1], cum_counts[:, -1])
    traj = Trajectory(batch, np.array(actions), rewards, sums, counts, final)
    return traj[0] if single else traj


def oracle_trajectory(instance: Instance, config: BanditConfig) -> Trajectory:
    """Always pull the arm with the largest true mean."""
    best = instance.best_arm()
    return fixed_action_trajectory(instance, config, np.repeat(np.asarray(best)[..., None], config.T, axis=-1))


def _suffix_sum(x, axis=-1):
    return np.flip(np.cumsum(np.flip(x, axis=axis), axis=axis), axis=axis)


def metric_values(kind, traj: Trajectory, config: BanditConfig) -> np.ndarray:
    """Reward metric ``M_t`` for ``t = 1..T`` (last axis)."""
    kind = MetricKind(kind)
    if kind is MetricKind.OBS:
        return _suffix_sum(traj.rewards)
    if kind is MetricKind.MEAN:
        return _suffix_sum(pick(traj.instance.theta[..., None, :], traj.actions))
    if kind is MetricKind.BAYES:
        mean, _ = posterior_from_counts(config, traj.reward_sums, traj.pull_counts)
        return _suffix_sum(pick(mean, traj.actions))
    # FIN: posterior mean of each arm after its real observations before t plus
    # counterfactual pulls of that arm at every s = t..T, weighted by how often
    # the trajectory actually plays it over that stretch.
    T = config.T
    future = np.swapaxes(_suffix_sum(traj.instance.rewards(config)), -1, -2)  # (..., T, K)
    n_future = (T - np.arange(T))[:, None]  # T - t + 1
    mu_hat, _ = posterior_from_counts(config, traj.reward_sums + future, traj.pull_counts + n_future)
    remaining = traj.final_stats.pull_count[..., None, :] - traj.pull_counts
    return np.sum(mu_hat * remaining, axis=-1)


def baseline_values(
    kind, traj: Trajectory, metric, config: BanditConfig, self_traj: Trajectory | None = None
) -> np.ndarray:
    """Baseline ``B_t`` for ``t = 1..T`` coupled to ``metric``."""
    metric, kind = check_pair(metric, kind)
    if kind is BaselineKind.NULL:
        return np.zeros(traj.rewards.shape)
    if kind is BaselineKind.ORACLE:
        return metric_values(metric, oracle_trajectory(traj.instance, config), config)
    if self_traj is None:
        raise ValueError("the self-play baseline needs an independent trajectory on the same instance")
    if self_traj.actions.shape != traj.actions.shape:
        raise ValueError("self-play trajectory shape does not match")
    return metric_values(metric, self_traj, config)


def _check_weights(traj, M, B):
    if traj.scores is None:
        raise ValueError("trajectory has no recorded scores")
    M = np.asarray(M, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if M.shape != traj.rewards.shape or B.shape != traj.rewards.shape:
        raise ValueError(f"metric/baseline must have shape {traj.rewards.shape}")
    if not (np.all(np.isfinite(M)) and np.all(np.isfinite(B))):
        raise ValueError("metric and baseline must be finite")
    return M - B


def estimate_gradient(traj: Trajectory, M, B) -> np.ndarray:
    """``sum_t S_t (M_t - B_t)``, shape ``(..., 4K)``."""
    w = _check_weights(traj, M, B)
    return np.einsum("...td,...t->...d", traj.scores, w)


def single_time_estimate(traj: Trajectory, M, B, tau) -> np.ndarray:
    """``T * S_tau (M_tau - B_tau)`` for a 1-based epoch ``tau`` (per episode in a batch)."""
    w = _check_weights(traj, M, B)
    T = traj.T
    tau = np.asarray(tau, dtype=np.int64)
    if np.any(tau < 1) or np.any(tau > T):
        raise IndexError(f"tau outside [1, {T}]")
    idx = np.broadcast_to(tau - 1, w.shape[:-1])
    w_tau = np.take_along_axis(w, idx[..., None], axis=-1)[..., 0]
    s_tau = np.take_along_axis(traj.scores, idx[..., None, None], axis=-2)[..., 0, :]
    return T * s_tau * w_tau[..., None]


def gradient_estimates(
    traj: Trajectory, config: BanditConfig, metric, baseline, self_traj: Trajectory | None = None
) -> np.ndarray:
    """Per-episode ``G^{M,B}`` for a named metric/baseline pair."""
    M = metric_values(metric, traj, config)
    B = baseline_values(baseline, traj, metric, config, self_traj)
    return estimate_gradient(traj, M, B)


def write_trajectories_jsonl(traj: Trajectory, path) -> None:
    """Debug dump: one JSON object per episode (actions, rewards, pseudo-actions, true means)."""
    import json

    batch = traj if traj.actions.ndim == 2 else Trajectory(
        Instance(traj.instance.theta[None], traj.instance.noise[None]), traj.actions[None], traj.rewards[None],
        traj.reward_sums[None], traj.pull_counts[None],
        PosteriorStats(traj.final_stats.reward_sum[None], traj.final_stats.pull_count[None]),
        None if traj.pseudo_actions is None else traj.pseudo_actions[None],
    )
    with open(path, "w") as fh:
        for i in range(batch.actions.shape[0]):
            rec = {
                "episode": i,
                "theta": batch.instance.theta[i].tolist(),
                "actions": batch.actions[i].tolist(),
                "rewards": batch.rewards[i].tolist(),
            }
            if batch.pseudo_actions is not None:
                rec["pseudo_actions"] = batch.pseudo_actions[i].tolist()
            fh.write(json.dumps(rec) + "\n")
