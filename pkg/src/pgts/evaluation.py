"""Regret evaluation on shared instance batches and the competing index policies."""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfc

from .bandit import BanditConfig, Instance, PosteriorStats, pick, posterior_mean_var, realize_reward, sample_instance, update_posterior
from .estimators import Trajectory, policy_noise
from .policy import DecayBase, MetaParams, reshape_distribution, sample_pseudo_action, select_action, shifted_decay
from .streams import RandomStream, blocks

# Acklam's rational approximation to the normal quantile (relative error < 1.2e-9
# before refinement).
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00, 3.754408661907416e00)
_P_LOW = 0.02425


def _lower_half_ppf(p):
    """Quantile for ``0 < p <= 0.5``."""
    x = np.empty_like(p)
    tail = p < _P_LOW
    q = np.sqrt(-2.0 * np.log(p[tail]))
    x[tail] = (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / (
        (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
    )
    mid = ~tail
    q = p[mid] - 0.5
    r = q * q
    x[mid] = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / (
        ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
    )
    # one Halley step against the erfc-based CDF brings it to full double precision
    e = 0.5 * erfc(-x / math.sqrt(2.0)) - p
    u = e * math.sqrt(2.0 * math.pi) * np.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


def norm_ppf(p):
    """Standard normal quantile; ``-inf``/``inf`` at 0 and 1."""
    p = np.asarray(p, dtype=np.float64)
    scalar = p.ndim == 0
    p = np.atleast_1d(p)
    if np.any((p < 0) | (p > 1) | np.isnan(p)):
        raise ValueError("probability outside [0, 1]")
    out = np.empty_like(p)
    out[p == 0] = -np.inf
    out[p == 1] = np.inf
    lo = (p > 0) & (p <= 0.5)
    hi = (p > 0.5) & (p < 1)
    out[lo] = _lower_half_ppf(p[lo])
    # 1 - p is exact for p in (0.5, 1)
    out[hi] = -_lower_half_ppf(1.0 - p[hi])
    return float(out[0]) if scalar else out


def bayes_ucb_action(stats: PosteriorStats, config: BanditConfig, t: int):
    """Arm with the largest posterior quantile at level ``1 - 1/t``.

    The level is 0 at ``t = 1``; every arm's index is then ``-inf`` and the
    lowest index is chosen.
    """
    if t < 1:
        raise ValueError("t must be at least 1")
    mean, var = posterior_mean_var(stats, config)
    if t == 1:
        a = np.zeros(mean.shape[:-1], dtype=np.int64)
    else:
        a = np.argmax(mean + norm_ppf(1.0 - 1.0 / t) * np.sqrt(var), axis=-1)
    return int(a) if np.ndim(a) == 0 else a


class NaiveTS:
    """Thompson sampling from the exact posterior."""

    name = "naive_ts"

    def act(self, stats, t, config, z):
        mean, var = posterior_mean_var(stats, config)
        return select_action(mean + np.sqrt(var) * z)


class BayesUCB:
    name = "bayes_ucb"

    def act(self, stats, t, config, z):
        return bayes_ucb_action(stats, config, t)


@dataclass
class ReshapedTS:
    """TS with posterior reshaping under fixed meta-parameters."""

    meta: MetaParams
    name: str = "trained_ts"
    decay: DecayBase = field(default=shifted_decay, repr=False)

    def act(self, stats, t, config, z):
        dist = reshape_distribution(self.meta, stats, t, config.T, self.decay)
        return select_action(sample_pseudo_action(dist, z))


def rollout_actions(policy, instance: Instance, config: BanditConfig, z) -> np.ndarray:
    """Action sequences, shape ``(n, T)``, of ``policy`` on a batch of instances."""
    n = len(instance)
    stats = PosteriorStats.empty(config.K, n)
    actions = np.empty((n, config.T), dtype=np.int64)
    for t in range(1, config.T + 1):
        a = np.broadcast_to(policy.act(stats, t, config, z[:, t - 1]), (n,))
        stats = update_posterior(stats, a, realize_reward(instance, config, a, t))
        actions[:, t - 1] = a
    return actions


def regret_of_actions(theta, actions) -> np.ndarray:
    theta = np.asarray(theta)
    return np.sum(np.max(theta, axis=-1)[..., None] - pick(theta[..., None, :], actions), axis=-1)


def episode_regret(traj: Trajectory, instance: Instance | None = None):
    """Sum over epochs of the gap between the best mean and the chosen arm's mean."""
    inst = traj.instance if instance is None else instance
    r = regret_of_actions(inst.theta, traj.actions)
    return float(r) if np.ndim(r) == 0 else r


@dataclass(frozen=True)
class EvaluationReport:
    label: str
    mean_regret: float
    std_error: float
    n_instances: int
    mean_pulls: tuple[float, ...]

    @classmethod
    def from_regrets(cls, label, regrets, mean_pulls) -> "EvaluationReport":
        regrets = np.asarray(regrets, dtype=np.float64)
        n = regrets.shape[0]
        if n < 2:
            raise ValueError("need at least two instances for a standard error")
        return cls(
            label=label,
            mean_regret=float(regrets.mean()),
            std_error=float(regrets.std(ddof=1) / math.sqrt(n)),
            n_instances=int(n),
            mean_pulls=tuple(float(x) for x in mean_pulls),
        )

    @property
    def sorted_pulls(self) -> list[float]:
        return sorted(self.mean_pulls, reverse=True)

    CSV_COLUMNS = ("policy", "mean_regret", "std_error", "n_instances")

    def csv_row(self) -> list[str]:
        return [self.label, f"{self.mean_regret:.6g}", f"{self.std_error:.6g}", str(self.n_instances)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.CSV_COLUMNS)
        w.writerow(self.csv_row())
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "policy": self.label,
            "mean_regret": self.mean_regret,
            "std_error": self.std_error,
            "n_instances": self.n_instances,
            "mean_pulls": list(self.mean_pulls),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _evaluate_block(policy, config, stream, block, lo, hi):
    inst = sample_instance(config, stream, size=hi - lo, iteration=0, block=block)
    z = policy_noise(stream, config, hi - lo, iteration=0, block=block)
    actions = rollout_actions(policy, inst, config, z)
    pulls = np.stack([np.sum(actions == a, axis=1) for a in range(config.K)], axis=1)
    return regret_of_actions(inst.theta, actions), pulls


def evaluate_policy(policy, config: BanditConfig, eval_seed: int, n_instances: int, n_jobs: int = 1) -> EvaluationReport:
    """Mean regret of ``policy`` over ``n_instances`` instances drawn from ``eval_seed``.

    Every policy evaluated with the same seed and count sees identical
    instances and identical policy variates.
    """
    if n_instances < 2:
        raise ValueError("n_instances must be at least 2")
    stream = RandomStream(eval_seed)
    work = blocks(n_instances)
    run = lambda w: _evaluate_block(policy, config, stream, *w)  # noqa: E731
    if n_jobs > 1 and len(work) > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as ex:
            parts = list(ex.map(run, work))
    else:
        parts = [run(w) for w in work]
    regrets = np.concatenate([p[0] for p in parts])
    pulls = np.concatenate([p[1] for p in parts])
    return EvaluationReport.from_regrets(getattr(policy, "name", type(policy).__name__), regrets, pulls.mean(axis=0))


def pull_histogram(policy, config: BanditConfig, eval_seed: int, n_instances: int, n_jobs: int = 1) -> np.ndarray:
    """Mean pulls per arm over an evaluation batch, sorted in descending order."""
    report = evaluate_policy(policy, config, eval_seed, n_instances, n_jobs)
    return np.array(report.sorted_pulls)


def histogram_csv(sorted_pulls) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["arm_rank", "mean_pulls"])
    for rank, v in enumerate(sorted_pulls, start=1):
        w.writerow([rank, f"{v:.6g}"])
    return buf.getvalue()
