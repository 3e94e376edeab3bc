"""Gaussian bandit environment with known noise variance and a conjugate prior.

Arrays broadcast over leading batch dimensions: a single instance has
``theta.shape == (K,)`` and a batch of ``n`` has ``(n, K)``.  Arms are
0-based; decision epochs ``t`` run from 1 to ``T``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .streams import Purpose, RandomStream


def _as_arm_vector(x, K):
    arr = np.broadcast_to(np.asarray(x, dtype=np.float64), (K,)).copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class BanditConfig:
    """Arm count, horizon, per-arm normal prior and reward noise variance."""

    K: int
    T: int
    prior_mean: np.ndarray
    prior_var: np.ndarray
    noise_var: np.ndarray

    def __post_init__(self):
        K, T = self.K, self.T
        if isinstance(K, bool) or int(K) != K or K < 1:
            raise ValueError(f"K must be a positive integer, got {K!r}")
        if isinstance(T, bool) or int(T) != T or T < 1:
            raise ValueError(f"T must be a positive integer, got {T!r}")
        object.__setattr__(self, "K", int(K))
        object.__setattr__(self, "T", int(T))
        for name in ("prior_mean", "prior_var", "noise_var"):
            raw = np.asarray(getattr(self, name), dtype=np.float64)
            if raw.ndim > 1 or (raw.ndim == 1 and raw.shape[0] != K):
                raise ValueError(f"{name} must have length K={K}, got shape {raw.shape}")
            arr = _as_arm_vector(raw, K)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, arr)
        if np.any(self.prior_var <= 0):
            raise ValueError("prior_var must be positive for every arm")
        if np.any(self.noise_var <= 0):
            raise ValueError("noise_var must be positive for every arm")

    @property
    def noise_sd(self) -> np.ndarray:
        return np.sqrt(self.noise_var)

    def to_dict(self) -> dict:
        return {
            "K": self.K,
            "T": self.T,
            "prior_mean": self.prior_mean.tolist(),
            "prior_var": self.prior_var.tolist(),
            "noise_var": self.noise_var.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BanditConfig":
        return cls(
            K=d["K"], T=d["T"], prior_mean=d["prior_mean"], prior_var=d["prior_var"], noise_var=d["noise_var"]
        )

    def __eq__(self, other):
        if not isinstance(other, BanditConfig):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(repr(self.to_dict()))


PRESETS: dict[str, BanditConfig] = {
    "standard": BanditConfig(K=10, T=500, prior_mean=0.0, prior_var=1.0, noise_var=1.0),
    # noise standard deviations 0.1, 0.4, 1, 4, 10
    "hetero": BanditConfig(K=5, T=50, prior_mean=0.0, prior_var=1.0, noise_var=[0.01, 0.16, 1.0, 16.0, 100.0]),
    "many_arms": BanditConfig(K=20, T=20, prior_mean=0.0, prior_var=1.0, noise_var=1.0),
}


@dataclass(frozen=True)
class Instance:
    """True means plus the full standard-normal reward-noise panel.

    ``noise[..., a, t-1]`` is the draw used whenever arm ``a`` is pulled at epoch ``t``.
    """

    theta: np.ndarray
    noise: np.ndarray

    @property
    def K(self) -> int:
        return self.theta.shape[-1]

    @property
    def T(self) -> int:
        return self.noise.shape[-1]

    def __len__(self):
        if self.theta.ndim == 1:
            raise TypeError("single instance has no length")
        return self.theta.shape[0]

    def __getitem__(self, idx) -> "Instance":
        if self.theta.ndim == 1:
            raise TypeError("cannot index a single instance")
        return Instance(self.theta[idx], self.noise[idx])

    def best_arm(self) -> np.ndarray:
        return np.argmax(self.theta, axis=-1)

    def rewards(self, config: BanditConfig) -> np.ndarray:
        """Reward of every arm at every epoch, shape ``(..., K, T)``."""
        return self.theta[..., None] + config.noise_sd[:, None] * self.noise


def sample_instance(
    config: BanditConfig, stream: RandomStream, size: int | None = None, iteration: int = 0, block: int = 0
) -> Instance:
    """Draw ``theta ~ N(prior_mean, prior_var)`` and an i.i.d. N(0, 1) noise panel.

    With ``size=None`` a single instance is returned, otherwise a batch of ``size``.
    The theta and noise draws use separate substreams.
    """
    shape = () if size is None else (int(size),)
    g_theta = stream.generator(Purpose.THETA, iteration, block)
    g_noise = stream.generator(Purpose.REWARD_NOISE, iteration, block)
    z = g_theta.standard_normal(shape + (config.K,))
    theta = config.prior_mean + np.sqrt(config.prior_var) * z
    noise = g_noise.standard_normal(shape + (config.K, config.T))
    return Instance(theta, noise)


def pick(values: np.ndarray, arm) -> np.ndarray:
    """Select ``values[..., arm]`` with ``arm`` broadcast over the leading dimensions."""
    arm = np.asarray(arm, dtype=np.int64)
    lead = np.broadcast_shapes(values.shape[:-1], arm.shape)
    values = np.broadcast_to(values, lead + values.shape[-1:])
    idx = np.broadcast_to(arm, lead)[..., None]
    return np.take_along_axis(values, idx, axis=-1)[..., 0]


def realize_reward(instance: Instance, config: BanditConfig, arm, t: int):
    """Reward earned by pulling ``arm`` at epoch ``t`` (1-based) on ``instance``."""
    if not 1 <= t <= instance.T:
        raise IndexError(f"time index {t} outside [1, {instance.T}]")
    arm = np.asarray(arm, dtype=np.int64)
    if np.any(arm < 0) or np.any(arm >= instance.K):
        raise IndexError(f"arm index {arm} outside [0, {instance.K})")
    mean = pick(instance.theta, arm)
    xi = pick(instance.noise[..., :, t - 1], arm)
    out = mean + config.noise_sd[arm] * xi
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class PosteriorStats:
    """Per-arm reward sums and pull counts."""

    reward_sum: np.ndarray
    pull_count: np.ndarray = field(default=None)

    def __post_init__(self):
        rs = np.asarray(self.reward_sum, dtype=np.float64)
        pc = np.zeros(rs.shape, dtype=np.int64) if self.pull_count is None else np.asarray(self.pull_count)
        if pc.shape != rs.shape:
            raise ValueError("reward_sum and pull_count shapes differ")
        if np.any(pc < 0):
            raise ValueError("pull counts must be nonnegative")
        object.__setattr__(self, "reward_sum", rs)
        object.__setattr__(self, "pull_count", pc.astype(np.int64, copy=False))

    @classmethod
    def empty(cls, K: int, batch: int | None = None) -> "PosteriorStats":
        shape = (K,) if batch is None else (batch, K)
        return cls(np.zeros(shape), np.zeros(shape, dtype=np.int64))

    @property
    def n_observed(self):
        return self.pull_count.sum(axis=-1)


def update_posterior(stats: PosteriorStats, arm, reward) -> PosteriorStats:
    """Fold one observation per episode into the statistics (returns a new object)."""
    reward = np.asarray(reward, dtype=np.float64)
    if not np.all(np.isfinite(reward)):
        raise ValueError("reward must be finite")
    K = stats.reward_sum.shape[-1]
    arm = np.asarray(arm)
    if np.any(arm < 0) or np.any(arm >= K):
        raise IndexError(f"arm index outside [0, {K})")
    hit = np.arange(K) == arm[..., None]
    return PosteriorStats(stats.reward_sum + hit * reward[..., None], stats.pull_count + hit)


def posterior_from_counts(config: BanditConfig, reward_sum, pull_count):
    """Posterior ``(mean, var)`` of every arm from raw sums and counts."""
    prec = 1.0 / config.prior_var + pull_count / config.noise_var
    var = 1.0 / prec
    mean = var * (config.prior_mean / config.prior_var + reward_sum / config.noise_var)
    return mean, var


def posterior_mean_var(stats: PosteriorStats, config: BanditConfig, arm=None):
    """Posterior mean and variance of ``arm`` (all arms when ``arm`` is None)."""
    mean, var = posterior_from_counts(config, stats.reward_sum, stats.pull_count)
    if arm is None:
        return mean, var
    if not 0 <= int(arm) < config.K:
        raise IndexError(f"arm index {arm} outside [0, {config.K})")
    m, v = mean[..., int(arm)], var[..., int(arm)]
    if np.ndim(m) == 0:
        return float(m), float(v)
    return m, v
