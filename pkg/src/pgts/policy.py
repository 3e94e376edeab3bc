"""Posterior-reshaping Thompson sampling and its score function.

Each arm's pseudo-action is drawn from

    N( (lam_m + lam_sigma * S) / (1 + lam_sigma * N),
       lam_v * d(t) ** lam_gamma / (1 + lam_sigma * N) )

where ``S`` and ``N`` are the arm's reward sum and pull count before epoch
``t`` and ``d`` is the decay base.  ``lam_v`` and ``lam_sigma`` are stored
as logs so any real-valued update keeps them positive.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .bandit import BanditConfig, PosteriorStats

DecayBase = Callable[[np.ndarray, int], np.ndarray]

FIELDS = ("eta_m", "eta_v", "eta_sigma", "eta_gamma")


def shifted_decay(t, T: int):
    """``1 - (t - 1) / T``: equals 1 at the first epoch and ``1/T`` at the last."""
    return 1.0 - (np.asarray(t, dtype=np.float64) - 1.0) / T


@dataclass(frozen=True)
class MetaParams:
    """Unconstrained meta-parameters, one value per arm for each of the four fields."""

    eta_m: np.ndarray
    eta_v: np.ndarray
    eta_sigma: np.ndarray
    eta_gamma: np.ndarray

    def __post_init__(self):
        arrays = [np.array(getattr(self, f), dtype=np.float64, ndmin=1) for f in FIELDS]
        K = arrays[0].shape[0]
        for f, a in zip(FIELDS, arrays):
            if a.shape != (K,):
                raise ValueError(f"{f} must be a vector of length {K}, got shape {a.shape}")
            if not np.all(np.isfinite(a)):
                raise ValueError(f"{f} must be finite")
            a.setflags(write=False)
            object.__setattr__(self, f, a)

    @property
    def K(self) -> int:
        return self.eta_m.shape[0]

    @property
    def lam_m(self):
        return self.eta_m

    @property
    def lam_v(self):
        return np.exp(self.eta_v)

    @property
    def lam_sigma(self):
        return np.exp(self.eta_sigma)

    @property
    def lam_gamma(self):
        return self.eta_gamma

    def to_vector(self) -> np.ndarray:
        """Flat ``4K`` vector laid out as ``[eta_m, eta_v, eta_sigma, eta_gamma]``."""
        return np.concatenate([self.eta_m, self.eta_v, self.eta_sigma, self.eta_gamma])

    @classmethod
    def from_vector(cls, vec) -> "MetaParams":
        vec = np.asarray(vec, dtype=np.float64)
        if vec.ndim != 1 or vec.shape[0] % 4:
            raise ValueError(f"expected a flat vector of length 4K, got shape {vec.shape}")
        return cls(*np.split(vec, 4))

    def to_dict(self) -> dict:
        return {f: getattr(self, f).tolist() for f in FIELDS}

    @classmethod
    def from_dict(cls, d: dict) -> "MetaParams":
        missing = [f for f in FIELDS if f not in d]
        if missing:
            raise KeyError(f"meta-parameter document lacks {missing}")
        return cls(*(d[f] for f in FIELDS))

    def to_json(self) -> str:
        # repr-based float formatting round-trips exactly
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "MetaParams":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path) -> "MetaParams":
        return cls.from_json(Path(path).read_text())

    def __eq__(self, other):
        if not isinstance(other, MetaParams):
            return NotImplemented
        return all(np.array_equal(getattr(self, f), getattr(other, f)) for f in FIELDS)

    __hash__ = None


def canonical_meta_params(config: BanditConfig) -> MetaParams:
    """Meta-parameters under which the reshaped distribution is the exact posterior."""
    return MetaParams(
        eta_m=config.prior_mean.copy(),
        eta_v=np.log(config.prior_var),
        eta_sigma=np.log(config.prior_var / config.noise_var),
        eta_gamma=np.zeros(config.K),
    )


@dataclass(frozen=True)
class SamplingDistribution:
    """Independent normal law of each arm's pseudo-action."""

    mean: np.ndarray
    var: np.ndarray


def _check_time(t, T):
    if isinstance(t, (int, np.integer)):
        if not 1 <= t <= T:
            raise IndexError(f"time index {t} outside [1, {T}]")
        return
    t_arr = np.asarray(t)
    if np.any(t_arr < 1) or np.any(t_arr > T):
        raise IndexError(f"time index outside [1, {T}]")


def reshape_distribution(
    meta: MetaParams, stats: PosteriorStats, t, T: int, decay: DecayBase = shifted_decay
) -> SamplingDistribution:
    _check_time(t, T)
    lam_sigma = meta.lam_sigma
    denom = 1.0 + lam_sigma * stats.pull_count
    mean = (meta.lam_m + lam_sigma * stats.reward_sum) / denom
    d = np.asarray(decay(t, T), dtype=np.float64)[..., None]
    var = meta.lam_v * d**meta.lam_gamma / denom
    return SamplingDistribution(mean, var)


def sample_pseudo_action(dist: SamplingDistribution, z) -> np.ndarray:
    """Transform standard-normal variates ``z`` into pseudo-actions (location-scale)."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape[-1] != dist.mean.shape[-1]:
        raise ValueError(f"z has {z.shape[-1]} arms, distribution has {dist.mean.shape[-1]}")
    return dist.mean + np.sqrt(dist.var) * z


def select_action(pseudo) -> np.ndarray | int:
    """Index of the largest pseudo-action; ties go to the lowest index."""
    a = np.argmax(np.asarray(pseudo), axis=-1)
    return int(a) if np.ndim(a) == 0 else a


def log_density(meta: MetaParams, stats: PosteriorStats, t, T: int, pseudo, decay: DecayBase = shifted_decay):
    dist = reshape_distribution(meta, stats, t, T, decay)
    r = np.asarray(pseudo) - dist.mean
    return np.sum(-0.5 * (np.log(2 * np.pi * dist.var) + r * r / dist.var), axis=-1)


def score(
    meta: MetaParams,
    stats: PosteriorStats,
    t,
    T: int,
    pseudo,
    decay: DecayBase = shifted_decay,
    dist: SamplingDistribution | None = None,
) -> np.ndarray:
    """Gradient of the log sampling density with respect to ``meta.to_vector()``.

    Returns shape ``(..., 4K)`` in the same field layout as ``MetaParams.to_vector``.
    """
    if dist is None:
        dist = reshape_distribution(meta, stats, t, T, decay)
    resid = np.asarray(pseudo) - dist.mean
    g_mean = resid / dist.var
    # d log p / d var, already multiplied by var
    g_var_scaled = 0.5 * (resid * resid / dist.var - 1.0)
    lam_sigma = meta.lam_sigma
    n = stats.pull_count
    denom = 1.0 + lam_sigma * n
    d_eta_m = g_mean / denom
    d_eta_v = g_var_scaled
    d_eta_sigma = lam_sigma * (g_mean * (stats.reward_sum - dist.mean * n) - g_var_scaled * n) / denom
    log_d = np.log(np.asarray(decay(t, T), dtype=np.float64))[..., None]
    d_eta_gamma = g_var_scaled * log_d
    d_eta_gamma = np.broadcast_to(d_eta_gamma, d_eta_m.shape)
    return np.concatenate([d_eta_m, d_eta_v, d_eta_sigma, d_eta_gamma], axis=-1)
