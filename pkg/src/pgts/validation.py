"""Input checks shared by the estimator API."""

from __future__ import annotations

import numpy as np

from .bandit import PRESETS, BanditConfig, Instance


def check_bandit_config(config) -> BanditConfig:
    """Accept a :class:`BanditConfig`, a preset name or a field dict."""
    if isinstance(config, BanditConfig):
        return config
    if isinstance(config, str):
        if config not in PRESETS:
            raise ValueError(f"unknown preset {config!r}; choose from {sorted(PRESETS)}")
        return PRESETS[config]
    if isinstance(config, dict):
        return BanditConfig.from_dict(config)
    raise TypeError(f"expected BanditConfig, preset name or dict, got {type(config).__name__}")


def check_instances(instances, config: BanditConfig) -> Instance:
    """Validate a batch of instances against ``config``; a single instance becomes a batch of one."""
    if not isinstance(instances, Instance):
        raise TypeError("instances must be an Instance (see sample_instance)")
    theta = np.asarray(instances.theta, dtype=np.float64)
    noise = np.asarray(instances.noise, dtype=np.float64)
    if theta.ndim == 1:
        theta, noise = theta[None], noise[None]
    if theta.ndim != 2 or theta.shape[1] != config.K:
        raise ValueError(f"theta must have shape (n, {config.K}), got {theta.shape}")
    if noise.shape != (theta.shape[0], config.K, config.T):
        raise ValueError(f"noise must have shape {(theta.shape[0], config.K, config.T)}, got {noise.shape}")
    if not (np.all(np.isfinite(theta)) and np.all(np.isfinite(noise))):
        raise ValueError("instances must be finite")
    return Instance(theta, noise)


def check_positive_int(value, name: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise TypeError(f"{name} must be an integer")
    if value < minimum:
        raise ValueError(f"{name} must be at least {minimum}")
    return int(value)
