"""Monte-Carlo comparison of gradient estimators on shared episodes."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .bandit import BanditConfig, PosteriorStats, sample_instance
from .estimators import (
    ADMISSIBLE_PAIRS,
    BaselineKind,
    MetricKind,
    baseline_values,
    check_pair,
    estimate_gradient,
    metric_values,
    policy_noise,
    run_episode,
)
from .policy import DecayBase, MetaParams, score, shifted_decay
from .streams import Purpose, RandomStream, blocks

Pair = tuple[MetricKind, BaselineKind]

METRIC_ORDER = (MetricKind.OBS, MetricKind.MEAN, MetricKind.FIN)


def estimator_samples(
    meta: MetaParams,
    config: BanditConfig,
    n: int,
    seed: int,
    pairs=ADMISSIBLE_PAIRS,
    single_time: bool = False,
    decay: DecayBase = shifted_decay,
) -> dict[Pair, np.ndarray]:
    """Per-episode gradient estimates, shape ``(n, 4K)``, for each pair.

    All pairs are evaluated on the same instances, policy variates, self-play
    runs and (for single-time estimates) the same random epoch.
    """
    pairs = [check_pair(m, b) for m, b in pairs]
    need_self = any(b is BaselineKind.SELF for _, b in pairs)
    stream = RandomStream(seed)
    out = {p: np.empty((n, 4 * config.K)) for p in pairs}
    for block, lo, hi in blocks(n):
        size = hi - lo
        inst = sample_instance(config, stream, size=size, iteration=0, block=block)
        z = policy_noise(stream, config, size, 0, block)
        traj = run_episode(meta, inst, config, z, decay, keep_scores=not single_time)
        self_traj = None
        if need_self:
            z_self = policy_noise(stream, config, size, 0, block, purpose=Purpose.SELF_PLAY_NOISE)
            self_traj = run_episode(meta, inst, config, z_self, decay, keep_scores=False)
        tau = stream.generator(Purpose.TAU, 0, block).integers(1, config.T + 1, size=size)
        metrics = {m: metric_values(m, traj, config) for m in {m for m, _ in pairs}}
        if single_time:
            # only the score at tau is needed; recompute it instead of storing all T
            rows = np.arange(size)
            at_tau = PosteriorStats(traj.reward_sums[rows, tau - 1], traj.pull_counts[rows, tau - 1])
            s_tau = score(meta, at_tau, tau, config.T, traj.pseudo_actions[rows, tau - 1], decay)
        for m, b in pairs:
            B = baseline_values(b, traj, m, config, self_traj)
            if single_time:
                w = metrics[m][rows, tau - 1] - B[rows, tau - 1]
                out[(m, b)][lo:hi] = config.T * s_tau * w[:, None]
            else:
                out[(m, b)][lo:hi] = estimate_gradient(traj, metrics[m], B)
    return out


def covariance_trace(samples) -> float:
    """Trace of the sample covariance (sum of per-coordinate variances)."""
    return float(np.sum(np.var(samples, axis=0, ddof=1)))


def _bootstrap_traces(sample_sets, n_boot, rng, chunk=50):
    """Bootstrap covariance traces; row ``i`` resamples ``sample_sets[i]`` with shared indices."""
    n, d = sample_sets[0].shape
    x = np.concatenate(sample_sets, axis=1)
    sq = np.stack([np.sum(s * s, axis=1) for s in sample_sets], axis=1)
    traces = np.empty((len(sample_sets), n_boot))
    for lo in range(0, n_boot, chunk):
        hi = min(lo + chunk, n_boot)
        w = np.stack([np.bincount(rng.integers(0, n, n), minlength=n) for _ in range(hi - lo)]).astype(np.float64)
        mean = (w @ x / n).reshape(hi - lo, len(sample_sets), d)
        traces[:, lo:hi] = ((w @ sq / n) - np.sum(mean * mean, axis=2)).T * n / (n - 1)
    return traces


@dataclass(frozen=True)
class TraceRow:
    metric: MetricKind
    baseline: BaselineKind
    trace: float
    ci_low: float
    ci_high: float


@dataclass(frozen=True)
class OrderingRow:
    baseline: BaselineKind
    higher: MetricKind
    lower: MetricKind
    difference: float
    ci_low: float
    ci_high: float

    @property
    def holds(self) -> bool:
        return self.ci_low > 0


@dataclass(frozen=True)
class VarianceStudy:
    traces: list[TraceRow]
    orderings: list[OrderingRow]
    n: int

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["metric", "baseline", "trace", "ci_low", "ci_high", "n"])
        for r in self.traces:
            w.writerow([r.metric.value, r.baseline.value, f"{r.trace:.6g}", f"{r.ci_low:.6g}", f"{r.ci_high:.6g}", self.n])
        return buf.getvalue()

    def ordering_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["baseline", "higher", "lower", "difference", "ci_low", "ci_high", "holds"])
        for r in self.orderings:
            w.writerow([
                r.baseline.value, r.higher.value, r.lower.value,
                f"{r.difference:.6g}", f"{r.ci_low:.6g}", f"{r.ci_high:.6g}", int(r.holds),
            ])
        return buf.getvalue()


def variance_study(
    meta: MetaParams,
    config: BanditConfig,
    n: int,
    seed: int,
    baselines=(BaselineKind.NULL, BaselineKind.ORACLE, BaselineKind.SELF),
    n_boot: int = 1000,
    level: float = 0.95,
    decay: DecayBase = shifted_decay,
) -> VarianceStudy:
    """Covariance traces of single-time estimators and the obs >= mean >= fin ordering.

    Confidence intervals are percentile intervals from a paired bootstrap
    (every estimator is resampled with the same episode indices).
    """
    baselines = [BaselineKind(b) for b in baselines]
    pairs = [(m, b) for b in baselines for m in METRIC_ORDER]
    samples = estimator_samples(meta, config, n, seed, pairs, single_time=True, decay=decay)
    rng = RandomStream(seed).generator(Purpose.TAU, 1, 0)
    boot = _bootstrap_traces([samples[p] for p in pairs], n_boot, rng)
    alpha = 100 * (1 - level) / 2
    rows, orders = [], []
    for i, (m, b) in enumerate(pairs):
        lo, hi = np.percentile(boot[i], [alpha, 100 - alpha])
        rows.append(TraceRow(m, b, covariance_trace(samples[(m, b)]), float(lo), float(hi)))
    for b in baselines:
        for hi_m, lo_m in zip(METRIC_ORDER, METRIC_ORDER[1:]):
            i, j = pairs.index((hi_m, b)), pairs.index((lo_m, b))
            diff = covariance_trace(samples[(hi_m, b)]) - covariance_trace(samples[(lo_m, b)])
            lo, hi = np.percentile(boot[i] - boot[j], [alpha, 100 - alpha])
            orders.append(OrderingRow(b, hi_m, lo_m, diff, float(lo), float(hi)))
    return VarianceStudy(rows, orders, n)
