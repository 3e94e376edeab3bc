"""Policy-gradient tuning of posterior-reshaped Thompson sampling for Gaussian bandits."""

from .bandit import (
    PRESETS,
    BanditConfig,
    Instance,
    PosteriorStats,
    posterior_mean_var,
    realize_reward,
    sample_instance,
    update_posterior,
)
from .estimator import PolicyGradientTS
from .estimators import (
    ADMISSIBLE_PAIRS,
    BaselineKind,
    MetricKind,
    Trajectory,
    baseline_values,
    estimate_gradient,
    gradient_estimates,
    metric_values,
    run_episode,
    single_time_estimate,
)
from .evaluation import BayesUCB, EvaluationReport, NaiveTS, ReshapedTS, evaluate_policy, norm_ppf, pull_histogram
from .policy import MetaParams, canonical_meta_params, reshape_distribution, sample_pseudo_action, score, select_action
from .streams import RandomStream
from .trainer import AdamState, DivergenceError, TrainingRun, adam_step, train
from .variance import variance_study

__version__ = "0.1.0"
