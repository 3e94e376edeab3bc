"""scikit-learn style wrapper around training and evaluation."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .bandit import sample_instance
from .estimators import check_pair
from .evaluation import EvaluationReport, ReshapedTS, evaluate_policy, regret_of_actions, rollout_actions
from .policy import MetaParams, shifted_decay
from .streams import Purpose, RandomStream
from .trainer import TrainingRun, train
from .validation import check_bandit_config, check_instances, check_positive_int


class PolicyGradientTS(BaseEstimator):
    """Learn posterior-reshaping meta-parameters for a Gaussian bandit.

    ``fit`` takes a bandit description (config, preset name or dict) instead
    of a data matrix: the training data are simulated from the prior.

    >>> est = PolicyGradientTS(iterations=2, batch_size=8, random_state=0).fit("many_arms")
    >>> est.meta_params_.K
    20
    """

    def __init__(
        self,
        iterations: int = 1000,
        batch_size: int = 1000,
        step_size: float = 0.05,
        metric: str = "mean",
        baseline: str = "self",
        max_grad_norm: float | None = None,
        random_state: int = 0,
        n_jobs: int = 1,
    ):
        self.iterations = iterations
        self.batch_size = batch_size
        self.step_size = step_size
        self.metric = metric
        self.baseline = baseline
        self.max_grad_norm = max_grad_norm
        self.random_state = random_state
        self.n_jobs = n_jobs

    def fit(self, config, y=None, initial: MetaParams | None = None):
        config = check_bandit_config(config)
        check_pair(self.metric, self.baseline)
        run = TrainingRun(
            iterations=check_positive_int(self.iterations, "iterations", 0),
            batch_size=check_positive_int(self.batch_size, "batch_size"),
            step_size=float(self.step_size),
            metric=self.metric,
            baseline=self.baseline,
            initial=initial,
            max_grad_norm=self.max_grad_norm,
            n_jobs=check_positive_int(self.n_jobs, "n_jobs"),
        )
        result = train(config, run, seed=check_positive_int(self.random_state, "random_state", 0))
        self.config_ = config
        self.meta_params_ = result.meta
        self.learning_curve_ = result.curve
        self.n_episodes_simulated_ = result.episodes_simulated
        return self

    @property
    def policy_(self) -> ReshapedTS:
        check_is_fitted(self, "meta_params_")
        return ReshapedTS(self.meta_params_, decay=shifted_decay)

    def predict(self, instances, policy_seed: int = 0) -> np.ndarray:
        """Action sequences ``(n, T)`` of the fitted policy on the given instances."""
        check_is_fitted(self, "meta_params_")
        inst = check_instances(instances, self.config_)
        z = RandomStream(policy_seed).generator(Purpose.POLICY_NOISE).standard_normal((len(inst), self.config_.T, self.config_.K))
        return rollout_actions(self.policy_, inst, self.config_, z)

    def score(self, instances, y=None, policy_seed: int = 0) -> float:
        """Negative mean regret, so that larger is better."""
        check_is_fitted(self, "meta_params_")
        inst = check_instances(instances, self.config_)
        actions = self.predict(inst, policy_seed)
        return -float(np.mean(regret_of_actions(inst.theta, actions)))

    def evaluate(self, n_instances: int = 10000, eval_seed: int = 1) -> EvaluationReport:
        check_is_fitted(self, "meta_params_")
        return evaluate_policy(self.policy_, self.config_, eval_seed, n_instances, self.n_jobs)

    def sample_instances(self, n: int, seed: int = 1):
        check_is_fitted(self, "meta_params_")
        return sample_instance(self.config_, RandomStream(seed), size=check_positive_int(n, "n"))
