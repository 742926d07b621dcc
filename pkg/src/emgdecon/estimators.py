"""Scikit-learn style wrappers around the training and filtering pipeline.

The functional API (``reward.train_level_models``, ``agent.train``,
``agent.act``, ``filters.static_baseline``) does the actual work; these
classes exist so the denoisers drop into sklearn tooling: ``get_params`` /
``set_params``, ``clone``, and the fit/transform/predict conventions.
Hyperparameters are validated at fit time, not in ``__init__``, so cloning
never loses or mutates settings.
"""

from __future__ import annotations

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .agent import TrainConfig, act, train
from .contamination import NoisyDataset
from .evaluate import action_accuracy
from .filters import BASELINE_NAMES, static_baseline
from .reward import ModelRegistry, train_level_models
from .signals import SampledSignal


def check_dataset(X) -> NoisyDataset:
    """Validate that X is the unit these estimators consume."""
    if not isinstance(X, NoisyDataset):
        raise TypeError(f"expected a NoisyDataset, got {type(X).__name__}")
    return X


class SupDQNDenoiser(TransformerMixin, BaseEstimator):
    """Adaptive denoiser: a Q-network picks one filter per 500 ms segment.

    ``fit`` runs the whole pipeline on one training dataset: it trains and
    selects the reward classifiers for that dataset's noise level, then
    trains the agent against them.  ``transform`` filters a dataset with the
    frozen greedy policy, ``predict`` returns the per-segment filter
    choices, and ``score`` is the fraction of segments where the choice
    matches the action the contamination sequence calls for.

    Parameter defaults mirror :class:`emgdecon.agent.TrainConfig`.
    """

    def __init__(
        self,
        episodes: int = 2000,
        max_steps: int = 64,
        lr: float = 0.001,
        adam_beta1: float = 0.9,
        grad_clip: float = 1.0,
        gamma: float = 0.95,
        eps_start: float = 0.6,
        eps_end: float = 0.05,
        eps_decay: float = 0.003,
        batch: int = 32,
        target_sync: int = 64,
        hidden: tuple = (32, 32),
        normalize_obs: bool = True,
        buffer_capacity: int = 10000,
        seed: int = 0,
    ):
        self.episodes = episodes
        self.max_steps = max_steps
        self.lr = lr
        self.adam_beta1 = adam_beta1
        self.grad_clip = grad_clip
        self.gamma = gamma
        self.eps_start = eps_start
        self.eps_end = eps_end
        self.eps_decay = eps_decay
        self.batch = batch
        self.target_sync = target_sync
        self.hidden = hidden
        self.normalize_obs = normalize_obs
        self.buffer_capacity = buffer_capacity
        self.seed = seed

    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            episodes=self.episodes,
            max_steps=self.max_steps,
            lr=self.lr,
            adam_beta1=self.adam_beta1,
            grad_clip=self.grad_clip,
            gamma=self.gamma,
            eps_start=self.eps_start,
            eps_end=self.eps_end,
            eps_decay=self.eps_decay,
            batch=self.batch,
            target_sync=self.target_sync,
            seed=self.seed,
            hidden=self.hidden,
            normalize_obs=self.normalize_obs,
            buffer_capacity=self.buffer_capacity,
        )

    def fit(self, X, y=None) -> "SupDQNDenoiser":
        """Train reward models and agent on one dataset; y is ignored."""
        X = check_dataset(X)
        registry = ModelRegistry()
        train_level_models(registry, X, self.seed)
        checkpoint, history = train(X, registry, self._train_config())
        self.registry_ = registry
        self.checkpoint_ = checkpoint
        self.history_ = history
        self.level_db_ = X.config.target_snr_db
        return self

    def predict(self, X) -> list:
        """Greedy per-segment filter choices for a dataset."""
        check_is_fitted(self, "checkpoint_")
        actions, _ = act(self.checkpoint_, check_dataset(X))
        return actions

    def transform(self, X) -> SampledSignal:
        """Filtered signal produced by the frozen policy."""
        check_is_fitted(self, "checkpoint_")
        _, filtered = act(self.checkpoint_, check_dataset(X))
        return filtered

    def score(self, X, y=None) -> float:
        """Desired-action agreement on X as a fraction in [0, 1]."""
        X = check_dataset(X)
        return action_accuracy(self.predict(X), X.desired_actions) / 100.0


class StaticFilterDenoiser(TransformerMixin, BaseEstimator):
    """One fixed baseline applied to whole datasets.

    ``method`` names either a wavelet scheme applied segment by segment
    ("WD_db4", "WD_sym4") or an IIR filter streamed across the recording
    ("NF", "LPF", "HPF").  There is nothing to learn; ``fit`` only
    validates the choice.
    """

    def __init__(self, method: str = "NF"):
        self.method = method

    def fit(self, X=None, y=None) -> "StaticFilterDenoiser":
        if self.method not in BASELINE_NAMES:
            raise ValueError(
                f"method must be one of {BASELINE_NAMES}, got {self.method!r}"
            )
        self.method_ = self.method
        return self

    def transform(self, X) -> SampledSignal:
        check_is_fitted(self, "method_")
        return static_baseline(self.method_, check_dataset(X))
