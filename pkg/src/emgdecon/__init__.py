"""emgdecon: dynamic decontamination of surrogate sEMG signals.

A workbench around a deep Q-network agent that picks one of three elliptic
filters (high-pass, notch, low-pass) per 500 ms segment of a contaminated
signal.  The reward comes from supervised classifiers that judge whether the
filtered segment looks clean.  Static single-filter and wavelet-denoising
baselines are included for comparison, scored by a normalized RMSE (omega)
and by desired-action accuracy.
"""

from .signals import (
    SampledSignal,
    Segment,
    PowerSpectrum,
    QualityReport,
    synth_clean_semg,
    segment_signal,
    welch_psd,
    purity_check,
)
from .contamination import (
    NoiseKind,
    NoiseSequence,
    ContaminationConfig,
    NoisyDataset,
    gen_moa,
    gen_pli,
    gen_wgn,
    alpha,
    contaminate,
    measured_snr,
    build_corpus,
)
from .filters import (
    FilterAction,
    IirFilter,
    WaveletDenoiser,
    design_elliptic,
    apply_filter,
    filter_signal,
    magnitude_response,
    wavelet_denoise,
    static_baseline,
    BASELINE_NAMES,
)
from .features import (
    FeatureVector,
    SpectralReference,
    FEATURE_NAMES,
    extract_features,
    affected_features,
    make_reference,
    default_reference,
)
from .reward import (
    ClassifierKind,
    SelectCode,
    LabeledExample,
    RewardModel,
    ModelRegistry,
    LimeExplanation,
    build_reward_training_set,
    train_classifier,
    lime_explain,
    select_models,
    train_level_models,
    reward,
)
from .agent import (
    QNetwork,
    Transition,
    ReplayBuffer,
    TrainConfig,
    AgentCheckpoint,
    q_forward,
    td_loss_and_grads,
    adam_step,
    epsilon_greedy,
    epsilon_at,
    train,
    act,
)
from .evaluate import (
    EvalReport,
    omega,
    action_accuracy,
    confusion,
    compare,
)
from .estimators import SupDQNDenoiser, StaticFilterDenoiser

__version__ = "0.1.0"

__all__ = [
    "SampledSignal", "Segment", "PowerSpectrum", "QualityReport",
    "synth_clean_semg", "segment_signal", "welch_psd", "purity_check",
    "NoiseKind", "NoiseSequence", "ContaminationConfig", "NoisyDataset",
    "gen_moa", "gen_pli", "gen_wgn", "alpha", "contaminate", "measured_snr",
    "build_corpus",
    "FilterAction", "IirFilter", "WaveletDenoiser", "design_elliptic",
    "apply_filter", "filter_signal", "magnitude_response", "wavelet_denoise",
    "static_baseline", "BASELINE_NAMES",
    "FeatureVector", "SpectralReference", "FEATURE_NAMES",
    "extract_features", "affected_features", "make_reference",
    "default_reference",
    "ClassifierKind", "SelectCode", "LabeledExample", "RewardModel",
    "ModelRegistry", "LimeExplanation", "build_reward_training_set",
    "train_classifier", "lime_explain", "select_models",
    "train_level_models", "reward",
    "QNetwork", "Transition", "ReplayBuffer", "TrainConfig",
    "AgentCheckpoint", "q_forward", "td_loss_and_grads", "adam_step",
    "epsilon_greedy", "epsilon_at", "train", "act",
    "EvalReport", "omega", "action_accuracy", "confusion", "compare",
    "SupDQNDenoiser", "StaticFilterDenoiser",
]
