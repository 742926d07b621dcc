"""Supervised reward models: train, explain, select, persist, and serve.

For each noise level, one classifier per action judges whether a filtered
segment looks clean.  A segment's example is labeled clean exactly when the
action matches the injected noise (MOA with HPF, PLI with NF, WGN with LPF).
Twelve classifiers (4 levels x 3 actions) live in a registry keyed by a
4-bit select code: the first two bits encode the level (00 = -5 dB,
01 = -1 dB, 10 = +1 dB, 11 = +5 dB), the last two the action (01 = HPF,
10 = NF, 11 = LPF).

Model selection per action: all six classifier kinds compete on a held-out
split; the best is explained with LIME, and retraining on the top-k most
influential features (k in 3..5) replaces the all-features model only when
it strictly improves held-out accuracy.
"""

from __future__ import annotations

import json
import pickle
import warnings
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np
from sklearn.discriminant_analysis import LinearDiscriminantAnalysis
from sklearn.exceptions import ConvergenceWarning
from sklearn.linear_model import LogisticRegression
from sklearn.model_selection import train_test_split
from sklearn.neighbors import KNeighborsClassifier
from sklearn.neural_network import MLPClassifier
from sklearn.svm import SVC
from sklearn.tree import DecisionTreeClassifier

from .contamination import DESIRED_ACTION, NoisyDataset
from .features import FEATURE_NAMES, FeatureVector, affected_features
from .filters import FilterAction
from .signals import segment_signal

LABELS = ("clean", "noisy")


class ClassifierKind(Enum):
    SVM = "SVM"
    LDA = "LDA"
    NN = "NN"
    DECISION_TREE = "DecisionTree"
    LOGISTIC_REGRESSION = "LogisticRegression"
    KNN = "KNN"


LEVEL_BITS = {-5.0: "00", -1.0: "01", 1.0: "10", 5.0: "11"}
ACTION_BITS = {FilterAction.HPF: "01", FilterAction.NF: "10", FilterAction.LPF: "11"}


@dataclass(frozen=True)
class SelectCode:
    """4-bit registry key S1S2S3S4: level bits then action bits."""

    bits: str

    def __post_init__(self):
        if self.bits not in VALID_CODES:
            raise ValueError(f"invalid select code {self.bits!r}; 12 codes are valid")

    @classmethod
    def from_parts(cls, level_db: float, action: FilterAction) -> "SelectCode":
        if float(level_db) not in LEVEL_BITS:
            raise ValueError(f"no select code for level {level_db} dB")
        return cls(LEVEL_BITS[float(level_db)] + ACTION_BITS[FilterAction(action)])

    @property
    def level_db(self) -> float:
        return {v: k for k, v in LEVEL_BITS.items()}[self.bits[:2]]

    @property
    def action(self) -> FilterAction:
        return {v: k for k, v in ACTION_BITS.items()}[self.bits[2:]]


VALID_CODES = tuple(lv + ab for lv in LEVEL_BITS.values() for ab in ACTION_BITS.values())


@dataclass
class LabeledExample:
    """One (affected features, label) pair with its generation provenance."""

    features: FeatureVector
    label: str
    provenance: tuple  # (NoiseKind, FilterAction, level_db)

    def __post_init__(self):
        if self.label not in LABELS:
            raise ValueError(f"label must be one of {LABELS}")


@dataclass
class LimeExplanation:
    """Local linear surrogate of a model around one instance."""

    weights: np.ndarray
    intercept: float
    kernel_width: float
    n_samples: int

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if not np.all(np.isfinite(self.weights)):
            raise ValueError("explanation weights must be finite")


@dataclass
class RewardModel:
    """A trained clean-vs-noisy judge with its preprocessing baked in.

    Standardization statistics (over all six features) travel with the
    model; `feature_subset` holds the column indices the underlying
    estimator actually consumes.
    """

    kind: ClassifierKind
    model: object
    mu: np.ndarray
    sd: np.ndarray
    feature_subset: tuple = (0, 1, 2, 3, 4, 5)
    val_accuracy: Optional[float] = None
    level_db: Optional[float] = None
    action: Optional[FilterAction] = None

    def _prepare(self, X) -> np.ndarray:
        if isinstance(X, FeatureVector):
            X = X.as_array()[None, :]
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        Z = (X - self.mu) / self.sd
        return Z[:, list(self.feature_subset)]

    def predict(self, X):
        """Label(s) for raw (unstandardized) feature rows or one vector."""
        out = self.model.predict(self._prepare(X))
        return str(out[0]) if out.shape[0] == 1 else np.asarray(out, dtype=object)

    def score_clean(self, X) -> np.ndarray:
        """Scalar confidence that rows are clean (higher means cleaner)."""
        Z = self._prepare(X)
        classes = list(self.model.classes_)
        if hasattr(self.model, "predict_proba"):
            return self.model.predict_proba(Z)[:, classes.index("clean")]
        margin = self.model.decision_function(Z)
        return margin if classes[1] == "clean" else -margin


# ---------------------------------------------------------------------------
# training data and classifiers


def build_reward_training_set(
    nd_train: NoisyDataset, level_db: Optional[float] = None
) -> list:
    """Affected-feature examples from every (segment, action) pair of ND1.

    Emits 64 x 3 = 192 examples; exactly one action per segment is labeled
    clean, so the clean:noisy ratio is 1:2.
    """
    if level_db is not None and float(level_db) != nd_train.config.target_snr_db:
        raise ValueError("level_db does not match the dataset's configured level")
    level = nd_train.config.target_snr_db
    segments = segment_signal(nd_train.noisy)
    if not segments:
        raise ValueError("empty dataset")
    examples = []
    for seg, kind in zip(segments, nd_train.sequence.kinds):
        for action in FilterAction:
            label = "clean" if DESIRED_ACTION[kind] == action else "noisy"
            examples.append(
                LabeledExample(affected_features(seg, action), label, (kind, action, level))
            )
    return examples


def _make_estimator(kind: ClassifierKind, seed: int):
    if kind == ClassifierKind.SVM:
        return SVC(kernel="rbf", gamma=1.0 / 6.0, C=1.0)
    if kind == ClassifierKind.LDA:
        return LinearDiscriminantAnalysis(solver="lsqr", shrinkage=1e-6)
    if kind == ClassifierKind.NN:
        return MLPClassifier(
            hidden_layer_sizes=(16,),
            activation="tanh",
            solver="adam",
            learning_rate_init=0.01,
            max_iter=200,
            random_state=seed,
        )
    if kind == ClassifierKind.DECISION_TREE:
        return DecisionTreeClassifier(max_depth=5, criterion="gini", random_state=seed)
    if kind == ClassifierKind.LOGISTIC_REGRESSION:
        return LogisticRegression(C=1000.0, max_iter=1000)
    if kind == ClassifierKind.KNN:
        return KNeighborsClassifier(n_neighbors=5)
    raise ValueError(f"unknown classifier kind {kind!r}")


def _examples_to_xy(examples) -> tuple:
    X = np.array([ex.features.as_array() for ex in examples])
    y = np.array([ex.label for ex in examples], dtype=object)
    return X, y


def train_classifier(
    kind: ClassifierKind, examples: list, seed: int, feature_subset: tuple = (0, 1, 2, 3, 4, 5)
) -> RewardModel:
    """Fit one classifier kind on labeled examples, standardizing first."""
    X, y = _examples_to_xy(examples)
    classes, counts = np.unique(y.astype(str), return_counts=True)
    if len(classes) < 2 or np.min(counts) < 2:
        raise ValueError("degenerate class distribution (need 2+ examples per class)")
    mu = X.mean(axis=0)
    sd = X.std(axis=0) + 1e-12
    est = _make_estimator(kind, seed)
    Z = ((X - mu) / sd)[:, list(feature_subset)]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        est.fit(Z, y.astype(str))
    return RewardModel(kind, est, mu, sd, tuple(feature_subset))


# ---------------------------------------------------------------------------
# LIME


def lime_explain(
    score_fn,
    instance,
    background,
    seed: int,
    n_samples: int = 1000,
    ridge_lambda: float = 0.01,
) -> LimeExplanation:
    """Local linear explanation of a scalar scoring function.

    Perturbations are drawn per-feature from the background marginals; each
    is weighted by exp(-d^2 / w^2) with d the Euclidean distance to the
    instance in standardized space and w = 0.75 sqrt(6).  A weighted ridge
    regression of the scores on standardized perturbations yields the
    per-feature weights.

    Parameters
    ----------
    score_fn : callable
        Maps raw feature rows (n, 6) to scalar scores; use
        `RewardModel.score_clean` for registry models.
    instance : FeatureVector or array of 6
    background : array (>= 100, 6) or list of LabeledExample
    """
    if isinstance(instance, FeatureVector):
        instance = instance.as_array()
    instance = np.asarray(instance, dtype=np.float64)
    if len(background) and isinstance(background[0], LabeledExample):
        background = np.array([ex.features.as_array() for ex in background])
    background = np.asarray(background, dtype=np.float64)
    if background.shape[0] < 100:
        raise ValueError("need at least 100 background examples")
    mu = background.mean(axis=0)
    sd = background.std(axis=0)
    if np.all(sd == 0):
        raise ValueError("degenerate background (zero variance everywhere)")
    sd = sd + 1e-12
    n_feat = background.shape[1]
    rng = np.random.default_rng(seed)
    samples = np.empty((n_samples, n_feat))
    samples[0] = instance
    for j in range(n_feat):
        samples[1:, j] = rng.choice(background[:, j], size=n_samples - 1, replace=True)
    z = (samples - mu) / sd
    z_inst = (instance - mu) / sd
    width = 0.75 * np.sqrt(n_feat)
    dist2 = np.sum((z - z_inst) ** 2, axis=1)
    w = np.exp(-dist2 / width**2)
    y = np.asarray(score_fn(samples), dtype=np.float64)
    # Weighted ridge with an unpenalized intercept column.
    design = np.hstack([np.ones((n_samples, 1)), z])
    wd = design * w[:, None]
    gram = design.T @ wd
    penalty = ridge_lambda * np.eye(n_feat + 1)
    penalty[0, 0] = 0.0
    beta = np.linalg.solve(gram + penalty, wd.T @ y)
    return LimeExplanation(beta[1:], float(beta[0]), float(width), n_samples)


# ---------------------------------------------------------------------------
# selection and the registry


def select_models(
    level_db: float, examples: list, seed: int, kinds=tuple(ClassifierKind)
) -> dict:
    """Pick the best reward model per action at one noise level.

    All candidate kinds are trained per action on an 80/20 stratified split.
    The most accurate is explained with LIME (mean absolute weight over up
    to 25 held-out instances, background pooled over all actions at this
    level), and a top-k feature subset (k = 3..5) replaces it only when
    strictly better on the held-out split.
    """
    background = np.array([ex.features.as_array() for ex in examples])
    out = {}
    for action in FilterAction:
        subset_examples = [ex for ex in examples if ex.provenance[1] == action]
        X, y = _examples_to_xy(subset_examples)
        idx_train, idx_val = train_test_split(
            np.arange(len(subset_examples)),
            test_size=0.2,
            stratify=y.astype(str),
            random_state=seed,
        )
        train_part = [subset_examples[i] for i in idx_train]
        X_val, y_val = X[idx_val], y[idx_val].astype(str)

        def val_acc(model) -> float:
            pred = np.atleast_1d(model.predict(X_val))
            return float(np.mean(pred.astype(str) == y_val))

        candidates = []
        for kind in kinds:
            model = train_classifier(kind, train_part, seed)
            candidates.append((val_acc(model), kind, model))
        best_acc = max(acc for acc, _, _ in candidates)
        best_kind, best_model = next(
            (kind, model) for acc, kind, model in candidates if acc == best_acc
        )

        # LIME importance, averaged over held-out instances.
        importance = np.zeros(len(FEATURE_NAMES))
        probe_rows = X_val[:25]
        for i, row in enumerate(probe_rows):
            exp = lime_explain(best_model.score_clean, row, background, seed=seed + i)
            importance += np.abs(exp.weights)
        importance /= max(len(probe_rows), 1)

        ranked = np.argsort(-importance, kind="stable")
        chosen_acc, chosen = best_acc, best_model
        for k in (3, 4, 5):
            subset = tuple(sorted(int(j) for j in ranked[:k]))
            sub_model = train_classifier(best_kind, train_part, seed, feature_subset=subset)
            acc = val_acc(sub_model)
            if acc > chosen_acc:
                chosen_acc, chosen = acc, sub_model
        chosen.val_accuracy = chosen_acc
        chosen.level_db = float(level_db)
        chosen.action = action
        out[action] = chosen
    return out


class ModelRegistry:
    """The 12 reward models keyed by their 4-bit select codes."""

    def __init__(self):
        self._models = {}

    def register(self, code: SelectCode, model: RewardModel) -> None:
        self._models[code.bits] = model

    def get(self, code: SelectCode) -> RewardModel:
        if code.bits not in self._models:
            raise KeyError(f"no reward model registered for code {code.bits}")
        return self._models[code.bits]

    def __contains__(self, code: SelectCode) -> bool:
        return code.bits in self._models

    def __len__(self) -> int:
        return len(self._models)

    @property
    def codes(self) -> list:
        return sorted(self._models)

    def has_level(self, level_db: float) -> bool:
        return all(
            SelectCode.from_parts(level_db, action) in self for action in FilterAction
        )

    def save(self, directory) -> None:
        """One JSON metadata file plus one binary model blob per code."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        for bits in sorted(self._models):
            m = self._models[bits]
            meta = {
                "bits": bits,
                "kind": m.kind.value,
                "mu": [float(v) for v in m.mu],
                "sd": [float(v) for v in m.sd],
                "feature_subset": list(m.feature_subset),
                "val_accuracy": m.val_accuracy,
                "level_db": m.level_db,
                "action": int(m.action) if m.action is not None else None,
            }
            with open(directory / f"{bits}.json", "w") as fh:
                json.dump(meta, fh, indent=2, sort_keys=True)
                fh.write("\n")
            with open(directory / f"{bits}.bin", "wb") as fh:
                pickle.dump(m.model, fh)

    @classmethod
    def load(cls, directory) -> "ModelRegistry":
        directory = Path(directory)
        registry = cls()
        for meta_path in sorted(directory.glob("*.json")):
            with open(meta_path) as fh:
                meta = json.load(fh)
            with open(directory / f"{meta['bits']}.bin", "rb") as fh:
                est = pickle.load(fh)
            model = RewardModel(
                ClassifierKind(meta["kind"]),
                est,
                np.array(meta["mu"]),
                np.array(meta["sd"]),
                tuple(meta["feature_subset"]),
                meta["val_accuracy"],
                meta["level_db"],
                FilterAction(meta["action"]) if meta["action"] is not None else None,
            )
            registry._models[meta["bits"]] = model
        return registry


def train_level_models(
    registry: ModelRegistry, nd_train: NoisyDataset, seed: int
) -> dict:
    """Build, select, and register the three reward models for one level."""
    level = nd_train.config.target_snr_db
    examples = build_reward_training_set(nd_train)
    selected = select_models(level, examples, seed)
    for action, model in selected.items():
        registry.register(SelectCode.from_parts(level, action), model)
    return selected


def reward(affected: FeatureVector, code: SelectCode, registry: ModelRegistry) -> float:
    """+2 when the code's model judges the affected state clean, else 0."""
    model = registry.get(code)
    return 2.0 if model.predict(affected) == "clean" else 0.0
