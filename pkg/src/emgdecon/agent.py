"""The supDQN agent: a small Q-network trained against classifier rewards.

The state is the current segment's pre-filter feature vector; the action is
one of the three filters; the reward is what the level's registry model
pays for the post-filter (affected) features; the next state is the next
segment's pre-filter features.  Temporal-difference regression fits

    loss = mean( (y - Q(s, a))^2 ),   y = r + gamma * max_a' Q(s', a'; target)

with the target network detached and synced every `target_sync` steps, and
y = r on terminal transitions.  Exploration follows a global linear
schedule eps(k) = max(eps_end, eps_start - eps_decay * k) over timesteps.

The network, backpropagation, and Adam live here in plain numpy so the
gradient can be checked against finite differences.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np

from .contamination import DESIRED_ACTION, NoisyDataset
from .errors import NumericError
from .features import default_reference, extract_features, affected_features
from .filters import FilterAction, apply_filter, get_filter
from .reward import ModelRegistry, SelectCode
from .signals import SampledSignal, segment_signal

ACTIONS = (FilterAction.HPF, FilterAction.NF, FilterAction.LPF)


class Transition(NamedTuple):
    s: np.ndarray
    a: int  # action index 0..2
    r: float
    s_next: np.ndarray
    terminal: bool


@dataclass
class TrainConfig:
    """Training hyperparameters.

    Published settings: 2000 episodes of up to 64 timesteps, learning rate
    0.001, Adam with 0.9 gradient decay and L2-norm gradient thresholding,
    exploration 0.6 -> 0.05 with 0.003 decay per timestep.  The rest
    (discount, batch, buffer, target sync, architecture, observation
    z-scoring) are reconstruction defaults, all overridable.
    """

    episodes: int = 2000
    max_steps: int = 64
    lr: float = 0.001
    adam_beta1: float = 0.9
    grad_clip: float = 1.0
    gamma: float = 0.95
    eps_start: float = 0.6
    eps_end: float = 0.05
    eps_decay: float = 0.003
    batch: int = 32
    target_sync: int = 64
    seed: int = 0
    hidden: tuple = (32, 32)
    normalize_obs: bool = True
    buffer_capacity: int = 10000

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must lie in (0, 1)")
        if self.eps_end > self.eps_start:
            raise ValueError("eps_end must not exceed eps_start")

    @property
    def sizes(self) -> tuple:
        return (6, *self.hidden, 3)


# ---------------------------------------------------------------------------
# Q-network and its gradients


class QNetwork:
    """Fully connected ReLU network mapping 6 features to 3 Q-values."""

    def __init__(self, weights: list, biases: list):
        self.W = weights
        self.b = biases

    @classmethod
    def initialize(cls, sizes: tuple, rng: np.random.Generator) -> "QNetwork":
        W, b = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            scale = math.sqrt(2.0 / fan_in)
            W.append(rng.normal(0.0, scale, (fan_in, fan_out)))
            b.append(np.zeros(fan_out))
        return cls(W, b)

    @property
    def sizes(self) -> tuple:
        return (self.W[0].shape[0], *[w.shape[1] for w in self.W])

    def copy(self) -> "QNetwork":
        return QNetwork([w.copy() for w in self.W], [v.copy() for v in self.b])

    def forward(self, X: np.ndarray):
        """Batch forward pass; returns (outputs, layer activations)."""
        h = np.atleast_2d(X)
        acts = [h]
        for i in range(len(self.W) - 1):
            h = np.maximum(h @ self.W[i] + self.b[i], 0.0)
            acts.append(h)
        return h @ self.W[-1] + self.b[-1], acts

    def flat(self) -> np.ndarray:
        return np.concatenate([w.ravel() for w in self.W] + [v.ravel() for v in self.b])

    @classmethod
    def from_flat(cls, flat: np.ndarray, sizes: tuple) -> "QNetwork":
        W, b, pos = [], [], 0
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            W.append(flat[pos : pos + fan_in * fan_out].reshape(fan_in, fan_out).copy())
            pos += fan_in * fan_out
        for fan_out in sizes[1:]:
            b.append(flat[pos : pos + fan_out].copy())
            pos += fan_out
        return cls(W, b)


def q_forward(net: QNetwork, s) -> np.ndarray:
    """Q-values of one state, shape (3,)."""
    out, _ = net.forward(np.asarray(s, dtype=np.float64))
    return out[0]


def td_loss_and_grads(
    net: QNetwork,
    target: QNetwork,
    batch: list,
    gamma: float,
    grad_clip: Optional[float] = None,
):
    """Mean squared TD error and its gradients w.r.t. the online network.

    Targets bootstrap through the (detached) target network, except on
    terminal transitions where y = r.  When grad_clip is given, gradients
    are rescaled to a global L2 norm of at most grad_clip.

    Returns (loss, weight gradients, bias gradients).
    """
    if not batch:
        raise ValueError("batch must be non-empty")
    S = np.stack([t.s for t in batch])
    A = np.array([t.a for t in batch])
    R = np.array([t.r for t in batch])
    S2 = np.stack([t.s_next for t in batch])
    term = np.array([t.terminal for t in batch])

    q_next, _ = target.forward(S2)
    y = R + gamma * q_next.max(axis=1) * (~term)
    q, acts = net.forward(S)
    rows = np.arange(len(batch))
    diff = q[rows, A] - y
    loss = float(np.mean(diff**2))

    g_out = np.zeros_like(q)
    g_out[rows, A] = 2.0 * diff / len(batch)
    gW = [None] * len(net.W)
    gb = [None] * len(net.b)
    g = g_out
    for i in reversed(range(len(net.W))):
        gW[i] = acts[i].T @ g
        gb[i] = g.sum(axis=0)
        if i > 0:
            g = (g @ net.W[i].T) * (acts[i] > 0)

    if grad_clip is not None:
        norm = math.sqrt(
            sum(float(np.sum(g**2)) for g in gW) + sum(float(np.sum(g**2)) for g in gb)
        )
        if norm > grad_clip:
            scale = grad_clip / norm
            gW = [g * scale for g in gW]
            gb = [g * scale for g in gb]
    return loss, gW, gb


@dataclass
class AdamState:
    """First/second moment accumulators and the step counter."""

    mW: list
    vW: list
    mb: list
    vb: list
    t: int = 0

    @classmethod
    def for_network(cls, net: QNetwork) -> "AdamState":
        return cls(
            [np.zeros_like(w) for w in net.W],
            [np.zeros_like(w) for w in net.W],
            [np.zeros_like(v) for v in net.b],
            [np.zeros_like(v) for v in net.b],
        )


def adam_step(
    state: AdamState,
    net: QNetwork,
    gW: list,
    gb: list,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> QNetwork:
    """One bias-corrected Adam update, applied in place to the network."""
    state.t += 1
    c1 = 1.0 - beta1**state.t
    c2 = 1.0 - beta2**state.t
    for k in range(len(net.W)):
        state.mW[k] = beta1 * state.mW[k] + (1.0 - beta1) * gW[k]
        state.vW[k] = beta2 * state.vW[k] + (1.0 - beta2) * gW[k] ** 2
        net.W[k] -= lr * (state.mW[k] / c1) / (np.sqrt(state.vW[k] / c2) + eps)
        state.mb[k] = beta1 * state.mb[k] + (1.0 - beta1) * gb[k]
        state.vb[k] = beta2 * state.vb[k] + (1.0 - beta2) * gb[k] ** 2
        net.b[k] -= lr * (state.mb[k] / c1) / (np.sqrt(state.vb[k] / c2) + eps)
    return net


# ---------------------------------------------------------------------------
# exploration and replay


def epsilon_at(step: int, cfg: TrainConfig) -> float:
    """Exploration rate after `step` global timesteps."""
    return max(cfg.eps_end, cfg.eps_start - cfg.eps_decay * step)


def epsilon_greedy(q: np.ndarray, eps: float, rng: np.random.Generator) -> FilterAction:
    """Random action with probability eps, else argmax (ties to lowest)."""
    if not 0.0 <= eps <= 1.0:
        raise ValueError("eps must lie in [0, 1]")
    if rng.random() < eps:
        return ACTIONS[int(rng.integers(len(ACTIONS)))]
    return ACTIONS[int(np.argmax(q))]


class ReplayBuffer:
    """Fixed-capacity ring of transitions with uniform batch sampling."""

    def __init__(self, capacity: int = 10000):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._items = []
        self._cursor = 0

    def __len__(self) -> int:
        return len(self._items)

    def push(self, t: Transition) -> None:
        if len(self._items) < self.capacity:
            self._items.append(t)
        else:
            self._items[self._cursor] = t
        self._cursor = (self._cursor + 1) % self.capacity

    def sample(self, batch_size: int, rng: np.random.Generator) -> list:
        """Uniform sample without replacement (whole buffer if smaller)."""
        n = min(batch_size, len(self._items))
        idx = rng.choice(len(self._items), size=n, replace=False)
        return [self._items[i] for i in idx]


# ---------------------------------------------------------------------------
# environment cache, training, inference


class _CachedEnv:
    """Pre-computed features and rewards of one dataset.

    Both are deterministic functions of (segment, action) for a frozen
    registry, so the training loop never touches the DSP or the
    classifiers after this cache is built.
    """

    def __init__(self, dataset: NoisyDataset, registry: Optional[ModelRegistry] = None):
        ref = default_reference()
        segments = segment_signal(dataset.noisy)
        self.n_steps = len(segments)
        self.states = np.stack(
            [extract_features(seg, ref).as_array() for seg in segments]
        )
        if registry is not None:
            level = dataset.config.target_snr_db
            codes = {a: SelectCode.from_parts(level, a) for a in ACTIONS}
            self.rewards = np.empty((self.n_steps, len(ACTIONS)))
            for i, seg in enumerate(segments):
                for j, action in enumerate(ACTIONS):
                    affected = affected_features(seg, action, ref)
                    model = registry.get(codes[action])
                    self.rewards[i, j] = 2.0 if model.predict(affected) == "clean" else 0.0


def train(
    env: NoisyDataset, registry: ModelRegistry, cfg: TrainConfig
) -> tuple:
    """Train one agent on ND1 at its configured level.

    Returns (checkpoint, history) where history rows are
    (episode, return, mean TD loss, eps after the episode).
    """
    level = env.config.target_snr_db
    if not registry.has_level(level):
        raise ValueError(f"registry lacks models for level {level} dB")
    cache = _CachedEnv(env, registry)
    if cache.n_steps != cfg.max_steps:
        raise ValueError(
            f"environment has {cache.n_steps} segments, config expects {cfg.max_steps}"
        )
    if cfg.normalize_obs:
        obs_mu = cache.states.mean(axis=0)
        obs_sd = cache.states.std(axis=0) + 1e-8
    else:
        obs_mu = np.zeros(cache.states.shape[1])
        obs_sd = np.ones(cache.states.shape[1])
    states = (cache.states - obs_mu) / obs_sd

    rng = np.random.default_rng(cfg.seed)
    net = QNetwork.initialize(cfg.sizes, rng)
    target = net.copy()
    adam = AdamState.for_network(net)
    buffer = ReplayBuffer(cfg.buffer_capacity)

    history = []
    step = 0
    for episode in range(cfg.episodes):
        ep_return = 0.0
        ep_losses = []
        for i in range(cfg.max_steps):
            s = states[i]
            eps = epsilon_at(step, cfg)
            action = epsilon_greedy(q_forward(net, s), eps, rng)
            a_idx = ACTIONS.index(action)
            r = float(cache.rewards[i, a_idx])
            ep_return += r
            terminal = i == cfg.max_steps - 1
            s_next = s if terminal else states[i + 1]
            buffer.push(Transition(s, a_idx, r, s_next, terminal))

            batch = buffer.sample(cfg.batch, rng)
            loss, gW, gb = td_loss_and_grads(net, target, batch, cfg.gamma, cfg.grad_clip)
            adam_step(adam, net, gW, gb, cfg.lr, cfg.adam_beta1)
            ep_losses.append(loss)

            step += 1
            if step % cfg.target_sync == 0:
                target = net.copy()
        mean_loss = float(np.mean(ep_losses))
        if not math.isfinite(mean_loss):
            raise NumericError(f"training diverged at episode {episode} (non-finite loss)")
        history.append((episode, ep_return, mean_loss, epsilon_at(step, cfg)))

    if not all(np.all(np.isfinite(w)) for w in net.W + net.b):
        raise NumericError("trained network holds non-finite parameters")
    checkpoint = AgentCheckpoint(
        weights=net.W,
        biases=net.b,
        target_weights=target.W,
        target_biases=target.b,
        adam_mW=adam.mW,
        adam_vW=adam.vW,
        adam_mb=adam.mb,
        adam_vb=adam.vb,
        adam_t=adam.t,
        global_step=step,
        episodes_done=cfg.episodes,
        config=cfg,
        level_db=level,
        obs_mu=obs_mu,
        obs_sd=obs_sd,
    )
    return checkpoint, history


def save_history(path, history: list) -> None:
    """Training log CSV: episode, return, mean loss, eps."""
    with open(path, "w") as fh:
        fh.write("episode,return,mean_loss,eps\n")
        for episode, ep_return, mean_loss, eps in history:
            fh.write(f"{episode},{ep_return:.10g},{mean_loss:.10g},{eps:.10g}\n")


@dataclass
class AgentCheckpoint:
    """Everything needed to resume or freeze an agent, bit-exactly."""

    weights: list
    biases: list
    target_weights: list
    target_biases: list
    adam_mW: list
    adam_vW: list
    adam_mb: list
    adam_vb: list
    adam_t: int
    global_step: int
    episodes_done: int
    config: TrainConfig
    level_db: float
    obs_mu: np.ndarray
    obs_sd: np.ndarray

    def network(self) -> QNetwork:
        return QNetwork([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def _blobs(self) -> list:
        out = []
        for group in (
            self.weights, self.biases, self.target_weights, self.target_biases,
            self.adam_mW, self.adam_vW, self.adam_mb, self.adam_vb,
        ):
            out.extend(group)
        out.append(self.obs_mu)
        out.append(self.obs_sd)
        return out

    def save(self, path) -> None:
        """JSON header (config, counters, shapes) + little-endian f64 blob."""
        header = {
            "config": {**asdict(self.config), "hidden": list(self.config.hidden)},
            "level_db": self.level_db,
            "adam_t": self.adam_t,
            "global_step": self.global_step,
            "episodes_done": self.episodes_done,
            "shapes": [list(a.shape) for a in self._blobs()],
        }
        payload = json.dumps(header, sort_keys=True).encode()
        blob = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in self._blobs())
        with open(path, "wb") as fh:
            fh.write(struct.pack("<I", len(payload)))
            fh.write(payload)
            fh.write(blob)

    @classmethod
    def load(cls, path) -> "AgentCheckpoint":
        with open(path, "rb") as fh:
            (hlen,) = struct.unpack("<I", fh.read(4))
            header = json.loads(fh.read(hlen).decode())
            raw = fh.read()
        cfg_doc = dict(header["config"])
        cfg_doc["hidden"] = tuple(cfg_doc["hidden"])
        cfg = TrainConfig(**cfg_doc)
        arrays = []
        pos = 0
        for shape in header["shapes"]:
            count = int(np.prod(shape)) if shape else 1
            arr = np.frombuffer(raw, dtype="<f8", count=count, offset=pos).reshape(shape).copy()
            arrays.append(arr)
            pos += 8 * count
        n_layers = len(cfg.sizes) - 1
        groups = [arrays[i * n_layers : (i + 1) * n_layers] for i in range(8)]
        obs_mu, obs_sd = arrays[8 * n_layers], arrays[8 * n_layers + 1]
        return cls(
            groups[0], groups[1], groups[2], groups[3],
            groups[4], groups[5], groups[6], groups[7],
            adam_t=header["adam_t"],
            global_step=header["global_step"],
            episodes_done=header["episodes_done"],
            config=cfg,
            level_db=header["level_db"],
            obs_mu=obs_mu,
            obs_sd=obs_sd,
        )


def act(checkpoint: AgentCheckpoint, dataset: NoisyDataset) -> tuple:
    """Greedy per-segment filtering with a frozen agent.

    Returns (actions, filtered signal); each segment is filtered from zero
    state by its chosen filter, so repeated calls are identical.
    """
    net = checkpoint.network()
    ref = default_reference()
    segments = segment_signal(dataset.noisy)
    actions = []
    parts = []
    for seg in segments:
        s = (extract_features(seg, ref).as_array() - checkpoint.obs_mu) / checkpoint.obs_sd
        action = ACTIONS[int(np.argmax(q_forward(net, s)))]
        actions.append(action)
        filtered, _ = apply_filter(get_filter(action), seg)
        parts.append(filtered.samples)
    return actions, SampledSignal(np.concatenate(parts), dataset.noisy.rate)
