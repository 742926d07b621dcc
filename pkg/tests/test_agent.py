"""Q-network gradients, Adam, exploration, replay, training, checkpoints."""

import numpy as np
import pytest

from emgdecon.agent import (
    ACTIONS,
    AdamState,
    AgentCheckpoint,
    QNetwork,
    ReplayBuffer,
    TrainConfig,
    Transition,
    act,
    adam_step,
    epsilon_at,
    epsilon_greedy,
    q_forward,
    save_history,
    td_loss_and_grads,
    train,
)
from emgdecon.filters import FilterAction


def _zero_net(out_bias=(0.0, 0.0, 0.0)):
    net = QNetwork.initialize((6, 4, 3), np.random.default_rng(0))
    for w in net.W:
        w[:] = 0.0
    for b in net.b:
        b[:] = 0.0
    net.b[-1][:] = out_bias
    return net


def _random_batch(rng, n=5):
    batch = []
    for _ in range(n):
        batch.append(
            Transition(
                rng.standard_normal(6),
                int(rng.integers(3)),
                float(rng.normal()),
                rng.standard_normal(6),
                bool(rng.integers(2)),
            )
        )
    return batch


# ---------------------------------------------------------------------------
# config and network


def test_train_config_defaults():
    cfg = TrainConfig()
    assert (cfg.episodes, cfg.max_steps, cfg.lr) == (2000, 64, 0.001)
    assert (cfg.eps_start, cfg.eps_end, cfg.eps_decay) == (0.6, 0.05, 0.003)
    assert (cfg.adam_beta1, cfg.grad_clip, cfg.gamma) == (0.9, 1.0, 0.95)
    assert (cfg.batch, cfg.target_sync, cfg.buffer_capacity) == (32, 64, 10000)
    assert cfg.sizes == (6, 32, 32, 3)
    assert TrainConfig(hidden=[8, 8]).hidden == (8, 8)


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(gamma=0.0)
    with pytest.raises(ValueError):
        TrainConfig(gamma=1.0)
    with pytest.raises(ValueError):
        TrainConfig(eps_start=0.1, eps_end=0.2)


def test_network_init_and_flat_roundtrip():
    rng = np.random.default_rng(1)
    net = QNetwork.initialize((6, 32, 32, 3), rng)
    assert [w.shape for w in net.W] == [(6, 32), (32, 32), (32, 3)]
    assert all(np.all(b == 0.0) for b in net.b)
    assert net.sizes == (6, 32, 32, 3)
    again = QNetwork.initialize((6, 32, 32, 3), np.random.default_rng(1))
    assert all(np.array_equal(a, b) for a, b in zip(net.W, again.W))
    back = QNetwork.from_flat(net.flat(), net.sizes)
    assert all(np.array_equal(a, b) for a, b in zip(net.W, back.W))
    assert all(np.array_equal(a, b) for a, b in zip(net.b, back.b))


def test_zero_weights_output_is_bias():
    net = _zero_net(out_bias=(1.0, 2.0, 3.0))
    out, _ = net.forward(np.random.default_rng(2).standard_normal((4, 6)))
    assert np.allclose(out, [1.0, 2.0, 3.0])
    assert q_forward(net, np.ones(6)).shape == (3,)


# ---------------------------------------------------------------------------
# TD loss and gradients


def test_td_loss_empty_batch():
    net = _zero_net()
    with pytest.raises(ValueError):
        td_loss_and_grads(net, net.copy(), [], gamma=0.9)


def test_td_loss_zero_when_targets_matched():
    net = _zero_net(out_bias=(1.0, 0.0, 0.0))
    batch = [Transition(np.ones(6), 0, 1.0, np.ones(6), True)]
    loss, gW, gb = td_loss_and_grads(net, net.copy(), batch, gamma=0.95)
    assert loss == 0.0
    assert all(np.all(g == 0.0) for g in gW + gb)


def test_td_target_bootstraps_through_target_net():
    net = _zero_net(out_bias=(0.0, 0.0, 0.0))
    target = _zero_net(out_bias=(1.0, 0.0, 0.0))
    nonterm = [Transition(np.ones(6), 1, 0.0, np.ones(6), False)]
    loss, _, _ = td_loss_and_grads(net, target, nonterm, gamma=0.5)
    assert loss == pytest.approx(0.25)  # y = 0 + 0.5 * max(target) = 0.5
    term = [Transition(np.ones(6), 1, 0.0, np.ones(6), True)]
    loss, _, _ = td_loss_and_grads(net, target, term, gamma=0.5)
    assert loss == 0.0  # terminal: y = r


def test_gradients_match_finite_differences():
    rng = np.random.default_rng(3)
    sizes = (6, 5, 3)
    net = QNetwork.initialize(sizes, rng)
    target = QNetwork.initialize(sizes, rng)
    batch = _random_batch(rng)
    loss0, gW, gb = td_loss_and_grads(net, target, batch, gamma=0.9, grad_clip=None)
    analytic = np.concatenate([g.ravel() for g in gW] + [g.ravel() for g in gb])
    flat = net.flat()
    h = 1e-5
    for j in rng.choice(flat.size, size=25, replace=False):
        for sign, store in ((+1, "hi"), (-1, "lo")):
            probe = flat.copy()
            probe[j] += sign * h
            loss = td_loss_and_grads(
                QNetwork.from_flat(probe, sizes), target, batch, gamma=0.9, grad_clip=None
            )[0]
            if store == "hi":
                hi = loss
            else:
                lo = loss
        fd = (hi - lo) / (2 * h)
        denom = max(1e-8, abs(analytic[j]) + abs(fd))
        assert abs(analytic[j] - fd) / denom <= 1e-4


def test_grad_clip_rescales_to_unit_norm():
    rng = np.random.default_rng(4)
    net = QNetwork.initialize((6, 5, 3), rng)
    batch = [Transition(rng.standard_normal(6), 0, 100.0, rng.standard_normal(6), True)]
    _, gW_raw, gb_raw = td_loss_and_grads(net, net.copy(), batch, gamma=0.9, grad_clip=None)
    raw_norm = np.sqrt(sum(np.sum(g**2) for g in gW_raw + gb_raw))
    assert raw_norm > 1.0
    _, gW, gb = td_loss_and_grads(net, net.copy(), batch, gamma=0.9, grad_clip=1.0)
    norm = np.sqrt(sum(np.sum(g**2) for g in gW + gb))
    assert norm == pytest.approx(1.0, rel=1e-12)
    assert np.allclose(gW[0], gW_raw[0] / raw_norm)


# ---------------------------------------------------------------------------
# Adam


def test_adam_zero_gradient_is_identity():
    net = QNetwork.initialize((6, 5, 3), np.random.default_rng(5))
    before = net.flat()
    state = AdamState.for_network(net)
    zeros_w = [np.zeros_like(w) for w in net.W]
    zeros_b = [np.zeros_like(b) for b in net.b]
    adam_step(state, net, zeros_w, zeros_b, lr=0.01)
    assert np.array_equal(net.flat(), before)
    assert state.t == 1


def test_adam_first_step_is_normalized_gradient():
    net = _zero_net()
    state = AdamState.for_network(net)
    g = np.full_like(net.W[0], 0.5)
    gW = [g] + [np.zeros_like(w) for w in net.W[1:]]
    gb = [np.zeros_like(b) for b in net.b]
    adam_step(state, net, gW, gb, lr=0.001)
    expected = -0.001 * 0.5 / (0.5 + 1e-8)
    assert np.allclose(net.W[0], expected, rtol=1e-12)
    assert np.all(net.W[1] == 0.0)


def test_adam_determinism():
    rng = np.random.default_rng(6)
    nets = []
    for _ in range(2):
        net = QNetwork.initialize((6, 5, 3), np.random.default_rng(7))
        state = AdamState.for_network(net)
        g_rng = np.random.default_rng(8)
        for _ in range(10):
            gW = [g_rng.standard_normal(w.shape) for w in net.W]
            gb = [g_rng.standard_normal(b.shape) for b in net.b]
            adam_step(state, net, gW, gb, lr=0.01)
        nets.append(net.flat())
    assert np.array_equal(nets[0], nets[1])


# ---------------------------------------------------------------------------
# exploration and replay


def test_epsilon_schedule():
    cfg = TrainConfig()
    assert epsilon_at(0, cfg) == 0.6
    assert epsilon_at(100, cfg) == pytest.approx(0.3)
    assert epsilon_at(1000, cfg) == 0.05
    assert epsilon_at(10**6, cfg) == 0.05


def test_epsilon_greedy_greedy_path():
    rng = np.random.default_rng(9)
    assert epsilon_greedy(np.array([0.1, 2.0, 0.5]), 0.0, rng) == FilterAction.NF
    # ties resolve to the lowest-indexed action
    assert epsilon_greedy(np.array([1.0, 1.0, 0.0]), 0.0, rng) == FilterAction.HPF
    with pytest.raises(ValueError):
        epsilon_greedy(np.zeros(3), 1.5, rng)


def test_epsilon_greedy_uniform_when_exploring():
    rng = np.random.default_rng(10)
    q = np.array([0.0, 5.0, 0.0])
    draws = [epsilon_greedy(q, 1.0, rng) for _ in range(30000)]
    for action in ACTIONS:
        frac = draws.count(action) / len(draws)
        assert abs(frac - 1 / 3) < 0.015


def test_replay_buffer_ring_and_sampling():
    with pytest.raises(ValueError):
        ReplayBuffer(0)
    buf = ReplayBuffer(3)
    ts = [Transition(np.full(6, i), 0, float(i), np.zeros(6), False) for i in range(5)]
    for t in ts:
        buf.push(t)
    assert len(buf) == 3
    kept = {int(t.r) for t in buf._items}
    assert kept == {2, 3, 4}
    big = ReplayBuffer(100)
    for t in (Transition(np.full(6, i), 0, float(i), np.zeros(6), False) for i in range(10)):
        big.push(t)
    sample = big.sample(10, np.random.default_rng(0))
    assert sorted(int(t.r) for t in sample) == list(range(10))
    assert len(big.sample(50, np.random.default_rng(0))) == 10


# ---------------------------------------------------------------------------
# training loop


def test_train_validates_registry_and_length(nd_train, mini_registry):
    from emgdecon.reward import ModelRegistry

    with pytest.raises(ValueError):
        train(nd_train, ModelRegistry(), TrainConfig(episodes=1))
    with pytest.raises(ValueError):
        train(nd_train, mini_registry, TrainConfig(episodes=1, max_steps=32))


def test_train_smoke(nd_train, mini_registry):
    cfg = TrainConfig(episodes=40, seed=2)
    ckpt, history = train(nd_train, mini_registry, cfg)
    assert len(history) == 40
    episodes, returns, losses, epses = zip(*history)
    assert list(episodes) == list(range(40))
    assert all(0.0 <= r <= 2.0 * 64 for r in returns)
    assert all(np.isfinite(l) for l in losses)
    assert all(b <= a for a, b in zip(epses, epses[1:]))  # schedule never rises
    assert ckpt.global_step == 40 * 64
    assert ckpt.adam_t == 40 * 64
    assert ckpt.level_db == -1.0
    assert ckpt.episodes_done == 40
    # later policy earns more than the early exploratory one
    assert np.mean(returns[-10:]) > np.mean(returns[:10])


def test_train_determinism(nd_train, mini_registry):
    cfg = TrainConfig(episodes=5, seed=3)
    a, hist_a = train(nd_train, mini_registry, cfg)
    b, hist_b = train(nd_train, mini_registry, cfg)
    assert hist_a == hist_b
    assert all(np.array_equal(x, y) for x, y in zip(a.weights, b.weights))


# ---------------------------------------------------------------------------
# checkpoints and inference


def test_checkpoint_roundtrip_bit_exact(mini_checkpoint, nd_test, tmp_path):
    path = tmp_path / "agent.ckpt"
    mini_checkpoint.save(path)
    loaded = AgentCheckpoint.load(path)
    for name in ("weights", "biases", "target_weights", "target_biases",
                 "adam_mW", "adam_vW", "adam_mb", "adam_vb"):
        for a, b in zip(getattr(mini_checkpoint, name), getattr(loaded, name)):
            assert np.array_equal(a, b)
    assert np.array_equal(loaded.obs_mu, mini_checkpoint.obs_mu)
    assert np.array_equal(loaded.obs_sd, mini_checkpoint.obs_sd)
    assert loaded.config == mini_checkpoint.config
    assert loaded.adam_t == mini_checkpoint.adam_t
    a_actions, a_signal = act(mini_checkpoint, nd_test)
    b_actions, b_signal = act(loaded, nd_test)
    assert a_actions == b_actions
    assert np.array_equal(a_signal.samples, b_signal.samples)


def test_act_outputs(mini_checkpoint, nd_test):
    actions, filtered = act(mini_checkpoint, nd_test)
    assert len(actions) == 64
    assert all(isinstance(a, FilterAction) for a in actions)
    assert filtered.samples.shape == nd_test.noisy.samples.shape
    again, _ = act(mini_checkpoint, nd_test)
    assert actions == again


def test_policy_matches_noise_kind(mini_checkpoint, pli_dataset):
    actions, _ = act(mini_checkpoint, pli_dataset)
    nf_fraction = sum(a == FilterAction.NF for a in actions) / len(actions)
    assert nf_fraction >= 0.8


def test_save_history_format(tmp_path):
    path = tmp_path / "history.csv"
    save_history(path, [(0, 100.0, 0.512345, 0.6), (1, 104.0, 0.25, 0.408)])
    lines = path.read_text().splitlines()
    assert lines[0] == "episode,return,mean_loss,eps"
    assert lines[1] == "0,100,0.512345,0.6"
    assert len(lines) == 3
