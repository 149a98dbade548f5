import numpy as np
import pytest

from nasforge.archspace import sample_uniform, validate
from nasforge.oracle import OracleConfig, generate_corpus
from nasforge.qlearn import (
    STATE_DIM,
    AgentConfig,
    QLearner,
    QNetwork,
    ReplayBuffer,
    Transition,
    act,
    greedy_episode,
    load_checkpoint,
    replay_insert,
    replay_sample,
    rl_candidates,
    run_rl_search,
    save_checkpoint,
    td_loss_and_grads,
    td_targets,
    train_agent,
    worker_epsilon,
)
from nasforge.reward import RewardConfig
from nasforge.archspace import DEFAULT_LIMITS
from nasforge.surrogate import fit

SMALL_CFG = AgentConfig(
    total_train_steps=400,
    min_replay=64,
    batch_size=32,
    learner_every=4,
    replay_capacity=2_000,
    target_sync_every_samples=256,
    hidden=(16, 16),
)


@pytest.fixture(scope="module")
def model():
    corpus = generate_corpus(OracleConfig(master_seed=0, noise_sigma=0.05, n_records=600))
    return fit("ridge", corpus, seed=0)


@pytest.fixture(scope="module")
def reward_cfg():
    return RewardConfig()


def probe_net(feature_index, dtype=np.float64):
    """Network whose advantage equals one candidate feature (encodings are
    non-negative, so the hidden relu is transparent); value head is zero."""
    net = QNetwork(hidden=(4,), seed=0, dtype=dtype)
    for p in net.params:
        p[...] = 0.0
    net.adv.params[0][STATE_DIM + feature_index, 0] = 1.0
    net.adv.params[2][0, 0] = 1.0
    return net


def qnet_flat(net):
    return np.concatenate([net.adv.get_flat(), net.val.get_flat()])


def qnet_set_flat(net, flat):
    n_adv = net.adv.get_flat().size
    net.adv.set_flat(flat[:n_adv])
    net.val.set_flat(flat[n_adv:])


class TestWorkerEpsilon:
    def test_single_worker_uses_base_rate(self):
        assert worker_epsilon(0, 1) == pytest.approx(0.4)

    def test_first_of_four(self):
        assert worker_epsilon(0, 4) == pytest.approx(0.4)

    def test_last_of_four(self):
        assert worker_epsilon(3, 4) == pytest.approx(0.4**8)

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            worker_epsilon(4, 4)


class TestAct:
    def test_full_exploration_is_uniform(self):
        from scipy import stats

        rng = np.random.default_rng(0)
        net = probe_net(95)
        cands = np.zeros((5, STATE_DIM))
        counts = np.zeros(5)
        for _ in range(10_000):
            counts[act(net, np.zeros(STATE_DIM), cands, 1.0, rng)] += 1
        assert stats.chisquare(counts).pvalue > 0.01

    def test_greedy_picks_hand_set_maximum(self):
        net = probe_net(95)
        cands = np.zeros((6, STATE_DIM))
        cands[:, 95] = [1, 4, 2, 9, 3, 0]
        idx = act(net, np.zeros(STATE_DIM), cands, 0.0, np.random.default_rng(0))
        assert idx == 3

    def test_masked_candidates_never_selected(self):
        rng = np.random.default_rng(1)
        net = probe_net(95)
        cands = np.zeros((8, STATE_DIM))
        cands[:, 95] = np.arange(8)
        mask = np.array([True, False, True, False, True, False, True, False])
        for epsilon in (0.0, 0.5, 1.0):
            for _ in range(3_000):
                idx = act(net, np.zeros(STATE_DIM), cands, epsilon, rng, mask=mask)
                assert mask[idx]


class TestDuelingIdentity:
    def test_masked_advantages_centre_to_zero(self):
        rng = np.random.default_rng(2)
        net = QNetwork(hidden=(32, 32), seed=3, dtype=np.float64)
        for _ in range(50):
            state = rng.normal(size=STATE_DIM)
            cands = rng.normal(size=(17, STATE_DIM))
            mask = rng.random(17) < 0.7
            mask[0] = True
            q = net.q_values(state, cands, mask)
            value = net.val.forward(state[None, :])[0, 0]
            assert abs(np.mean(q[mask] - value)) < 1e-10
            assert np.all(q[~mask] == -np.inf)


class TestReplayBuffer:
    def test_proportional_sampling_ratio(self):
        buf = ReplayBuffer(capacity=4, alpha=1.0)
        t1 = Transition(None, (), 0, 0.0, None, True)
        t2 = Transition(None, (), 0, 0.0, None, True)
        replay_insert(buf, t1, priority=1.0)
        replay_insert(buf, t2, priority=3.0)
        batch, idx, _ = replay_sample(buf, 100_000, beta=0.4, rng=np.random.default_rng(4))
        frac = np.mean(np.asarray(idx) == 1)
        assert abs(frac - 0.75) < 0.75 * 0.05

    def test_alpha_zero_ignores_priorities(self):
        buf = ReplayBuffer(capacity=8, alpha=0.0)
        for k in range(4):
            buf.insert(Transition(None, (), 0, 0.0, None, True), priority=10.0**k)
        _, idx, _ = buf.sample(80_000, beta=0.4, rng=np.random.default_rng(5))
        counts = np.bincount(idx, minlength=4) / 80_000
        assert np.all(np.abs(counts - 0.25) < 0.01)

    def test_ring_eviction(self):
        buf = ReplayBuffer(capacity=4, alpha=0.6)
        items = [Transition(None, (), 0, float(k), None, True) for k in range(5)]
        for t in items:
            buf.insert(t)
        assert len(buf) == 4
        assert items[0] not in buf.slots
        assert all(items[k] in buf.slots for k in range(1, 5))

    def test_sampling_distribution_total_variation(self):
        rng = np.random.default_rng(6)
        buf = ReplayBuffer(capacity=64, alpha=0.6)
        priorities = rng.uniform(0.1, 5.0, size=40)
        for p in priorities:
            buf.insert(Transition(None, (), 0, 0.0, None, True), priority=float(p))
        _, idx, _ = buf.sample(100_000, beta=0.4, rng=rng)
        counts = np.bincount(idx, minlength=40) / 100_000
        expected = priorities**0.6 / np.sum(priorities**0.6)
        assert 0.5 * np.sum(np.abs(counts - expected)) < 0.02

    def test_importance_weights_formula(self):
        buf = ReplayBuffer(capacity=4, alpha=1.0)
        buf.insert(Transition(None, (), 0, 0.0, None, True), priority=1.0)
        buf.insert(Transition(None, (), 0, 0.0, None, True), priority=3.0)
        _, idx, weights = buf.sample(1_000, beta=0.4, rng=np.random.default_rng(7))
        probs = np.where(np.asarray(idx) == 1, 0.75, 0.25)
        expected = (2 * probs) ** -0.4
        assert np.allclose(weights, expected / expected.max())

    def test_priority_update_changes_sampling(self):
        buf = ReplayBuffer(capacity=4, alpha=1.0)
        buf.insert(Transition(None, (), 0, 0.0, None, True), priority=1.0)
        buf.insert(Transition(None, (), 0, 0.0, None, True), priority=1.0)
        buf.update_priorities([0], [99.0])
        _, idx, _ = buf.sample(20_000, beta=0.4, rng=np.random.default_rng(8))
        assert np.mean(np.asarray(idx) == 0) > 0.95
        assert buf.slots[0].priority == pytest.approx(99.0 + 1e-6)


def make_transitions(n, limits=DEFAULT_LIMITS, terminal_every=3, cap=8):
    rng = np.random.default_rng(9)
    out = []
    for k in range(n):
        state = sample_uniform(rng, limits)
        cands = rl_candidates(state, limits, cap)
        chosen = int(rng.integers(0, len(cands)))
        terminal = k % terminal_every == 0
        next_cands = None if terminal else rl_candidates(cands[chosen], limits, cap)
        out.append(
            Transition(state, cands, chosen, float(rng.uniform(0, 1)) if terminal else 0.0,
                       next_cands, terminal)
        )
    return out


class TestTdTargets:
    def test_terminal_targets_are_rewards(self):
        batch = [t for t in make_transitions(9) if t.terminal]
        online = QNetwork(seed=1, dtype=np.float64)
        target = QNetwork(seed=2, dtype=np.float64)
        got = td_targets(batch, online, target, gamma=0.9)
        assert np.allclose(got, [t.reward for t in batch])

    def test_gamma_zero_reduces_to_rewards(self):
        batch = make_transitions(8)
        online = QNetwork(seed=3, dtype=np.float64)
        target = QNetwork(seed=4, dtype=np.float64)
        assert np.allclose(td_targets(batch, online, target, 0.0),
                           [t.reward for t in batch])

    def test_double_q_uses_target_value_at_online_argmax(self):
        # online ranks candidates by edge count, target by vertex count, so
        # their argmaxes disagree and the double-Q rule is observable
        online = probe_net(95)
        target = probe_net(94)
        from nasforge.archspace import Architecture, all_pairs, encode_features

        # candidate A has more edges, candidate B more vertices, so the two
        # probes rank them oppositely
        a = Architecture(4, tuple(all_pairs(4)), ("linear", "conv-3"))
        b = Architecture(5, ((0, 1), (1, 2), (2, 3), (3, 4)),
                         ("linear", "linear", "linear"))
        start = sample_uniform(0)
        t = Transition(
            state=start,
            candidates=(start, a, b),
            chosen_index=1,
            reward=0.25,
            next_candidates=(a, b),
            terminal=False,
        )
        s_next = t.candidates[t.chosen_index]
        state_vec = encode_features(s_next)
        cand_vecs = np.stack([encode_features(c) for c in t.next_candidates])
        q_online = online.q_values(state_vec, cand_vecs)
        q_target = target.q_values(state_vec, cand_vecs)
        assert int(np.argmax(q_online)) != int(np.argmax(q_target))
        expected = t.reward + 0.9 * q_target[int(np.argmax(q_online))]
        got = td_targets([t], online, target, gamma=0.9)[0]
        assert got == pytest.approx(float(expected), abs=1e-10)
        assert got != pytest.approx(t.reward + 0.9 * float(q_target.max()), abs=1e-6)


class TestTrainStep:
    def test_gradients_match_finite_differences(self):
        # the fixed seed keeps every pre-activation well clear of its relu
        # kink at the finite-difference step size
        batch = make_transitions(5, cap=5)
        learner = QLearner(
            AgentConfig(hidden=(6,), batch_size=5), seed=14, dtype=np.float64
        )
        weights = np.array([1.0, 0.7, 1.3, 0.5, 1.1])
        targets = td_targets(batch, learner.online, learner.target, 0.9)
        loss, grads, _ = td_loss_and_grads(learner.online, batch, weights, targets)
        analytic = np.concatenate([g.ravel() for g in grads])

        def loss_at(flat):
            clone = learner.online.copy()
            qnet_set_flat(clone, flat)
            return td_loss_and_grads(clone, batch, weights, targets)[0]

        flat = qnet_flat(learner.online)
        h = 1e-4
        numeric = np.zeros_like(flat)
        for k in range(flat.size):
            up, down = flat.copy(), flat.copy()
            up[k] += h
            down[k] -= h
            numeric[k] = (loss_at(up) - loss_at(down)) / (2 * h)
        denom = np.maximum(np.abs(numeric), 1e-8)
        assert np.max(np.abs(analytic - numeric) / denom) < 1e-3

    def test_zero_learning_rate_freezes_parameters(self):
        batch = make_transitions(4, cap=4)
        learner = QLearner(SMALL_CFG, seed=12)
        before = [p.copy() for p in learner.online.params]
        learner.train_step(batch, np.ones(4), lr=0.0)
        assert all(np.array_equal(a, b) for a, b in zip(before, learner.online.params))

    def test_td_error_shrinks_on_repeated_fixed_transition(self):
        t = next(x for x in make_transitions(3) if x.terminal)
        learner = QLearner(AgentConfig(hidden=(16,)), seed=13, dtype=np.float64)
        errors = []
        for _ in range(300):
            errors.append(learner.train_step([t] * 4, np.ones(4), lr=1e-2).mean())
        assert errors[-1] < 0.05 * errors[0] + 1e-9

    def test_target_sync_counter(self):
        cfg = AgentConfig(hidden=(8,), target_sync_every_samples=8)
        learner = QLearner(cfg, seed=14)
        batch = make_transitions(4, cap=4)
        learner.train_step(batch, np.ones(4), lr=1e-3)
        assert not all(
            np.array_equal(a, b)
            for a, b in zip(learner.online.params, learner.target.params)
        )
        learner.train_step(batch, np.ones(4), lr=1e-3)  # hits 8 samples
        assert all(
            np.array_equal(a, b)
            for a, b in zip(learner.online.params, learner.target.params)
        )


class TestTrainingLoop:
    def test_interleaved_mode_is_deterministic(self, model, reward_cfg):
        a = train_agent(SMALL_CFG, reward_cfg, model, seed=5)
        b = train_agent(SMALL_CFG, reward_cfg, model, seed=5)
        assert all(
            np.array_equal(x, y)
            for x, y in zip(a.learner.online.params, b.learner.online.params)
        )
        assert a.buffer.inserted == b.buffer.inserted
        assert a.learner_steps == b.learner_steps > 0

    def test_buffer_holds_valid_episode_transitions(self, model, reward_cfg):
        agent = train_agent(SMALL_CFG, reward_cfg, model, seed=6)
        seen = [t for t in agent.buffer.slots if t is not None]
        assert seen
        for t in seen[:200]:
            assert validate(t.state).ok
            assert 1 <= len(t.candidates) <= SMALL_CFG.max_neighbours
            assert 0 <= t.chosen_index < len(t.candidates)
            if t.terminal:
                assert 0.0 <= t.reward <= 1.0
                assert t.next_candidates is None
            else:
                assert t.reward == 0.0
                assert t.next_candidates is not None

    def test_threaded_mode_smoke(self, model, reward_cfg):
        agent = train_agent(SMALL_CFG, reward_cfg, model, seed=7, mode="threaded")
        assert agent.env_steps == SMALL_CFG.total_train_steps
        assert len(agent.buffer) > 0

    def test_episode_length_never_exceeds_cap(self, model, reward_cfg):
        # with one worker, buffer insertion order is episode order: runs of
        # non-terminal transitions must stay under the episode cap
        cfg = AgentConfig(
            total_train_steps=300, num_workers=1, train_episode_len=5,
            min_replay=10_000, replay_capacity=2_000,
        )
        agent = train_agent(cfg, reward_cfg, model, seed=3)
        inserted = [t for t in agent.buffer.slots[: agent.buffer.inserted]]
        run_length = 0
        for t in inserted:
            if t.terminal:
                run_length = 0
            else:
                run_length += 1
                assert run_length <= cfg.train_episode_len - 1


class TestEvaluation:
    def test_all_equal_q_terminates_immediately(self):
        agent_cfg = AgentConfig(hidden=(4,))
        learner = QLearner(agent_cfg, seed=15)
        for p in learner.online.params:
            p[...] = 0.0
        from nasforge.qlearn import TrainedAgent

        agent = TrainedAgent(cfg=agent_cfg, learner=learner, buffer=None)
        start = sample_uniform(3)
        assert greedy_episode(agent, start) == start

    def test_greedy_episodes_deterministic(self, model, reward_cfg):
        agent = train_agent(SMALL_CFG, reward_cfg, model, seed=8)
        start = sample_uniform(11)
        assert greedy_episode(agent, start) == greedy_episode(agent, start)

    def test_rl_search_trace_accounting(self, model, reward_cfg):
        agent = train_agent(SMALL_CFG, reward_cfg, model, seed=9)
        trace = run_rl_search(SMALL_CFG, reward_cfg, model, 9, 15, agent=agent)
        assert [e.query_index for e in trace] == list(range(1, 16))
        for e in trace:
            assert validate(e.arch).ok

    def test_checkpoint_round_trip(self, tmp_path, model, reward_cfg):
        agent = train_agent(SMALL_CFG, reward_cfg, model, seed=10)
        path = tmp_path / "agent.json"
        save_checkpoint(agent, path)
        loaded = load_checkpoint(path, SMALL_CFG)
        assert all(
            np.allclose(a, b, atol=0)
            for a, b in zip(agent.learner.online.params, loaded.learner.online.params)
        )
        rng = np.random.default_rng(16)
        state = rng.normal(size=STATE_DIM).astype(np.float32)
        cands = rng.normal(size=(7, STATE_DIM)).astype(np.float32)
        assert np.allclose(
            agent.learner.online.q_values(state, cands),
            loaded.learner.online.q_values(state, cands),
        )

    def test_checkpoint_rejects_foreign_files(self, tmp_path):
        path = tmp_path / "bogus.json"
        path.write_text('{"format": "something-else"}')
        with pytest.raises(ValueError):
            load_checkpoint(path)
