"""Prioritized-replay Q-learning over architecture-edit episodes.

The agent repeatedly looks at a current architecture plus up to 49 one-edit
variants (candidate 0 is always "keep the current one", which terminates
the episode) and learns to pick the candidate with the best long-run
utility.  Training follows the distributed-actor recipe: several
epsilon-greedy actors with per-worker epsilons feed one prioritized replay
buffer, a single learner takes double-Q steps on a dueling scorer with a
periodically synced target network.  Rewards are terminal-only: the
episode's final architecture is scored by the surrogate-backed utility and
every intermediate step earns zero — no shaping.

The scorer is a small feed-forward network over concatenated
(state, candidate) encodings rather than the far larger sequence model the
episode protocol was originally built around; the training algorithm,
replay discipline, and episode semantics are what this module preserves.

A single-threaded interleaved mode (actors and learner round-robin) is the
deterministic reference; a threaded mode exercises the same buffer under
real concurrency.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field, replace

import numpy as np

from .archspace import (
    Architecture,
    DEFAULT_LIMITS,
    SpaceLimits,
    encode_features,
    neighbours,
    sample_uniform,
)
from .nnet import MLP, Adam
from .reward import RewardConfig
from .search import QueryBudget, Scorer, TraceEntry, _as_budget

STATE_DIM = 96

APE_X_BASE_EPSILON = 0.4
APE_X_ALPHA = 7.0
PRIORITY_EPSILON = 1e-6


class NonFiniteGradientError(RuntimeError):
    """A learner step produced a non-finite gradient; training must abort."""


@dataclass(frozen=True)
class AgentConfig:
    gamma: float = 0.9
    learning_rate: float = 5e-5
    replay_capacity: int = 25_000
    priority_alpha: float = 0.6
    is_beta: float = 0.4
    target_sync_every_samples: int = 8_192
    train_episode_len: int = 16
    eval_episode_len: int = 32
    max_neighbours: int = 50
    num_workers: int = 4
    total_train_steps: int = 100_000
    batch_size: int = 128
    learner_every: int = 16  # one replay batch per this many environment steps
    min_replay: int = 1_000
    hidden: tuple[int, ...] = (64, 64)

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must be in (0, 1]")
        if not 0.0 <= self.priority_alpha <= 1.0:
            raise ValueError("priority_alpha must be in [0, 1]")
        if not 0.0 <= self.is_beta <= 1.0:
            raise ValueError("is_beta must be in [0, 1]")
        for name in ("replay_capacity", "batch_size", "num_workers",
                     "train_episode_len", "eval_episode_len", "max_neighbours",
                     "learner_every"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        object.__setattr__(self, "hidden", tuple(self.hidden))


def worker_epsilon(worker_id: int, num_workers: int) -> float:
    """Per-worker exploration rate, epsilon^(1 + i*alpha/(N-1)).

    The exponent degenerates to 1 for a single worker, giving the base rate.
    """
    if not 0 <= worker_id < num_workers:
        raise ValueError("worker_id must be in [0, num_workers)")
    if num_workers == 1:
        exponent = 1.0
    else:
        exponent = 1.0 + worker_id * APE_X_ALPHA / (num_workers - 1)
    return float(APE_X_BASE_EPSILON**exponent)


@dataclass
class Transition:
    """One environment step; terminal steps carry the episode utility."""

    state: Architecture
    candidates: tuple
    chosen_index: int
    reward: float
    next_candidates: tuple | None
    terminal: bool
    priority: float = 1.0
    # encoded candidate matrices, memoized so learner batches skip
    # re-encoding; float16 is exact for these 0/1-and-small-int features
    cand_mat: np.ndarray | None = field(default=None, repr=False, compare=False)
    next_mat: np.ndarray | None = field(default=None, repr=False, compare=False)


_COUNT_COLS = (STATE_DIM - 2, STATE_DIM - 1)
_COUNT_SCALE = (8.0, 28.0)  # vertex and edge counts, brought to unit range


def _scale_counts(mat: np.ndarray) -> np.ndarray:
    """Normalize the two integer count features (in place) in an encoding
    batch; handles both state (96) and state+candidate (192) layouts."""
    for offset in range(0, mat.shape[1], STATE_DIM):
        for col, scale in zip(_COUNT_COLS, _COUNT_SCALE):
            mat[:, offset + col] /= scale
    return mat


class QNetwork:
    """Dueling candidate scorer with explicit gradients.

    The advantage head maps the concatenated (state, candidate) encoding to
    a scalar; the value head maps the state alone.  Q(s, a_i) = V(s) +
    A(s, a_i) - mean over valid candidates of A, so the advantages of every
    shown candidate are centred for each state.  The two integer count
    features are scaled to unit range on the way in.
    """

    def __init__(self, hidden=(64, 64), seed: int = 0, dtype=np.float32):
        self.dtype = np.dtype(dtype)
        self.adv = MLP((2 * STATE_DIM, *hidden, 1), seed=seed * 2 + 1, dtype=dtype)
        self.val = MLP((STATE_DIM, *hidden, 1), seed=seed * 2 + 2, dtype=dtype)

    @property
    def params(self) -> list[np.ndarray]:
        return self.adv.params + self.val.params

    def copy(self) -> "QNetwork":
        clone = QNetwork.__new__(QNetwork)
        clone.dtype = self.dtype
        clone.adv = self.adv.copy()
        clone.val = self.val.copy()
        return clone

    def sync_from(self, other: "QNetwork") -> None:
        for mine, theirs in zip(self.params, other.params):
            mine[...] = theirs

    def q_values(self, state_vec: np.ndarray, cand_vecs: np.ndarray, mask=None):
        """Q over one candidate set; masked-out entries come back as -inf."""
        k = cand_vecs.shape[0]
        state_vec = np.asarray(state_vec, dtype=self.dtype)
        pairs = np.empty((k, 2 * STATE_DIM), dtype=self.dtype)
        pairs[:, :STATE_DIM] = state_vec
        pairs[:, STATE_DIM:] = cand_vecs
        adv = self.adv.forward(_scale_counts(pairs))[:, 0]
        value = self.val.forward(_scale_counts(state_vec[None, :].copy()))[0, 0]
        if mask is None:
            centred = adv - adv.mean()
            return value + centred
        mask = np.asarray(mask, dtype=bool)
        centred = adv - adv[mask].mean()
        q = value + centred
        q[~mask] = -np.inf
        return q


def act(qnet: QNetwork, state_vec, cand_vecs, epsilon: float, rng, mask=None) -> int:
    """Epsilon-greedy candidate choice; masked candidates are never picked."""
    k = cand_vecs.shape[0]
    valid = np.flatnonzero(mask) if mask is not None else np.arange(k)
    if rng.random() < epsilon:
        return int(valid[rng.integers(0, len(valid))])
    q = qnet.q_values(state_vec, cand_vecs, mask)
    return int(np.argmax(q))


class SumTree:
    """Array heap whose internal nodes hold subtree sums; leaves hold
    sampling weights.  Supports vectorized prefix-sum descent."""

    def __init__(self, capacity: int):
        depth = max(1, int(np.ceil(np.log2(capacity))))
        self.n_leaves = 1 << depth
        self.tree = np.zeros(2 * self.n_leaves)

    def set(self, leaf: int, value: float) -> None:
        idx = leaf + self.n_leaves
        self.tree[idx] = value
        idx //= 2
        while idx >= 1:
            self.tree[idx] = self.tree[2 * idx] + self.tree[2 * idx + 1]
            idx //= 2

    @property
    def total(self) -> float:
        return float(self.tree[1])

    def get(self, leaf: int) -> float:
        return float(self.tree[leaf + self.n_leaves])

    def find(self, prefix_sums: np.ndarray) -> np.ndarray:
        idx = np.ones(len(prefix_sums), dtype=int)
        remaining = np.asarray(prefix_sums, dtype=float).copy()
        while idx[0] < self.n_leaves:
            left = self.tree[2 * idx]
            go_right = remaining > left
            remaining -= np.where(go_right, left, 0.0)
            idx = 2 * idx + go_right
        return idx - self.n_leaves


class ReplayBuffer:
    """Ring buffer with proportional prioritized sampling.

    Sampling probability is priority**alpha; importance weights are
    (N * P(i))**-beta normalized by the batch maximum.  Inserts and updates
    are lock-guarded so concurrent actors and one learner can share it.
    """

    def __init__(self, capacity: int, alpha: float):
        self.capacity = capacity
        self.alpha = alpha
        self.tree = SumTree(capacity)
        self.slots: list[Transition | None] = [None] * capacity
        self.position = 0
        self.size = 0
        self.inserted = 0
        self.max_priority = 1.0
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return self.size

    def insert(self, transition: Transition, priority: float | None = None) -> None:
        with self._lock:
            if priority is None:
                priority = self.max_priority
            transition.priority = priority
            self.max_priority = max(self.max_priority, priority)
            self.slots[self.position] = transition
            self.tree.set(self.position, priority**self.alpha)
            self.position = (self.position + 1) % self.capacity
            self.size = min(self.size + 1, self.capacity)
            self.inserted += 1

    def sample(self, batch: int, beta: float, rng):
        """Draw a batch; returns (transitions, indices, importance weights)."""
        with self._lock:
            if self.size == 0:
                raise ValueError("cannot sample from an empty buffer")
            total = self.tree.total
            leaves = self.tree.find(rng.random(batch) * total)
            probs = np.array([self.tree.get(k) for k in leaves]) / total
            weights = (self.size * probs) ** -beta
            weights /= weights.max()
            transitions = [self.slots[k] for k in leaves]
            return transitions, leaves, weights

    def update_priorities(self, indices, td_errors) -> None:
        with self._lock:
            for leaf, err in zip(indices, td_errors):
                priority = abs(float(err)) + PRIORITY_EPSILON
                self.slots[leaf].priority = priority
                self.max_priority = max(self.max_priority, priority)
                self.tree.set(int(leaf), priority**self.alpha)


def replay_insert(buffer: ReplayBuffer, transition: Transition, priority=None) -> None:
    buffer.insert(transition, priority)


def replay_sample(buffer: ReplayBuffer, batch: int, beta: float, rng):
    return buffer.sample(batch, beta, rng)


def _encode32(arch, dtype) -> np.ndarray:
    return encode_features(arch).astype(dtype)


def _stack_candidates(cands, dtype) -> np.ndarray:
    return np.stack([encode_features(c) for c in cands]).astype(dtype)


def _transition_mats(batch) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Candidate matrices for a batch, filling the memo fields on demand."""
    cand_mats = []
    next_mats = []
    for t in batch:
        if t.cand_mat is None:
            t.cand_mat = _stack_candidates(t.candidates, np.float16)
        cand_mats.append(t.cand_mat)
        if t.terminal:
            next_mats.append(None)
        else:
            if t.next_mat is None:
                t.next_mat = _stack_candidates(t.next_candidates, np.float16)
            next_mats.append(t.next_mat)
    return cand_mats, next_mats


def _batch_segments(qnet: QNetwork, states, cand_mats):
    """Flatten variable-size candidate sets into one (rows, 192) matrix."""
    dtype = qnet.dtype
    seg_bounds = np.cumsum([0] + [m.shape[0] for m in cand_mats])
    state_mat = np.stack([encode_features(s) for s in states]).astype(dtype)
    rows = np.empty((seg_bounds[-1], 2 * STATE_DIM), dtype=dtype)
    for i, mat in enumerate(cand_mats):
        lo, hi = seg_bounds[i], seg_bounds[i + 1]
        rows[lo:hi, :STATE_DIM] = state_mat[i]
        rows[lo:hi, STATE_DIM:] = mat
    return _scale_counts(state_mat), _scale_counts(rows), seg_bounds


def _segment_q(adv_flat, values, seg_bounds):
    """Per-segment dueling Q from flat advantages and per-segment values."""
    q = np.empty_like(adv_flat)
    for i in range(len(seg_bounds) - 1):
        lo, hi = seg_bounds[i], seg_bounds[i + 1]
        q[lo:hi] = values[i] + adv_flat[lo:hi] - adv_flat[lo:hi].mean()
    return q


def td_targets(batch, qnet_online: QNetwork, qnet_target: QNetwork, gamma: float):
    """Double-Q targets: online picks the next action, target values it."""
    targets = np.array([t.reward for t in batch], dtype=float)
    open_idx = [i for i, t in enumerate(batch) if not t.terminal]
    if not open_idx or gamma == 0.0:
        return targets
    _, next_mats = _transition_mats(batch)
    next_states = [batch[i].candidates[batch[i].chosen_index] for i in open_idx]
    state_mat, rows, seg = _batch_segments(
        qnet_online, next_states, [next_mats[i] for i in open_idx]
    )
    adv_online = qnet_online.adv.forward(rows)[:, 0]
    adv_target = qnet_target.adv.forward(rows)[:, 0]
    val_target = qnet_target.val.forward(state_mat)[:, 0]
    val_online = qnet_online.val.forward(state_mat)[:, 0]
    q_online = _segment_q(adv_online, val_online, seg)
    q_target = _segment_q(adv_target, val_target, seg)
    for row, i in enumerate(open_idx):
        lo, hi = seg[row], seg[row + 1]
        best = lo + int(np.argmax(q_online[lo:hi]))
        targets[i] += gamma * float(q_target[best])
    return targets


def td_loss_and_grads(qnet: QNetwork, batch, weights, targets):
    """Importance-weighted squared TD error against fixed targets.

    Gradients flow through the chosen candidate's advantage, the
    mean-centring term (all shown candidates), and the value head; the
    targets are treated as constants (semi-gradient).  Returns
    (loss, grads aligned with qnet.params, signed TD errors).
    """
    states = [t.state for t in batch]
    cand_mats, _ = _transition_mats(batch)
    state_mat, rows, seg = _batch_segments(qnet, states, cand_mats)
    adv_out, adv_cache = qnet.adv.forward_with_cache(rows)
    val_out, val_cache = qnet.val.forward_with_cache(state_mat)
    adv_flat = adv_out[:, 0]
    chosen = np.array(
        [seg[i] + t.chosen_index for i, t in enumerate(batch)], dtype=int
    )
    q_chosen = np.empty(len(batch))
    for i in range(len(batch)):
        lo, hi = seg[i], seg[i + 1]
        q_chosen[i] = val_out[i, 0] + adv_flat[chosen[i]] - adv_flat[lo:hi].mean()

    td = q_chosen - np.asarray(targets, dtype=float)
    w = np.asarray(weights, dtype=float)
    loss = float(np.mean(w * td**2))
    dq = 2.0 * w * td / len(batch)

    grad_adv = np.zeros_like(adv_flat)
    for i in range(len(batch)):
        lo, hi = seg[i], seg[i + 1]
        grad_adv[lo:hi] -= dq[i] / (hi - lo)
        grad_adv[chosen[i]] += dq[i]
    grads = qnet.adv.backward(adv_cache, grad_adv[:, None].astype(qnet.dtype))
    grads += qnet.val.backward(val_cache, dq[:, None].astype(qnet.dtype))
    return loss, grads, td


class QLearner:
    """Online/target network pair plus the optimizer and sync counter."""

    def __init__(self, cfg: AgentConfig, seed: int, dtype=np.float32):
        self.cfg = cfg
        self.online = QNetwork(cfg.hidden, seed=seed, dtype=dtype)
        self.target = self.online.copy()
        self.optimizer = Adam(self.online.params)
        self.samples_since_sync = 0

    def train_step(self, batch, weights, lr: float) -> np.ndarray:
        """One importance-weighted squared-TD-error step; returns |TD|."""
        targets = td_targets(batch, self.online, self.target, self.cfg.gamma)
        _, grads, td = td_loss_and_grads(self.online, batch, weights, targets)
        for g in grads:
            if not np.all(np.isfinite(g)):
                raise NonFiniteGradientError("non-finite gradient in learner step")
        self.optimizer.step(self.online.params, grads, lr)

        self.samples_since_sync += len(batch)
        if self.samples_since_sync >= self.cfg.target_sync_every_samples:
            self.target.sync_from(self.online)
            self.samples_since_sync -= self.cfg.target_sync_every_samples
        return np.abs(td)


def train_step(learner: QLearner, batch, weights, lr: float) -> np.ndarray:
    return learner.train_step(batch, weights, lr)


def rl_candidates(arch: Architecture, limits: SpaceLimits, cap: int):
    """Candidate 0 is the current architecture; the rest are neighbours."""
    return (arch,) + tuple(neighbours(arch, limits)[: cap - 1])


@dataclass
class _WorkerState:
    rng: np.random.Generator
    epsilon: float
    arch: Architecture = None
    cands: tuple = None
    cand_mat: np.ndarray = None
    state_vec: np.ndarray = None
    steps_in_episode: int = 0
    pending: Transition | None = None


@dataclass
class TrainedAgent:
    cfg: AgentConfig
    learner: QLearner
    buffer: ReplayBuffer
    env_steps: int = 0
    learner_steps: int = 0

    @property
    def online(self) -> QNetwork:
        return self.learner.online


def _point_worker_at(worker: _WorkerState, arch: Architecture, limits, cap, dtype):
    worker.arch = arch
    worker.cands = rl_candidates(arch, limits, cap)
    worker.cand_mat = _stack_candidates(worker.cands, np.float16)
    worker.state_vec = _encode32(arch, dtype)


def _start_episode(worker: _WorkerState, limits: SpaceLimits, cap: int, dtype) -> None:
    _point_worker_at(worker, sample_uniform(worker.rng, limits), limits, cap, dtype)
    worker.steps_in_episode = 0
    worker.pending = None


def _process_choice(
    worker: _WorkerState,
    idx: int,
    agent: TrainedAgent,
    score_fn,
    limits: SpaceLimits,
) -> None:
    """Apply one chosen action: complete the pending transition, record the
    new one, and either advance within the episode or start a fresh one."""
    cfg = agent.cfg
    cands = worker.cands
    worker.steps_in_episode += 1
    terminal = idx == 0 or worker.steps_in_episode >= cfg.train_episode_len

    if worker.pending is not None:
        worker.pending.next_candidates = cands
        worker.pending.next_mat = worker.cand_mat
        agent.buffer.insert(worker.pending)
        worker.pending = None

    next_arch = cands[idx]
    transition = Transition(
        state=worker.arch,
        candidates=cands,
        chosen_index=idx,
        reward=score_fn(next_arch)[2] if terminal else 0.0,
        next_candidates=None,
        terminal=terminal,
        cand_mat=worker.cand_mat,
    )
    dtype = agent.learner.online.dtype
    if terminal:
        agent.buffer.insert(transition)
        _start_episode(worker, limits, cfg.max_neighbours, dtype)
    else:
        worker.pending = transition
        _point_worker_at(worker, next_arch, limits, cfg.max_neighbours, dtype)


def _actor_step(
    worker: _WorkerState,
    agent: TrainedAgent,
    score_fn,
    limits: SpaceLimits,
) -> None:
    online = agent.learner.online
    idx = act(
        online,
        worker.state_vec,
        worker.cand_mat.astype(online.dtype),
        worker.epsilon,
        worker.rng,
    )
    _process_choice(worker, idx, agent, score_fn, limits)


def _lockstep_round(workers, agent: TrainedAgent, score_fn, limits) -> None:
    """One environment step for every worker with the Q forwards batched."""
    online = agent.learner.online
    sizes = [w.cand_mat.shape[0] for w in workers]
    seg = np.cumsum([0] + sizes)
    rows = np.empty((seg[-1], 2 * STATE_DIM), dtype=online.dtype)
    state_mat = np.empty((len(workers), STATE_DIM), dtype=online.dtype)
    for i, w in enumerate(workers):
        state_mat[i] = w.state_vec
        rows[seg[i] : seg[i + 1], :STATE_DIM] = w.state_vec
        rows[seg[i] : seg[i + 1], STATE_DIM:] = w.cand_mat
    adv = online.adv.forward(_scale_counts(rows))[:, 0]
    val = online.val.forward(_scale_counts(state_mat))[:, 0]
    for i, w in enumerate(workers):
        lo, hi = seg[i], seg[i + 1]
        if w.rng.random() < w.epsilon:
            idx = int(w.rng.integers(0, hi - lo))
        else:
            idx = int(np.argmax(val[i] + adv[lo:hi] - adv[lo:hi].mean()))
        _process_choice(w, idx, agent, score_fn, limits)


def _learner_step(agent: TrainedAgent, learner_rng) -> None:
    cfg = agent.cfg
    batch, indices, weights = agent.buffer.sample(cfg.batch_size, cfg.is_beta, learner_rng)
    # prioritized sampling repeats hot transitions; collapsing duplicates and
    # summing their weights gives an identical update at lower matmul cost
    unique: list[Transition] = []
    slot_of: dict[int, int] = {}
    merged = []
    positions = []
    for t, w in zip(batch, weights):
        pos = slot_of.get(id(t))
        if pos is None:
            pos = len(unique)
            slot_of[id(t)] = pos
            unique.append(t)
            merged.append(0.0)
        merged[pos] += w
        positions.append(pos)
    scale = len(unique) / len(batch)
    td = agent.learner.train_step(
        unique, np.asarray(merged) * scale, cfg.learning_rate
    )
    agent.learner.samples_since_sync += len(batch) - len(unique)
    if agent.learner.samples_since_sync >= cfg.target_sync_every_samples:
        agent.learner.target.sync_from(agent.learner.online)
        agent.learner.samples_since_sync -= cfg.target_sync_every_samples
    agent.buffer.update_priorities(indices, td[positions])
    agent.learner_steps += 1


def train_agent(
    cfg: AgentConfig | None,
    reward_cfg: RewardConfig,
    model,
    seed: int,
    limits: SpaceLimits = DEFAULT_LIMITS,
    mode: str = "interleaved",
) -> TrainedAgent:
    """Run actors and learner for cfg.total_train_steps environment steps.

    Interleaved mode steps the workers round-robin with a learner batch
    every ``learner_every`` environment steps: single-threaded and
    bit-deterministic given the seed.  Threaded mode runs each actor in its
    own thread against the locked buffer (not deterministic).
    """
    cfg = cfg or AgentConfig()
    score_fn = Scorer(model, reward_cfg)
    agent = TrainedAgent(
        cfg=cfg,
        learner=QLearner(cfg, seed=seed),
        buffer=ReplayBuffer(cfg.replay_capacity, cfg.priority_alpha),
    )
    workers = [
        _WorkerState(
            rng=np.random.default_rng([seed, w]),
            epsilon=worker_epsilon(w, cfg.num_workers),
        )
        for w in range(cfg.num_workers)
    ]
    dtype = agent.learner.online.dtype
    for worker in workers:
        _start_episode(worker, limits, cfg.max_neighbours, dtype)
    learner_rng = np.random.default_rng([seed, 10_007])

    if mode == "interleaved":
        learner_credit = 0
        while agent.env_steps < cfg.total_train_steps:
            stepping = workers[: cfg.total_train_steps - agent.env_steps]
            _lockstep_round(stepping, agent, score_fn, limits)
            agent.env_steps += len(stepping)
            learner_credit += len(stepping)
            while learner_credit >= cfg.learner_every:
                learner_credit -= cfg.learner_every
                if len(agent.buffer) >= max(cfg.min_replay, cfg.batch_size):
                    _learner_step(agent, learner_rng)
        return agent

    if mode == "threaded":
        steps_per_worker = cfg.total_train_steps // cfg.num_workers
        lock = threading.Lock()

        def actor_loop(worker):
            for _ in range(steps_per_worker):
                _actor_step(worker, agent, score_fn, limits)
                with lock:
                    agent.env_steps += 1

        threads = [
            threading.Thread(target=actor_loop, args=(w,)) for w in workers
        ]
        for t in threads:
            t.start()
        while any(t.is_alive() for t in threads):
            if len(agent.buffer) >= max(cfg.min_replay, cfg.batch_size):
                _learner_step(agent, learner_rng)
            else:
                threading.Event().wait(0.001)
        for t in threads:
            t.join()
        return agent

    raise ValueError(f"unknown training mode {mode!r}")


def greedy_episode(
    agent: TrainedAgent,
    start: Architecture,
    limits: SpaceLimits = DEFAULT_LIMITS,
    rng=None,
) -> Architecture:
    """Greedy evaluation episode; returns the final architecture."""
    rng = np.random.default_rng(0) if rng is None else rng
    online = agent.learner.online
    cfg = agent.cfg
    arch = start
    for _ in range(cfg.eval_episode_len):
        cands = rl_candidates(arch, limits, cfg.max_neighbours)
        state_vec = _encode32(arch, online.dtype)
        cand_vecs = _stack_candidates(cands, online.dtype)
        idx = act(online, state_vec, cand_vecs, epsilon=0.0, rng=rng)
        if idx == 0:
            break
        arch = cands[idx]
    return arch


def run_rl_search(
    cfg: AgentConfig | None,
    reward_cfg: RewardConfig,
    model,
    seed: int,
    budget,
    limits: SpaceLimits = DEFAULT_LIMITS,
    agent: TrainedAgent | None = None,
    starts=None,
) -> list[TraceEntry]:
    """Train (unless given a trained agent), then spend the whole budget on
    greedy evaluation episodes, one query per episode's final architecture."""
    cfg = cfg or AgentConfig()
    if agent is None:
        agent = train_agent(cfg, reward_cfg, model, seed, limits=limits)
    score_fn = Scorer(model, reward_cfg)
    budget = _as_budget(budget)
    eval_rng = np.random.default_rng([seed, 20_011])
    start_iter = iter(starts) if starts is not None else None
    trace: list[TraceEntry] = []
    while budget.remaining > 0:
        if start_iter is not None:
            try:
                start = next(start_iter)
            except StopIteration:
                start_iter = iter(starts)
                start = next(start_iter)
        else:
            start = sample_uniform(eval_rng, limits)
        final = greedy_episode(agent, start, limits, eval_rng)
        pred, params, util, adv = score_fn(final)
        trace.append(TraceEntry(budget.spend(), final, pred, params, util, adv))
    return trace


CHECKPOINT_FORMAT = "nasforge-qlearn-checkpoint"
CHECKPOINT_VERSION = 1


def save_checkpoint(agent: TrainedAgent, path) -> None:
    """Versioned JSON dump of both parameter sets plus replay metadata."""
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "hidden": list(agent.cfg.hidden),
        "env_steps": agent.env_steps,
        "learner_steps": agent.learner_steps,
        "online": [p.astype(float).tolist() for p in agent.learner.online.params],
        "target": [p.astype(float).tolist() for p in agent.learner.target.params],
        "replay": {
            "size": len(agent.buffer),
            "inserted": agent.buffer.inserted,
            "max_priority": agent.buffer.max_priority,
        },
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_checkpoint(path, cfg: AgentConfig | None = None) -> TrainedAgent:
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path} is not an agent checkpoint")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {payload.get('version')}")
    cfg = cfg or AgentConfig()
    if tuple(payload["hidden"]) != cfg.hidden:
        cfg = replace(cfg, hidden=tuple(payload["hidden"]))
    agent = TrainedAgent(
        cfg=cfg,
        learner=QLearner(cfg, seed=0),
        buffer=ReplayBuffer(cfg.replay_capacity, cfg.priority_alpha),
    )
    for param, stored in zip(agent.learner.online.params, payload["online"]):
        param[...] = np.asarray(stored, dtype=param.dtype)
    for param, stored in zip(agent.learner.target.params, payload["target"]):
        param[...] = np.asarray(stored, dtype=param.dtype)
    agent.env_steps = payload["env_steps"]
    agent.learner_steps = payload["learner_steps"]
    agent.buffer.inserted = payload["replay"]["inserted"]
    agent.buffer.max_priority = payload["replay"]["max_priority"]
    return agent
