"""Search strategies under a shared query-accounting regime.

Four strategies are compared by what they find per surrogate query: random
search (every draw is a query), random walks and the RL agent (one query
per episode, at its final architecture), and greedy local search (one query
per neighbour evaluated, which is what makes its budget so tight).  Traces
log every query; Pareto fronts over (predicted F1, parameter count) are
maintained incrementally and snapshotted every ten queries.

Strategies accept optional ``start_fn`` / ``neighbours_fn`` / ``score_fn``
overrides so they can run on synthetic state spaces in tests; by default
they operate on the architecture space through a fitted surrogate.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .archspace import (
    Architecture,
    DEFAULT_LIMITS,
    SpaceLimits,
    encode_features,
    neighbours,
    sample_uniform,
)
from .netbuild import count_params
from .reward import RewardConfig, detect_adversarial, utility

MAX_NEIGHBOURS_SHOWN = 50
DEFAULT_EPISODE_LEN = 16


class BudgetExhaustedError(RuntimeError):
    """A strategy tried to query past its budget; strategies must stop first."""


@dataclass
class QueryBudget:
    max_queries: int = 300
    queries_used: int = 0

    @property
    def remaining(self) -> int:
        return self.max_queries - self.queries_used

    def spend(self, n: int = 1) -> int:
        if self.queries_used + n > self.max_queries:
            raise BudgetExhaustedError(
                f"{self.queries_used}+{n} queries would exceed {self.max_queries}"
            )
        self.queries_used += n
        return self.queries_used


def _as_budget(budget) -> QueryBudget:
    return budget if isinstance(budget, QueryBudget) else QueryBudget(int(budget))


@dataclass(frozen=True)
class TraceEntry:
    """One query: the architecture evaluated and how it scored."""

    query_index: int
    arch: object
    predicted_f1: float
    params: int
    utility: float
    adversarial: bool


_cached_count_params = lru_cache(maxsize=131_072)(count_params)


class Scorer:
    """Surrogate-backed scoring: raw prediction, size, utility, adversarial flag."""

    def __init__(self, model, reward_cfg: RewardConfig):
        self.model = model
        self.reward_cfg = reward_cfg

    def __call__(self, arch: Architecture):
        pred = float(self.model.predict(encode_features(arch)))
        params = _cached_count_params(arch)
        return pred, params, utility(pred, params, self.reward_cfg), detect_adversarial(pred)


def _resolve(score_fn, model, reward_cfg):
    if score_fn is not None:
        return score_fn
    if model is None or reward_cfg is None:
        raise ValueError("either score_fn or (model, reward_cfg) is required")
    return Scorer(model, reward_cfg)


def _record(trace: list[TraceEntry], budget: QueryBudget, state, scored) -> TraceEntry:
    pred, params, util, adv = scored
    entry = TraceEntry(budget.spend(), state, pred, params, util, adv)
    trace.append(entry)
    return entry


def run_random_search(
    budget,
    reward_cfg: RewardConfig = None,
    model=None,
    seed: int = 0,
    limits: SpaceLimits = DEFAULT_LIMITS,
    *,
    score_fn=None,
    start_fn=None,
) -> list[TraceEntry]:
    """Independent uniform draws, one query each."""
    budget = _as_budget(budget)
    score_fn = _resolve(score_fn, model, reward_cfg)
    rng = np.random.default_rng(seed)
    if start_fn is None:
        start_fn = lambda r: sample_uniform(r, limits)
    trace: list[TraceEntry] = []
    while budget.remaining > 0:
        arch = start_fn(rng)
        _record(trace, budget, arch, score_fn(arch))
    return trace


def run_random_walk(
    budget,
    reward_cfg: RewardConfig = None,
    model=None,
    seed: int = 0,
    episode_len: int = DEFAULT_EPISODE_LEN,
    limits: SpaceLimits = DEFAULT_LIMITS,
    *,
    score_fn=None,
    start_fn=None,
    neighbours_fn=None,
) -> list[TraceEntry]:
    """Uniform neighbour steps from a fresh start; only the episode's final
    architecture is queried."""
    budget = _as_budget(budget)
    score_fn = _resolve(score_fn, model, reward_cfg)
    rng = np.random.default_rng(seed)
    if start_fn is None:
        start_fn = lambda r: sample_uniform(r, limits)
    if neighbours_fn is None:
        neighbours_fn = lambda a: neighbours(a, limits)
    trace: list[TraceEntry] = []
    while budget.remaining > 0:
        state = start_fn(rng)
        for _ in range(episode_len):
            options = neighbours_fn(state)
            if not options:
                break  # stuck episodes query their current state
            state = options[int(rng.integers(0, len(options)))]
        _record(trace, budget, state, score_fn(state))
    return trace


def run_local_search(
    budget,
    reward_cfg: RewardConfig = None,
    model=None,
    seed: int = 0,
    limits: SpaceLimits = DEFAULT_LIMITS,
    *,
    score_fn=None,
    start_fn=None,
    neighbours_fn=None,
    max_neighbours: int = MAX_NEIGHBOURS_SHOWN,
    restart: bool = True,
) -> list[TraceEntry]:
    """Greedy hill climbing on utility; every neighbour evaluated is a query.

    Each climb scans up to ``max_neighbours`` neighbours (hash order), moves
    to the best strictly improving one, and ends at a local optimum or when
    the budget dies mid-scan.  With ``restart`` a new climb starts from a
    fresh uniform draw while budget remains; without it the run is a single
    climb.
    """
    budget = _as_budget(budget)
    score_fn = _resolve(score_fn, model, reward_cfg)
    rng = np.random.default_rng(seed)
    if start_fn is None:
        start_fn = lambda r: sample_uniform(r, limits)
    if neighbours_fn is None:
        neighbours_fn = lambda a: neighbours(a, limits)
    trace: list[TraceEntry] = []
    while budget.remaining > 0:
        state = start_fn(rng)
        current_utility = score_fn(state)[2]  # baseline; not a counted query
        climbing = True
        while climbing and budget.remaining > 0:
            best_entry = None
            scanned_all = True
            for cand in neighbours_fn(state)[:max_neighbours]:
                if budget.remaining == 0:
                    scanned_all = False
                    break
                entry = _record(trace, budget, cand, score_fn(cand))
                if best_entry is None or entry.utility > best_entry.utility:
                    best_entry = entry
            if not scanned_all:
                return trace  # exhausted mid-neighbourhood
            if best_entry is not None and best_entry.utility > current_utility:
                state = best_entry.arch
                current_utility = best_entry.utility
            else:
                climbing = False  # strict local optimum
        if not restart:
            break
    return trace


@dataclass(frozen=True)
class ParetoPoint:
    predicted_f1: float
    params: int
    arch: object = None


def _dominates(p: ParetoPoint, q: ParetoPoint) -> bool:
    return (
        p.predicted_f1 >= q.predicted_f1
        and p.params <= q.params
        and (p.predicted_f1 > q.predicted_f1 or p.params < q.params)
    )


def pareto_update(front: tuple[ParetoPoint, ...], point: ParetoPoint) -> tuple[ParetoPoint, ...]:
    """Insert a point, dropping whatever it dominates; idempotent."""
    for existing in front:
        if _dominates(existing, point):
            return front
        if existing.predicted_f1 == point.predicted_f1 and existing.params == point.params:
            return front if existing == point else front + (point,)
    kept = tuple(p for p in front if not _dominates(point, p))
    return tuple(sorted(kept + (point,), key=lambda p: (p.params, p.predicted_f1)))


def pareto_front_of_trace(trace) -> tuple[ParetoPoint, ...]:
    front: tuple[ParetoPoint, ...] = ()
    for entry in trace:
        front = pareto_update(
            front, ParetoPoint(entry.predicted_f1, entry.params, entry.arch)
        )
    return front


def pareto_snapshots(trace, every: int = 10) -> list[tuple[ParetoPoint, ...]]:
    """Fronts over trace prefixes of length every, 2*every, ..."""
    snapshots = []
    front: tuple[ParetoPoint, ...] = ()
    for k, entry in enumerate(trace, start=1):
        front = pareto_update(
            front, ParetoPoint(entry.predicted_f1, entry.params, entry.arch)
        )
        if k % every == 0:
            snapshots.append(front)
    return snapshots


def hypervolume(front, ref_f1: float = 0.0, ref_params: float = None) -> float:
    """Area dominated by the front relative to a (worst-F1, worst-params)
    reference corner; used only as a monotonicity probe for snapshots."""
    if ref_params is None:
        ref_params = float(RewardConfig().params_max)
    pts = sorted(
        (p for p in front if p.params <= ref_params and p.predicted_f1 >= ref_f1),
        key=lambda p: (p.params, -p.predicted_f1),
    )
    area = 0.0
    for k, p in enumerate(pts):
        right = pts[k + 1].params if k + 1 < len(pts) else ref_params
        area += (p.predicted_f1 - ref_f1) * max(0.0, right - p.params)
    return area


def write_trace_csv(trace, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["query", "f1", "params", "utility", "adversarial"])
        for e in trace:
            writer.writerow(
                [e.query_index, repr(e.predicted_f1), e.params, repr(e.utility), int(e.adversarial)]
            )


def write_pareto_csv(snapshots, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["snapshot", "f1", "params"])
        for k, front in enumerate(snapshots, start=1):
            for p in front:
                writer.writerow([k, repr(p.predicted_f1), p.params])


STRATEGIES = ("random", "walk", "local", "rl")


@dataclass
class SuiteRun:
    strategy: str
    seed: int
    set_index: int
    trace: list = field(repr=False, default_factory=list)
    best_f1: float = float("-inf")
    best_params: int = 0
    best_utility: float = float("-inf")
    adversarial_count: int = 0

    @classmethod
    def from_trace(cls, strategy, seed, set_index, trace):
        run = cls(strategy, seed, set_index, trace)
        run.best_f1 = max(e.predicted_f1 for e in trace)
        run.best_params = min(e.params for e in trace)
        run.best_utility = max(e.utility for e in trace)
        run.adversarial_count = sum(e.adversarial for e in trace)
        return run


def _set_start_fn(pool):
    """Start states drawn sequentially from a pre-sampled architecture set."""
    state = {"it": iter(pool)}

    def start(_rng):
        try:
            return next(state["it"])
        except StopIteration:  # budget outlived the pool; wrap around
            state["it"] = iter(pool)
            return next(state["it"])

    return start


def evaluate_suite(
    strategies,
    model,
    reward_cfg: RewardConfig,
    budget: int = 300,
    n_sets: int = 5,
    set_size: int = 1000,
    seeds=(0, 1, 2, 3, 4),
    limits: SpaceLimits = DEFAULT_LIMITS,
    agent_cfg=None,
    episode_len: int = DEFAULT_EPISODE_LEN,
) -> list[SuiteRun]:
    """Run every strategy over shared evaluation sets and all seeds.

    Evaluation sets are sampled once (independently of the agent seeds) and
    reused by every strategy: random search scores set members directly,
    walks, climbs, and RL evaluation episodes start from them in order.
    The RL agent trains once per seed and is evaluated on each set.
    """
    for s in strategies:
        if s not in STRATEGIES:
            raise ValueError(f"unknown strategy {s!r}")
    sets = []
    for k in range(n_sets):
        rng = np.random.default_rng([97, k])
        sets.append([sample_uniform(rng, limits) for _ in range(set_size)])

    runs: list[SuiteRun] = []
    for strategy in strategies:
        if strategy == "rl":
            from .qlearn import run_rl_search, train_agent  # local import; heavy

            for seed in seeds:
                agent = train_agent(agent_cfg, reward_cfg, model, seed, limits=limits)
                for k, pool in enumerate(sets):
                    trace = run_rl_search(
                        agent_cfg,
                        reward_cfg,
                        model,
                        seed,
                        budget,
                        limits=limits,
                        agent=agent,
                        starts=pool,
                    )
                    runs.append(SuiteRun.from_trace(strategy, seed, k, trace))
            continue
        for seed in seeds:
            for k, pool in enumerate(sets):
                start_fn = _set_start_fn(pool)
                if strategy == "random":
                    trace = run_random_search(
                        budget, reward_cfg, model, seed, limits, start_fn=start_fn
                    )
                elif strategy == "walk":
                    trace = run_random_walk(
                        budget, reward_cfg, model, seed, episode_len, limits,
                        start_fn=start_fn,
                    )
                else:
                    trace = run_local_search(
                        budget, reward_cfg, model, seed, limits, start_fn=start_fn
                    )
                runs.append(SuiteRun.from_trace(strategy, seed, k, trace))
    return runs


def best_so_far_curves(trace, budget: int):
    """Running best predicted F1 and best parameter count per query index."""
    best_f1 = np.full(budget, np.nan)
    best_params = np.full(budget, np.nan)
    f1 = float("-inf")
    params = float("inf")
    for e in trace:
        f1 = max(f1, e.predicted_f1)
        params = min(params, e.params)
        best_f1[e.query_index - 1] = f1
        best_params[e.query_index - 1] = params
    # short traces hold their final values to the end of the budget
    for k in range(1, budget):
        if np.isnan(best_f1[k]):
            best_f1[k] = best_f1[k - 1]
            best_params[k] = best_params[k - 1]
    return best_f1, best_params


def write_suite_summary(runs, path) -> None:
    """Per-strategy aggregate over all (seed, set) runs, plus adversarial counts."""
    by_strategy: dict[str, list[SuiteRun]] = {}
    for run in runs:
        by_strategy.setdefault(run.strategy, []).append(run)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "strategy", "runs",
                "best_f1_mean", "best_f1_std",
                "best_params_mean", "best_params_std",
                "best_utility_mean", "best_utility_std",
                "adversarial_count",
            ]
        )
        for strategy, group in by_strategy.items():
            f1s = np.array([r.best_f1 for r in group])
            params = np.array([r.best_params for r in group], dtype=float)
            utils = np.array([r.best_utility for r in group])
            writer.writerow(
                [
                    strategy, len(group),
                    repr(float(f1s.mean())), repr(float(f1s.std())),
                    repr(float(params.mean())), repr(float(params.std())),
                    repr(float(utils.mean())), repr(float(utils.std())),
                    int(sum(r.adversarial_count for r in group)),
                ]
            )


def write_suite_curves(runs, budget: int, path) -> None:
    by_strategy: dict[str, list[SuiteRun]] = {}
    for run in runs:
        by_strategy.setdefault(run.strategy, []).append(run)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["strategy", "query",
             "best_f1_mean", "best_f1_std", "best_params_mean", "best_params_std"]
        )
        for strategy, group in by_strategy.items():
            f1_curves = []
            param_curves = []
            for run in group:
                f1, params = best_so_far_curves(run.trace, budget)
                f1_curves.append(f1)
                param_curves.append(params)
            f1_m = np.nanmean(f1_curves, axis=0)
            f1_s = np.nanstd(f1_curves, axis=0)
            p_m = np.nanmean(param_curves, axis=0)
            p_s = np.nanstd(param_curves, axis=0)
            for q in range(budget):
                writer.writerow(
                    [strategy, q + 1, repr(float(f1_m[q])), repr(float(f1_s[q])),
                     repr(float(p_m[q])), repr(float(p_s[q]))]
                )
