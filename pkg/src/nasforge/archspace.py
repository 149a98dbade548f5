"""Labeled-DAG architecture search space.

An architecture is a small directed acyclic graph: vertex 0 is the input,
the highest-indexed vertex is the output, and every vertex in between
carries one of ten operation labels.  Edges only run from lower to higher
index, so acyclicity holds by construction.  This module owns the
representation plus everything combinatorial about it: validity checking,
uniform sampling, one-edit neighbourhoods, feature encoding for the
surrogate models, hashing, and exact size accounting for the space.
"""

from __future__ import annotations

import bisect
import hashlib
import itertools
import json
from dataclasses import dataclass
from functools import lru_cache
from math import comb

import numpy as np

OP_LABELS = (
    "linear-prelu",
    "linear-relu",
    "linear-relu6",
    "linear-tanh",
    "linear",
    "conv-3",
    "conv-5",
    "max-pool-3",
    "max-pool-5",
    "spectral-attn",
)
OP_INDEX = {label: k for k, label in enumerate(OP_LABELS)}

# Encoding geometry is fixed: 8 padded vertices -> 28 upper-triangle cells,
# 6 intermediate slots x (10 labels + "absent"), plus the two integer counts.
PAD_VERTICES = 8
ADJ_CELLS = PAD_VERTICES * (PAD_VERTICES - 1) // 2
OP_SLOTS = PAD_VERTICES - 2
OP_CATEGORIES = len(OP_LABELS) + 1
ABSENT = len(OP_LABELS)
FEATURE_DIM = ADJ_CELLS + OP_SLOTS * OP_CATEGORIES + 2

_PAIR_INDEX = {
    pair: k
    for k, pair in enumerate(
        (i, j) for i in range(PAD_VERTICES) for j in range(i + 1, PAD_VERTICES)
    )
}

REJECTION_CAP = 10_000


class SamplingExhaustedError(RuntimeError):
    """Rejection sampling hit its retry cap; indicates an internal bug."""


class EnumerationBudgetError(ValueError):
    """Brute-force enumeration requested beyond the supported vertex count."""


@dataclass(frozen=True)
class SpaceLimits:
    """Bounds of the search space: vertex cap and number of op labels."""

    max_vertices: int = 8
    num_ops: int = 10

    def __post_init__(self):
        if self.max_vertices < 2:
            raise ValueError("max_vertices must be at least 2")
        if not 1 <= self.num_ops <= len(OP_LABELS):
            raise ValueError(f"num_ops must be in [1, {len(OP_LABELS)}]")

    @property
    def labels(self) -> tuple[str, ...]:
        return OP_LABELS[: self.num_ops]


DEFAULT_LIMITS = SpaceLimits()


@dataclass(frozen=True)
class Architecture:
    """A labeled DAG: vertex count, upper-triangular edge set, op labels.

    ``edges`` is stored as a lexicographically sorted tuple of ``(i, j)``
    pairs with ``i < j``; ``ops[k]`` labels vertex ``k + 1``.  Instances are
    immutable and hashable, so they can key caches and live in sets.
    """

    num_vertices: int
    edges: tuple[tuple[int, int], ...]
    ops: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple(sorted(tuple(e) for e in self.edges)))
        object.__setattr__(self, "ops", tuple(self.ops))

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def to_json_dict(self) -> dict:
        return {
            "v": self.num_vertices,
            "edges": [list(e) for e in self.edges],
            "ops": list(self.ops),
        }

    @classmethod
    def from_json_dict(cls, obj: dict) -> "Architecture":
        return cls(
            num_vertices=int(obj["v"]),
            edges=tuple((int(i), int(j)) for i, j in obj["edges"]),
            ops=tuple(str(o) for o in obj["ops"]),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "Architecture":
        return cls.from_json_dict(json.loads(text))


@dataclass(frozen=True)
class ValidityReport:
    ok: bool
    violations: tuple[str, ...] = ()


def edge_bounds(v: int) -> tuple[int, int]:
    """Minimum and maximum edge count for a v-vertex architecture."""
    return v - 1, v * (v - 1) // 2


def _connectivity_masks(v: int, edges) -> tuple[int, int]:
    """Bitmasks of vertices reachable from the input / co-reachable to the output.

    Single forward and backward sweeps suffice because edges always point
    from lower to higher index.
    """
    pred = [0] * v
    succ = [0] * v
    for i, j in edges:
        pred[j] |= 1 << i
        succ[i] |= 1 << j
    reach = 1
    for j in range(1, v):
        if pred[j] & reach:
            reach |= 1 << j
    coreach = 1 << (v - 1)
    for i in range(v - 2, -1, -1):
        if succ[i] & coreach:
            coreach |= 1 << i
    return reach, coreach


def _edges_valid(v: int, edges) -> bool:
    """Fast validity check for well-formed edge tuples (bounds + connectivity)."""
    lo, hi = edge_bounds(v)
    if not lo <= len(edges) <= hi:
        return False
    reach, coreach = _connectivity_masks(v, edges)
    full = (1 << v) - 1
    return (reach & coreach) == full


def validate(arch: Architecture, limits: SpaceLimits = DEFAULT_LIMITS) -> ValidityReport:
    """Check every structural invariant and report all violations found.

    ok is true iff the architecture is a member of the search space: vertex
    count within limits, labels drawn from the closed set, edges in the
    upper triangle with count between v-1 and v(v-1)/2, and every vertex on
    some input-to-output path.
    """
    v = arch.num_vertices
    violations = []
    if not 2 <= v <= limits.max_vertices:
        violations.append(f"vertex count {v} outside [2, {limits.max_vertices}]")
        return ValidityReport(False, tuple(violations))

    if len(arch.ops) != v - 2:
        violations.append(f"expected {v - 2} op labels, got {len(arch.ops)}")
    allowed = set(limits.labels)
    for k, op in enumerate(arch.ops):
        if op not in allowed:
            violations.append(f"unknown op label {op!r} at vertex {k + 1}")

    seen = set()
    malformed = False
    for i, j in arch.edges:
        if not (0 <= i < j < v):
            violations.append(f"edge ({i}, {j}) out of range for {v} vertices")
            malformed = True
        elif (i, j) in seen:
            violations.append(f"duplicate edge ({i}, {j})")
        seen.add((i, j))

    lo, hi = edge_bounds(v)
    e = len(arch.edges)
    if e < lo:
        violations.append(f"edge count {e} below minimum {lo}")
    elif e > hi:
        violations.append(f"edge count {e} above maximum {hi}")

    if not malformed:
        reach, coreach = _connectivity_masks(v, arch.edges)
        for k in range(v):
            bit = 1 << k
            if not reach & bit:
                violations.append(f"unreachable vertex {k}")
            elif not coreach & bit:
                violations.append(f"dead-end vertex {k}")

    return ValidityReport(not violations, tuple(violations))


def canonical_hash(arch: Architecture) -> int:
    """64-bit digest of the literal labeled indexed DAG.

    Equal (v, edge set, label list) triples hash equal across processes and
    runs; graph isomorphism is deliberately not collapsed.  Architectures of
    the standard space pack losslessly into 56 bits (vertex count, edge
    bitmask, op nibbles), so collisions there are impossible by
    construction; larger graphs fall back to a cryptographic digest.
    """
    v = arch.num_vertices
    if v <= PAD_VERTICES:
        try:
            key = v
            mask = 0
            for i, j in arch.edges:
                mask |= 1 << _PAIR_INDEX[(i, j)]
            key = (key << ADJ_CELLS) | mask
            for op in arch.ops:
                key = (key << 4) | (OP_INDEX[op] + 1)
            return key
        except KeyError:
            pass  # malformed edges or labels; hash the bytes instead
    h = hashlib.blake2b(digest_size=8)
    h.update(bytes([v]))
    for i, j in arch.edges:
        h.update(bytes((i, j)))
    h.update(repr(arch.ops).encode())
    return int.from_bytes(h.digest(), "big")


def all_pairs(v: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(v) for j in range(i + 1, v)]


def _make(v: int, sorted_edges: tuple, ops: tuple) -> Architecture:
    # construction fast path for edit generators: edges must already be
    # sorted tuples of pairs, ops a tuple
    arch = object.__new__(Architecture)
    object.__setattr__(arch, "num_vertices", v)
    object.__setattr__(arch, "edges", sorted_edges)
    object.__setattr__(arch, "ops", ops)
    return arch


# Cells with at most two edges above the spanning minimum hold so few valid
# sets (a single monotone chain at e = v-1) that rejection sampling would
# blow through any sane retry cap; those are enumerated exactly instead.
_ENUM_SLACK = 2
_REJECT_BLOCK = 32


def _cell_is_enumerated(v: int, e: int) -> bool:
    return e - (v - 1) <= _ENUM_SLACK


@lru_cache(maxsize=None)
def _valid_edge_sets(v: int, e: int) -> tuple[tuple[tuple[int, int], ...], ...]:
    """Every valid e-edge set on v vertices, found by backtracking over
    per-vertex predecessor masks with reachability and budget pruning."""
    results = []
    chosen: list[tuple[int, int]] = []

    def rec(j: int, budget: int, reach: int):
        if j == v:
            if budget == 0:
                edges = tuple(sorted(chosen))
                if _edges_valid(v, edges):
                    results.append(edges)
            return
        remaining_min = v - 1 - j  # later vertices need one in-edge each
        remaining_max = sum(range(j + 1, v))
        for mask in range(1, 1 << j):
            size = mask.bit_count()
            if size > budget - remaining_min or budget - size > remaining_max:
                continue
            if not mask & reach:
                continue  # vertex j would be unreachable
            added = [(i, j) for i in range(j) if mask >> i & 1]
            chosen.extend(added)
            rec(j + 1, budget - size, reach | 1 << j)
            del chosen[-len(added):]

    rec(1, e, 1)
    return tuple(results)


def sample_uniform(rng_seed, limits: SpaceLimits = DEFAULT_LIMITS) -> Architecture:
    """Draw one architecture: v uniform over [2, max], e uniform over its
    range, then a uniformly random valid e-edge set and i.i.d. uniform labels.

    Given (v, e), the edge set is exactly uniform over the valid sets: sparse
    cells sample an index into the enumerated list, dense cells use rejection
    (acceptance is above 2e-3 everywhere rejection applies, so hitting the
    retry cap signals a bug, not bad luck).  ``rng_seed`` may be an integer
    seed or an existing numpy Generator.
    """
    rng = np.random.default_rng(rng_seed)
    v = int(rng.integers(2, limits.max_vertices + 1))
    lo, hi = edge_bounds(v)
    e = int(rng.integers(lo, hi + 1))

    edges = None
    if _cell_is_enumerated(v, e):
        sets = _valid_edge_sets(v, e)
        edges = sets[int(rng.integers(0, len(sets)))]
    else:
        pairs = all_pairs(v)
        m = len(pairs)
        for _ in range(REJECTION_CAP // _REJECT_BLOCK + 1):
            block = np.argsort(rng.random((_REJECT_BLOCK, m)), axis=1)[:, :e]
            for row in block:
                cand = tuple(sorted(pairs[k] for k in row))
                if _edges_valid(v, cand):
                    edges = cand
                    break
            if edges is not None:
                break
        if edges is None:
            raise SamplingExhaustedError(
                f"no valid edge set of size {e} on {v} vertices "
                f"after {REJECTION_CAP} tries"
            )

    labels = limits.labels
    ops = tuple(labels[k] for k in rng.integers(0, len(labels), size=v - 2))
    return Architecture(v, edges, ops)


def _toggle_variants(arch: Architecture):
    v = arch.num_vertices
    present = set(arch.edges)
    edges_list = list(arch.edges)
    for pair in all_pairs(v):
        if pair in present:
            edges = tuple(e for e in edges_list if e != pair)
        else:
            at = bisect.bisect_left(edges_list, pair)
            edges = arch.edges[:at] + (pair,) + arch.edges[at:]
        if _edges_valid(v, edges):
            yield _make(v, edges, arch.ops)


def _relabel_variants(arch: Architecture, labels):
    for k, old in enumerate(arch.ops):
        for new in labels:
            if new != old:
                ops = arch.ops[:k] + (new,) + arch.ops[k + 1 :]
                yield _make(arch.num_vertices, arch.edges, ops)


def _add_node_variants(arch: Architecture, limits: SpaceLimits):
    # The new intermediate node takes index v-1 and reroutes one existing
    # edge into the output through itself; the old output becomes index v.
    v = arch.num_vertices
    if v >= limits.max_vertices:
        return
    out = v - 1
    for p in sorted({i for i, j in arch.edges if j == out}):
        kept = []
        for i, j in arch.edges:
            if (i, j) == (p, out):
                continue
            kept.append((i, j + 1) if j == out else (i, j))
        edges = tuple(sorted(kept + [(p, v - 1), (v - 1, v)]))
        if not _edges_valid(v + 1, edges):
            continue
        for label in limits.labels:
            yield _make(v + 1, edges, arch.ops + (label,))


def _delete_node_variants(arch: Architecture):
    # Removing intermediate node u contracts it: predecessor-successor
    # pairs are bridged so paths through u survive, then indices close up.
    v = arch.num_vertices
    for u in range(1, v - 1):
        preds = [i for i, j in arch.edges if j == u]
        succs = [j for i, j in arch.edges if i == u]
        merged = {e for e in arch.edges if u not in e}
        merged.update((p, s) for p in preds for s in succs)
        edges = tuple(
            sorted((i - (i > u), j - (j > u)) for i, j in merged)
        )
        if _edges_valid(v - 1, edges):
            ops = arch.ops[:u - 1] + arch.ops[u:]
            yield _make(v - 1, edges, ops)


@lru_cache(maxsize=16_384)
def neighbours(arch: Architecture, limits: SpaceLimits = DEFAULT_LIMITS) -> tuple[Architecture, ...]:
    """All distinct valid one-edit variants of ``arch``.

    The edit set: toggle one edge, relabel one intermediate node, append
    one intermediate node (rerouting an output in-edge through it), or
    delete one intermediate node with edge contraction.  The result is
    deduplicated and sorted by canonical_hash, and never contains ``arch``.
    """
    found = {}
    for cand in itertools.chain(
        _toggle_variants(arch),
        _relabel_variants(arch, limits.labels),
        _add_node_variants(arch, limits),
        _delete_node_variants(arch),
    ):
        if cand != arch:
            found[canonical_hash(cand)] = cand
    return tuple(found[h] for h in sorted(found))


def encode_features(arch: Architecture) -> np.ndarray:
    """Fixed 96-entry feature vector for the surrogate models.

    Layout: 28 binary upper-triangle adjacency cells of the 8-vertex padded
    graph (the output vertex is remapped to padded index 7 so its column
    keeps one meaning across sizes), then 6 blocks of 11 one-hot entries
    (10 labels + absent) for the intermediate slots, then the vertex and
    edge counts as plain integers.
    """
    return _encode_cached(arch)


@lru_cache(maxsize=131_072)
def _encode_cached(arch: Architecture) -> np.ndarray:
    v = arch.num_vertices
    vec = np.zeros(FEATURE_DIM)
    out = v - 1
    for i, j in arch.edges:
        jj = PAD_VERTICES - 1 if j == out else j
        vec[_PAIR_INDEX[(i, jj)]] = 1.0
    for slot in range(OP_SLOTS):
        if slot < v - 2:
            vec[ADJ_CELLS + slot * OP_CATEGORIES + OP_INDEX[arch.ops[slot]]] = 1.0
        else:
            vec[ADJ_CELLS + slot * OP_CATEGORIES + ABSENT] = 1.0
    vec[FEATURE_DIM - 2] = v
    vec[FEATURE_DIM - 1] = len(arch.edges)
    vec.flags.writeable = False
    return vec


def search_space_upper_bound(limits: SpaceLimits = DEFAULT_LIMITS) -> int:
    """Exact closed-form count of (edge set, labeling) pairs, in big ints.

    Sums C(v(v-1)/2, e) * num_ops**(v-2) over v in [2, max] and e in
    [v-1, v(v-1)/2].  The true number of unique valid architectures is
    smaller, since not every counted edge set is connected.
    """
    total = 0
    for v in range(2, limits.max_vertices + 1):
        lo, hi = edge_bounds(v)
        labelings = limits.num_ops ** (v - 2)
        for e in range(lo, hi + 1):
            total += comb(hi, e) * labelings
    return total


@dataclass(frozen=True)
class TermCell:
    """One (v, e) cell of the size bound: counted pairs vs. actually valid."""

    term_count: int
    valid_count: int


ENUMERATION_V_CAP = 5


def enumerate_terms(limits: SpaceLimits, v_max: int) -> dict[tuple[int, int], TermCell]:
    """Brute-force the per-(v, e) counts behind the closed-form bound.

    Enumerates every e-edge subset explicitly, multiplying by the number of
    labelings (validity does not depend on labels).  The valid count is
    strictly smaller than the term count whenever disconnected edge sets
    exist, which is what makes the closed form an upper bound.
    """
    if v_max > ENUMERATION_V_CAP:
        raise EnumerationBudgetError(
            f"brute-force enumeration capped at v_max={ENUMERATION_V_CAP}"
        )
    cells = {}
    for v in range(2, min(v_max, limits.max_vertices) + 1):
        pairs = all_pairs(v)
        labelings = limits.num_ops ** (v - 2)
        lo, hi = edge_bounds(v)
        for e in range(lo, hi + 1):
            n_subsets = 0
            n_valid = 0
            for subset in itertools.combinations(pairs, e):
                n_subsets += 1
                if _edges_valid(v, subset):
                    n_valid += 1
            cells[(v, e)] = TermCell(
                term_count=n_subsets * labelings,
                valid_count=n_valid * labelings,
            )
    return cells
