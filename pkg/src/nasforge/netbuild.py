"""Width propagation, parameter counting, and a reference forward pass.

Turning a labeled DAG into an actual network requires a convention for how
many features each node emits.  The rules here: the input node passes its
16 features through untouched, every node concatenates its predecessors'
outputs (ascending index) before applying its operation, linear-family ops
always emit 16 features, convolution / pooling / attention ops preserve
their input width, and the output node projects its concatenation to a
single probability.

The materialized network exists to back the counting rules with real
tensors: its parameter blocks must total exactly ``count_params`` and its
forward pass must run shape-clean on every valid architecture.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .archspace import Architecture, SpaceLimits, DEFAULT_LIMITS, all_pairs

INPUT_FEATURES = 16
LINEAR_WIDTH = 16

LINEAR_OPS = {"linear", "linear-relu", "linear-relu6", "linear-tanh", "linear-prelu"}
CONV_KERNEL = {"conv-3": 3, "conv-5": 5}
POOL_KERNEL = {"max-pool-3": 3, "max-pool-5": 5}


class ShapeMismatchError(RuntimeError):
    """A tensor disagreed with the propagated widths; a ruleset bug."""


@dataclass(frozen=True)
class WidthMap:
    """Per-vertex input and output feature counts."""

    in_widths: tuple[int, ...]
    out_widths: tuple[int, ...]


def _predecessors(arch: Architecture) -> list[list[int]]:
    preds: list[list[int]] = [[] for _ in range(arch.num_vertices)]
    for i, j in arch.edges:
        preds[j].append(i)
    for p in preds:
        p.sort()
    return preds


def _op_out_width(op: str, w_in: int) -> int:
    return LINEAR_WIDTH if op in LINEAR_OPS else w_in


def propagate_widths(arch: Architecture) -> WidthMap:
    """Compute every node's concatenated input width and output width."""
    v = arch.num_vertices
    preds = _predecessors(arch)
    in_w = [0] * v
    out_w = [0] * v
    in_w[0] = INPUT_FEATURES
    out_w[0] = INPUT_FEATURES
    for j in range(1, v):
        in_w[j] = sum(out_w[i] for i in preds[j])
        if j == v - 1:
            out_w[j] = 1
        else:
            out_w[j] = _op_out_width(arch.ops[j - 1], in_w[j])
    return WidthMap(tuple(in_w), tuple(out_w))


def _node_param_count(op: str, w_in: int) -> int:
    if op == "linear-prelu":
        return w_in * LINEAR_WIDTH + LINEAR_WIDTH + LINEAR_WIDTH
    if op in LINEAR_OPS:
        return w_in * LINEAR_WIDTH + LINEAR_WIDTH
    if op in CONV_KERNEL:
        return CONV_KERNEL[op] + 1
    if op in POOL_KERNEL:
        return 0
    if op == "spectral-attn":
        return w_in * w_in + w_in
    raise ValueError(f"unknown op label {op!r}")


def count_params(arch: Architecture) -> int:
    """Total trainable parameters under the width ruleset.

    Linear-family nodes cost w_in*16+16 (PReLU adds 16 per-feature slopes),
    convolutions cost kernel+bias on a single channel, pooling is free,
    spectral attention carries a square gating projection, and the output
    node is a w+1 projection to the probability.
    """
    widths = propagate_widths(arch)
    v = arch.num_vertices
    total = widths.in_widths[v - 1] + 1  # output projection
    for j in range(1, v - 1):
        total += _node_param_count(arch.ops[j - 1], widths.in_widths[j])
    return total


def worst_case_params(limits: SpaceLimits = DEFAULT_LIMITS) -> int:
    """Parameter count of the complete graph with every node linear-prelu.

    This is the normalization ceiling for the parameter objective; a test
    asserts no sampled architecture exceeds it.
    """
    v = limits.max_vertices
    arch = Architecture(v, tuple(all_pairs(v)), tuple(["linear-prelu"] * (v - 2)))
    return count_params(arch)


@dataclass(frozen=True)
class MaterializedNetwork:
    """Concrete parameter blocks for one architecture.

    ``params[j]`` maps block names to arrays for vertex j; the output vertex
    holds ``w`` (projection) and ``b`` (scalar bias).  Immutable by
    convention: share freely, never mutate.
    """

    arch: Architecture
    params: dict[int, dict[str, np.ndarray]]
    total_params: int


def materialize(arch: Architecture, init_seed: int) -> MaterializedNetwork:
    """Allocate and initialize parameter blocks matching count_params.

    Weight blocks are uniform in [-1/sqrt(w_in), +1/sqrt(w_in)], biases are
    zero, PReLU slopes start at 0.25.  Deterministic given the seed.
    """
    rng = np.random.default_rng(init_seed)
    widths = propagate_widths(arch)
    v = arch.num_vertices
    params: dict[int, dict[str, np.ndarray]] = {}

    def weight(shape, w_in):
        bound = 1.0 / np.sqrt(w_in)
        return rng.uniform(-bound, bound, size=shape)

    for j in range(1, v - 1):
        op = arch.ops[j - 1]
        w_in = widths.in_widths[j]
        blocks: dict[str, np.ndarray] = {}
        if op in LINEAR_OPS:
            blocks["w"] = weight((w_in, LINEAR_WIDTH), w_in)
            blocks["b"] = np.zeros(LINEAR_WIDTH)
            if op == "linear-prelu":
                blocks["slope"] = np.full(LINEAR_WIDTH, 0.25)
        elif op in CONV_KERNEL:
            k = CONV_KERNEL[op]
            blocks["kernel"] = weight(k, w_in)
            blocks["b"] = np.zeros(1)
        elif op in POOL_KERNEL:
            pass
        elif op == "spectral-attn":
            blocks["gate_w"] = weight((w_in, w_in), w_in)
            blocks["gate_b"] = np.zeros(w_in)
        params[j] = blocks

    w_out = widths.in_widths[v - 1]
    params[v - 1] = {"w": weight(w_out, w_out), "b": np.zeros(1)}

    total = sum(b.size for blocks in params.values() for b in blocks.values())
    return MaterializedNetwork(arch=arch, params=params, total_params=total)


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _sliding_max(x: np.ndarray, k: int) -> np.ndarray:
    # "same" pooling with the window clipped at the edges, so pooling a
    # constant vector returns it unchanged
    pad = (k - 1) // 2
    padded = np.pad(x, pad, constant_values=-np.inf)
    windows = np.lib.stride_tricks.sliding_window_view(padded, k)
    return windows.max(axis=1)


def _apply_op(op: str, x: np.ndarray, blocks: dict[str, np.ndarray]) -> np.ndarray:
    if op in LINEAR_OPS:
        if blocks["w"].shape[0] != x.shape[0]:
            raise ShapeMismatchError(
                f"{op} expected width {blocks['w'].shape[0]}, got {x.shape[0]}"
            )
        y = x @ blocks["w"] + blocks["b"]
        if op == "linear-relu":
            return np.maximum(y, 0.0)
        if op == "linear-relu6":
            return np.clip(y, 0.0, 6.0)
        if op == "linear-tanh":
            return np.tanh(y)
        if op == "linear-prelu":
            return np.where(y > 0, y, blocks["slope"] * y)
        return y
    if op in CONV_KERNEL:
        k = CONV_KERNEL[op]
        pad = (k - 1) // 2
        return np.correlate(np.pad(x, pad), blocks["kernel"], mode="valid") + blocks["b"]
    if op in POOL_KERNEL:
        return _sliding_max(x, POOL_KERNEL[op])
    if op == "spectral-attn":
        if blocks["gate_w"].shape[0] != x.shape[0]:
            raise ShapeMismatchError(
                f"spectral-attn expected width {blocks['gate_w'].shape[0]}, "
                f"got {x.shape[0]}"
            )
        gate = _sigmoid(blocks["gate_w"] @ x + blocks["gate_b"])
        return gate * x
    raise ValueError(f"unknown op label {op!r}")


def forward(net: MaterializedNetwork, pixel: np.ndarray) -> float:
    """Evaluate the network on one 16-feature pixel vector.

    Nodes are evaluated in index order (already topological); each node
    concatenates its predecessors' outputs in ascending index.  The result
    is sigmoid(projection), strictly inside (0, 1).
    """
    x = np.asarray(pixel, dtype=float)
    if x.shape != (INPUT_FEATURES,):
        raise ShapeMismatchError(f"expected {INPUT_FEATURES} input features, got {x.shape}")
    arch = net.arch
    v = arch.num_vertices
    preds = _predecessors(arch)
    outputs: list[np.ndarray | None] = [None] * v
    outputs[0] = x
    for j in range(1, v - 1):
        concat = np.concatenate([outputs[i] for i in preds[j]])
        outputs[j] = _apply_op(arch.ops[j - 1], concat, net.params[j])
    concat = np.concatenate([outputs[i] for i in preds[v - 1]])
    out = net.params[v - 1]
    if out["w"].shape[0] != concat.shape[0]:
        raise ShapeMismatchError(
            f"output expected width {out['w'].shape[0]}, got {concat.shape[0]}"
        )
    return float(_sigmoid(out["w"] @ concat + out["b"][0]))
