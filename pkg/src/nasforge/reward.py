"""Scalar utility combining predicted F1 and normalized model size.

Every search strategy maximizes one number: an equally weighted linear
combination of the (optionally clamped) predicted F1 score and one minus
the parameter count normalized into [0, 1].  The normalization ceiling is
computed from the network ruleset at startup rather than hard-coded, so
the two modules cannot drift apart.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

from .netbuild import worst_case_params

PARAMS_FLOOR = 17  # the two-vertex architecture: a 16-weight projection plus bias


@dataclass(frozen=True)
class RewardConfig:
    weight_f1: float = 0.5
    weight_params: float = 0.5
    params_min: int = PARAMS_FLOOR
    params_max: int = field(default_factory=worst_case_params)
    clamp_predictions: bool = True

    def __post_init__(self):
        if abs(self.weight_f1 + self.weight_params - 1.0) > 1e-12:
            raise ValueError("objective weights must sum to 1")
        if not 0.0 <= self.weight_f1 <= 1.0:
            raise ValueError("weight_f1 must lie in [0, 1]")
        if self.params_min >= self.params_max:
            raise ValueError("params_min must be below params_max")


def normalized_param_count(params: int, cfg: RewardConfig) -> float:
    """Map a parameter count linearly onto [0, 1] between the space bounds.

    Out-of-range counts (possible for wide attention nodes) are clamped
    with a warning rather than rejected.
    """
    if params < cfg.params_min or params > cfg.params_max:
        warnings.warn(
            f"parameter count {params} outside [{cfg.params_min}, {cfg.params_max}]; "
            "clamping for normalization",
            stacklevel=2,
        )
        params = min(max(params, cfg.params_min), cfg.params_max)
    return (params - cfg.params_min) / (cfg.params_max - cfg.params_min)


def utility(predicted_f1: float, params: int, cfg: RewardConfig) -> float:
    """Scalarized objective; higher is better on both axes."""
    f1 = predicted_f1
    if cfg.clamp_predictions:
        f1 = min(max(f1, 0.0), 1.0)
    return cfg.weight_f1 * f1 + cfg.weight_params * (
        1.0 - normalized_param_count(params, cfg)
    )


def detect_adversarial(predicted_f1: float) -> bool:
    """True iff a surrogate prediction escaped the feasible F1 range."""
    return predicted_f1 > 1.0 or predicted_f1 < 0.0
