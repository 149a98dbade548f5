"""Synthetic ground truth for end-to-end pipeline runs.

The real corpus of trained-network scores is not reproducible here, so this
module supplies a deterministic stand-in: a logistic-linear function of the
same encoded features, plus seeded Gaussian noise.  Linear surrogates can
nearly saturate on it while tree models keep some headroom, and the
population median is calibrated to land near 0.64.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .archspace import (
    Architecture,
    SpaceLimits,
    DEFAULT_LIMITS,
    canonical_hash,
    encode_features,
    sample_uniform,
)
from .netbuild import count_params
from .surrogate import PerformanceRecord

TARGET_MEDIAN = 0.64
LOGIT_SPREAD = 0.8  # keeps most of the population out of the saturated tails
CALIBRATION_SAMPLES = 2048


@dataclass(frozen=True)
class OracleConfig:
    master_seed: int = 0
    noise_sigma: float = 0.05
    n_records: int = 3000
    seeds_per_arch: int = 3

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
        if self.seeds_per_arch < 1:
            raise ValueError("seeds_per_arch must be positive")


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


@lru_cache(maxsize=8)
def _oracle_weights(master_seed: int) -> tuple[np.ndarray, float]:
    """Draw and calibrate the logistic weights for one master seed.

    Weights start uniform in [-0.5, 0.5]; they are rescaled to a fixed logit
    spread over a reference sample, and the bias is set so the population
    median of the output sits at the target.
    """
    w = np.random.default_rng([master_seed, 1]).uniform(-0.5, 0.5, size=96)
    ref_rng = np.random.default_rng([master_seed, 2])
    ref = np.stack(
        [encode_features(sample_uniform(ref_rng)) for _ in range(CALIBRATION_SAMPLES)]
    )
    logits = ref @ w
    spread = logits.std()
    if spread > 0:
        w = w * (LOGIT_SPREAD / spread)
        logits = ref @ w
    bias = float(np.log(TARGET_MEDIAN / (1 - TARGET_MEDIAN)) - np.median(logits))
    return w, bias


def true_f1(arch: Architecture, cfg: OracleConfig) -> float:
    """Noise-free oracle value in (0, 1)."""
    w, b = _oracle_weights(cfg.master_seed)
    return float(_sigmoid(encode_features(arch) @ w + b))


def synth_f1(arch: Architecture, noise_seed: int, cfg: OracleConfig) -> float:
    """Oracle value plus per-(architecture, seed) Gaussian noise, in [0, 1]."""
    value = true_f1(arch, cfg)
    if cfg.noise_sigma > 0:
        rng = np.random.default_rng(
            [cfg.master_seed, canonical_hash(arch), noise_seed]
        )
        value += rng.normal(0.0, cfg.noise_sigma)
    return float(np.clip(value, 0.0, 1.0))


def generate_corpus(
    cfg: OracleConfig, limits: SpaceLimits = DEFAULT_LIMITS
) -> list[PerformanceRecord]:
    """Sample unique architectures and score each under every init seed.

    Produces exactly ``n_records`` records over ``n_records/seeds_per_arch``
    distinct architectures, reproducible byte for byte from the config.
    """
    if cfg.n_records % cfg.seeds_per_arch != 0:
        raise ValueError("n_records must be a multiple of seeds_per_arch")
    n_unique = cfg.n_records // cfg.seeds_per_arch
    rng = np.random.default_rng([cfg.master_seed, 3])
    seen: set[int] = set()
    archs: list[Architecture] = []
    while len(archs) < n_unique:
        arch = sample_uniform(rng, limits)
        key = canonical_hash(arch)
        if key not in seen:
            seen.add(key)
            archs.append(arch)
    records = []
    for arch in archs:
        params = count_params(arch)
        for seed in range(cfg.seeds_per_arch):
            records.append(
                PerformanceRecord(
                    arch=arch,
                    seed=seed,
                    f1_post_quant=synth_f1(arch, seed, cfg),
                    trainable_params=params,
                )
            )
    return records
