import numpy as np
import pytest

from nasforge.archspace import sample_uniform
from nasforge.netbuild import count_params
from nasforge.oracle import OracleConfig, generate_corpus
from nasforge.surrogate import PerformanceRecord


@pytest.fixture(scope="session")
def clean_corpus():
    """Noise-free oracle corpus, 900 records over 300 architectures."""
    return generate_corpus(OracleConfig(master_seed=0, noise_sigma=0.0, n_records=900))


@pytest.fixture(scope="session")
def noisy_corpus():
    return generate_corpus(OracleConfig(master_seed=0, noise_sigma=0.05, n_records=1200))


def make_records(n, seed, f1_values=None):
    """Records over distinct sampled architectures with assignable targets."""
    rng = np.random.default_rng(seed)
    archs = []
    seen = set()
    while len(archs) < n:
        a = sample_uniform(rng)
        if a not in seen:
            seen.add(a)
            archs.append(a)
    if f1_values is None:
        f1_values = rng.uniform(0, 1, size=n)
    return [
        PerformanceRecord(a, 0, float(f1), count_params(a))
        for a, f1 in zip(archs, f1_values)
    ]
