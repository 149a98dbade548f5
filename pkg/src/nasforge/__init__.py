"""Multi-objective neural architecture search over labeled-DAG micro-networks.

The library samples, mutates, encodes, and sizes small DAG-shaped
classifier architectures; trains surrogate F1 predictors from performance
records; and compares search strategies (random, random walk, local
search, prioritized-replay Q-learning) under a shared query budget,
emitting traces and Pareto fronts.
"""

from .archspace import (
    Architecture,
    OP_LABELS,
    SpaceLimits,
    canonical_hash,
    encode_features,
    enumerate_terms,
    neighbours,
    sample_uniform,
    search_space_upper_bound,
    validate,
)
from .netbuild import count_params, forward, materialize, propagate_widths, worst_case_params
from .oracle import OracleConfig, generate_corpus, synth_f1
from .qlearn import AgentConfig, run_rl_search, train_agent, worker_epsilon
from .reward import RewardConfig, detect_adversarial, normalized_param_count, utility
from .search import (
    ParetoPoint,
    QueryBudget,
    evaluate_suite,
    hypervolume,
    pareto_snapshots,
    pareto_update,
    run_local_search,
    run_random_search,
    run_random_walk,
)
from .surrogate import (
    PerformanceRecord,
    REGRESSOR_KINDS,
    TrainedModel,
    cross_validate,
    fit,
    metrics,
    predict,
    read_records,
    split_cv,
    write_records,
)

__version__ = "0.1.0"
