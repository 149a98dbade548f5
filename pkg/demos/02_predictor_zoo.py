"""Train the predictor zoo on a synthetic corpus and print the CV table.

The synthetic oracle stands in for a real corpus of trained-network scores;
its noise level is configurable.  Expect the linear models to do well (the
oracle is logistic-linear in the same features), trees close behind, and
the two random baselines to bring up the rear with near-zero correlations.

Run:  python demos/02_predictor_zoo.py          (takes a minute or two)
"""

from nasforge import OracleConfig, generate_corpus, cross_validate
from nasforge.surrogate import report_table

corpus = generate_corpus(OracleConfig(master_seed=0, noise_sigma=0.05, n_records=1500))
print(f"corpus: {len(corpus)} records over {len({r.arch for r in corpus})} architectures\n")

kinds = (
    "gbt", "random-forest", "ridge", "ols", "lasso", "sgd-linear",
    "knn", "radius-nn", "random-normal", "random-uniform",
)
reports = []
for kind in kinds:
    report = cross_validate(kind, corpus, seed=0)
    reports.append(report)
    print(f"  cross-validated {kind}")

print()
print(report_table(reports))
print("\n(percentages are mean +- std over the 5 validation folds)")
