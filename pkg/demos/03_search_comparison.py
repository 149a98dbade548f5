"""Compare the four search strategies under one query budget.

Each strategy gets 300 surrogate queries.  Local search pays one query per
neighbour it inspects (so it only gets ~6 hill-climb steps per start);
episodic strategies pay one query per episode.  Outputs land in
demo_out/: per-strategy trace.csv / pareto.csv plus the aggregate summary.

Run:  python demos/03_search_comparison.py      (several minutes; the RL
      agent here trains for a fraction of the desk-scale default)
"""

from dataclasses import replace
from pathlib import Path

from nasforge import (
    AgentConfig,
    OracleConfig,
    RewardConfig,
    evaluate_suite,
    generate_corpus,
    fit,
)
from nasforge.search import (
    pareto_front_of_trace,
    pareto_snapshots,
    write_pareto_csv,
    write_suite_curves,
    write_suite_summary,
    write_trace_csv,
)

out = Path("demo_out")
out.mkdir(exist_ok=True)

print("fitting the gradient-boosted-trees surrogate...")
corpus = generate_corpus(OracleConfig(master_seed=0, noise_sigma=0.05, n_records=3000))
model = fit("gbt", corpus, seed=0)
reward_cfg = RewardConfig()

agent_cfg = replace(AgentConfig(), total_train_steps=30_000)  # demo-size training
print("running random / walk / local / rl at budget 300 (one seed)...")
runs = evaluate_suite(
    ("random", "walk", "local", "rl"),
    model,
    reward_cfg,
    budget=300,
    n_sets=1,
    set_size=400,
    seeds=(0,),
    agent_cfg=agent_cfg,
)

write_suite_summary(runs, out / "suite_summary.csv")
write_suite_curves(runs, 300, out / "suite_curves.csv")
for run in runs:
    write_trace_csv(run.trace, out / f"{run.strategy}_trace.csv")
    write_pareto_csv(pareto_snapshots(run.trace), out / f"{run.strategy}_pareto.csv")

print(f"\n{'strategy':<8}  best F1^  best params  best utility  adversarial")
for run in runs:
    print(
        f"{run.strategy:<8}  {run.best_f1:8.4f}  {run.best_params:11d}  "
        f"{run.best_utility:12.4f}  {run.adversarial_count:11d}"
    )
    front = pareto_front_of_trace(run.trace)
    pts = ", ".join(f"({p.predicted_f1:.3f}, {p.params})" for p in front[:4])
    print(f"          final front ({len(front)} pts): {pts} ...")
print(f"\nCSV outputs in {out}/")
