"""Inside the Q-learning agent: epsilons, replay, and greedy improvement.

Run:  python demos/04_agent_anatomy.py           (about a minute)
"""

import numpy as np

from nasforge import (
    AgentConfig,
    OracleConfig,
    RewardConfig,
    generate_corpus,
    fit,
    sample_uniform,
    train_agent,
    worker_epsilon,
)
from nasforge.qlearn import greedy_episode, save_checkpoint
from nasforge.search import Scorer

cfg = AgentConfig(total_train_steps=20_000)

print("per-worker exploration ladder:")
for w in range(cfg.num_workers):
    print(f"  worker {w}: epsilon = {worker_epsilon(w, cfg.num_workers):.6f}")

print("\ntraining on the synthetic-oracle surrogate...")
corpus = generate_corpus(OracleConfig(master_seed=0, noise_sigma=0.05, n_records=3000))
model = fit("gbt", corpus, seed=0)
reward_cfg = RewardConfig()
agent = train_agent(cfg, reward_cfg, model, seed=0)
print(f"  {agent.env_steps} environment steps, {agent.learner_steps} learner batches,"
      f" replay holds {len(agent.buffer)} transitions")

score = Scorer(model, reward_cfg)
rng = np.random.default_rng(7)
print("\ngreedy evaluation episodes (start utility -> final utility):")
gains = []
for _ in range(8):
    start = sample_uniform(rng)
    final = greedy_episode(agent, start)
    u0, u1 = score(start)[2], score(final)[2]
    gains.append(u1 - u0)
    print(f"  {u0:.3f} -> {u1:.3f}   ({start.num_vertices}v/{start.num_edges}e"
          f" -> {final.num_vertices}v/{final.num_edges}e)")
print(f"mean improvement: {np.mean(gains):+.3f}")

save_checkpoint(agent, "demo_out_agent.json")
print("\ncheckpoint written to demo_out_agent.json")
