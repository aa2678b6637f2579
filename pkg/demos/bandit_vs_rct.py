"""A small online-learning run on the synthetic court-appearance population.

The full experiment is `fairalloc simulate synthetic --seed 1 --out sim/`
(500 replications, about ten minutes); this one takes a few seconds.

Run: python3 demos/bandit_vs_rct.py
"""

from fairalloc.bandit import ExperimentConfig, LearnerConfig, run_experiment, summarize
from fairalloc.population import SyntheticPopConfig, UtilitySpec, gen_structural_population

pop, model, attrs = gen_structural_population(SyntheticPopConfig(n=2000), 0)
spec = UtilitySpec(0.004, 5.0)
learners = [LearnerConfig(m) for m in ("rct", "rct_stop_at_n", "egreedy", "thompson", "ucb")]
cfg = ExperimentConfig(n=500, reps=8, seed=3, candidates=300, snapshot_every=100)
trace = run_experiment(pop, model, spec, learners, config=cfg)

print(f"{'method':15s} {'regret':>8s} {'% of optimal':>13s} {'spend':>7s}")
for m in ["oracle"] + list(trace.methods):
    s = summarize(trace, m)
    print(f"{m:15s} {s.regret_mean[-1]:8.2f} {s.pct_mean[-1]:13.2f} {s.spend_per_person.mean():7.3f}")
