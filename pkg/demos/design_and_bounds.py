"""How many samples does a randomized trial need before the plug-in policy is good enough?

Run: python3 demos/design_and_bounds.py
"""

import numpy as np

from fairalloc import fileio
from fairalloc.design import BoundQuery, g_optimal_design, sample_bound, verify_bound_empirically
from fairalloc.population import UtilitySpec

# tabular: round-robin sampling, exact bound
doc = fileio.load_population("src/fairalloc/data/tabular_2x2.json")
pop, f = doc.population, doc.model.mean()
q = BoundQuery("tabular", 0.5, 0.1, sigma=0.5, n_contexts=2, n_actions=2, p_min=float(pop.probs.min()))
res = sample_bound(q)
print("tabular bound:", res.n)
print(" ", res.expression)
frac, gaps = verify_bound_empirically(pop, f, UtilitySpec(0.0, 0.5), q, 50, np.random.default_rng(0),
                                      model=doc.model)
print(f"  gap < 0.5 in {frac:.0%} of 50 reps, median gap {np.median(gaps):.4f}")

# linear: the G-optimal design pins c at sqrt(d)
pop = fileio.load_population("src/fairalloc/data/design_2x2.json").population
des = g_optimal_design(pop)
print("\nG-optimal design (rows are contexts):")
print(des.assignment.round(4))
print(f"  g = {des.g:.6f} (d = 2), c = {des.c:.4f}, rho0 = {des.rho0:.4f}")
lin = sample_bound(BoundQuery("linear", 0.5, 0.1, sigma=0.5, d=2, rho0=des.rho0, c=des.c))
print("linear bound (constant 1):", lin.n, "burn-in and main terms:", [round(t, 1) for t in lin.terms])
