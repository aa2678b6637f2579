"""Appearances against the share of treatment given to the target group.

Run: python3 demos/pareto_tradeoff.py
"""

import numpy as np

from fairalloc.policy import feasible_range, pareto_frontier, reference_points
from fairalloc.population import gen_stylized_population

n, b = 20000, 1 / 3
pop, model, u = gen_stylized_population(n, 7)
f = model.mean()
y = model.potential_outcomes(np.arange(n), u)

lo, hi = feasible_range(pop, b, target=1)
print(f"feasible target-group shares: [{lo:.3f}, {hi:.3f}]")
for p in pareto_frontier(pop, f, b, np.linspace(lo, hi, 9), lam=0.01):
    bar = "#" * int(200 * (p.appearances - 0.3))
    print(f"q = {p.q:.3f}  appearances = {p.appearances:.4f}  penalty = {p.penalty:.4f}  {bar}")

print()
for name, p in reference_points(pop, f, b, y, lam=0.01)._asdict().items():
    print(f"{name:15s} appearances = {p.appearances:.4f}  utility = {p.utility:.4f}")
