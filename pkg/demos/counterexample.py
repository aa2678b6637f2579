"""Greedy gain-per-dollar is not optimal once there are three actions.

Run: python3 demos/counterexample.py
"""

from fairalloc import fileio
from fairalloc.policy import greedy_per_dollar, solve_policy, utility
from fairalloc.population import UtilitySpec

doc = fileio.load_population("src/fairalloc/data/counterexample.json")
pop, f = doc.population, doc.expected_rewards
spec = UtilitySpec(0.0, 1.0)

print("expected rewards f(x, k):")
for cid, row, cost in zip(pop.ids, f, pop.costs):
    print(f"  {cid}: f = {row.tolist()}  cost = {cost.tolist()}")

# the LP spends the whole budget on the context where the costly action pays off most in total
pi, u = solve_policy(pop, f, spec)
print("\nLP optimum, utility", round(u, 6))
print(pi.assignment)

# ranking contexts by gain per dollar picks the cheap action first and runs out of money
g = greedy_per_dollar(pop, f, spec.budget)
print("\ngreedy per dollar, utility", round(utility(g, pop, f, spec), 6))
print(g.assignment)
