"""
Recovering the four rates with SAEM
===================================

Simulate a 2000-move alignment, then fit (alpha, beta, gamma, lambda)
with 150 iterations: 100 with step size 1, then decreasing steps.
Takes about half a minute.
"""

from ctxpairhmm import DATA_SET_1, REDUCED_START, SaemConfig, expand_reduced, saem_fit
from ctxpairhmm.simulate import SimSpec, simulate_pair

X, Y, _ = simulate_pair(SimSpec(expand_reduced(DATA_SET_1), length=2000, seed=1))
trace = saem_fit(X, Y, REDUCED_START, SaemConfig(mode="reduced", seed=1))

for r in (0, 9, 49, 99, 149):
    e = trace.evo[r]
    print(f"iteration {r + 1:3d}: alpha={e.alpha:.4f} beta={e.beta:.4f} gamma={e.gamma:.4f} lambda={e.lam:.4f}")
print("truth:          alpha=0.4000 beta=0.2000 gamma=0.0600 lambda=0.0400")
