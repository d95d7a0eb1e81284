"""
Sampling alignments and building a consensus
=============================================

Paths are drawn from their exact conditional law given both sequences.
The consensus is the sampled path with the highest complete likelihood,
annotated with how often the other samples agree at each column.
"""

from ctxpairhmm import DATA_SET_1, expand_reduced
from ctxpairhmm.sampler import consensus_alignment, sample_paths
from ctxpairhmm.simulate import SimSpec, simulate_pair

theta = expand_reduced(DATA_SET_1)
X, Y, true_path = simulate_pair(SimSpec(theta, length=60, seed=3))

samples = sample_paths(theta, X, Y, 500, seed=1)
res = consensus_alignment(samples, X, Y, theta)

print("true alignment:")
print(true_path.alignment_text(X, Y))
print("\nconsensus of 500 samples:")
print(res.consensus.alignment_text(X, Y))

# the least certain columns
order = res.column_posteriors.max(axis=1).argsort()[:5]
for c in sorted(order):
    print(f"column {c + 1}: match/insert/delete = {res.column_posteriors[c].round(2)}, support {res.support[c]:.2f}")
