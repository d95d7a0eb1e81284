"""
Likelihood of a sequence pair
=============================

The forward lattice sums over every alignment path.  On tiny inputs the
same number comes out of brute-force enumeration.
"""

import math

from ctxpairhmm import DATA_SET_1, expand_reduced
from ctxpairhmm.dp import enumerate_likelihood, forward, backward, posterior_state_probs

theta = expand_reduced(DATA_SET_1)
X, Y = "ACGTC", "ACTC"

fwd = forward(theta, X, Y)
exact, paths = enumerate_likelihood(theta, X, Y)
print(f"forward: {fwd.loglik:.12f}  enumeration over {len(paths)} paths: {exact:.12f}")

# the backward pass contracts to the same value at the origin
bwd = backward(theta, X, Y)
print(f"backward: {bwd.loglik:.12f}")

# posterior probability of each cell and state
post = posterior_state_probs(fwd, bwd).probs
print("P(match ends at (i, j)):")
print(post[0].round(3))

best = max(paths, key=paths.get)
print("most likely single path:", best, f"p = {paths[best] / math.exp(exact):.3f} of the total")
