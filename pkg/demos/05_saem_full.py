"""
Fitting every table
===================

Full mode estimates pi, f, g, h and the C/C context table directly,
starting from flat tables.  Pseudo-counts keep unseen events away from
zero during the first 100 iterations.
"""

import numpy as np

from ctxpairhmm import DATA_SET_1, SaemConfig, expand_reduced, saem_fit, uniform_params
from ctxpairhmm.model import C
from ctxpairhmm.simulate import SimSpec, simulate_pair

np.set_printoptions(precision=4, suppress=True)
theta = expand_reduced(DATA_SET_1)
X, Y, _ = simulate_pair(SimSpec(theta, length=2000, seed=1))
fit = saem_fit(X, Y, uniform_params(), SaemConfig(seed=2)).final

print("pi estimate\n", fit.pi, "\ntruth\n", theta.pi)
print("h estimate diagonal", np.diag(fit.h[0]), "truth", np.diag(theta.h[0]))
print("C/C table diagonal", np.diag(fit.htilde[0, C, C]), "truth", np.diag(theta.htilde[0, C, C]))
