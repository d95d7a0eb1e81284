"""
Building model parameters from evolutionary rates
=================================================

Four rates (alpha, beta, gamma, lambda) and a base composition mu fix
every table of the context model.
"""

import numpy as np

from ctxpairhmm import DATA_SET_1, expand_reduced, validate_params
from ctxpairhmm.model import ALPHABET, C

np.set_printoptions(precision=4, suppress=True)

theta = expand_reduced(DATA_SET_1)

# transitions between the states M, IX, IY
print("pi =\n", theta.pi)

# match emissions without context, and after a C/C match
print("h =\n", theta.h[0])
print("h after C/C =\n", theta.htilde[0, C, C])

# the row sums of both emission tables give back mu
print("row sums of h:", theta.h[0].sum(axis=1), "mu:", DATA_SET_1.mu)

# the tables separate h from f*g and htilde from h, so all three
# identifiability conditions hold
report = validate_params(theta)
print("stochastic:", report.stochastic_ok, "identifiability:", report.identifiability)
print("alphabet order:", ALPHABET)
