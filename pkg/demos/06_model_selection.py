"""
Is the context worth its parameters?
====================================

Fit the model with and without the C/C context table and compare BIC.
"""

from ctxpairhmm import DATA_SET_1, SaemConfig, expand_reduced
from ctxpairhmm.selection import compare, fit_model, format_report
from ctxpairhmm.simulate import SimSpec, simulate_pair

X, Y, _ = simulate_pair(SimSpec(expand_reduced(DATA_SET_1), length=2000, seed=4))
fits = [fit_model(X, Y, label, SaemConfig(context=ctx, seed=4))[1]
        for label, ctx in (("context", "cpg"), ("no context", "off"))]
print(format_report(compare(fits)), end="")
