import numpy as np
import pytest

from ctxpairhmm.model import ModelParams, decode


def random_params(rng, regimes=1, concentration=1.0):
    """Arbitrary strictly positive parameters, including a full 16-context htilde."""
    K = regimes
    S = K + 2

    def simplex(*shape):
        w = rng.gamma(concentration, size=shape) + 1e-3
        return w / w.sum(axis=-1, keepdims=True)

    pi = simplex(S, S)
    pi0 = simplex(S)
    f, g = simplex(4), simplex(4)
    h = simplex(K, 16).reshape(K, 4, 4)
    ht = simplex(K, 4, 4, 16).reshape(K, 4, 4, 4, 4)
    return ModelParams(pi, pi0, f, g, h, ht)


def random_seq(rng, length):
    return decode(rng.integers(0, 4, size=length))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.RESULTS:
        terminalreporter.write_line(line)
