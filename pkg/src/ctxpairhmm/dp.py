"""Forward/backward lattices, the alignment likelihood and a brute-force
path-enumeration oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import logsumexp

from ._kernels import backward_kernel, forward_kernel
from .model import InputError, ModelParams, encode

MAX_ENUMERATION = 14


class InstanceTooLargeError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class DpLattice:
    """Log-probabilities indexed ``(state, i, j)`` with ``i`` in ``0..n`` and
    ``j`` in ``0..m``.  Impossible cells hold ``-inf``.  For the backward
    direction ``loglik`` is the contraction at the origin."""

    direction: str
    values: np.ndarray
    x: np.ndarray
    y: np.ndarray
    loglik: float

    @property
    def n(self) -> int:
        return self.values.shape[1] - 1

    @property
    def m(self) -> int:
        return self.values.shape[2] - 1


@dataclass(frozen=True, eq=False)
class PosteriorLattice:
    """``probs[u, i, j]`` is the probability that the path visits ``(i, j)``
    in state ``u`` given both sequences."""

    probs: np.ndarray

    @property
    def n(self) -> int:
        return self.probs.shape[1] - 1

    @property
    def m(self) -> int:
        return self.probs.shape[2] - 1


def _prepare(X, Y):
    x, y = encode(X), encode(Y)
    if x.size == 0 or y.size == 0:
        raise InputError("both sequences must be nonempty")
    return x, y


def forward(theta: ModelParams, X, Y) -> DpLattice:
    x, y = _prepare(X, Y)
    lp, lp0, lf, lg, lh, lht = theta.log_tables()
    a = forward_kernel(x, y, lp, lp0, lf, lg, lh, lht)
    ll = float(logsumexp(a[:, -1, -1]))
    return DpLattice("forward", a, x, y, ll)


def backward(theta: ModelParams, X, Y) -> DpLattice:
    x, y = _prepare(X, Y)
    lp, lp0, lf, lg, lh, lht = theta.log_tables()
    b, ll = backward_kernel(x, y, lp, lp0, lf, lg, lh, lht)
    return DpLattice("backward", b, x, y, float(ll))


def log_likelihood(theta: ModelParams, X, Y) -> float:
    """Log-probability that the hidden path reaches ``(n, m)`` jointly with
    the observed sequences."""
    return forward(theta, X, Y).loglik


def posterior_state_probs(fwd: DpLattice, bwd: DpLattice, loglik: float | None = None) -> PosteriorLattice:
    if fwd.direction != "forward" or bwd.direction != "backward":
        raise InputError("expected a forward and a backward lattice")
    if fwd.values.shape != bwd.values.shape:
        raise InputError(f"lattice shapes differ: {fwd.values.shape} vs {bwd.values.shape}")
    if loglik is None:
        loglik = fwd.loglik
    with np.errstate(invalid="ignore"):
        s = np.add(fwd.values, bwd.values)
        s -= loglik
    # -inf + inf never happens for reachable cells; clear any such NaN anyway
    np.copyto(s, -np.inf, where=np.isnan(s))
    np.exp(s, out=s)
    return PosteriorLattice(s)


def posterior(theta: ModelParams, X, Y) -> PosteriorLattice:
    fwd = forward(theta, X, Y)
    return posterior_state_probs(fwd, backward(theta, X, Y), fwd.loglik)


# -- enumeration oracle ----------------------------------------------------

@lru_cache(maxsize=None)
def _bare_paths(n: int, m: int) -> tuple:
    """All monotone move sequences from (0, 0) to (n, m) using 'M', 'X', 'Y'."""
    if n == 0 and m == 0:
        return ((),)
    out = []
    if n > 0 and m > 0:
        out += [p + ("M",) for p in _bare_paths(n - 1, m - 1)]
    if n > 0:
        out += [p + ("X",) for p in _bare_paths(n - 1, m)]
    if m > 0:
        out += [p + ("Y",) for p in _bare_paths(n, m - 1)]
    return tuple(out)


def all_paths(n: int, m: int, regimes: int = 1) -> list[tuple]:
    """Every path in state labels ``0..K+1``, expanding each match over regimes."""
    K = regimes
    result = []
    for bare in _bare_paths(n, m):
        options = [range(K) if mv == "M" else ((K,) if mv == "X" else (K + 1,)) for mv in bare]
        stack = [()]
        for opts in options:
            stack = [p + (o,) for p in stack for o in opts]
        result.extend(stack)
    return result


def path_log_prob(theta: ModelParams, path, X, Y) -> float:
    """Joint log-probability of a path and the sequences, walking the path
    step by step.  Returns ``-inf`` when the path does not end at ``(n, m)``."""
    x, y = encode(X), encode(Y)
    K = theta.regimes
    i = j = 0
    total = 0.0
    prev = None
    for state in path:
        state = int(state)
        trans = theta.pi0[state] if prev is None else theta.pi[prev, state]
        if state < K:
            i, j = i + 1, j + 1
            if i > len(x) or j > len(y):
                return -math.inf
            if prev is not None and prev < K:
                e = theta.htilde[state, x[i - 2], y[j - 2], x[i - 1], y[j - 1]]
            else:
                e = theta.h[state, x[i - 1], y[j - 1]]
        elif state == K:
            i += 1
            if i > len(x):
                return -math.inf
            e = theta.f[x[i - 1]]
        else:
            j += 1
            if j > len(y):
                return -math.inf
            e = theta.g[y[j - 1]]
        if trans <= 0 or e <= 0:
            return -math.inf
        total += math.log(trans) + math.log(e)
        prev = state
    if (i, j) != (len(x), len(y)):
        return -math.inf
    return total


def enumerate_likelihood(theta: ModelParams, X, Y):
    """Exact likelihood by summing over every path; also returns the
    probability of each path (keys are tuples of state labels)."""
    x, y = _prepare(X, Y)
    n, m = len(x), len(y)
    if n + m > MAX_ENUMERATION:
        raise InstanceTooLargeError(f"n + m = {n + m} exceeds {MAX_ENUMERATION}")
    probs = {}
    for p in all_paths(n, m, theta.regimes):
        probs[p] = math.exp(path_log_prob(theta, p, x, y))
    total = math.fsum(probs.values())
    return (math.log(total) if total > 0 else -math.inf), probs


def enumerate_posterior(theta: ModelParams, X, Y) -> np.ndarray:
    """Posterior visit probabilities ``(state, i, j)`` from enumeration."""
    x, y = _prepare(X, Y)
    ll, probs = enumerate_likelihood(theta, x, y)
    K = theta.regimes
    out = np.zeros((K + 2, len(x) + 1, len(y) + 1))
    z = math.exp(ll)
    for path, p in probs.items():
        i = j = 0
        for s in path:
            if s < K or s == K:
                i += 1
            if s < K or s == K + 1:
                j += 1
            out[s, i, j] += p / z
    return out
