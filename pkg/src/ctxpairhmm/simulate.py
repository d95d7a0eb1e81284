"""Draw hidden paths and sequence pairs from a pair-HMM."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import DomainError, ModelParams, decode
from .sampler import AlignmentPath


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class SimSpec:
    """Exactly one stop rule: ``length`` moves, or the first hit of ``endpoint``."""

    theta: ModelParams
    length: int | None = None
    endpoint: tuple | None = None
    seed: int | None = None

    def __post_init__(self):
        if (self.length is None) == (self.endpoint is None):
            raise DomainError("set exactly one of length and endpoint")
        if self.length is not None and self.length < 1:
            raise DomainError("length must be >= 1")
        if self.endpoint is not None and (min(self.endpoint) < 0 or sum(self.endpoint) < 1):
            raise DomainError("endpoint must be nonnegative and not the origin")


def _categorical(cdf, u):
    return min(int(np.searchsorted(cdf, u, side="right")), cdf.size - 1)


def simulate_pair(spec: SimSpec):
    """Return ``(X, Y, path)``: two nucleotide strings and the true path."""
    theta = spec.theta
    K = theta.regimes
    rng = np.random.default_rng(spec.seed)
    pi_cdf = np.cumsum(theta.pi, axis=1)
    pi0_cdf = np.cumsum(theta.pi0)
    f_cdf, g_cdf = np.cumsum(theta.f), np.cumsum(theta.g)
    h_cdf = np.cumsum(theta.h.reshape(K, 16), axis=1)
    ht_cdf = np.cumsum(theta.htilde.reshape(K, 4, 4, 16), axis=3)

    moves, xs, ys = [], [], []
    prev = None
    i = j = 0
    while True:
        if spec.length is not None and len(moves) == spec.length:
            break
        if spec.endpoint is not None:
            n, m = spec.endpoint
            if (i, j) == (n, m):
                break
            if i > n or j > m:
                raise SimulationError(f"path passed {spec.endpoint} without hitting it")
        u = rng.random(2)
        state = _categorical(pi0_cdf if prev is None else pi_cdf[prev], u[0])
        if state < K:
            if prev is not None and prev < K:
                cell = _categorical(ht_cdf[state, xs[-1], ys[-1]], u[1])
            else:
                cell = _categorical(h_cdf[state], u[1])
            xs.append(cell // 4)
            ys.append(cell % 4)
            i, j = i + 1, j + 1
        elif state == K:
            xs.append(_categorical(f_cdf, u[1]))
            i += 1
        else:
            ys.append(_categorical(g_cdf, u[1]))
            j += 1
        moves.append(state)
        prev = state
    return decode(xs), decode(ys), AlignmentPath(np.array(moves), K)


def stationary_distribution(pi: np.ndarray) -> np.ndarray:
    """Left eigenvector of ``pi`` for eigenvalue 1, normalized."""
    w, v = np.linalg.eig(pi.T)
    vec = np.real(v[:, np.argmin(np.abs(w - 1.0))])
    return vec / vec.sum()
