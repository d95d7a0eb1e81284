"""Complete-data statistics, closed-form and reduced M-steps, SEM and SAEM."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize

from .model import (
    C,
    DomainError,
    EvoParams,
    InputError,
    ModelParams,
    encode,
    expand_reduced,
    hky_context_emission,
    jc_emission,
    tkf91_transition,
)
from .sampler import AlignmentPath, forward_scaled, sample_paths

log = logging.getLogger(__name__)

CONTEXT_MODES = ("cpg", "full", "off")
DEFAULT_FLOOR = 1e-8
DEFAULT_BOUNDS = ((1e-4, 5.0),) * 4  # alpha, beta, gamma, lambda


class DegenerateStatisticsError(ValueError):
    """An M-step ratio has a zero denominator and no pseudo-count."""


@dataclass
class CountStats:
    """Event counts of the complete log-likelihood.

    ``init`` counts the first move, ``trans[u, v]`` consecutive moves,
    ``ix``/``iy`` inserted letters, ``match[k, a, b]`` matches not preceded by
    a match and ``context[k, c, d, a, b]`` matches preceded by a match that
    aligned ``c`` with ``d``.
    """

    init: np.ndarray
    trans: np.ndarray
    ix: np.ndarray
    iy: np.ndarray
    match: np.ndarray
    context: np.ndarray

    _fields = ("init", "trans", "ix", "iy", "match", "context")

    @classmethod
    def zeros(cls, regimes: int = 1) -> "CountStats":
        S = regimes + 2
        return cls(np.zeros(S), np.zeros((S, S)), np.zeros(4), np.zeros(4),
                   np.zeros((regimes, 4, 4)), np.zeros((regimes, 4, 4, 4, 4)))

    @property
    def regimes(self) -> int:
        return self.match.shape[0]

    def _map(self, fn, other=None):
        if other is None:
            return CountStats(*(fn(getattr(self, k)) for k in self._fields))
        return CountStats(*(fn(getattr(self, k), getattr(other, k)) for k in self._fields))

    def __add__(self, other):
        return self._map(np.add, other)

    def __sub__(self, other):
        return self._map(np.subtract, other)

    def __mul__(self, scalar):
        return self._map(lambda a: a * scalar)

    __rmul__ = __mul__

    def copy(self):
        return self._map(np.copy)

    @classmethod
    def mean(cls, stats):
        stats = list(stats)
        total = stats[0]
        for s in stats[1:]:
            total = total + s
        return total * (1.0 / len(stats))

    def emission_total(self) -> float:
        return float(self.ix.sum() + self.iy.sum() + self.match.sum() + self.context.sum())

    def as_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in self._fields}


def sufficient_counts(path: AlignmentPath, X, Y) -> CountStats:
    x, y = encode(X), encode(Y)
    path.check(len(x), len(y))
    K = path.regimes
    mv = path.moves.astype(np.int64)
    c = CountStats.zeros(K)
    c.init[mv[0]] = 1
    np.add.at(c.trans, (mv[:-1], mv[1:]), 1)
    di, dj = path.steps
    ii = np.cumsum(di) - 1
    jj = np.cumsum(dj) - 1
    is_ix = mv == K
    is_iy = mv == K + 1
    c.ix += np.bincount(x[ii[is_ix]], minlength=4)
    c.iy += np.bincount(y[jj[is_iy]], minlength=4)
    is_m = mv < K
    prev_m = np.concatenate([[False], is_m[:-1]])
    plain = is_m & ~prev_m
    ctx = np.flatnonzero(is_m & prev_m)
    np.add.at(c.match, (mv[plain], x[ii[plain]], y[jj[plain]]), 1)
    np.add.at(c.context, (mv[ctx], x[ii[ctx - 1]], y[jj[ctx - 1]], x[ii[ctx]], y[jj[ctx]]), 1)
    return c


def _xlogy(counts, probs):
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(counts > 0, counts * np.log(probs), 0.0)
    return float(terms.sum())


def complete_log_likelihood(counts: CountStats, theta: ModelParams) -> float:
    """Sum of counts times log-parameters; for the counts of a single path
    this is the joint log-probability of the path and both sequences."""
    return (
        _xlogy(counts.init, theta.pi0)
        + _xlogy(counts.trans, theta.pi)
        + _xlogy(counts.ix, theta.f)
        + _xlogy(counts.iy, theta.g)
        + _xlogy(counts.match, theta.h)
        + _xlogy(counts.context, theta.htilde)
    )


def _normalize(counts, pseudo, axes, block):
    num = counts + pseudo
    den = num.sum(axis=axes, keepdims=True)
    if np.any(den <= 0):
        raise DegenerateStatisticsError(f"no observed events for {block} and no pseudo-count")
    return num / den


def _pool_match(counts: CountStats, context: str):
    """Counts that feed ``h`` and the context blocks that get their own table."""
    if context == "off":
        return counts.match + counts.context.sum(axis=(1, 2)), None
    if context == "cpg":
        other = counts.context.sum(axis=(1, 2)) - counts.context[:, C, C]
        return counts.match + other, counts.context[:, C, C]
    return counts.match, counts.context


def m_step_full(counts: CountStats, pseudo: float = 0.0, context: str = "cpg") -> ModelParams:
    """Closed-form maximizer of the complete log-likelihood given counts.

    ``context`` chooses the structure of the context tables: ``"cpg"`` gives
    a separate table only after a C/C match, ``"full"`` one per previous
    pair, ``"off"`` ties every context table to ``h``.  The start
    distribution is tied to the first match row of ``pi``, so first-move
    counts are pooled into that row.
    """
    if pseudo < 0:
        raise DomainError("pseudo-count must be >= 0")
    if context not in CONTEXT_MODES:
        raise DomainError(f"context must be one of {CONTEXT_MODES}")
    K = counts.regimes
    trans = counts.trans.copy()
    trans[0] += counts.init
    pi = _normalize(trans, pseudo, 1, "transitions")
    f = _normalize(counts.ix, pseudo, 0, "I_X emissions")
    g = _normalize(counts.iy, pseudo, 0, "I_Y emissions")
    base, ctx = _pool_match(counts, context)
    h = _normalize(base, pseudo, (1, 2), "match emissions")
    if context == "off":
        htilde = np.broadcast_to(h[:, None, None], (K, 4, 4, 4, 4)).copy()
    elif context == "cpg":
        htilde = np.broadcast_to(h[:, None, None], (K, 4, 4, 4, 4)).copy()
        htilde[:, C, C] = _normalize(ctx, pseudo, (1, 2), "C/C context emissions")
    else:
        htilde = _normalize(ctx, pseudo, (3, 4), "context emissions")
    return ModelParams(pi=pi, pi0=pi[0].copy(), f=f, g=g, h=h, htilde=htilde)


def apply_floor(theta: ModelParams, floor: float = DEFAULT_FLOOR) -> ModelParams:
    """Raise every entry to at least ``floor`` and renormalize each block."""
    if floor <= 0:
        return theta

    def fl(a, axes):
        a = np.maximum(a, floor)
        return a / a.sum(axis=axes, keepdims=True)

    pi = fl(theta.pi, 1)
    return ModelParams(pi=pi, pi0=fl(theta.pi0, 0), f=fl(theta.f, 0), g=fl(theta.g, 0),
                       h=fl(theta.h, (1, 2)), htilde=fl(theta.htilde, (3, 4)))


# -- reduced parametrization ---------------------------------------------

@dataclass
class ReducedFit:
    evo: EvoParams
    q: float
    q_start: float
    improved: bool
    weakly_identified: bool


def _reduced_blocks(counts: CountStats):
    if counts.regimes != 1:
        raise InputError("the reduced parametrization has a single match regime")
    trans = counts.trans.copy()
    trans[0] += counts.init
    base, cc = _pool_match(counts, "cpg")
    return trans, counts.ix + counts.iy, base[0], cc[0]


def reduced_q(counts: CountStats, evo: EvoParams) -> float:
    """Complete log-likelihood of ``counts`` at ``expand_reduced(evo)``."""
    trans, fg, base, cc = _reduced_blocks(counts)
    mu = np.array(evo.mu)
    return (
        _xlogy(trans, tkf91_transition(evo.lam))
        + _xlogy(fg, mu)
        + _xlogy(base, jc_emission(evo.gamma, mu))
        + _xlogy(cc, hky_context_emission(evo.alpha, evo.beta, mu))
    )


def m_step_reduced(counts: CountStats, start: EvoParams, bounds=DEFAULT_BOUNDS,
                   max_restarts: int = 5) -> ReducedFit:
    """Maximize the complete log-likelihood over (alpha, beta, gamma, lambda)
    with a bounded Nelder-Mead search in log-rate coordinates, restarting
    from the incumbent until it stops improving.  The base frequencies stay
    at ``start.mu``."""
    box = np.asarray(bounds, dtype=float)
    if box.shape != (4, 2) or np.any(box[:, 0] <= 0) or np.any(box[:, 0] >= box[:, 1]):
        raise DomainError("bounds must be strictly positive intervals")
    lo, hi = np.log(box[:, 0]), np.log(box[:, 1])
    mu = start.mu
    weak = bool(_reduced_blocks(counts)[3].sum() == 0)
    x_start = np.log([start.alpha, start.beta, start.gamma, start.lam])
    free = np.array([not weak, not weak, True, True])

    def unpack(z):
        full = x_start.copy()
        full[free] = z
        a, b, gm, lm = (float(v) for v in np.exp(np.clip(full, lo, hi)))
        return EvoParams(alpha=a, beta=b, gamma=gm, lam=lm, mu=mu)

    def objective(z):
        q = reduced_q(counts, unpack(z))
        return -q if np.isfinite(q) else np.inf

    q_start = reduced_q(counts, start)
    z = np.clip(x_start, lo, hi)[free]
    best = objective(z)
    for _ in range(max_restarts + 1):
        res = minimize(objective, z, method="Nelder-Mead",
                       bounds=list(zip(lo[free], hi[free])),
                       options={"xatol": 1e-9, "fatol": 1e-11, "maxiter": 4000, "maxfev": 8000})
        if res.fun < best - 1e-12:
            best, z = res.fun, res.x
        else:
            break
    evo = unpack(z)
    q = reduced_q(counts, evo)
    improved = q >= q_start - 1e-9
    if not improved:
        warnings.warn("reduced M-step did not improve on its starting point", RuntimeWarning)
        evo, q = start, q_start
    return ReducedFit(evo=evo, q=q, q_start=q_start, improved=improved, weakly_identified=weak)


# -- SEM / SAEM --------------------------------------------------------

@dataclass(frozen=True)
class SaemConfig:
    """Iteration budget and schedules.

    The step size is 1 for ``r <= burn_in`` and ``1 / (r - burn_in)``
    afterwards unless ``step_sizes`` overrides it.  ``paths_schedule`` lists
    ``(last_iteration, count)`` pairs; ``None`` as last iteration means
    "until the end".  Pseudo-counts apply during burn-in only (full mode).
    """

    iterations: int = 150
    burn_in: int = 100
    paths_schedule: tuple = ((20, 5), (None, 10))
    pseudo_count: float = 0.1
    mode: str = "full"
    context: str = "cpg"
    seed: int | None = None
    floor: float = DEFAULT_FLOOR
    bounds: tuple = DEFAULT_BOUNDS
    step_sizes: tuple | None = None

    def __post_init__(self):
        if self.iterations < 1 or self.burn_in < 0:
            raise DomainError("iterations must be >= 1 and burn_in >= 0")
        if self.mode not in ("full", "reduced"):
            raise DomainError("mode must be 'full' or 'reduced'")
        if self.context not in CONTEXT_MODES:
            raise DomainError(f"context must be one of {CONTEXT_MODES}")
        if self.pseudo_count < 0:
            raise DomainError("pseudo_count must be >= 0")
        if self.step_sizes is not None and len(self.step_sizes) < self.iterations:
            raise DomainError("step_sizes must cover every iteration")

    def step_size(self, r: int) -> float:
        if self.step_sizes is not None:
            return float(self.step_sizes[r - 1])
        return 1.0 if r <= self.burn_in else 1.0 / (r - self.burn_in)

    def paths(self, r: int) -> int:
        for last, count in self.paths_schedule:
            if last is None or r <= last:
                return int(count)
        return int(self.paths_schedule[-1][1])

    def pseudo(self, r: int) -> float:
        return self.pseudo_count if (self.mode == "full" and r <= self.burn_in) else 0.0

    def as_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["paths_schedule"] = [list(p) for p in self.paths_schedule]
        d["bounds"] = [list(b) for b in self.bounds]
        if self.step_sizes is not None:
            d["step_sizes"] = list(self.step_sizes)
        return d


@dataclass
class EstimationTrace:
    config: SaemConfig
    seed: int
    params: list = field(default_factory=list)
    evo: list = field(default_factory=list)
    mean_complete_loglik: list = field(default_factory=list)
    step_sizes: list = field(default_factory=list)
    paths_per_iter: list = field(default_factory=list)
    flags: list = field(default_factory=list)

    @property
    def final(self) -> ModelParams:
        return self.params[-1]

    @property
    def final_evo(self) -> EvoParams | None:
        return self.evo[-1] if self.evo else None

    def __len__(self):
        return len(self.params)


def saem_fit(X, Y, init, config: SaemConfig = SaemConfig()) -> EstimationTrace:
    """Stochastic approximation EM.

    ``init`` is a ``ModelParams`` in full mode and an ``EvoParams`` in
    reduced mode.  Each iteration samples paths at the current parameters,
    updates the running counts by the step size and applies the M-step.
    """
    x, y = encode(X), encode(Y)
    if config.mode == "reduced":
        if not isinstance(init, EvoParams):
            raise InputError("reduced mode starts from EvoParams")
        evo = init
        theta = expand_reduced(evo)
    else:
        if not isinstance(init, ModelParams):
            raise InputError("full mode starts from ModelParams")
        evo = None
        theta = init
    seed = config.seed
    if seed is None:
        seed = int(np.random.SeedSequence().entropy % (2**63))
    ss = np.random.SeedSequence(seed)
    trace = EstimationTrace(config=replace(config, seed=seed), seed=seed)

    lattice = forward_scaled(theta, x, y)
    initial = sample_paths(theta, x, y, config.paths(1), ss.spawn(1)[0], lattice)
    running = CountStats.mean(sufficient_counts(p, x, y) for p in initial)

    for r in range(1, config.iterations + 1):
        if r > 1:
            lattice = forward_scaled(theta, x, y)
        m_r = config.paths(r)
        paths = sample_paths(theta, x, y, m_r, ss.spawn(1)[0], lattice)
        stats = [sufficient_counts(p, x, y) for p in paths]
        trace.mean_complete_loglik.append(float(np.mean([complete_log_likelihood(s, theta) for s in stats])))
        step = config.step_size(r)
        running = running + step * (CountStats.mean(stats) - running)
        if config.mode == "reduced":
            fit = m_step_reduced(running, evo, config.bounds)
            evo = fit.evo
            theta = expand_reduced(evo)
            trace.evo.append(evo)
            trace.flags.append({"improved": fit.improved, "weakly_identified": fit.weakly_identified})
        else:
            theta = apply_floor(m_step_full(running, config.pseudo(r), config.context), config.floor)
        trace.params.append(theta)
        trace.step_sizes.append(step)
        trace.paths_per_iter.append(m_r)
        if r % 25 == 0:
            log.debug("iteration %d: mean complete loglik %.3f", r, trace.mean_complete_loglik[-1])
    return trace


def sem_fit(X, Y, init, config: SaemConfig = SaemConfig()) -> EstimationTrace:
    """Stochastic EM: one path per iteration and no averaging of counts.

    Without averaging every iteration behaves like burn-in, so the
    pseudo-count stays on throughout; otherwise a transition missing from a
    single sampled path drops to the floor and is never sampled again.
    """
    cfg = replace(config, paths_schedule=((None, 1),), step_sizes=(1.0,) * config.iterations,
                  burn_in=config.iterations)
    return saem_fit(X, Y, init, cfg)
