"""Exact posterior sampling of alignment paths and consensus summaries."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import forward_scaled_kernel, sample_kernel, sample_scaled_kernel
from .dp import DpLattice
from .model import InputError, ModelParams, decode, encode

CATEGORIES = ("match", "insert", "delete")


@dataclass(frozen=True, eq=False)
class AlignmentPath:
    """Moves as state labels: ``k < regimes`` is match regime ``k``,
    ``regimes`` is I_X (consumes X only), ``regimes + 1`` is I_Y."""

    moves: np.ndarray
    regimes: int = 1

    def __post_init__(self):
        mv = np.asarray(self.moves, dtype=np.int8)
        if mv.ndim != 1 or mv.size == 0:
            raise InputError("a path needs at least one move")
        if mv.min() < 0 or mv.max() > self.regimes + 1:
            raise InputError("move label out of range")
        mv = mv.copy()
        mv.setflags(write=False)
        object.__setattr__(self, "moves", mv)

    def __len__(self):
        return self.moves.size

    def __eq__(self, other):
        if not isinstance(other, AlignmentPath):
            return NotImplemented
        return self.regimes == other.regimes and np.array_equal(self.moves, other.moves)

    __hash__ = None

    @property
    def steps(self):
        """Per-move increments ``(di, dj)`` as two int arrays."""
        K = self.regimes
        di = ((self.moves < K) | (self.moves == K)).astype(np.int64)
        dj = ((self.moves < K) | (self.moves == K + 1)).astype(np.int64)
        return di, dj

    @property
    def endpoint(self) -> tuple[int, int]:
        di, dj = self.steps
        return int(di.sum()), int(dj.sum())

    def cells(self) -> np.ndarray:
        """Lattice cell reached by each move, shape (L, 2)."""
        di, dj = self.steps
        return np.column_stack([np.cumsum(di), np.cumsum(dj)])

    def categories(self) -> np.ndarray:
        """0 for match (regimes merged), 1 for I_X, 2 for I_Y."""
        K = self.regimes
        return np.where(self.moves < K, 0, self.moves - K + 1).astype(np.int8)

    def move_string(self) -> str:
        return "".join("MXY"[c] for c in self.categories())

    def regime_string(self) -> str:
        """Regime of each match move (1-based digits), '-' for indels."""
        K = self.regimes
        return "".join(str(v + 1) if v < K else "-" for v in self.moves)

    @classmethod
    def from_move_string(cls, text: str, regimes: int = 1, regime_text: str | None = None):
        text = text.strip()
        if regime_text is not None and len(regime_text.strip()) != len(text):
            raise InputError("regime line length differs from the move string")
        out = []
        for pos, ch in enumerate(text):
            if ch == "M":
                k = int(regime_text[pos]) - 1 if regime_text else 0
                out.append(k)
            elif ch == "X":
                out.append(regimes)
            elif ch == "Y":
                out.append(regimes + 1)
            else:
                raise InputError(f"bad move character {ch!r} at {pos + 1}")
        return cls(np.array(out), regimes)

    def check(self, n: int, m: int):
        if self.endpoint != (n, m):
            raise InputError(f"path ends at {self.endpoint}, expected {(n, m)}")

    def alignment_text(self, X, Y) -> str:
        """Three rows: X with gaps, a marker row ('|' identical, '.' mismatch,
        ' ' indel), and Y with gaps."""
        x, y = decode(encode(X)), decode(encode(Y))
        self.check(len(x), len(y))
        top, mid, bot = [], [], []
        i = j = 0
        for c in self.categories():
            if c == 0:
                a, b = x[i], y[j]
                i += 1
                j += 1
                top.append(a)
                bot.append(b)
                mid.append("|" if a == b else ".")
            elif c == 1:
                top.append(x[i])
                bot.append("-")
                mid.append(" ")
                i += 1
            else:
                top.append("-")
                bot.append(y[j])
                mid.append(" ")
                j += 1
        return "\n".join(["".join(top), "".join(mid), "".join(bot)])


def _draws(rng: np.random.Generator, n: int, m: int) -> np.ndarray:
    return rng.random(n + m + 1)


def sample_path(fwd: DpLattice, theta: ModelParams, rng: np.random.Generator) -> AlignmentPath:
    """Draw one path from its conditional law given both sequences by walking
    the forward lattice back from ``(n, m)``."""
    if fwd.direction != "forward":
        raise InputError("sampling needs a forward lattice")
    if fwd.values.shape[0] != theta.n_states:
        raise InputError("lattice and parameters disagree on the number of states")
    lp, _, _, _, lh, lht = theta.log_tables()
    moves = sample_kernel(fwd.values, fwd.x, fwd.y, lp, lh, lht, _draws(rng, fwd.n, fwd.m))
    return AlignmentPath(moves, theta.regimes)


@dataclass(frozen=True, eq=False)
class ScaledForward:
    """Row-scaled linear-space forward lattice; cheaper to build than the
    log-space one and enough for likelihoods and sampling."""

    values: np.ndarray
    log_scale: np.ndarray
    x: np.ndarray
    y: np.ndarray
    loglik: float


def forward_scaled(theta: ModelParams, X, Y) -> ScaledForward:
    x, y = encode(X), encode(Y)
    if x.size == 0 or y.size == 0:
        raise InputError("both sequences must be nonempty")
    a, scale, ll = forward_scaled_kernel(x, y, theta.pi, theta.pi0, theta.f, theta.g, theta.h, theta.htilde)
    return ScaledForward(a, scale, x, y, float(ll))


def sample_paths(theta: ModelParams, X, Y, count: int, seed=None, lattice: ScaledForward | None = None):
    """Draw ``count`` independent paths; path ``q`` uses the ``q``-th child of
    ``SeedSequence(seed)``, so results do not depend on batching."""
    if lattice is None:
        lattice = forward_scaled(theta, X, Y)
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    n, m = lattice.x.size, lattice.y.size
    out = []
    for child in ss.spawn(count):
        draws = _draws(np.random.default_rng(child), n, m)
        mv = sample_scaled_kernel(lattice.values, lattice.x, lattice.y, theta.pi, theta.h, theta.htilde, draws)
        out.append(AlignmentPath(mv, theta.regimes))
    return out


@dataclass
class ConsensusResult:
    """``column_posteriors[c]`` is the distribution over (match, insert,
    delete) among samples that visit the consensus cell of column ``c``;
    ``support[c]`` is the fraction of samples visiting that cell at all."""

    consensus: AlignmentPath
    column_posteriors: np.ndarray
    support: np.ndarray

    def to_tsv(self) -> str:
        lines = ["column\ti\tj\tmove\tmatch\tinsert\tdelete\tsupport"]
        cells = self.consensus.cells()
        for c, ((i, j), mv) in enumerate(zip(cells, self.consensus.move_string())):
            p = self.column_posteriors[c]
            lines.append(
                f"{c + 1}\t{i}\t{j}\t{mv}\t{p[0]:.6g}\t{p[1]:.6g}\t{p[2]:.6g}\t{self.support[c]:.6g}"
            )
        return "\n".join(lines) + "\n"


def consensus_alignment(samples, X, Y, theta: ModelParams) -> ConsensusResult:
    """Pick the sample with the highest complete likelihood under ``theta``
    (first one on ties) and annotate each of its columns with how the other
    samples treat the same lattice cell."""
    from .estimation import complete_log_likelihood, sufficient_counts

    if not samples:
        raise InputError("need at least one sampled path")
    x, y = encode(X), encode(Y)
    n, m = len(x), len(y)
    for s in samples:
        s.check(n, m)
    best, best_ll = None, -np.inf
    for s in samples:
        ll = complete_log_likelihood(sufficient_counts(s, x, y), theta)
        if best is None or ll > best_ll:
            best, best_ll = s, ll
    # tally[i, j, category]
    tally = np.zeros((n + 1, m + 1, 3))
    for s in samples:
        cells = s.cells()
        tally[cells[:, 0], cells[:, 1], s.categories()] += 1
    cc = best.cells()
    counts = tally[cc[:, 0], cc[:, 1]]
    visits = counts.sum(axis=1)
    return ConsensusResult(best, counts / visits[:, None], visits / len(samples))
