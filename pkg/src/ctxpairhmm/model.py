"""Parameter records for the context-dependent pair-HMM.

States are ordered ``M_1 .. M_K, I_X, I_Y``.  Match emissions come in two
flavours: ``h[k]`` is a joint table on pairs, used when the previous step was
not a match (or there is no previous step), and ``htilde[k, c, d]`` is the
joint table used when the previous step was a match that aligned ``c`` with
``d``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ALPHABET = "ACGT"
PURINES = frozenset("AG")
PYRIMIDINES = frozenset("CT")
# index of the other nucleotide in the same chemical class
PARTNER = np.array([2, 3, 0, 1])
C = ALPHABET.index("C")

STOCHASTIC_TOL = 1e-12
IDENTIFIABILITY_TOL = 1e-9

_CODES = {a: i for i, a in enumerate(ALPHABET)}


class DomainError(ValueError):
    """A parameter lies outside its admissible domain."""


class InputError(ValueError):
    """Malformed sequences, paths or lattices."""


def encode(seq) -> np.ndarray:
    """Map a nucleotide string (or an already-encoded array) to codes 0..3."""
    if isinstance(seq, np.ndarray):
        arr = seq.astype(np.int64, copy=False)
        if arr.ndim != 1 or (arr.size and (arr.min() < 0 or arr.max() > 3)):
            raise InputError("encoded sequence must be a 1-d array of codes 0..3")
        return arr
    out = np.empty(len(seq), dtype=np.int64)
    for pos, ch in enumerate(seq.upper()):
        try:
            out[pos] = _CODES[ch]
        except KeyError:
            raise InputError(f"symbol {ch!r} at position {pos + 1} is not in {ALPHABET}") from None
    return out


def decode(codes) -> str:
    return "".join(ALPHABET[c] for c in codes)


def state_names(regimes: int) -> list[str]:
    if regimes == 1:
        matches = ["M"]
    else:
        matches = [f"M{k + 1}" for k in range(regimes)]
    return matches + ["IX", "IY"]


def _check_distribution(p, name, strict=False):
    p = np.asarray(p, dtype=float)
    if p.shape != (4,):
        raise DomainError(f"{name} must have 4 entries")
    if strict and np.any(p <= 0):
        raise DomainError(f"{name} entries must be > 0")
    if np.any(p < 0) or abs(p.sum() - 1.0) > STOCHASTIC_TOL:
        raise DomainError(f"{name} must be a probability vector, got {p.tolist()}")
    return p


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Full parameter set of a pair-HMM with ``K`` match regimes.

    Shapes: ``pi`` (K+2, K+2), ``pi0`` (K+2,), ``f`` and ``g`` (4,),
    ``h`` (K, 4, 4) indexed ``[k, a, b]`` and ``htilde`` (K, 4, 4, 4, 4)
    indexed ``[k, c, d, a, b]`` where ``(c, d)`` is the previous aligned pair.
    """

    pi: np.ndarray
    pi0: np.ndarray
    f: np.ndarray
    g: np.ndarray
    h: np.ndarray
    htilde: np.ndarray

    def __post_init__(self):
        for name in ("pi", "pi0", "f", "g", "h", "htilde"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        K = self.h.shape[0] if self.h.ndim == 3 else -1
        if K < 1:
            raise DomainError("h must have shape (K, 4, 4) with K >= 1")
        S = K + 2
        expected = {
            "pi": (S, S),
            "pi0": (S,),
            "f": (4,),
            "g": (4,),
            "h": (K, 4, 4),
            "htilde": (K, 4, 4, 4, 4),
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise DomainError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")

    @property
    def regimes(self) -> int:
        return self.h.shape[0]

    @property
    def n_states(self) -> int:
        return self.regimes + 2

    def log_tables(self):
        """Log-space copies of every table, in the order the DP kernels expect."""
        with np.errstate(divide="ignore"):
            return tuple(
                np.ascontiguousarray(np.log(t))
                for t in (self.pi, self.pi0, self.f, self.g, self.h, self.htilde)
            )

    def __eq__(self, other):
        if not isinstance(other, ModelParams):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, k), getattr(other, k))
            for k in ("pi", "pi0", "f", "g", "h", "htilde")
        )

    __hash__ = None


@dataclass(frozen=True)
class EvoParams:
    """Evolutionary parametrization: TKF91 indel rate ``lam``, Jukes-Cantor
    rate ``gamma``, CpG-context transition/transversion rates ``alpha`` and
    ``beta``, and stationary base frequencies ``mu`` (order ACGT)."""

    alpha: float
    beta: float
    gamma: float
    lam: float
    mu: tuple = (0.225, 0.275, 0.275, 0.225)

    def __post_init__(self):
        object.__setattr__(self, "mu", tuple(float(v) for v in self.mu))
        for name in ("alpha", "beta", "gamma", "lam"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be > 0, got {getattr(self, name)}")
        _check_distribution(self.mu, "mu", strict=True)

    def as_dict(self) -> dict:
        return {"alpha": self.alpha, "beta": self.beta, "gamma": self.gamma,
                "lam": self.lam, "mu": list(self.mu)}


DATA_SET_1 = EvoParams(alpha=0.4, beta=0.2, gamma=0.06, lam=0.04)
DATA_SET_2 = EvoParams(alpha=0.5, beta=0.15, gamma=0.05, lam=0.02)
# starting point used for the reduced-parameter runs on both data sets
REDUCED_START = EvoParams(alpha=0.8, beta=0.25, gamma=0.1, lam=0.08)


def tkf91_transition(lam: float) -> np.ndarray:
    """Move-chain transition matrix induced by TKF91 with equal insertion
    and deletion rate ``lam``; rows and columns ordered (M, I_X, I_Y)."""
    if not lam > 0:
        raise DomainError(f"lambda must be > 0, got {lam}")
    e = np.exp(-lam)
    one_minus_e = -np.expm1(-lam)
    ratio = lam / one_minus_e
    ix_iy = 1.0 + lam - ratio
    # 1 + x - x/(1-e^-x) >= 0 for x > 0, but cancellation can push it below
    assert ix_iy > -1e-15, ix_iy
    ix_iy = max(ix_iy, 0.0)
    mat = np.array([
        [e, one_minus_e, lam],
        [ratio * e, lam, ix_iy],
        [e, one_minus_e, lam],
    ])
    return mat / (1.0 + lam)


def jc_emission(gamma: float, mu) -> np.ndarray:
    """Joint match table of the modified Jukes-Cantor model."""
    if not gamma > 0:
        raise DomainError(f"gamma must be > 0, got {gamma}")
    mu = _check_distribution(mu, "mu")
    e = np.exp(-gamma)
    h = np.outer(mu, mu) * -np.expm1(-gamma)
    h[np.diag_indices(4)] += mu * e
    return h


def hky_context_emission(alpha: float, beta: float, mu) -> np.ndarray:
    """Joint match table in a C/C context: distinct rates for transitions
    (``alpha``) and transversions (``beta``)."""
    if not (alpha > 0 and beta > 0):
        raise DomainError(f"alpha and beta must be > 0, got {alpha}, {beta}")
    mu = _check_distribution(mu, "mu")
    e_ab = np.exp(-(alpha + beta))
    e_b = np.exp(-beta)
    trans = e_b * -np.expm1(-alpha)
    transv = -np.expm1(-beta)
    h = np.outer(mu, mu) * transv
    for x in range(4):
        xb = PARTNER[x]
        class_mass = mu[x] + mu[xb]
        h[x, x] += mu[x] * e_ab + mu[x] * trans * mu[x] / class_mass
        h[x, xb] += mu[x] * trans * mu[xb] / class_mass
    return h


def expand_reduced(evo: EvoParams) -> ModelParams:
    """Single-regime full parameter set induced by the evolutionary rates."""
    pi = tkf91_transition(evo.lam)
    mu = np.array(evo.mu)
    h = jc_emission(evo.gamma, mu)
    htilde = np.broadcast_to(h, (4, 4, 4, 4)).copy()
    htilde[C, C] = hky_context_emission(evo.alpha, evo.beta, mu)
    return ModelParams(pi=pi, pi0=pi[0].copy(), f=mu, g=mu, h=h[None], htilde=htilde[None])


def context_free(theta: ModelParams) -> ModelParams:
    """Copy of ``theta`` with every context table replaced by ``h``."""
    K = theta.regimes
    htilde = np.broadcast_to(theta.h[:, None, None], (K, 4, 4, 4, 4)).copy()
    return ModelParams(theta.pi, theta.pi0, theta.f, theta.g, theta.h, htilde)


def uniform_params(regimes: int = 1, stay: float = 0.85) -> ModelParams:
    """Flat starting point: every row of pi puts ``stay`` on the first match
    regime (split across regimes) and the rest evenly on the indel states."""
    K = regimes
    S = K + 2
    row = np.empty(S)
    row[:K] = stay / K
    row[K:] = (1.0 - stay) / 2
    pi = np.tile(row, (S, 1))
    f = np.full(4, 0.25)
    h = np.full((K, 4, 4), 1 / 16)
    htilde = np.full((K, 4, 4, 4, 4), 1 / 16)
    return ModelParams(pi=pi, pi0=row.copy(), f=f, g=f.copy(), h=h, htilde=htilde)


@dataclass
class ValidationReport:
    stochastic_ok: bool
    identifiability: tuple
    messages: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.stochastic_ok and all(self.identifiability)


def validate_params(theta: ModelParams) -> ValidationReport:
    """Check stochasticity and the three necessary identifiability conditions.

    Condition i) asks that ``h`` is not the product ``f x g``, ii) that some
    context table differs from ``f x g``, iii) that some context table
    differs from ``h``.  Each must hold in every regime.
    """
    msgs = []
    tol = STOCHASTIC_TOL

    def check_simplex(arr, axes, name):
        if np.any(arr < 0) or not np.all(np.isfinite(arr)):
            msgs.append(f"{name} has negative or non-finite entries")
            return False
        dev = np.abs(arr.sum(axis=axes) - 1.0)
        if np.any(dev > tol):
            msgs.append(f"{name} does not sum to 1 (max deviation {dev.max():.3g})")
            return False
        return True

    ok = all([
        check_simplex(theta.pi, 1, "pi rows"),
        check_simplex(theta.pi0, 0, "pi0"),
        check_simplex(theta.f, 0, "f"),
        check_simplex(theta.g, 0, "g"),
        check_simplex(theta.h, (1, 2), "h"),
        check_simplex(theta.htilde, (3, 4), "htilde"),
    ])

    prod = np.outer(theta.f, theta.g)
    eps = IDENTIFIABILITY_TOL
    flags = [True, True, True]
    for k in range(theta.regimes):
        h, ht = theta.h[k], theta.htilde[k]
        tests = (
            np.any(np.abs(h - prod) > eps),
            np.any(np.abs(ht - prod) > eps),
            np.any(np.abs(ht - h) > eps),
        )
        for c, passed in enumerate(tests):
            if not passed:
                flags[c] = False
                msgs.append(f"regime {k + 1}: identifiability condition {'i' * (c + 1)}) fails")
    return ValidationReport(stochastic_ok=ok, identifiability=tuple(flags), messages=msgs)
