"""BIC comparison of contextual and context-free fits."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .dp import log_likelihood
from .estimation import SaemConfig, saem_fit
from .model import DomainError, ModelParams, encode, uniform_params


@dataclass(frozen=True)
class ModelFit:
    label: str
    loglik: float
    k: int
    n: int

    def __post_init__(self):
        if self.k < 1 or self.n < 2:
            raise DomainError(f"need k >= 1 and n >= 2, got k={self.k}, n={self.n}")

    def as_dict(self) -> dict:
        return {"label": self.label, "loglik": self.loglik, "k": self.k, "n": self.n, "bic": bic(self)}


def bic_score(loglik: float, k: int, n: int) -> float:
    return -2.0 * loglik + k * math.log(n)


def bic(fit: ModelFit) -> float:
    return bic_score(fit.loglik, fit.k, fit.n)


def count_free_parameters(theta, context=True) -> int:
    """Free parameters of a fit with ``theta.regimes`` match regimes.

    ``context`` True or ``"cpg"`` adds one context table per regime,
    ``"full"`` adds one per previous aligned pair (16 per regime), False or
    ``"off"`` adds none.  The start distribution is tied to ``pi`` and is
    not counted.
    """
    K = theta.regimes if isinstance(theta, ModelParams) else int(theta)
    mode = {True: "cpg", False: "off"}.get(context, context)
    tables = {"off": 0, "cpg": 1, "full": 16}[mode]
    return (K + 2) * (K + 1) + 3 + 3 + 15 * K * (1 + tables)


def sample_size(X, Y) -> int:
    return max(len(encode(X)), len(encode(Y)))


def fit_model(X, Y, label: str, config: SaemConfig, regimes: int = 1, init: ModelParams | None = None):
    """Run full-mode SAEM and score the final parameters.

    Returns ``(trace, ModelFit)``; the log-likelihood is evaluated exactly
    at the last iterate.
    """
    init = uniform_params(regimes) if init is None else init
    trace = saem_fit(X, Y, init, config)
    ll = log_likelihood(trace.final, X, Y)
    fit = ModelFit(label, ll, count_free_parameters(trace.final, config.context), sample_size(X, Y))
    return trace, fit


def compare(fits) -> dict:
    """Structured report: every fit with its BIC, and the label of the lowest."""
    fits = list(fits)
    if not fits:
        raise DomainError("nothing to compare")
    rows = [f.as_dict() for f in fits]
    winner = min(rows, key=lambda r: r["bic"])["label"]
    return {"models": rows, "winner": winner}


def format_report(report: dict) -> str:
    lines = ["label\tloglik\tk\tn\tBIC"]
    for r in report["models"]:
        lines.append(f"{r['label']}\t{r['loglik']:.6g}\t{r['k']}\t{r['n']}\t{r['bic']:.2f}")
    lines.append(f"winner\t{report['winner']}")
    return "\n".join(lines) + "\n"
