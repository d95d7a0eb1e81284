"""FASTA, parameter/trace documents and tabular exports.

Parameter documents are JSON objects::

    {"format": "ctxpairhmm.params/1", "alphabet": "ACGT",
     "states": ["M", "IX", "IY"], "regimes": 1,
     "pi": [[...]], "pi0": [...], "f": [...], "g": [...],
     "h": [K x 4 x 4], "htilde": [K x 4 x 4 x 4 x 4],   # htilde[k][c][d][a][b]
     "evo": {...} | null, "fit": {...} | null, "seed": int | null, "config": {...} | null}

Trace documents carry one record per iteration with the step size, number
of sampled paths, mean complete log-likelihood, and the parameters.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .model import ALPHABET, EvoParams, InputError, ModelParams, state_names
from .sampler import AlignmentPath

PARAMS_FORMAT = "ctxpairhmm.params/1"
TRACE_FORMAT = "ctxpairhmm.trace/1"


def parse_fasta(data) -> list[tuple[str, str]]:
    """Parse FASTA text or bytes into ``(name, sequence)`` pairs.

    Sequence letters are uppercased; anything outside ACGT is an error that
    names the line and column.
    """
    if isinstance(data, (bytes, bytearray)):
        data = data.decode("ascii", errors="replace")
    records = []
    name = None
    chunks: list[str] = []

    def flush():
        if name is not None:
            seq = "".join(chunks)
            if not seq:
                raise InputError(f"record {name!r} has an empty sequence")
            records.append((name, seq))

    for lineno, raw in enumerate(data.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith(">"):
            flush()
            name = line[1:].strip()
            chunks = []
            continue
        if name is None:
            raise InputError(f"line {lineno}: sequence data before the first '>' header")
        line = line.upper()
        lead = len(raw) - len(raw.lstrip())
        for col, ch in enumerate(line, start=1):
            if ch not in ALPHABET:
                raise InputError(f"line {lineno}, column {col + lead}: invalid symbol {ch!r}")
        chunks.append(line)
    flush()
    if not records:
        raise InputError("no FASTA records found")
    return records


def read_fasta(path) -> list[tuple[str, str]]:
    return parse_fasta(Path(path).read_bytes())


def format_fasta(name: str, seq: str, width: int = 60) -> str:
    body = "\n".join(seq[i:i + width] for i in range(0, len(seq), width))
    return f">{name}\n{body}\n"


def params_to_dict(theta: ModelParams, evo: EvoParams | None = None, fit=None, seed=None, config=None) -> dict:
    return {
        "format": PARAMS_FORMAT,
        "alphabet": ALPHABET,
        "states": state_names(theta.regimes),
        "regimes": theta.regimes,
        "pi": theta.pi.tolist(),
        "pi0": theta.pi0.tolist(),
        "f": theta.f.tolist(),
        "g": theta.g.tolist(),
        "h": theta.h.tolist(),
        "htilde": theta.htilde.tolist(),
        "evo": evo.as_dict() if evo is not None else None,
        "fit": fit,
        "seed": seed,
        "config": config,
    }


def params_from_dict(doc: dict) -> ModelParams:
    if doc.get("format") != PARAMS_FORMAT:
        raise InputError(f"not a parameter document (format={doc.get('format')!r})")
    return ModelParams(*(np.array(doc[k], dtype=float) for k in ("pi", "pi0", "f", "g", "h", "htilde")))


def evo_from_dict(doc: dict) -> EvoParams | None:
    e = doc.get("evo")
    return EvoParams(**e) if e else None


def save_json(doc: dict, path):
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_params(path) -> ModelParams:
    return params_from_dict(json.loads(Path(path).read_text()))


def trace_to_dict(trace) -> dict:
    records = []
    for r in range(len(trace)):
        rec = {
            "iteration": r + 1,
            "step_size": trace.step_sizes[r],
            "paths": trace.paths_per_iter[r],
            "mean_complete_loglik": trace.mean_complete_loglik[r],
        }
        if trace.evo:
            rec["evo"] = trace.evo[r].as_dict()
            rec.update(trace.flags[r])
        else:
            th = trace.params[r]
            rec["params"] = {k: getattr(th, k).tolist() for k in ("pi", "pi0", "f", "g", "h", "htilde")}
        records.append(rec)
    return {"format": TRACE_FORMAT, "seed": trace.seed, "config": trace.config.as_dict(), "iterations": records}


def posterior_tsv(probs: np.ndarray, min_prob: float = 0.0) -> str:
    """Rows ``i, j, state, probability`` for every entry at or above ``min_prob``
    (entries equal to zero are always skipped)."""
    names = state_names(probs.shape[0] - 2)
    lines = ["i\tj\tstate\tprobability"]
    u, i, j = np.nonzero((probs >= min_prob) & (probs > 0))
    order = np.lexsort((u, j, i))
    for q in order:
        lines.append(f"{i[q]}\t{j[q]}\t{names[u[q]]}\t{float(probs[u[q], i[q], j[q]])!r}")
    return "\n".join(lines) + "\n"


def read_posterior_tsv(text: str, regimes: int, n: int, m: int) -> np.ndarray:
    names = {s: k for k, s in enumerate(state_names(regimes))}
    out = np.zeros((regimes + 2, n + 1, m + 1))
    for line in text.splitlines()[1:]:
        i, j, s, p = line.split("\t")
        out[names[s], int(i), int(j)] = float(p)
    return out


def format_path(path: AlignmentPath) -> str:
    """Move string over {M, X, Y}; a second line of regime digits when K > 1."""
    text = path.move_string() + "\n"
    if path.regimes > 1:
        text += path.regime_string() + "\n"
    return text


def parse_path(text: str, regimes: int = 1) -> AlignmentPath:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise InputError("empty path file")
    return AlignmentPath.from_move_string(lines[0], regimes, lines[1] if len(lines) > 1 else None)
