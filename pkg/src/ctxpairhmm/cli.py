"""Command-line entry point: simulate, estimate, align, posterior, bic."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .dp import log_likelihood, posterior
from .estimation import SaemConfig, saem_fit
from .model import DATA_SET_1, DATA_SET_2, REDUCED_START, EvoParams, InputError, expand_reduced, uniform_params
from .sampler import consensus_alignment, sample_paths
from .selection import ModelFit, compare, count_free_parameters, format_report, sample_size
from .simulate import SimSpec, simulate_pair

log = logging.getLogger("ctxpairhmm")

DATASETS = {"1": DATA_SET_1, "2": DATA_SET_2}
CONTEXT_FLAG = {"on": "cpg", "off": "off", "full": "full"}


def _seed(args) -> int:
    if args.seed is None:
        args.seed = int(np.random.SeedSequence().entropy % (2**63))
    return args.seed


def _echo(args, out: Path, **extra):
    doc = {k: v for k, v in vars(args).items() if k != "func"}
    doc.update(extra)
    io.save_json(doc, out / "run.json")


def _paths_schedule(text: str):
    """``"5:20,10"`` means 5 paths up to iteration 20, then 10."""
    sched = []
    for part in text.split(","):
        if ":" in part:
            count, last = part.split(":")
            sched.append((int(last), int(count)))
        else:
            sched.append((None, int(part)))
    return tuple(sched)


def _read_pair(paths):
    records = []
    for p in paths:
        records += io.read_fasta(p)
    if len(records) < 2:
        raise InputError("need two sequences (one file with two records, or two files)")
    return records[0][1], records[1][1]


def cmd_simulate(args) -> int:
    seed = _seed(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    theta = io.load_params(args.params) if args.params else expand_reduced(DATASETS[args.dataset])
    X, Y, path = simulate_pair(SimSpec(theta, length=args.length, seed=seed))
    (out / "x.fasta").write_text(io.format_fasta("X", X))
    (out / "y.fasta").write_text(io.format_fasta("Y", Y))
    (out / "true_path.txt").write_text(io.format_path(path))
    io.save_json(io.params_to_dict(theta, seed=seed), out / "true_params.json")
    _echo(args, out)
    print(f"simulated {len(path)} moves: |X|={len(X)} |Y|={len(Y)} seed={seed}")
    return 0


def _config(args, seed) -> SaemConfig:
    return SaemConfig(
        iterations=args.iterations,
        burn_in=args.burn_in,
        paths_schedule=_paths_schedule(args.paths_per_iter),
        pseudo_count=args.pseudo,
        mode=args.mode,
        context=CONTEXT_FLAG[args.context],
        seed=seed,
    )


def cmd_estimate(args) -> int:
    seed = _seed(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    X, Y = _read_pair(args.fasta)
    cfg = _config(args, seed)
    if args.mode == "reduced":
        if args.regimes != 1:
            raise InputError("reduced mode has a single match regime")
        init = REDUCED_START if args.mu is None else EvoParams(0.8, 0.25, 0.1, 0.08, mu=tuple(args.mu))
    else:
        init = uniform_params(args.regimes)
    trace = saem_fit(X, Y, init, cfg)
    theta = trace.final
    ll = log_likelihood(theta, X, Y)
    k = 4 if args.mode == "reduced" else count_free_parameters(theta, cfg.context)
    fit = ModelFit(args.label or f"{args.mode}-{args.context}-K{args.regimes}", ll, k, sample_size(X, Y))
    io.save_json(io.trace_to_dict(trace), out / "trace.json")
    io.save_json(io.params_to_dict(theta, trace.final_evo, fit.as_dict(), seed, cfg.as_dict()), out / "params.json")
    _echo(args, out)
    msg = f"loglik={ll:.6g} k={k} n={fit.n} seed={seed}"
    if trace.final_evo is not None:
        e = trace.final_evo
        msg += f" alpha={e.alpha:.6g} beta={e.beta:.6g} gamma={e.gamma:.6g} lambda={e.lam:.6g}"
    print(msg)
    return 0


def cmd_align(args) -> int:
    seed = _seed(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    X, Y = _read_pair(args.fasta)
    theta = io.load_params(args.params)
    samples = sample_paths(theta, X, Y, args.samples, seed)
    res = consensus_alignment(samples, X, Y, theta)
    (out / "alignment.txt").write_text(res.consensus.alignment_text(X, Y) + "\n")
    (out / "consensus_path.txt").write_text(io.format_path(res.consensus))
    (out / "columns.tsv").write_text(res.to_tsv())
    _echo(args, out)
    print(f"consensus of {args.samples} samples: {len(res.consensus)} columns, seed={seed}")
    return 0


def cmd_posterior(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    X, Y = _read_pair(args.fasta)
    theta = io.load_params(args.params)
    post = posterior(theta, X, Y)
    (out / "posterior.tsv").write_text(io.posterior_tsv(post.probs, args.min_prob))
    _echo(args, out)
    return 0


def _parse_fit(text: str) -> ModelFit:
    label, ll, k, n = text.rsplit(":", 3)
    return ModelFit(label, float(ll), int(k), int(n))


def cmd_bic(args) -> int:
    fits = [_parse_fit(t) for t in args.fit or []]
    for p in args.documents:
        doc = json.loads(Path(p).read_text())
        if not doc.get("fit"):
            raise InputError(f"{p} carries no fit record")
        f = doc["fit"]
        fits.append(ModelFit(f["label"], f["loglik"], f["k"], f["n"]))
    report = compare(fits)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        io.save_json(report, out / "bic.json")
        _echo(args, out)
    sys.stdout.write(format_report(report))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ctxpairhmm", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="simulate a sequence pair and its true path")
    g = s.add_mutually_exclusive_group()
    g.add_argument("--dataset", choices=sorted(DATASETS), default="1")
    g.add_argument("--params", help="parameter document to simulate from")
    s.add_argument("--length", type=int, default=2000, help="number of moves")
    s.add_argument("--seed", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("estimate", help="SAEM estimation")
    e.add_argument("fasta", nargs="+")
    e.add_argument("--mode", choices=["full", "reduced"], default="full")
    e.add_argument("--context", choices=sorted(CONTEXT_FLAG), default="on")
    e.add_argument("--regimes", type=int, default=1)
    e.add_argument("--iterations", type=int, default=150)
    e.add_argument("--burn-in", type=int, default=100)
    e.add_argument("--paths-per-iter", default="5:20,10")
    e.add_argument("--pseudo", type=float, default=0.1)
    e.add_argument("--mu", type=float, nargs=4, help="base frequencies held fixed in reduced mode")
    e.add_argument("--label")
    e.add_argument("--seed", type=int)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_estimate)

    a = sub.add_parser("align", help="consensus alignment from posterior samples")
    a.add_argument("fasta", nargs="+")
    a.add_argument("--params", required=True)
    a.add_argument("--samples", type=int, default=200)
    a.add_argument("--seed", type=int)
    a.add_argument("--out", required=True)
    a.set_defaults(func=cmd_align)

    q = sub.add_parser("posterior", help="per-cell posterior state probabilities")
    q.add_argument("fasta", nargs="+")
    q.add_argument("--params", required=True)
    q.add_argument("--min-prob", type=float, default=1e-6)
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_posterior)

    b = sub.add_parser("bic", help="compare fits by BIC")
    b.add_argument("documents", nargs="*", help="parameter documents with a fit record")
    b.add_argument("--fit", action="append", help="LABEL:LOGLIK:K:N")
    b.add_argument("--out")
    b.set_defaults(func=cmd_bic)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
