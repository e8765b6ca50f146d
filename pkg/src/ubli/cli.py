"""Command-line entry point: ``ubli <verb> [options]``.

Verbs
-----
run            run one or more plans from a config file, one after another
matrix         run plans as a matrix (optionally threaded) and print the table
sweep-alpha    7x7 grid over (alpha_src, alpha_trg) for one plan
sweep-minfreq  frequency-threshold sweep for one plan
eval           score a ranked-predictions TSV against a gold dictionary
curate         apply the dictionary curation filters to candidate pairs
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .embeddings import load_embeddings
from .evaluation import (curate_pairs, load_gold, load_pairs, precision_at_k, save_pairs,
                         write_report_csv)
from .experiments import (ALPHA_GRID, MINFREQ_GRID, format_alpha_grid, format_table, load_config,
                          run_matrix, sweep_alpha, sweep_minfreq)

logger = logging.getLogger("ubli")


def _select(plans, codes):
    if not codes:
        return plans
    by_code = {p.code: p for p in plans}
    missing = [c for c in codes if c not in by_code]
    if missing:
        raise SystemExit(f"error: plan(s) {', '.join(missing)} not found in config "
                         f"(available: {', '.join(by_code)})")
    return [by_code[c] for c in codes]


def _single(plans, codes):
    chosen = _select(plans, codes)
    if len(chosen) != 1:
        raise SystemExit("error: this verb needs exactly one plan; pass --plan CODE")
    return chosen[0]


def _floats(text):
    return tuple(float(v) for v in text.split(","))


def _ints(text):
    return tuple(int(v) for v in text.split(","))


def cmd_run(args) -> int:
    plans = _select(load_config(args.config, seed=args.seed), args.plan)
    rows = run_matrix(plans, args.out_dir, threads=1)
    print(format_table(rows), end="")
    return 0 if all(r.ok for r in rows) else 1


def cmd_matrix(args) -> int:
    plans = _select(load_config(args.config, seed=args.seed), args.plan)
    rows = run_matrix(plans, args.out_dir, threads=args.threads)
    print(format_table(rows), end="")
    return 0 if all(r.ok for r in rows) else 1


def cmd_sweep_alpha(args) -> int:
    plan = _single(load_config(args.config, seed=args.seed), args.plan)
    results = sweep_alpha(plan, grid=args.grid, out_dir=args.out_dir, threads=args.threads)
    print(format_alpha_grid(results), end="")
    return 0 if all(r.ok for _, _, r in results) else 1


def cmd_sweep_minfreq(args) -> int:
    plan = _single(load_config(args.config, seed=args.seed), args.plan)
    results = sweep_minfreq(plan, thresholds=args.thresholds, out_dir=args.out_dir, threads=args.threads)
    print(f"{'min_freq':>8}  {'pr@1':>6}  {'evaluated':>9}  {'coverage':>8}")
    for t, r in results:
        pr = f"{100 * r.pr_at_1:6.2f}" if r.ok else f"{'-':>6}"
        print(f"{t:>8}  {pr}  {r.evaluated:>9}  {r.coverage:8.3f}")
    return 0 if all(r.ok for _, r in results) else 1


def _read_ranked(path):
    ranked = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            src, _, preds = line.partition("\t")
            if not src:
                raise ValueError(f"{path}:{lineno}: missing source word")
            ranked[src] = preds.split()
    return ranked


def cmd_eval(args) -> int:
    ranked = _read_ranked(args.ranked)
    gold = load_gold(args.gold)
    trg_vocab = load_embeddings(args.trg_embeddings)[0] if args.trg_embeddings else None
    report = precision_at_k(ranked, gold, args.k, trg_vocab)
    for k, p in sorted(report.precision_at.items()):
        print(f"pr@{k} = {100 * p:.2f}  ({report.hits[k]}/{report.evaluated})")
    print(f"skipped_oov = {report.skipped_oov}  coverage = {report.coverage:.3f}")
    if args.out:
        write_report_csv(args.out, [(args.name, report)])
    return 0


def cmd_curate(args) -> int:
    src_vocab = load_embeddings(args.src_embeddings)[0]
    trg_vocab = load_embeddings(args.trg_embeddings)[0]
    roundtrip = dict(load_pairs(args.roundtrip)) if args.roundtrip else None
    proper = None
    if args.proper_nouns:
        proper = {w.strip() for w in Path(args.proper_nouns).read_text(encoding="utf-8").splitlines() if w.strip()}
    raw = load_pairs(args.pairs)
    kept = curate_pairs(raw, src_vocab, trg_vocab, roundtrip, proper)
    save_pairs(args.out, kept)
    print(f"kept {len(kept)} of {len(raw)} pairs -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ubli", description="Unsupervised bilingual lexicon induction experiments.")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for info, -vv for debug logging")
    sub = parser.add_subparsers(dest="verb", required=True)

    def plan_args(p, threads=True):
        p.add_argument("--config", required=True, help="INI-style plan file")
        p.add_argument("--plan", action="append", metavar="CODE", help="plan code to run (repeatable)")
        p.add_argument("--out-dir", type=Path, default=None, help="directory for results.csv and artifacts")
        p.add_argument("--seed", type=int, default=None, help="override the seed of every plan")
        if threads:
            p.add_argument("--threads", type=int, default=1, help="plans to run concurrently")

    p = sub.add_parser("run", help="run plans sequentially")
    plan_args(p, threads=False)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("matrix", help="run plans as a matrix with deltas against M1")
    plan_args(p)
    p.set_defaults(func=cmd_matrix)

    p = sub.add_parser("sweep-alpha", help="grid over source and target alpha")
    plan_args(p)
    p.add_argument("--grid", type=_floats, default=ALPHA_GRID, help="comma-separated alpha values")
    p.set_defaults(func=cmd_sweep_alpha)

    p = sub.add_parser("sweep-minfreq", help="frequency-threshold sweep")
    plan_args(p)
    p.add_argument("--thresholds", type=_ints, default=MINFREQ_GRID, help="comma-separated thresholds")
    p.set_defaults(func=cmd_sweep_minfreq)

    p = sub.add_parser("eval", help="Pr@k of a ranked-predictions TSV (src<TAB>t1 t2 ...)")
    p.add_argument("--ranked", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--k", type=_ints, default=(1, 5, 10), help="comma-separated cutoffs")
    p.add_argument("--trg-embeddings", help="count gold sources with no in-vocabulary target as OOV")
    p.add_argument("--name", default="eval", help="experiment name in the CSV report")
    p.add_argument("--out", help="write a CSV report here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("curate", help="filter candidate translation pairs")
    p.add_argument("--pairs", required=True, help="TSV of candidate src<TAB>trg pairs")
    p.add_argument("--src-embeddings", required=True)
    p.add_argument("--trg-embeddings", required=True)
    p.add_argument("--roundtrip", help="TSV of src<TAB>back-translated src")
    p.add_argument("--proper-nouns", help="file with one proper noun per line")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_curate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
