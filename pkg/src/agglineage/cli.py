"""Command-line surface: generate, build, query, compare, validate, serve.

Numbers print in scientific notation with three significant digits to match
the compact presentation the summaries are usually read in; ``--precise``
switches to full precision.  Every command is deterministic given --seed.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .errors import LineageError, ParameterError
from .predicate_text import parse_predicate
from .queries import approx_sum, relative_error_report, top_k_baseline, uniform_baseline
from .relation import ingest_csv, iter_csv_records, make_salaries_demo
from .sampling import (
    GuaranteeParams,
    build_lineage,
    build_lineage_streaming,
    compute_budget,
    error_for_budget,
)
from .summaries import build_summary_set, load_sketch, save_sketch, select_summary
from .validation import run_bound_check


def _fmt(value: float, precise: bool) -> str:
    if precise:
        return repr(float(value))
    return f"{float(value):.3g}"


def _parse_count(text: str) -> int:
    """Integer argument that also accepts scientific notation like 1e6."""
    try:
        return int(text)
    except ValueError:
        value = float(text)
        if not value.is_integer():
            raise argparse.ArgumentTypeError(f"{text!r} is not an integer")
        return int(value)


def _budget_from_args(args) -> tuple:
    """Resolve (b, guarantees) from --b or the (--m, --p, --epsilon) triple."""
    triple = (args.m, args.p, args.epsilon)
    has_triple = any(v is not None for v in triple)
    if args.b is not None and has_triple:
        raise ParameterError("give either --b or the (--m, --p, --epsilon) triple, not both")
    if args.b is not None:
        return args.b, None
    if not all(v is not None for v in triple):
        raise ParameterError("give either --b or all of --m, --p, --epsilon")
    g = GuaranteeParams(m=args.m, p=args.p, epsilon=args.epsilon)
    return compute_budget(g), g


def cmd_generate(args) -> int:
    out = Path(args.out)
    if out.exists() and not args.force:
        print(f"refusing to overwrite {out} (use --force)", file=sys.stderr)
        return 1
    rel = make_salaries_demo()
    rel.export_csv(out)
    print(f"wrote {out}")
    print(f"n = {rel.n}")
    print(f"S[Sal] = {_fmt(rel.totals['Sal'], args.precise)}")
    return 0


def cmd_build(args) -> int:
    b, guarantees = _budget_from_args(args)
    if args.no_select:
        if args.streaming:
            sketch = build_lineage_streaming(
                iter_csv_records(Path(args.csv)), args.attribute, b, args.seed
            )
        else:
            rel = ingest_csv(Path(args.csv))
            sketch = build_lineage(rel, args.attribute, b, args.seed)
    else:
        if args.k < 3:
            raise ParameterError(
                f"summary selection needs k >= 3 (got k={args.k}); "
                f"use --no-select to build a single summary"
            )
        if args.streaming:
            raise ParameterError("--streaming requires --no-select (single pass, single summary)")
        rel = ingest_csv(Path(args.csv))
        summary_set = build_summary_set(
            rel, args.attribute, b, k=args.k, seed=args.seed
        )
        sketch = select_summary(summary_set)
    save_sketch(sketch, Path(args.out))
    print(f"b = {sketch.budget}")
    if guarantees is not None:
        certified = error_for_budget(sketch.budget, guarantees.m, guarantees.p)
        print(f"epsilon certified = {_fmt(certified, args.precise)}")
    print(f"distinct entries = {sketch.n_entries}")
    print(f"S = {_fmt(sketch.total_sum, args.precise)}")
    print(f"S/b = {_fmt(sketch.scale, args.precise)}")
    print(f"wrote {args.out}")
    return 0


def cmd_query(args) -> int:
    sketch = load_sketch(Path(args.sketch))
    predicate = parse_predicate(args.where)
    guarantees = None
    if args.m is not None or args.p is not None:
        if args.m is None or args.p is None:
            raise ParameterError("--m and --p must be given together")
        guarantees = (args.m, args.p)
    answer = approx_sum(sketch, predicate, guarantees)
    print(f"estimate = {_fmt(answer.estimate, args.precise)}")
    print(f"matched entries = {answer.matched_entries}")
    print(f"matched frequency mass = {answer.matched_frequency_mass}")
    if answer.additive_bound is not None:
        print(f"additive bound = {_fmt(answer.additive_bound, args.precise)}")
        report = relative_error_report(answer)
        print(
            f"relative error <= {_fmt(report.relative_error, args.precise)} "
            f"at rho = {_fmt(report.rho, args.precise)} ({report.note})"
        )
    if answer.sample_sum is not None:
        print(f"unscaled sample sum = {_fmt(answer.sample_sum, args.precise)}")
    return 0


def cmd_compare(args) -> int:
    rel = ingest_csv(Path(args.csv))
    predicate = parse_predicate(args.where)
    exact = rel.exact_sum(args.attribute, predicate)

    summary_set = build_summary_set(rel, args.attribute, args.b, k=args.k, seed=args.seed)
    lineage = select_summary(summary_set)
    lineage_answer = approx_sum(lineage, predicate)
    topk_answer = approx_sum(top_k_baseline(rel, args.attribute, args.b), predicate)
    uniform_answer = approx_sum(
        uniform_baseline(rel, args.attribute, args.b, args.seed), predicate
    )

    p = args.precise
    print(f"exact              = {_fmt(exact, p)}")
    print(f"weighted summary   = {_fmt(lineage_answer.estimate, p)}")
    print(f"top-k baseline     = {_fmt(topk_answer.estimate, p)}")
    print(f"uniform (unscaled) = {_fmt(uniform_answer.sample_sum, p)}")
    print(f"uniform (scaled)   = {_fmt(uniform_answer.estimate, p)}")
    return 0


def cmd_validate(args) -> int:
    rel = ingest_csv(Path(args.csv))
    if args.where:
        queries = [parse_predicate(expr) for expr in args.where]
    else:
        from .summaries import default_benchmarks

        queries = default_benchmarks(rel, args.attribute)
    seed = args.seed
    if args.free_seed:
        seed = int.from_bytes(os.urandom(8), "little")
        print(f"free seed = {seed}")
    report = run_bound_check(
        rel,
        args.attribute,
        args.b,
        queries,
        trials=args.trials,
        seed=seed,
        epsilon=args.epsilon,
    )
    print(report.summary_text())
    if args.report:
        report.to_csv(Path(args.report))
        print(f"wrote {args.report}")
    return 1 if report.band_violations() else 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    host = args.host or os.environ.get("AGGLINEAGE_HOST", "127.0.0.1")
    port = args.port or int(os.environ.get("AGGLINEAGE_PORT", "8331"))
    uvicorn.run(create_app(), host=host, port=port)
    return 0


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=_parse_count, default=0, help="master random seed")
    parser.add_argument(
        "--precise", action="store_true", help="print full-precision numbers"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="agglineage",
        description=(
            "Build value-weighted summaries of a numeric column and answer "
            "ad-hoc SUM predicate queries from the summary alone."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write the bundled demo dataset as CSV")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--force", action="store_true", help="overwrite an existing file")
    _add_common(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("build", help="build a summary from a CSV and persist it")
    p.add_argument("--csv", required=True, help="input CSV path")
    p.add_argument("--attribute", required=True, help="numeric column to aggregate")
    p.add_argument("--b", type=_parse_count, help="explicit number of trials")
    p.add_argument("--m", type=_parse_count, help="number of queries to guarantee")
    p.add_argument("--p", type=float, help="failure probability in (0,1)")
    p.add_argument("--epsilon", type=float, help="additive error as a fraction of S")
    p.add_argument("--k", type=_parse_count, default=3, help="summaries to build and select from")
    p.add_argument(
        "--no-select",
        action="store_true",
        help="build a single summary without benchmark selection",
    )
    p.add_argument(
        "--streaming",
        action="store_true",
        help="one-pass O(b)-space builder (implies --no-select; O(b*n) time)",
    )
    p.add_argument("--out", required=True, help="output summary path (.alsk)")
    _add_common(p)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("query", help="answer a predicate from a persisted summary")
    p.add_argument("--sketch", required=True, help="summary file path")
    p.add_argument("--where", required=True, help="predicate expression (or 'true')")
    p.add_argument("--m", type=_parse_count, help="queries guaranteed, for the bound")
    p.add_argument("--p", type=float, help="failure probability, for the bound")
    _add_common(p)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser(
        "compare", help="exact vs weighted summary vs top-k vs uniform baselines"
    )
    p.add_argument("--csv", required=True)
    p.add_argument("--attribute", required=True)
    p.add_argument("--where", required=True)
    p.add_argument("--b", type=_parse_count, required=True)
    p.add_argument("--k", type=_parse_count, default=3)
    _add_common(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("validate", help="Monte Carlo check of the additive guarantee")
    p.add_argument("--csv", required=True)
    p.add_argument("--attribute", required=True)
    p.add_argument("--b", type=_parse_count, required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--trials", type=_parse_count, default=1000)
    p.add_argument(
        "--where",
        action="append",
        help="predicate expression to check (repeatable; default: benchmarks)",
    )
    p.add_argument("--report", help="write the per-query table as CSV")
    p.add_argument(
        "--free-seed",
        action="store_true",
        help="draw a fresh seed instead of the pinned default",
    )
    _add_common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("serve", help="run the HTTP query service")
    p.add_argument("--host", help="bind address (default env AGGLINEAGE_HOST or 127.0.0.1)")
    p.add_argument("--port", type=int, help="port (default env AGGLINEAGE_PORT or 8331)")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except LineageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
