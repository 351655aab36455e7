"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 verification mismatch.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Sequence

import numpy as np

from . import costmodel
from .bench import BenchConfig, VerificationError, run_benchmark, same_answer, select_num_tables
from .codes import CodeDatabase, Partition
from .io import (
    FormatError,
    LshSpec,
    gen_block_correlated,
    gen_correlated_vectors,
    gen_uniform,
    lsh_encode,
    read_codes,
    read_index,
    read_vectors,
    write_codes,
    write_index,
    write_vectors,
)
from .mih import MihIndex, build_index
from .optimize import estimate_correlations, greedy_assign, within_substring_correlation
from .scan import scan_knn, scan_range

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_MISMATCH = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list[int]:
    try:
        return [int(float(t)) for t in text.split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _count(text: str) -> int:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a count, got {text!r}") from None
    if value < 0 or value != int(value):
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text!r}")
    return int(value)


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    if rows:
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    return buf.getvalue()


def _load_partition(path: str | None) -> Partition | None:
    if path is None:
        return None
    try:
        return Partition.from_dict(json.loads(Path(path).read_text()))
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise FormatError(f"malformed partition file {path}: {exc}") from None


def _open_index(args) -> MihIndex:
    if getattr(args, "index", None):
        return read_index(args.index)
    if not args.dataset:
        raise UsageError("need --index or --dataset")
    return build_index(read_codes(args.dataset), _load_partition(args.partition), args.tables)


# -- commands --------------------------------------------------------------


def cmd_gen(args) -> int:
    q = args.num_queries
    if args.kind == "uniform":
        db = gen_uniform(args.n, args.bits, args.seed)
        queries = gen_uniform(q, args.bits, args.seed + 1) if q else None
    elif args.kind == "correlated":
        db = gen_block_correlated(args.n, args.bits, args.block, args.seed)
        queries = gen_block_correlated(q, args.bits, args.block, args.seed + 1) if q else None
    elif args.kind == "vectors":
        write_vectors(gen_correlated_vectors(args.n + q, args.dim, args.seed, duplicate=args.block), args.out)
        return EXIT_OK
    else:
        if args.vectors:
            x = read_vectors(args.vectors)
        else:
            x = gen_correlated_vectors(args.n + q, args.dim, args.seed, duplicate=args.block)
        base, held = x[: len(x) - q], x[len(x) - q :]
        spec = LshSpec.fit(base, args.bits, args.seed)
        db = lsh_encode(base, spec)
        queries = lsh_encode(held, spec) if q else None
    write_codes(db, args.out)
    if queries is not None:
        if not args.queries_out:
            raise UsageError("--num-queries needs --queries-out")
        write_codes(queries, args.queries_out)
    return EXIT_OK


def cmd_build(args) -> int:
    index = _open_index(args)
    write_index(index, args.out)
    print(f"indexed {index.n} codes of {index.b} bits in {index.m} tables {list(index.partition.lengths)}", file=sys.stderr)
    return EXIT_OK


def _query_rows(mode: str, param: int, qi: int, ids, dists, lookups: int) -> list[dict]:
    return [
        {"query": qi, "mode": mode, "param": param, "rank": rank, "id": int(i), "distance": int(d), "lookups": lookups}
        for rank, (i, d) in enumerate(zip(ids, dists))
    ]


def _remote_query(args, queries: CodeDatabase) -> list[dict]:
    import httpx

    codes = [hex(q.to_int()) for q in queries]
    rows = []
    plan = [("knn", "k", k) for k in args.k or []] + [("range", "r", r) for r in args.radius or []]
    try:
        with httpx.Client(base_url=args.url, timeout=args.timeout) as client:
            for mode, key, p in plan:
                resp = client.post(f"/{mode}", json={"codes": codes, key: p})
                if resp.status_code == 422:
                    raise ValueError(f"server rejected {mode} request: {resp.text}")
                resp.raise_for_status()
                for qi, res in enumerate(resp.json()["results"]):
                    rows += _query_rows(mode, p, qi, res["ids"], res["distances"], res["trace"]["lookups"])
    except httpx.HTTPError as exc:
        raise OSError(f"service request failed: {exc}") from None
    return rows


def cmd_query(args) -> int:
    if not args.k and not args.radius:
        raise UsageError("need --k and/or --radius")
    queries = read_codes(args.queries)
    if args.url:
        rows = _remote_query(args, queries)
    else:
        index = _open_index(args)
        if queries.b != index.b:
            raise ValueError(f"queries have {queries.b} bits, index has {index.b}")
        rows = []
        for qi, q in enumerate(queries):
            for k in args.k or []:
                found, trace = index.knn_search(q, k)
                if args.verify and not same_answer("knn", found, scan_knn(index.db, q, k)):
                    raise VerificationError(f"knn k={k} disagrees with scan on query {qi}")
                rows += _query_rows("knn", k, qi, found.ids, found.distances, trace.lookups)
            for r in args.radius or []:
                found, trace = index.range_search(q, r)
                if args.verify and not same_answer("range", found, scan_range(index.db, q, r)):
                    raise VerificationError(f"range r={r} disagrees with scan on query {qi}")
                rows += _query_rows("range", r, qi, found.ids, found.distances, trace.lookups)
    _emit(json.dumps(rows, indent=1) + "\n" if args.format == "json" else _rows_to_csv(rows), args.out)
    return EXIT_OK


def cmd_bench(args) -> int:
    if not args.k and not args.radius:
        raise UsageError("need --k and/or --radius")
    db = read_codes(args.dataset)
    queries = read_codes(args.queries)
    if args.limit is not None:
        queries = queries[: args.limit]
    config = BenchConfig(
        dataset=db,
        queries=queries,
        ks=args.k or [],
        radii=args.radius or [],
        methods=args.methods.split(","),
        m=args.tables,
        partition=_load_partition(args.partition),
        warmup=args.warmup,
    )
    report = run_benchmark(config)
    _emit(report.to_json() + "\n" if args.format == "json" else report.to_csv(), args.out)
    return EXIT_OK


def cmd_tune(args) -> int:
    db = read_codes(args.dataset)
    queries = read_codes(args.queries)[: args.limit]
    best, timings = select_num_tables(db, queries, args.k[0] if args.k else 10, args.candidates)
    heuristic = costmodel.choose_num_tables(db.b, max(db.n, 2))
    report = {"heuristic": heuristic, "selected": best, "mean_ms": {str(m): t * 1e3 for m, t in timings.items()}}
    _emit(json.dumps(report, indent=2) + "\n", args.out)
    return EXIT_OK


def cmd_costmodel(args) -> int:
    if args.single_table:
        if not (args.dataset and args.queries and args.k):
            raise UsageError("--single-table needs --dataset, --queries and --k")
        index = _open_index(args)
        queries = read_codes(args.queries)[: args.limit]
        rows = []
        for k in args.k:
            radii, mih = [], []
            for q in queries:
                found, trace = index.knn_search(q, k)
                radii.append(int(found.distances[-1]))
                mih.append(trace.lookups)
            summary = costmodel.single_table_lookups(index.b, radii)
            rows.append({
                "k": k,
                "n": index.n,
                "b": index.b,
                "single_table_mean_lookups": summary.mean,
                "single_table_median_lookups": summary.median,
                "mih_mean_lookups": float(np.mean(mih)),
                "ratio_to_n": summary.mean / index.n,
                "ratio_to_mih": summary.mean / float(np.mean(mih)),
            })
    else:
        if args.bits is None or not args.radius or not args.n:
            raise UsageError("need --bits, --radius and --n (or --single-table)")
        rows = []
        for n in args.n:
            for r in args.radius:
                if r > args.bits:
                    raise UsageError(f"radius {r} exceeds --bits {args.bits}")
                for p in costmodel.cost_curve(args.bits, r, n):
                    rows.append({"b": args.bits, "r": r, "n": n, **asdict(p)})
    _emit(json.dumps(rows, indent=1) + "\n" if args.format == "json" else _rows_to_csv(rows), args.out)
    return EXIT_OK


def cmd_optimize(args) -> int:
    db = read_codes(args.dataset)
    if args.limit is not None:
        db = db[: args.limit]
    m = args.tables or costmodel.choose_num_tables(db.b, max(db.n, 2))
    corr = estimate_correlations(db)
    part = greedy_assign(corr, m, args.seed)
    Path(args.out).write_text(json.dumps(part.to_dict()) + "\n")
    print(
        f"within-substring max correlation: greedy {within_substring_correlation(corr, part):.4f}",
        file=sys.stderr,
    )
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(_open_index(args)), host=args.host, port=args.port)
    return EXIT_OK


# -- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mihash", description="Exact Hamming-space search with multi-index hashing.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def data_flags(p, index=True):
        p.add_argument("--dataset", help="codes file")
        if index:
            p.add_argument("--index", help="index file (instead of --dataset)")
        p.add_argument("--tables", type=int, help="number of substrings m (default: round(b / log2 n))")
        p.add_argument("--partition", help="partition JSON (default: consecutive substrings)")

    def out_flags(p):
        p.add_argument("--out", help="report path (default: stdout)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")

    p = sub.add_parser("gen", help="generate a dataset")
    p.add_argument("--kind", choices=("uniform", "correlated", "lsh", "vectors"), default="uniform")
    p.add_argument("--n", type=_count, required=True)
    p.add_argument("--bits", type=int, default=64)
    p.add_argument("--dim", type=int, default=128, help="vector dimension for lsh/vectors")
    p.add_argument("--block", type=int, default=4, help="duplicated bits or dimensions per block")
    p.add_argument("--vectors", help="vector file to encode (lsh)")
    p.add_argument("--num-queries", type=_count, default=0)
    p.add_argument("--queries-out")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("build", help="build and save an index")
    data_flags(p, index=False)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build, index=None)

    p = sub.add_parser("query", help="run kNN / range queries")
    data_flags(p)
    p.add_argument("--queries", required=True)
    p.add_argument("--k", type=_int_list)
    p.add_argument("--radius", type=_int_list)
    p.add_argument("--verify", action="store_true", help="check every answer against a linear scan")
    p.add_argument("--url", help="send queries to a running service instead")
    p.add_argument("--timeout", type=float, default=60.0)
    out_flags(p)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("bench", help="time MIH against linear scan")
    data_flags(p, index=False)
    p.add_argument("--queries", required=True)
    p.add_argument("--k", type=_int_list)
    p.add_argument("--radius", type=_int_list)
    p.add_argument("--methods", default="mih", help="comma list from {mih, scan}")
    p.add_argument("--warmup", type=int, default=10)
    p.add_argument("--limit", type=int, help="use only the first N queries")
    out_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("tune", help="pick m by timing candidates around the heuristic")
    p.add_argument("--dataset", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--k", type=_int_list)
    p.add_argument("--candidates", type=_int_list)
    p.add_argument("--limit", type=int, default=200)
    p.add_argument("--out")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("costmodel", help="emit cost-model curves")
    data_flags(p)
    p.add_argument("--bits", type=int)
    p.add_argument("--radius", type=_int_list)
    p.add_argument("--n", type=_int_list)
    p.add_argument("--single-table", action="store_true", help="compare single-table lookups with MIH")
    p.add_argument("--queries")
    p.add_argument("--k", type=_int_list)
    p.add_argument("--limit", type=int, default=100)
    out_flags(p)
    p.set_defaults(func=cmd_costmodel)

    p = sub.add_parser("optimize", help="greedy bit-to-substring assignment")
    p.add_argument("--dataset", required=True)
    p.add_argument("--tables", type=int)
    p.add_argument("--limit", type=int, help="estimate correlations from the first N codes")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("serve", help="serve queries over HTTP")
    data_flags(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"mihash: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except VerificationError as exc:
        print(f"mihash: verification failed: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except (FormatError, OSError, ValueError) as exc:
        print(f"mihash: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
