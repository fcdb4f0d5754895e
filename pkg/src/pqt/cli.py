"""``pqt`` command line: synth, gt, train, build, query, bench.

Exit codes: 0 success, 1 usage error, 2 data/format error.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .config import ConfigError, PqtConfig
from .vecio import (
    GroundTruth,
    IndexFormatError,
    VecsFormatError,
    VectorSet,
    load_index,
    read_vecs,
    save_index,
    write_vecs,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2
_DEFAULTS = PqtConfig(dim=128)  # only read for default values


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _positive(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _nonneg(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text}")
    return v


def _config_flags(p, query_only=False):
    g = p.add_argument_group("index parameters")
    if not query_only:
        g.add_argument("--p-tree", type=_positive, default=_DEFAULTS.p_tree, help="tree parts (default %(default)s)")
        g.add_argument("--k1", type=_positive, default=_DEFAULTS.k1, help="level-1 centroids per part (default %(default)s)")
        g.add_argument("--k2", type=_positive, default=_DEFAULTS.k2, help="level-2 centroids per level-1 cluster (default %(default)s)")
        g.add_argument("--p-line", type=_positive, default=_DEFAULTS.p_line, help="line-quantization parts (default %(default)s)")
        g.add_argument("--hash-size", type=_nonneg, default=_DEFAULTS.hash_size, help="inverted-list slots, 0 = min(2^26, 4n) (default %(default)s)")
        g.add_argument("--iters", type=_nonneg, default=_DEFAULTS.train_iters, help="Lloyd iteration cap (default %(default)s)")
        g.add_argument("--table-len", type=_positive, default=_DEFAULTS.table_len, help="slope table length (default %(default)s)")
    g.add_argument("--w", type=_positive, default=None, help=f"level-1 clusters refined per part (default {_DEFAULTS.w})")
    g.add_argument("--budget", type=_positive, default=None, help=f"candidate budget (default {_DEFAULTS.candidate_budget})")
    g.add_argument("--rerank-exact", type=_nonneg, default=None, help=f"exact re-rank depth, 0 disables (default {_DEFAULTS.rerank_exact})")
    g.add_argument("--resort-bins", action="store_true", default=None, help="re-sort proposed bins by level-2 distance")
    g.add_argument("--max-bins", type=_positive, default=None, help=f"proposed bins per query (default {_DEFAULTS.max_bins})")


def _common(p, seed=True):
    if seed:
        p.add_argument("--seed", type=_nonneg, default=0, help="RNG seed (default %(default)s)")
    p.add_argument("--threads", type=_positive, default=os.cpu_count() or 1, help="worker threads (default: all cores)")
    p.add_argument("--limit", type=_positive, default=None, help="read at most this many vectors per input file")


def build_parser():
    p = _Parser(prog="pqt", description="Product Quantization Tree nearest-neighbor search")
    sub = p.add_subparsers(dest="cmd", metavar="{synth,gt,train,build,query,bench}", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("synth", help="write a synthetic clustered dataset")
    s.add_argument("--out", required=True, help="database output (.fvecs)")
    s.add_argument("--queries", help="also write queries from the same blobs to this .fvecs")
    s.add_argument("--n", type=_positive, default=10000, help="database vectors (default %(default)s)")
    s.add_argument("--nq", type=_positive, default=1000, help="query vectors (default %(default)s)")
    s.add_argument("--dim", type=_positive, default=64, help="dimension (default %(default)s)")
    s.add_argument("--blobs", type=_positive, default=32, help="Gaussian blobs (default %(default)s)")
    s.add_argument("--sigma", type=float, default=20.0, help="blob standard deviation (default %(default)s)")
    _common(s)

    g = sub.add_parser("gt", help="write exact ground truth (.ivecs)")
    g.add_argument("--db", required=True)
    g.add_argument("--queries", required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--k", type=_positive, default=100, help="neighbors per query (default %(default)s)")
    _common(g)

    t = sub.add_parser("train", help="train codebooks and save them as an empty index")
    t.add_argument("--train", required=True)
    t.add_argument("--out", required=True)
    _config_flags(t)
    _common(t)

    b = sub.add_parser("build", help="build and save a full index")
    b.add_argument("--db", required=True)
    b.add_argument("--train", help="training vectors (default: the database)")
    b.add_argument("--index", help="pre-trained codebooks from `pqt train` (excludes --train)")
    b.add_argument("--out", required=True)
    b.add_argument("--wave", type=_positive, default=None, help="ingest the database in waves of this size")
    _config_flags(b)
    _common(b)

    q = sub.add_parser("query", help="answer queries; write ids (.ivecs) and distances (.fvecs)")
    q.add_argument("--index", required=True)
    q.add_argument("--queries", required=True)
    q.add_argument("--out", required=True, help="ids output (.ivecs); distances go to <out stem>.dist.fvecs")
    q.add_argument("--db", help="raw database vectors for exact re-ranking")
    q.add_argument("--k", type=_positive, default=10)
    _config_flags(q, query_only=True)
    _common(q)

    e = sub.add_parser("bench", help="measure recall@{1,10,100} and per-stage time")
    e.add_argument("--index", required=True)
    e.add_argument("--queries", required=True)
    e.add_argument("--db", help="raw database vectors (exact re-ranking; ground truth when --gt is absent)")
    e.add_argument("--gt", help="ground truth (.ivecs)")
    e.add_argument("--out", help="write the report as JSON here")
    e.add_argument("--k", type=_positive, default=100)
    _config_flags(e, query_only=True)
    _common(e)
    return p


def _read(path, limit):
    try:
        return read_vecs(path, limit=limit)
    except FileNotFoundError as exc:
        raise DataError(f"{path}: no such file") from exc


class DataError(Exception):
    pass


def _vectors(path, limit) -> VectorSet:
    vs = _read(path, limit)
    if not isinstance(vs, VectorSet):
        raise DataError(f"{path}: expected .fvecs or .bvecs vectors")
    if vs.count == 0:
        raise DataError(f"{path}: no vectors")
    return vs


def _build_config(args, dim):
    return PqtConfig(
        dim=dim, p_tree=args.p_tree, k1=args.k1, k2=args.k2,
        w=args.w if args.w is not None else _DEFAULTS.w,
        p_line=args.p_line, hash_size=args.hash_size,
        candidate_budget=args.budget or _DEFAULTS.candidate_budget,
        rerank_exact=args.rerank_exact if args.rerank_exact is not None else _DEFAULTS.rerank_exact,
        resort_bins=bool(args.resort_bins), train_iters=args.iters, seed=args.seed,
        table_len=args.table_len, max_bins=args.max_bins or _DEFAULTS.max_bins,
    )


def _query_overrides(args, index):
    cfg = index.config
    changes = {}
    if args.w is not None:
        if args.w > cfg.k1:
            raise UsageError(f"--w {args.w} exceeds the index's k1={cfg.k1}")
        changes["w"] = args.w
    if args.budget is not None:
        changes["candidate_budget"] = args.budget
    if args.rerank_exact is not None:
        changes["rerank_exact"] = args.rerank_exact
    if args.resort_bins:
        changes["resort_bins"] = True
    if args.max_bins is not None:
        changes["max_bins"] = args.max_bins
    if changes:
        index.config = cfg.replace(**changes)
    return index


def _precheck(args):
    """Reject inconsistent index flags before touching any input."""
    if args.cmd == "build" and args.index and args.train:
        raise UsageError("--index and --train are mutually exclusive")
    _build_config(args, args.p_line)


def _open_index(args):
    index = load_index(args.index)
    if getattr(args, "db", None):
        db = _vectors(args.db, None)
        index.attach(db)
    index = _query_overrides(args, index)
    if index.db is None and index.count and index.config.rerank_exact > 0:
        print("note: no --db given, exact re-ranking disabled", file=sys.stderr)
        index.config = index.config.replace(rerank_exact=0)
    return index


def cmd_synth(args):
    from .bench import synth_clustered

    total = args.n + (args.nq if args.queries else 0)
    vs = synth_clustered(total, args.dim, args.blobs, args.sigma, seed=args.seed)
    write_vecs(VectorSet(vs.data[:args.n]), args.out)
    if args.queries:
        write_vecs(VectorSet(vs.data[args.n:]), args.queries)
    print(f"wrote {args.n} x {args.dim} to {args.out}")


def cmd_gt(args):
    from .bench import make_ground_truth

    db = _vectors(args.db, args.limit)
    queries = _vectors(args.queries, args.limit)
    if db.dim != queries.dim:
        raise DataError(f"dimension mismatch: db {db.dim} vs queries {queries.dim}")
    gt = make_ground_truth(db, queries, args.k, threads=args.threads)
    write_vecs(gt, args.out)
    print(f"wrote ground truth {gt.count} x {gt.depth} to {args.out}")


def cmd_train(args):
    from .search import build_index

    train = _vectors(args.train, args.limit)
    cfg = _build_config(args, train.dim)
    index = build_index(VectorSet(np.zeros((0, train.dim), np.float32)), train, cfg, threads=args.threads)
    save_index(index, args.out)
    print(f"trained codebooks on {train.count} vectors -> {args.out}")


def cmd_build(args):
    from .search import build_index

    if args.index and args.train:
        raise UsageError("--index and --train are mutually exclusive")
    db = _vectors(args.db, args.limit)
    tree = None
    if args.index:
        trained = load_index(args.index)
        tree = trained.tree
        cfg = trained.config.replace(hash_size=args.hash_size)
        if cfg.dim != db.dim:
            raise DataError(f"codebooks are {cfg.dim}-dim, database is {db.dim}-dim")
        train = None
    else:
        train = _vectors(args.train, args.limit) if args.train else db
        if train.dim != db.dim:
            raise DataError(f"dimension mismatch: db {db.dim} vs train {train.dim}")
        cfg = _build_config(args, db.dim)
    index = build_index(db, train, cfg, tree=tree, wave_size=args.wave, threads=args.threads)
    save_index(index, args.out)
    print(f"indexed {db.count} vectors into {index.config.hash_size} slots -> {args.out}")


def cmd_query(args):
    from .search import search_batch

    index = _open_index(args)
    queries = _vectors(args.queries, args.limit)
    if queries.dim != index.config.dim:
        raise DataError(f"queries are {queries.dim}-dim, index is {index.config.dim}-dim")
    results = search_batch(index, queries, args.k, threads=args.threads)
    ids = np.full((len(results), args.k), -1, dtype=np.int32)
    dists = np.full((len(results), args.k), np.inf, dtype=np.float32)
    for row, res in enumerate(results):
        ids[row, :len(res)] = res.ids
        dists[row, :len(res)] = res.dists
    write_vecs(GroundTruth(ids), args.out)
    stem = os.path.splitext(args.out)[0]
    write_vecs(VectorSet(dists), stem + ".dist.fvecs")
    print(f"wrote {len(results)} x {args.k} results to {args.out}")


def cmd_bench(args):
    from .bench import make_ground_truth, run_benchmark

    index = _open_index(args)
    queries = _vectors(args.queries, args.limit)
    if queries.dim != index.config.dim:
        raise DataError(f"queries are {queries.dim}-dim, index is {index.config.dim}-dim")
    if args.gt:
        gt = _read(args.gt, args.limit)
        if not isinstance(gt, GroundTruth):
            raise DataError(f"{args.gt}: expected .ivecs ground truth")
        if gt.count != queries.count:
            raise DataError(f"{gt.count} ground-truth rows for {queries.count} queries")
    elif index.db is not None:
        gt = make_ground_truth(index.db, queries, 1, threads=args.threads)
    else:
        raise UsageError("bench needs --gt or --db")
    report = run_benchmark(index, queries, gt, k=args.k, threads=args.threads)
    print(report.to_text())
    if args.out:
        report.write_json(args.out)


_COMMANDS = {
    "synth": cmd_synth, "gt": cmd_gt, "train": cmd_train,
    "build": cmd_build, "query": cmd_query, "bench": cmd_bench,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        if args.cmd in ("train", "build"):
            _precheck(args)
        _COMMANDS[args.cmd](args)
    except (UsageError, ConfigError) as exc:
        print(f"pqt {args.cmd}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, VecsFormatError, IndexFormatError) as exc:
        print(f"pqt {args.cmd}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"pqt {args.cmd}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"pqt {args.cmd}: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
