"""Index construction, the online query pipeline and the exact baseline."""

from __future__ import annotations

import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .binorder import OrderTable, build_slope_tables, dijkstra_order, heuristic_order, resort_bins
from .codebook import TreeCodebooks, train_tree
from .config import PqtConfig
from .linequant import LineCodes, build_pair_table, code_distances, encode_lines
from .tree import InvertedLists, assign_bins, lists_from_slots, slots_from_part_ids, traverse
from .vecio import VectorSet

STAGES = ("traversal", "bin_selection", "vector_proposal", "reranking")
_BIN_CHUNK = 4096


@dataclass(eq=False)
class QueryResult:
    ids: np.ndarray
    dists: np.ndarray
    stats: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.ids)


@dataclass(eq=False)
class PqtIndex:
    config: PqtConfig
    tree: TreeCodebooks
    pair_table: np.ndarray  # (p_line, k1, k1) float32
    lists: InvertedLists
    codes: LineCodes
    tables: list  # OrderTable per slope
    db: VectorSet | None = None

    def __post_init__(self):
        self.pair_table = np.ascontiguousarray(self.pair_table, dtype=np.float32)
        self._pair_table64 = self.pair_table.astype(np.float64)
        self._fine64 = self.tree.fine_centroids(self.config.p_line).astype(np.float64)

    @property
    def count(self) -> int:
        return len(self.codes)

    @property
    def fine_centroids(self) -> np.ndarray:
        return self.tree.fine_centroids(self.config.p_line)

    def attach(self, db) -> "PqtIndex":
        """Attach the raw vectors used for exact re-ranking."""
        db = db if isinstance(db, VectorSet) else VectorSet(np.asarray(db, dtype=np.float32))
        if db.count != self.count or (db.count and db.dim != self.config.dim):
            raise ValueError(f"raw set of {db.count}x{db.dim} does not match index of "
                             f"{self.count}x{self.config.dim}")
        self.db = db
        self._db_vectors = db.vectors
        return self

    def raw_vectors(self):
        if self.db is None:
            return None
        if getattr(self, "_db_vectors", None) is None:
            self._db_vectors = self.db.vectors
        return self._db_vectors


def _as_vectorset(x) -> VectorSet:
    return x if isinstance(x, VectorSet) else VectorSet(np.asarray(x, dtype=np.float32))


def _chunked(fn, X, threads, chunk=16384):
    starts = list(range(0, len(X), chunk))
    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(lambda lo: fn(X[lo:lo + chunk]), starts))
    return [fn(X[lo:lo + chunk]) for lo in starts]


def build_index(db, train, config: PqtConfig, *, tree: TreeCodebooks | None = None,
                wave_size: int | None = None, threads: int = 1) -> PqtIndex:
    """Train (unless ``tree`` is given) and index ``db``.

    The database may be ingested in waves of ``wave_size`` vectors; the
    result is identical to a one-shot build.
    """
    db = _as_vectorset(db)
    if db.count and db.dim != config.dim:
        raise ValueError(f"database dim {db.dim} != config.dim {config.dim}")
    n = db.count
    if config.hash_size == 0:
        config = config.replace(hash_size=max(1, min(1 << 26, 4 * n)))
    if tree is None:
        if train is None:
            raise ValueError("need a training set or pre-trained codebooks")
        train = _as_vectorset(train)
        if train.count == 0:
            raise ValueError("training set is empty")
        if train.dim != config.dim:
            raise ValueError(f"training dim {train.dim} != config.dim {config.dim}")
        tree = train_tree(train, config, threads=threads)
    elif tree.level1.shape != (config.p_tree, config.k1, config.part_dim) or tree.k2 != config.k2:
        raise ValueError("pre-trained codebooks do not match the config")

    fine = tree.fine_centroids(config.p_line)
    pair_table = build_pair_table(fine)
    wave_size = wave_size or max(n, 1)
    slot_parts, code_parts = [], []
    for lo in range(0, n, wave_size):
        X = db.data[lo:lo + wave_size].astype(np.float32)
        ids = np.concatenate(_chunked(lambda c: assign_bins(tree, c), X, threads))
        slot_parts.append(slots_from_part_ids(ids, config))
        code_parts.append(encode_lines(fine, X, threads=threads)[0])
    slots = np.concatenate(slot_parts) if slot_parts else np.zeros(0, np.int64)
    codes = LineCodes.concat(code_parts) if code_parts else LineCodes.empty(config.p_line)
    lists = lists_from_slots(slots, config.hash_size)
    tables = build_slope_tables(config.table_len, side=config.k1 * config.k2)
    index = PqtIndex(config, tree, pair_table, lists, codes, tables)
    if n:
        index.attach(db)
    return index


def _top_by(dists, ids, keep):
    """Indices of the ``keep`` smallest (dist, id) pairs, sorted."""
    if keep >= len(dists):
        return np.lexsort((ids, dists))
    kth = np.partition(dists, keep - 1)[keep - 1]
    sel = np.flatnonzero(dists <= kth)
    order = np.lexsort((ids[sel], dists[sel]))
    return sel[order[:keep]]


def knn_query(index: PqtIndex, y, k: int, *, budget: int | None = None,
              rerank_exact: int | None = None, resort: bool | None = None,
              w: int | None = None, ordering: str = "heuristic") -> QueryResult:
    """Four-stage query: traversal, bin proposal, vector proposal, re-ranking.

    Unset keyword arguments default to the index config. ``ordering`` picks
    the bin order: ``"heuristic"`` (slope tables), ``"isotropic"`` (slope 1
    only) or ``"dijkstra"`` (exact priority queue).
    """
    cfg = index.config
    budget = cfg.candidate_budget if budget is None else budget
    rr = cfg.rerank_exact if rerank_exact is None else rerank_exact
    resort = cfg.resort_bins if resort is None else resort
    w = cfg.w if w is None else w
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if not 1 <= w <= cfg.k1:
        raise ValueError(f"w={w} outside [1, k1={cfg.k1}]")
    kern = _backend.kernels
    y = np.ascontiguousarray(y, dtype=np.float32).ravel()
    if y.shape[0] != cfg.dim:
        raise ValueError(f"query dim {y.shape[0]} != index dim {cfg.dim}")
    stats = {s: 0.0 for s in STAGES}
    stats.update(bins_proposed=0, bins_scanned=0, bins_nonempty=0, candidates=0, exact_evals=0)
    if index.count == 0:
        return QueryResult(np.zeros(0, np.int64), np.zeros(0), stats)

    t0 = time.perf_counter()
    tl = traverse(index.tree, y, cfg, w=w, fine_centroids=index._fine64)
    t1 = time.perf_counter()

    dist_lists = list(tl.l2_dist)
    if ordering == "heuristic":
        ranks = heuristic_order(dist_lists, index.tables, cfg.max_bins)
    elif ordering == "isotropic":
        ranks = heuristic_order(dist_lists, index.tables, cfg.max_bins, isotropic=True)
    elif ordering == "dijkstra":
        ranks = dijkstra_order(dist_lists, cfg.max_bins)
    else:
        raise ValueError(f"unknown ordering {ordering!r}")
    if resort:
        ranks = resort_bins(ranks, dist_lists)
    flat = tl.l2_flat
    part_ids = np.stack([flat[p][ranks[:, p]] for p in range(cfg.p_tree)], axis=1)
    t2 = time.perf_counter()
    stats["bin_selection"] += t2 - t1

    cand_parts = []
    need = budget
    seen = np.zeros(0, dtype=np.int64)
    for lo in range(0, len(part_ids), _BIN_CHUNK):
        tb = time.perf_counter()
        slots = slots_from_part_ids(part_ids[lo:lo + _BIN_CHUNK], cfg)
        # distinct bins may collide in one slot; read each slot once
        _, first = np.unique(slots, return_index=True)
        slots = slots[np.sort(first)]
        if len(seen):
            slots = slots[~np.isin(slots, seen)]
        seen = np.concatenate([seen, slots])
        tg = time.perf_counter()
        stats["bin_selection"] += tg - tb
        got, scanned, nonempty = kern.gather(slots, index.lists.offsets, index.lists.ids, need)
        stats["vector_proposal"] += time.perf_counter() - tg
        stats["bins_proposed"] += min(len(part_ids) - lo, _BIN_CHUNK)
        stats["bins_scanned"] += scanned
        stats["bins_nonempty"] += nonempty
        cand_parts.append(got)
        need -= len(got)
        if need <= 0:
            break
    cand = np.concatenate(cand_parts) if cand_parts else np.zeros(0, np.int64)
    stats["candidates"] = len(cand)

    t3 = time.perf_counter()
    raw = index.raw_vectors()
    if rr > 0 and raw is None:
        warnings.warn("raw vectors not attached; exact re-ranking disabled", RuntimeWarning, stacklevel=2)
        rr = 0
    depth = max(rr, k) if rr > 0 else k
    if len(cand) == 0:
        ids, dists = np.zeros(0, np.int64), np.zeros(0)
    else:
        approx = code_distances(cand, index.codes, cfg.k1, tl.fine, index._pair_table64)
        top = _top_by(approx, cand, depth)
        ids, dists = cand[top], approx[top]
        if rr > 0:
            exact = kern.sq_dists(raw, ids, y)
            stats["exact_evals"] = len(ids)
            order = np.lexsort((ids, exact))
            ids, dists = ids[order], exact[order]
        ids, dists = ids[:k], dists[:k]
    t4 = time.perf_counter()
    stats["traversal"] = t1 - t0
    stats["reranking"] = t4 - t3
    return QueryResult(ids, dists, stats)


def search_batch(index: PqtIndex, queries, k: int, threads: int = 1, **kwargs) -> list:
    """Run :func:`knn_query` for every row; results keep query order."""
    Y = np.asarray(getattr(queries, "vectors", queries), dtype=np.float32)
    if threads > 1 and len(Y) > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(lambda y: knn_query(index, y, k, **kwargs), Y))
    return [knn_query(index, y, k, **kwargs) for y in Y]


def brute_force_knn(db, y, k: int) -> QueryResult:
    """Exact squared-Euclidean top-k; ties by ascending id."""
    X = np.asarray(getattr(db, "vectors", db), dtype=np.float32)
    y = np.ascontiguousarray(y, dtype=np.float32).ravel()
    t0 = time.perf_counter()
    n = len(X)
    if n == 0:
        return QueryResult(np.zeros(0, np.int64), np.zeros(0), {"exact_evals": 0})
    ids = np.arange(n, dtype=np.int64)
    d = _backend.kernels.sq_dists(X, ids, y)
    top = _top_by(d, ids, min(k, n))
    return QueryResult(ids[top], d[top], {"exact_evals": n, "total": time.perf_counter() - t0})
