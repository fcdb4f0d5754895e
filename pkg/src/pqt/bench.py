"""Recall@R / timing harness, ground truth and synthetic data."""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .search import STAGES, PqtIndex, brute_force_knn, search_batch
from .vecio import GroundTruth, VectorSet

RECALL_RS = (1, 10, 100)


def recall_at(results, gt, R: int) -> float:
    """Fraction of queries whose true NN (``gt`` column 0) is in the first ``R`` ids."""
    gt_ids = gt.ids if isinstance(gt, GroundTruth) else np.asarray(gt)
    if len(results) != len(gt_ids):
        raise ValueError(f"{len(results)} results vs {len(gt_ids)} ground-truth rows")
    if len(results) == 0:
        return 0.0
    hits = 0
    for res, row in zip(results, gt_ids):
        ids = getattr(res, "ids", res)
        if int(row[0]) in np.asarray(ids)[:R]:
            hits += 1
    return hits / len(results)


def make_ground_truth(db, queries, depth: int = 100, threads: int = 1) -> GroundTruth:
    """Exact top-``depth`` ids per query (brute force)."""
    Y = np.asarray(getattr(queries, "vectors", queries), dtype=np.float32)
    X = np.asarray(getattr(db, "vectors", db), dtype=np.float32)
    depth = min(depth, len(X))

    def one(y):
        return brute_force_knn(X, y, depth).ids

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            rows = list(pool.map(one, Y))
    else:
        rows = [one(y) for y in Y]
    return GroundTruth(np.array(rows, dtype=np.int32).reshape(len(Y), depth))


def synth_clustered(n: int, dim: int, blobs: int, sigma: float, seed: int = 0,
                    return_labels: bool = False):
    """``n`` float32 vectors from ``blobs`` isotropic Gaussians.

    Blob means are uniform in [0, 255]^dim; each vector picks a blob
    uniformly. Deterministic per seed.
    """
    if n < 0 or blobs < 1 or dim < 1:
        raise ValueError("need n >= 0, dim >= 1 and blobs >= 1")
    rng = np.random.default_rng(seed)
    means = rng.uniform(0.0, 255.0, size=(blobs, dim))
    labels = rng.integers(0, blobs, size=n)
    noise = rng.standard_normal(size=(n, dim))
    data = (means[labels] + sigma * noise).astype(np.float32)
    vs = VectorSet(data)
    return (vs, labels, means) if return_labels else vs


def synth_sift_like(n: int, dim: int = 128, blobs: int = 256, seed: int = 0) -> VectorSet:
    """uint8 vectors with SIFT-like statistics: sparse, non-negative, heavy tailed.

    Blob prototypes are exponential magnitudes (most coordinates small, a
    few large); samples add proportional noise and clip to [0, 255].
    """
    rng = np.random.default_rng(seed)
    protos = rng.exponential(20.0, size=(blobs, dim)) * (rng.random((blobs, dim)) < 0.6)
    labels = rng.integers(0, blobs, size=n)
    base = protos[labels]
    x = base * rng.lognormal(0.0, 0.35, size=(n, dim)) + rng.exponential(4.0, size=(n, dim))
    return VectorSet(np.clip(np.rint(x), 0, 255).astype(np.uint8))


@dataclass
class RecallReport:
    recall_at: dict
    stage_ms: dict
    n_queries: int
    k: int
    config: dict
    backend: str = ""
    counters: dict = field(default_factory=dict)

    def deterministic_view(self) -> dict:
        """Everything except wall-clock timings."""
        return {"recall_at": self.recall_at, "n_queries": self.n_queries, "k": self.k,
                "config": self.config, "counters": self.counters}

    def to_dict(self) -> dict:
        total = sum(self.stage_ms.values())
        split = {s: (self.stage_ms[s] / total if total > 0 else 0.0) for s in STAGES}
        return {
            "recall_at": {str(r): v for r, v in self.recall_at.items()},
            "stage_ms": dict(self.stage_ms),
            "stage_split": split,
            "total_ms": total,
            "n_queries": self.n_queries,
            "k": self.k,
            "counters": dict(self.counters),
            "backend": self.backend,
            "config": dict(self.config),
        }

    def to_text(self) -> str:
        d = self.to_dict()
        lines = [f"recall@{r}={v:.4f}" for r, v in d["recall_at"].items()]
        lines += [f"ms_{s}={d['stage_ms'][s]:.4f}" for s in STAGES]
        lines.append(f"ms_total={d['total_ms']:.4f}")
        lines += [f"split_{s}={d['stage_split'][s]:.3f}" for s in STAGES]
        lines += [f"{key}={val}" for key, val in d["counters"].items()]
        lines += [f"n_queries={self.n_queries}", f"k={self.k}", f"backend={self.backend}"]
        lines += [f"config.{key}={val}" for key, val in self.config.items()]
        return "\n".join(lines)

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def run_benchmark(index: PqtIndex, queries, gt, k: int = 100, threads: int = 1,
                  warmup: bool = True, **query_kwargs) -> RecallReport:
    """Run every query, then aggregate recall@{1,10,100} and mean per-stage time.

    One warm-up query runs first and is excluded from the averages.
    """
    Y = np.asarray(getattr(queries, "vectors", queries), dtype=np.float32)
    if len(Y) and warmup:
        search_batch(index, Y[:1], k, threads=1, **query_kwargs)
    t0 = time.perf_counter()
    results = search_batch(index, Y, k, threads=threads, **query_kwargs)
    wall = time.perf_counter() - t0
    nq = max(len(results), 1)
    stage_ms = {s: 1000.0 * sum(r.stats.get(s, 0.0) for r in results) / nq for s in STAGES}
    counters = {}
    for key in ("bins_scanned", "bins_nonempty", "candidates", "exact_evals"):
        counters[f"mean_{key}"] = round(sum(r.stats.get(key, 0) for r in results) / nq, 6)
    recall = {R: recall_at(results, gt, R) for R in RECALL_RS}
    report = RecallReport(recall, stage_ms, len(results), k, index.config.to_dict(), _backend.name, counters)
    report.wall_ms_per_query = 1000.0 * wall / nq
    return report
