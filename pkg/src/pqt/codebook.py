"""Codebook training: Lloyd / LBG k-means and the two-level per-part tree."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .config import PqtConfig
from .vecio import VectorSet

__all__ = [
    "Codebook",
    "TreeCodebooks",
    "assign",
    "train_kmeans",
    "train_tree",
]


@dataclass(eq=False)
class Codebook:
    centroids: np.ndarray  # (k, m) float32
    sse_history: list = field(default_factory=list)
    iterations: int = 0

    @property
    def k(self) -> int:
        return int(self.centroids.shape[0])

    @property
    def part_dim(self) -> int:
        return int(self.centroids.shape[1])


@dataclass(eq=False)
class TreeCodebooks:
    """Level-1 and level-2 centroids of every tree part.

    ``level1`` has shape (p_tree, k1, m); ``level2`` has shape
    (p_tree, k1, k2, m), where ``level2[p, i]`` refines level-1 cluster ``i``
    of part ``p``.
    """

    level1: np.ndarray
    level2: np.ndarray

    def __post_init__(self):
        self.level1 = np.ascontiguousarray(self.level1, dtype=np.float32)
        self.level2 = np.ascontiguousarray(self.level2, dtype=np.float32)
        self._l1_64 = self.level1.astype(np.float64)
        self._l2_64 = self.level2.astype(np.float64)

    @property
    def p_tree(self) -> int:
        return int(self.level1.shape[0])

    @property
    def k1(self) -> int:
        return int(self.level1.shape[1])

    @property
    def k2(self) -> int:
        return int(self.level2.shape[2])

    @property
    def part_dim(self) -> int:
        return int(self.level1.shape[2])

    def fine_centroids(self, p_line: int) -> np.ndarray:
        """Level-1 centroids split into ``p_line`` fine slices: (p_line, k1, D/p_line)."""
        per = p_line // self.p_tree
        m = self.part_dim
        if p_line % self.p_tree or m % per:
            raise ValueError(f"p_line={p_line} does not refine p_tree={self.p_tree} parts of dim {m}")
        mf = m // per
        fine = self.level1.reshape(self.p_tree, self.k1, per, mf).transpose(0, 2, 1, 3)
        return np.ascontiguousarray(fine.reshape(p_line, self.k1, mf))


def assign(codebook, x) -> tuple[int, float]:
    """Nearest centroid of a single vector: ``(index, squared distance)``.

    Ties resolve to the lowest index.
    """
    cents = codebook.centroids if isinstance(codebook, Codebook) else np.asarray(codebook)
    x = np.asarray(x, dtype=np.float32).reshape(1, -1)
    labels, dists = _backend.kernels.nearest(x, cents.astype(np.float64))
    return int(labels[0]), float(dists[0])


def _jitter(rng, base, scale=1e-6):
    """Small per-coordinate offsets that survive float32 rounding."""
    mag = scale * np.maximum(1.0, np.abs(base))
    return base + mag * rng.choice([-1.0, 1.0], size=base.shape) * rng.uniform(1.0, 2.0, size=base.shape)


def _kmeanspp(X, k, rng):
    """Greedy k-means++ seeding; splits existing centroids when points run out."""
    n = X.shape[0]
    n_trials = 2 + int(math.log(k)) if k > 1 else 1
    X64 = X.astype(np.float64)
    centers = np.empty((k, X.shape[1]))
    first = int(rng.integers(n))
    centers[0] = X64[first]
    closest = _backend.kernels.nearest(X, centers[:1])[1]
    filled = 1
    while filled < k:
        pot = float(closest.sum())
        if pot <= 0.0:
            break
        cum = np.cumsum(closest)
        picks = np.searchsorted(cum, rng.uniform(0, pot, size=n_trials), side="right")
        picks = np.minimum(picks, n - 1)
        best_pot, best_pick, best_d = np.inf, None, None
        for pick in picks:
            d = _backend.kernels.nearest(X, X64[pick:pick + 1])[1]
            d = np.minimum(closest, d)
            s = float(d.sum())
            if s < best_pot:
                best_pot, best_pick, best_d = s, int(pick), d
        centers[filled] = X64[best_pick]
        closest = best_d
        filled += 1
    # fewer distinct points than k: split the live centroids
    for c in range(filled, k):
        centers[c] = _jitter(rng, centers[c % filled])
    return centers


def _dedupe(cents, rng):
    cents = cents.astype(np.float32)
    for _ in range(8):
        _, first = np.unique(cents, axis=0, return_index=True)
        if len(first) == len(cents):
            break
        dup = np.setdiff1d(np.arange(len(cents)), first)
        cents[dup] = _jitter(rng, cents[dup].astype(np.float64)).astype(np.float32)
    return cents


def train_kmeans(points, k: int, iters: int = 25, seed: int = 0) -> Codebook:
    """Lloyd iterations from a k-means++ seed.

    Stops when no assignment changes or after ``iters`` iterations. Empty
    clusters are moved onto the point farthest from its centroid. The
    within-cluster SSE recorded after every assignment step is
    non-increasing.

    Args:
        points: (n, m) array, n >= 1.
        k: number of centroids, k >= 1. When the data has fewer than ``k``
            distinct points the surplus centroids are split copies.
        iters: iteration cap.
        seed: RNG seed; training is deterministic given (points, k, iters, seed).
    """
    X = np.ascontiguousarray(points, dtype=np.float32)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("train_kmeans needs a non-empty (n, m) point set")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    rng = np.random.default_rng(seed)
    n, m = X.shape
    C = _kmeanspp(X, k, rng)
    kern = _backend.kernels

    X64 = X.astype(np.float64)
    labels, dists = kern.nearest(X, C)
    history = [float(dists.sum())]
    it = 0
    while it < iters:
        counts = np.bincount(labels, minlength=k)
        live = counts > 0
        sums = np.empty((k, m))
        for d in range(m):
            sums[:, d] = np.bincount(labels, weights=X64[:, d], minlength=k)
        C[live] = sums[live] / counts[live, None]
        if not live.all():
            diff = X64 - C[labels]
            own = (diff * diff).sum(axis=1)
            for c in np.flatnonzero(~live):
                far = int(np.argmax(own))
                if own[far] <= 0.0:
                    break
                C[c] = X64[far]
                own[far] = 0.0
        it += 1
        new_labels, dists = kern.nearest(X, C)
        history.append(float(dists.sum()))
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    return Codebook(centroids=_dedupe(C, rng), sse_history=history, iterations=it)


def _part_rng(seed, *path):
    return np.random.SeedSequence([seed, *path]).generate_state(1)[0]


def train_tree(train_set, config: PqtConfig, threads: int = 1) -> TreeCodebooks:
    """Train level-1 codebooks per part, then one level-2 codebook per level-1 cluster.

    Each level-2 codebook sees exactly the sub-vectors that :func:`assign`
    maps to its parent. A parent with no sub-vectors gets ``k2`` jittered
    copies of its own centroid.
    """
    X = train_set.vectors if isinstance(train_set, VectorSet) else np.asarray(train_set, np.float32)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("training set is empty")
    if X.shape[1] != config.dim:
        raise ValueError(f"training dim {X.shape[1]} != config.dim {config.dim}")
    P, k1, k2, m = config.p_tree, config.k1, config.k2, config.part_dim
    level1 = np.empty((P, k1, m), dtype=np.float32)
    level2 = np.empty((P, k1, k2, m), dtype=np.float32)

    def level2_job(p, i, sub):
        if len(sub) == 0:
            rng = np.random.default_rng(_part_rng(config.seed, p, i, 1))
            base = np.repeat(level1[p, i][None].astype(np.float64), k2, axis=0)
            return p, i, _jitter(rng, base).astype(np.float32)
        cb = train_kmeans(sub, k2, config.train_iters, int(_part_rng(config.seed, p, i)))
        return p, i, cb.centroids

    jobs = []
    for p in range(P):
        sub = np.ascontiguousarray(X[:, p * m:(p + 1) * m])
        cb = train_kmeans(sub, k1, config.train_iters, int(_part_rng(config.seed, p)))
        level1[p] = cb.centroids
        labels, _ = _backend.kernels.nearest(sub, level1[p].astype(np.float64))
        order = np.argsort(labels, kind="stable")
        bounds = np.searchsorted(labels[order], np.arange(k1 + 1))
        for i in range(k1):
            jobs.append((p, i, sub[order[bounds[i]:bounds[i + 1]]]))

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(lambda j: level2_job(*j), jobs))
    else:
        results = [level2_job(*j) for j in jobs]
    for p, i, cents in results:
        level2[p, i] = cents
    return TreeCodebooks(level1, level2)
