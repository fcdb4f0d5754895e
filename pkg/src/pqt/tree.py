"""Bin addressing, query traversal with w-pruning, and inverted lists."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _backend
from .codebook import TreeCodebooks
from .config import PqtConfig

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class BinCode:
    """Per-part (level-1, level-2) indices of one bin."""

    i1: tuple
    i2: tuple
    k1: int
    k2: int

    @property
    def part_ids(self) -> tuple:
        return tuple(a * self.k2 + b for a, b in zip(self.i1, self.i2))

    @property
    def global_code(self) -> int:
        """Positional code sum(id_p * (k1*k2)**p) with 64-bit wraparound."""
        base = self.k1 * self.k2
        code = 0
        for p, pid in enumerate(self.part_ids):
            code = (code + pid * pow(base, p, 1 << 64)) & _MASK64
        return code

    def slot(self, hash_size: int) -> int:
        return self.global_code % hash_size

    @classmethod
    def decode(cls, code: int, p_tree: int, k1: int, k2: int) -> "BinCode":
        """Inverse of :attr:`global_code`; valid while (k1*k2)**p_tree fits 64 bits."""
        base = k1 * k2
        i1, i2 = [], []
        for _ in range(p_tree):
            code, pid = divmod(code, base)
            a, b = divmod(pid, k2)
            i1.append(a)
            i2.append(b)
        return cls(tuple(i1), tuple(i2), k1, k2)


def part_weights(config) -> np.ndarray:
    """uint64 positional weights (k1*k2)**p mod 2**64."""
    base = config.k1 * config.k2
    return np.array([pow(base, p, 1 << 64) for p in range(config.p_tree)], dtype=np.uint64)


def slots_from_part_ids(part_ids, config) -> np.ndarray:
    """Hash slots for an (n, p_tree) array of flat per-part ids."""
    part_ids = np.asarray(part_ids, dtype=np.uint64)
    with np.errstate(over="ignore"):
        code = (part_ids * part_weights(config)[None, :]).sum(axis=1, dtype=np.uint64)
    return (code % np.uint64(config.hash_size)).astype(np.int64)


def encode_slot(code: BinCode, config) -> int:
    return code.slot(config.hash_size)


def assign_bin(tree: TreeCodebooks, x) -> BinCode:
    """Bin of one vector: nearest level-1 centroid per part, then nearest child."""
    x = np.asarray(x, dtype=np.float32).reshape(1, -1)
    ids = assign_bins(tree, x)[0]
    return BinCode(tuple(int(v) // tree.k2 for v in ids), tuple(int(v) % tree.k2 for v in ids), tree.k1, tree.k2)


def assign_bins(tree: TreeCodebooks, X) -> np.ndarray:
    """Flat per-part ids ``i1 * k2 + i2`` for every row: (n, p_tree) int64."""
    X = np.asarray(X, dtype=np.float32)
    P, m, k2 = tree.p_tree, tree.part_dim, tree.k2
    if X.shape[1] != P * m:
        raise ValueError(f"vector dim {X.shape[1]} != tree dim {P * m}")
    kern = _backend.kernels
    out = np.zeros((X.shape[0], P), dtype=np.int64)
    for p in range(P):
        sub = np.ascontiguousarray(X[:, p * m:(p + 1) * m])
        parent, _ = kern.nearest(sub, tree._l1_64[p])
        order = np.argsort(parent, kind="stable")
        bounds = np.searchsorted(parent[order], np.arange(tree.k1 + 1))
        child = np.zeros(X.shape[0], dtype=np.int64)
        for i in range(tree.k1):
            rows = order[bounds[i]:bounds[i + 1]]
            if len(rows):
                child[rows] = kern.nearest(sub[rows], tree._l2_64[p, i])[0]
        out[:, p] = parent * k2 + child
    return out


@dataclass(eq=False)
class InvertedLists:
    """Slot-bucketed vector ids with an (H+1) prefix-sum offset table."""

    offsets: np.ndarray  # int64 (H+1,)
    ids: np.ndarray  # int64 (n,)

    @property
    def hash_size(self) -> int:
        return len(self.offsets) - 1

    def slot_members(self, slot: int) -> np.ndarray:
        return self.ids[self.offsets[slot]:self.offsets[slot + 1]]


def lists_from_slots(slots, hash_size: int) -> InvertedLists:
    """Histogram -> exclusive prefix sum -> scatter. Ids ascend within a slot."""
    slots = np.asarray(slots, dtype=np.int64)
    hist = np.bincount(slots, minlength=hash_size)
    offsets = np.zeros(hash_size + 1, dtype=np.int64)
    np.cumsum(hist, out=offsets[1:])
    ids = _backend.kernels.scatter_ids(slots, offsets)
    return InvertedLists(offsets, ids)


def build_inverted_lists(tree: TreeCodebooks, db, config: PqtConfig) -> InvertedLists:
    X = getattr(db, "vectors", db)
    X = np.asarray(X, dtype=np.float32).reshape(-1, config.dim)
    slots = slots_from_part_ids(assign_bins(tree, X), config) if len(X) else np.zeros(0, np.int64)
    return lists_from_slots(slots, config.hash_size)


@dataclass(eq=False)
class TraversalLists:
    """Per-query traversal output.

    ``l1_ids``/``l1_dist``: (p_tree, k1) level-1 centroid ids and squared
    distances sorted ascending. ``l2_parent``/``l2_child``/``l2_dist``:
    (p_tree, w*k2) refined children sorted ascending. ``fine``: the
    (p_line, k1) matrix of per-fine-part squared distances to every level-1
    centroid.
    """

    l1_ids: np.ndarray
    l1_dist: np.ndarray
    l2_parent: np.ndarray
    l2_child: np.ndarray
    l2_dist: np.ndarray
    fine: np.ndarray
    k2: int

    @property
    def l2_flat(self) -> np.ndarray:
        return self.l2_parent * self.k2 + self.l2_child

    @property
    def distance_evaluations(self) -> int:
        """Part-distance evaluations, level 1 plus level 2, summed over parts."""
        return int(self.l1_dist.size + self.l2_dist.size)


def traverse(tree: TreeCodebooks, y, config: PqtConfig, w: int | None = None,
             fine_centroids: np.ndarray | None = None) -> TraversalLists:
    """Level-1 distances for all k1 centroids, level-2 for children of the w best.

    Ties in both sorted lists break by ascending centroid id.
    """
    w = config.w if w is None else w
    P, k1, k2, m = tree.p_tree, tree.k1, tree.k2, tree.part_dim
    y64 = np.asarray(y, dtype=np.float32).astype(np.float64)
    if y64.shape != (P * m,):
        raise ValueError(f"query dim {y64.size} != {P * m}")
    if fine_centroids is None:
        fine_centroids = tree.fine_centroids(config.p_line).astype(np.float64)
    p_line, _, mf = fine_centroids.shape
    diff = fine_centroids - y64.reshape(p_line, 1, mf)
    fine = (diff * diff).sum(axis=2)
    l1 = fine.reshape(P, p_line // P, k1).sum(axis=1)
    l1_ids = np.argsort(l1, axis=1, kind="stable")
    l1_dist = np.take_along_axis(l1, l1_ids, axis=1)

    parents = l1_ids[:, :w]
    yp = y64.reshape(P, 1, 1, m)
    kids = tree._l2_64[np.arange(P)[:, None], parents]  # (P, w, k2, m)
    d2 = kids - yp
    d2 = (d2 * d2).sum(axis=3).reshape(P, w * k2)
    par = np.repeat(parents, k2, axis=1)
    child = np.tile(np.arange(k2), (P, w))
    flat = par * k2 + child
    l2_parent = np.empty_like(par)
    l2_child = np.empty_like(child)
    l2_dist = np.empty_like(d2)
    for p in range(P):
        order = np.lexsort((flat[p], d2[p]))
        l2_parent[p] = par[p, order]
        l2_child[p] = child[p, order]
        l2_dist[p] = d2[p, order]
    return TraversalLists(l1_ids, l1_dist, l2_parent, l2_child, l2_dist, fine, k2)
