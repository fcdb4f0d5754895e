"""Candidate-bin enumeration orders.

``dijkstra_order`` is the exact multi-sequence priority-queue order.
``heuristic_order`` replaces it by precomputed rank-pair tables, one per
slope ``1.08**k`` (k = -5..4): the table for slope ``s`` lists rank pairs
``(ra, rb)`` by ascending ``ra + s * rb``.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

SLOPE_EXPONENTS = tuple(range(-5, 5))
SLOPE_BASE = 1.08
SLOPES = tuple(SLOPE_BASE ** k for k in SLOPE_EXPONENTS)
_LOG_SLOPES = np.log(np.array(SLOPES))


@dataclass(eq=False)
class OrderTable:
    slope: float
    entries: np.ndarray  # (T, 2) int32 rank pairs

    def __len__(self) -> int:
        return len(self.entries)


def dijkstra_order(dist_lists, max_bins: int) -> np.ndarray:
    """Rank tuples in non-decreasing order of summed distance.

    Args:
        dist_lists: P ascending distance arrays.
        max_bins: number of tuples to emit at most.

    Returns:
        (n, P) int64 array of rank tuples, ``n <= max_bins``.
    """
    lists = [np.asarray(d, dtype=np.float64) for d in dist_lists]
    P = len(lists)
    lens = [len(d) for d in lists]
    if P == 0 or min(lens) == 0 or max_bins <= 0:
        return np.zeros((0, P), dtype=np.int64)

    def cost(t):
        s = 0.0
        for p in range(P):
            s = s + lists[p][t[p]]
        return s

    start = (0,) * P
    heap = [(cost(start), start)]
    seen = {start}
    out = []
    while heap and len(out) < max_bins:
        _, t = heapq.heappop(heap)
        out.append(t)
        for p in range(P):
            if t[p] + 1 < lens[p]:
                nxt = t[:p] + (t[p] + 1,) + t[p + 1:]
                if nxt not in seen:
                    seen.add(nxt)
                    heapq.heappush(heap, (cost(nxt), nxt))
    return np.array(out, dtype=np.int64).reshape(-1, P)


def _grid_order(slope: float, length: int, side_a: int | None, side_b: int | None) -> np.ndarray:
    """The ``length`` smallest rank pairs under ``ra + slope * rb``.

    Ties break lexicographically on (ra, rb). The search window grows until
    it provably holds every pair cheaper than the ``length``-th one.
    """
    side_a = length if side_a is None else min(side_a, length)
    side_b = length if side_b is None else min(side_b, length)
    if side_a <= 0 or side_b <= 0 or length <= 0:
        return np.zeros((0, 2), dtype=np.int32)
    total = side_a * side_b
    want = min(length, total)
    # smallest cost bound c with #pairs(cost <= c) >= want
    rb_all = np.arange(side_b)

    def count(c):
        per = np.floor(c - slope * rb_all) + 1
        return int(np.clip(per, 0, side_a).sum())

    hi = max(1.0, math.sqrt(2.0 * slope * want))
    while count(hi) < want:
        hi *= 2.0
    lo = 0.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if count(mid) >= want:
            hi = mid
        else:
            lo = mid
    bound = hi
    ra_max = np.clip(np.floor(bound - slope * rb_all).astype(np.int64) + 2, 0, side_a)
    rb = np.repeat(rb_all, ra_max)
    ra = np.arange(int(ra_max.sum())) - np.repeat(np.cumsum(ra_max) - ra_max, ra_max)
    key = ra + slope * rb
    order = np.lexsort((rb, ra, key))[:want]
    return np.stack([ra[order], rb[order]], axis=1).astype(np.int32)


def build_slope_table(slope: float, T: int, side: int | None = None) -> OrderTable:
    return OrderTable(slope, _grid_order(slope, T, side, side))


def build_slope_tables(T: int, side: int | None = None) -> list:
    """One :class:`OrderTable` per slope ``1.08**k``, k = -5..4.

    Args:
        T: table length.
        side: optional bound on each rank (the per-part list length); tables
            then enumerate only the ``side x side`` grid.
    """
    if T < 1:
        raise ValueError(f"table length must be >= 1, got {T}")
    return [build_slope_table(s, T, side) for s in SLOPES]


def select_slope(dist_a, dist_b) -> int:
    """Index into :data:`SLOPES` for a part pair from each list's first gap."""
    if len(dist_a) < 2 or len(dist_b) < 2:
        return SLOPE_EXPONENTS.index(0)
    gap_a = float(dist_a[1] - dist_a[0])
    gap_b = float(dist_b[1] - dist_b[0])
    if gap_a <= 0.0 or gap_b <= 0.0:
        return SLOPE_EXPONENTS.index(0)
    ratio = min(max(gap_b / gap_a, SLOPES[0]), SLOPES[-1])
    return int(np.argmin(np.abs(_LOG_SLOPES - math.log(ratio))))


@lru_cache(maxsize=256)
def _diagonal_order(len_a: int, len_b: int, cap: int) -> np.ndarray:
    """Slope-1 order over a len_a x len_b grid: by ra + rb, then ra."""
    ra_l, rb_l, got = [], [], 0
    s = 0
    while got < cap and s <= len_a + len_b - 2:
        ra = np.arange(max(0, s - len_b + 1), min(s, len_a - 1) + 1)
        ra_l.append(ra)
        rb_l.append(s - ra)
        got += len(ra)
        s += 1
    if not ra_l:
        return np.zeros((0, 2), dtype=np.int64)
    out = np.stack([np.concatenate(ra_l), np.concatenate(rb_l)], axis=1)[:cap]
    out.flags.writeable = False
    return out


def _pair_stream(tables, dist_a, dist_b, isotropic):
    idx = SLOPE_EXPONENTS.index(0) if isotropic else select_slope(dist_a, dist_b)
    ent = tables[idx].entries
    keep = (ent[:, 0] < len(dist_a)) & (ent[:, 1] < len(dist_b))
    return ent[keep].astype(np.int64)


def heuristic_order(dist_lists, tables, max_bins: int, isotropic: bool = False) -> np.ndarray:
    """Approximate ascending-distance bin order from precomputed tables.

    Parts are paired (0,1), (2,3), ...; each pair walks the slope table
    chosen from its lists. Pair streams (and an unpaired last part) are then
    merged pairwise with the slope-1 order over stream positions until one
    stream remains. ``isotropic=True`` always uses slope 1.

    Returns:
        (n, P) int64 rank tuples starting with (0, ..., 0), no duplicates.
    """
    lists = [np.asarray(d) for d in dist_lists]
    P = len(lists)
    if P == 0 or max_bins <= 0 or min(len(d) for d in lists) == 0:
        return np.zeros((0, P), dtype=np.int64)
    if P == 1:
        return np.arange(min(len(lists[0]), max_bins), dtype=np.int64)[:, None]

    streams = []
    for p in range(0, P - 1, 2):
        streams.append(_pair_stream(tables, lists[p], lists[p + 1], isotropic))
    if P % 2:
        streams.append(np.arange(len(lists[-1]), dtype=np.int64)[:, None])

    while len(streams) > 1:
        merged = []
        for a in range(0, len(streams) - 1, 2):
            sa, sb = streams[a], streams[a + 1]
            pos = _diagonal_order(len(sa), len(sb), max_bins)
            merged.append(np.concatenate([sa[pos[:, 0]], sb[pos[:, 1]]], axis=1))
        if len(streams) % 2:
            merged.append(streams[-1])
        streams = merged
    return streams[0][:max_bins]


def resort_bins(ranks, dist_lists) -> np.ndarray:
    """Stable re-sort of rank tuples by their summed level-2 distance."""
    ranks = np.asarray(ranks)
    if len(ranks) == 0:
        return ranks
    total = np.zeros(len(ranks))
    for p, d in enumerate(dist_lists):
        total = total + np.asarray(d, dtype=np.float64)[ranks[:, p]]
    return ranks[np.argsort(total, kind="stable")]
