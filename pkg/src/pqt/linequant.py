"""Line quantization: encode each fine part of a vector as a point on a
segment between two level-1 centroids, and evaluate query distances to that
point from values the traversal already computed.

For a fine part with endpoints ``c_i`` (lambda = 0) and ``c_j`` (lambda = 1),
query-to-endpoint squared distances ``b2 = |y - c_i|^2`` and
``a2 = |y - c_j|^2``, and ``c2 = |c_i - c_j|^2``, the squared distance from
the query to ``(1 - lambda) c_i + lambda c_j`` is

    b2 + lambda^2 * c2 + lambda * (a2 - b2 - c2).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _backend

LAMBDA_LEVELS = 255


def pair_count(k1: int) -> int:
    return max(k1 * (k1 - 1) // 2, 1)


def pair_index(i, j, k1: int):
    """Id of the unordered pair i < j: ``i*k1 - i(i+1)/2 + (j - i - 1)``."""
    if k1 == 1:
        return np.zeros_like(np.asarray(i))
    i = np.asarray(i, dtype=np.int64)
    j = np.asarray(j, dtype=np.int64)
    return i * k1 - i * (i + 1) // 2 + (j - i - 1)


def pair_lookup(k1: int) -> tuple[np.ndarray, np.ndarray]:
    """Arrays mapping pair id -> (i, j). For k1 == 1 the single id maps to (0, 0)."""
    if k1 == 1:
        return np.zeros(1, np.int32), np.zeros(1, np.int32)
    i, j = np.triu_indices(k1, k=1)
    return i.astype(np.int32), j.astype(np.int32)


def pair_id_bytes(k1: int) -> int:
    """Storage width of a pair id: 1 byte while k1(k1-1)/2 <= 256."""
    return 1 if pair_count(k1) <= 256 else 2


def quantize_lambda(lam) -> np.ndarray:
    """round(255 * lam) with halves rounded up; lam is clamped to [0, 1]."""
    lam = np.clip(np.asarray(lam, dtype=np.float64), 0.0, 1.0)
    return np.floor(lam * LAMBDA_LEVELS + 0.5).astype(np.uint8)


def dequantize_lambda(q) -> np.ndarray:
    return np.asarray(q).astype(np.float64) / float(LAMBDA_LEVELS)


@dataclass(eq=False)
class LineCodes:
    """Per-vector line codes: ``lam_q`` (n, p_line) uint8, ``pair_id`` (n, p_line) uint16."""

    lam_q: np.ndarray
    pair_id: np.ndarray

    def __post_init__(self):
        self.lam_q = np.ascontiguousarray(self.lam_q, dtype=np.uint8)
        self.pair_id = np.ascontiguousarray(self.pair_id, dtype=np.uint16)

    def __len__(self) -> int:
        return int(self.lam_q.shape[0])

    @property
    def p_line(self) -> int:
        return int(self.lam_q.shape[1])

    def endpoints(self, k1: int):
        pi, pj = pair_lookup(k1)
        return pi[self.pair_id], pj[self.pair_id]

    @classmethod
    def empty(cls, p_line: int) -> "LineCodes":
        return cls(np.zeros((0, p_line), np.uint8), np.zeros((0, p_line), np.uint16))

    @classmethod
    def concat(cls, parts) -> "LineCodes":
        parts = list(parts)
        return cls(np.concatenate([c.lam_q for c in parts]), np.concatenate([c.pair_id for c in parts]))


def build_pair_table(fine_centroids) -> np.ndarray:
    """(p_line, k1, k1) float32 squared distances between fine centroid slices."""
    fine = np.asarray(fine_centroids, dtype=np.float64)
    diff = fine[:, :, None, :] - fine[:, None, :, :]
    table = (diff * diff).sum(axis=3)
    return table.astype(np.float32)


def encode_line(fine_centroids, x, return_residual: bool = False):
    """Line code of a single vector.

    Returns ``(lam_q, pair_id)`` arrays of length p_line, plus the per-part
    squared residuals of the unquantized projection when requested.
    """
    lam, pi, pj, resid = _backend.kernels.encode_lines(
        np.asarray(x, dtype=np.float32).reshape(1, -1), np.asarray(fine_centroids, dtype=np.float64))
    k1 = fine_centroids.shape[1]
    out = (quantize_lambda(lam[0]), pair_index(pi[0], pj[0], k1).astype(np.uint16))
    return (*out, resid[0]) if return_residual else out


def encode_lines(fine_centroids, X, threads: int = 1, chunk: int = 4096):
    """Encode every row of ``X``.

    Returns:
        ``(codes, residual)``: :class:`LineCodes` and the (n,) total squared
        residual of the unquantized projections.
    """
    X = np.ascontiguousarray(X, dtype=np.float32)
    fine = np.ascontiguousarray(fine_centroids, dtype=np.float64)
    k1 = fine.shape[1]
    p_line = fine.shape[0]
    if len(X) == 0:
        return LineCodes.empty(p_line), np.zeros(0)

    def job(lo):
        lam, pi, pj, resid = _backend.kernels.encode_lines(X[lo:lo + chunk], fine)
        return quantize_lambda(lam), pair_index(pi, pj, k1).astype(np.uint16), resid.sum(axis=1)

    starts = range(0, len(X), chunk)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(job, starts))
    else:
        parts = [job(lo) for lo in starts]
    codes = LineCodes(np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts]))
    return codes, np.concatenate([p[2] for p in parts])


def line_distance(lam, pair_i, pair_j, fine_dists, pair_table) -> np.ndarray:
    """Approximate squared distances for explicit (lambda, i, j) codes.

    Args:
        lam: (c, p_line) or (p_line,) projection coefficients in [0, 1].
        pair_i, pair_j: endpoint ids; ``lam = 0`` sits on ``pair_i``.
        fine_dists: (p_line, k1) query-to-centroid squared distances.
        pair_table: (p_line, k1, k1) centroid pair squared distances.
    """
    lam = np.asarray(lam, dtype=np.float64)
    single = lam.ndim == 1
    lam2 = np.atleast_2d(lam)
    out = _backend.kernels.line_distances(
        lam2, np.atleast_2d(pair_i).astype(np.int32), np.atleast_2d(pair_j).astype(np.int32),
        np.ascontiguousarray(fine_dists, dtype=np.float64),
        np.ascontiguousarray(pair_table, dtype=np.float64))
    return out[0] if single else out


def code_distances(cand, codes: LineCodes, k1: int, fine_dists, pair_table64) -> np.ndarray:
    """Approximate squared distances of stored codes ``codes[cand]``."""
    pi, pj = pair_lookup(k1)
    return _backend.kernels.line_distances_codes(
        np.asarray(cand, dtype=np.int64), codes.lam_q, codes.pair_id, pi, pj,
        np.ascontiguousarray(fine_dists, dtype=np.float64), pair_table64)


def reconstruct(fine_centroids, codes: LineCodes) -> np.ndarray:
    """Explicit line-quantized vectors (n, D) from stored codes."""
    fine = np.asarray(fine_centroids, dtype=np.float64)
    p_line, k1, mf = fine.shape
    pi, pj = codes.endpoints(k1)
    lam = dequantize_lambda(codes.lam_q)[:, :, None]
    parts = np.arange(p_line)[None, :]
    ci = fine[parts, pi]
    cj = fine[parts, pj]
    return ((1.0 - lam) * ci + lam * cj).reshape(len(codes), p_line * mf)


def distortion_stats(db, codes: LineCodes, fine_centroids) -> tuple[float, float, float]:
    """(min, max, mean) over vectors of the total squared line-quantization residual.

    The residual uses the stored (quantized) lambda.
    """
    X = np.asarray(getattr(db, "vectors", db), dtype=np.float64)
    if len(X) == 0:
        return 0.0, 0.0, 0.0
    total = np.zeros(len(X))
    for lo in range(0, len(X), 65536):
        sub = LineCodes(codes.lam_q[lo:lo + 65536], codes.pair_id[lo:lo + 65536])
        diff = X[lo:lo + 65536] - reconstruct(fine_centroids, sub)
        total[lo:lo + len(diff)] = (diff * diff).sum(axis=1)
    return float(total.min()), float(total.max()), float(total.mean())
