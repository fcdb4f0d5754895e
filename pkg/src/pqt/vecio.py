"""Readers and writers for the TexMex ``.fvecs`` / ``.bvecs`` / ``.ivecs`` formats.

Each record is a little-endian int32 dimension ``d`` followed by ``d``
payload elements: float32 (fvecs), uint8 (bvecs) or int32 (ivecs).
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

_PAYLOAD = {
    "fvecs": np.dtype("<f4"),
    "bvecs": np.dtype("u1"),
    "ivecs": np.dtype("<i4"),
}
_KIND_OF_ELEM = {"float32": "fvecs", "uint8": "bvecs"}


class VecsFormatError(ValueError):
    """Malformed vecs file (truncated record, bad header)."""


class DimensionMismatchError(VecsFormatError):
    """A record's dimension differs from the first record's."""


@dataclass(frozen=True, eq=False)
class VectorSet:
    """Dense row-major vectors of one dimension.

    ``data`` keeps the on-disk element type (float32 or uint8) so writing
    back is a byte identity; ``vectors`` gives the float32 view used for
    arithmetic.
    """

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 2:
            raise ValueError(f"VectorSet data must be 2-D, got shape {data.shape}")
        if data.dtype not in (np.float32, np.uint8):
            data = data.astype(np.float32)
        object.__setattr__(self, "data", np.ascontiguousarray(data))

    @classmethod
    def from_array(cls, arr, elem_kind: str = "float32") -> "VectorSet":
        return cls(np.asarray(arr, dtype=np.dtype(elem_kind)))

    @property
    def dim(self) -> int:
        return int(self.data.shape[1])

    @property
    def count(self) -> int:
        return int(self.data.shape[0])

    @property
    def elem_kind(self) -> str:
        return str(self.data.dtype)

    @property
    def vectors(self) -> np.ndarray:
        """float32 view (uint8 widened)."""
        if self.data.dtype == np.float32:
            return self.data
        return self.data.astype(np.float32)

    def __len__(self) -> int:
        return self.count

    def head(self, limit: int) -> "VectorSet":
        return VectorSet(self.data[:limit])


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """Per-query ranked true neighbor ids (int32); row 0 is the true NN."""

    ids: np.ndarray

    def __post_init__(self):
        ids = np.ascontiguousarray(np.asarray(self.ids, dtype=np.int32))
        if ids.ndim != 2:
            raise ValueError(f"GroundTruth ids must be 2-D, got shape {ids.shape}")
        object.__setattr__(self, "ids", ids)

    @property
    def count(self) -> int:
        return int(self.ids.shape[0])

    @property
    def depth(self) -> int:
        return int(self.ids.shape[1])

    def __len__(self) -> int:
        return self.count

    def validate(self, n_db: int) -> None:
        if self.ids.size and (self.ids.min() < 0 or self.ids.max() >= n_db):
            raise ValueError(f"ground-truth ids outside [0, {n_db})")


def kind_from_path(path) -> str:
    ext = os.path.splitext(str(path))[1].lstrip(".").lower()
    if ext not in _PAYLOAD:
        raise VecsFormatError(f"{path}: cannot infer vecs kind from extension {ext!r}")
    return ext


def read_vecs(path, kind: str | None = None, limit: int | None = None):
    """Read a vecs file.

    Args:
        path: file to read.
        kind: ``"fvecs"``, ``"bvecs"`` or ``"ivecs"``; inferred from the
            extension when omitted.
        limit: read at most this many records.

    Returns:
        A :class:`VectorSet` for fvecs/bvecs, a :class:`GroundTruth` for ivecs.

    Raises:
        VecsFormatError: truncated file; the message carries the byte offset
            of the incomplete record.
        DimensionMismatchError: a record's dimension differs from the first.
    """
    kind = kind or kind_from_path(path)
    if kind not in _PAYLOAD:
        raise ValueError(f"unknown vecs kind {kind!r}")
    payload = _PAYLOAD[kind]
    with open(path, "rb") as fh:
        head = fh.read(4)
        if len(head) == 0:
            return _empty(kind)
        if len(head) < 4:
            raise VecsFormatError(f"{path}: truncated record header at byte offset 0")
        dim = int(np.frombuffer(head, dtype="<i4")[0])
        if dim <= 0:
            raise VecsFormatError(f"{path}: invalid dimension {dim} at byte offset 0")
        rec = 4 + dim * payload.itemsize
        fh.seek(0)
        if limit is None:
            buf = fh.read()
        else:
            buf = fh.read(max(int(limit), 0) * rec)

    n_full, rest = divmod(len(buf), rec)
    raw = np.frombuffer(buf, dtype=np.uint8, count=n_full * rec).reshape(n_full, rec)
    dims = raw[:, :4].copy().view("<i4").ravel()
    bad = np.flatnonzero(dims != dim)
    if len(bad):
        r = int(bad[0])
        raise DimensionMismatchError(
            f"{path}: record {r} at byte offset {r * rec} has dimension "
            f"{int(dims[r])}, expected {dim}"
        )
    if rest:
        raise VecsFormatError(
            f"{path}: truncated record at byte offset {n_full * rec} "
            f"({rest} of {rec} bytes present)"
        )
    body = raw[:, 4:].copy().view(payload).reshape(n_full, dim)
    if kind == "ivecs":
        return GroundTruth(body.astype(np.int32))
    return VectorSet(body.astype(payload.newbyteorder("=")))


def _empty(kind):
    if kind == "ivecs":
        return GroundTruth(np.zeros((0, 0), dtype=np.int32))
    return VectorSet(np.zeros((0, 0), dtype=_PAYLOAD[kind].newbyteorder("=")))


def write_vecs(vecs, path, kind: str | None = None) -> None:
    """Write a :class:`VectorSet` or :class:`GroundTruth` in vecs layout.

    The kind defaults to the element type (float32 -> fvecs, uint8 -> bvecs,
    GroundTruth -> ivecs).
    """
    if isinstance(vecs, GroundTruth):
        arr, default = vecs.ids, "ivecs"
    elif isinstance(vecs, VectorSet):
        arr, default = vecs.data, _KIND_OF_ELEM[vecs.elem_kind]
    else:
        raise TypeError(f"cannot write {type(vecs).__name__} as vecs")
    kind = kind or default
    payload = _PAYLOAD[kind]
    n, dim = arr.shape
    rec = np.empty((n, 4 + dim * payload.itemsize), dtype=np.uint8)
    if n:
        rec[:, :4] = np.frombuffer(np.int32(dim).astype("<i4").tobytes(), dtype=np.uint8)
        rec[:, 4:] = np.ascontiguousarray(arr.astype(payload)).view(np.uint8).reshape(n, -1)
    try:
        with open(path, "wb") as fh:
            fh.write(rec.tobytes())
    except OSError as exc:
        raise OSError(f"writing {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Index container

INDEX_MAGIC = b"PQTINDEX"
INDEX_END = b"PQTEND\x00\x00"
INDEX_VERSION = 1
# config fields in on-disk order with their struct codes
_CONFIG_LAYOUT = (
    ("dim", "I"), ("p_tree", "I"), ("k1", "I"), ("k2", "I"), ("w", "I"),
    ("p_line", "I"), ("hash_size", "Q"), ("candidate_budget", "Q"),
    ("rerank_exact", "Q"), ("resort_bins", "B"), ("train_iters", "I"),
    ("seed", "Q"), ("table_len", "Q"), ("max_bins", "Q"),
)
_CONFIG_STRUCT = "<" + "".join(code for _, code in _CONFIG_LAYOUT)


class IndexFormatError(ValueError):
    """Corrupt or truncated index file."""


class IncompatibleIndexError(IndexFormatError):
    """Index file written by a different format (magic/version mismatch)."""


def save_index(index, path) -> None:
    """Write ``index`` as a single little-endian container.

    Layout: magic, version, config, level-1 and level-2 codebooks, pair
    table, slope tables, inverted-list offsets and ids, line codes (one
    record of ``p_line`` (lambda, pair id) entries per vector), end marker.
    The raw vectors are not stored.
    """
    import struct

    from .linequant import pair_id_bytes

    cfg = index.config
    chunks = [INDEX_MAGIC, struct.pack("<I", INDEX_VERSION)]
    vals = [int(getattr(cfg, name)) for name, _ in _CONFIG_LAYOUT]
    chunks.append(struct.pack(_CONFIG_STRUCT, *vals))
    chunks.append(index.tree.level1.astype("<f4").tobytes())
    chunks.append(index.tree.level2.astype("<f4").tobytes())
    chunks.append(index.pair_table.astype("<f4").tobytes())
    chunks.append(struct.pack("<I", len(index.tables)))
    for table in index.tables:
        chunks.append(struct.pack("<dQ", table.slope, len(table.entries)))
        chunks.append(table.entries.astype("<i4").tobytes())
    n = len(index.codes)
    chunks.append(struct.pack("<Q", n))
    chunks.append(index.lists.offsets.astype("<u8").tobytes())
    chunks.append(index.lists.ids.astype("<u4").tobytes())
    pid = "u1" if pair_id_bytes(cfg.k1) == 1 else "<u2"
    rec = np.empty((n, cfg.p_line), dtype=[("lam", "u1"), ("pair", pid)])
    rec["lam"] = index.codes.lam_q
    rec["pair"] = index.codes.pair_id
    chunks.append(rec.tobytes())
    chunks.append(INDEX_END)
    try:
        with open(path, "wb") as fh:
            for c in chunks:
                fh.write(c)
    except OSError as exc:
        raise OSError(f"writing index {path}: {exc}") from exc


class _Reader:
    def __init__(self, buf, path):
        self.buf, self.pos, self.path = buf, 0, path

    def take(self, nbytes, what):
        if self.pos + nbytes > len(self.buf):
            raise IndexFormatError(
                f"{self.path}: truncated index while reading {what} at byte offset {self.pos}")
        out = self.buf[self.pos:self.pos + nbytes]
        self.pos += nbytes
        return out

    def array(self, dtype, shape, what):
        dtype = np.dtype(dtype)
        count = int(np.prod(shape))
        raw = self.take(count * dtype.itemsize, what)
        return np.frombuffer(raw, dtype=dtype).reshape(shape)


def load_index(path, db=None):
    """Read an index written by :func:`save_index`.

    Args:
        path: container file.
        db: optional raw vectors to attach for exact re-ranking.

    Raises:
        IncompatibleIndexError: magic bytes or version differ.
        IndexFormatError: the file is truncated or inconsistent.
    """
    import struct

    from .binorder import OrderTable
    from .codebook import TreeCodebooks
    from .config import ConfigError, PqtConfig
    from .linequant import LineCodes, pair_count, pair_id_bytes
    from .search import PqtIndex
    from .tree import InvertedLists

    with open(path, "rb") as fh:
        buf = fh.read()
    r = _Reader(buf, path)
    magic = bytes(r.take(len(INDEX_MAGIC), "magic"))
    if magic != INDEX_MAGIC:
        raise IncompatibleIndexError(f"{path}: bad magic, expected {INDEX_MAGIC!r}, got {magic!r}")
    (version,) = struct.unpack("<I", r.take(4, "version"))
    if version != INDEX_VERSION:
        raise IncompatibleIndexError(f"{path}: format version {version}, expected {INDEX_VERSION}")
    vals = struct.unpack(_CONFIG_STRUCT, r.take(struct.calcsize(_CONFIG_STRUCT), "config"))
    kw = {name: int(v) for (name, _), v in zip(_CONFIG_LAYOUT, vals)}
    kw["resort_bins"] = bool(kw["resort_bins"])
    try:
        cfg = PqtConfig(**kw)
    except ConfigError as exc:
        raise IndexFormatError(f"{path}: invalid stored config: {exc}") from exc
    P, k1, k2, m = cfg.p_tree, cfg.k1, cfg.k2, cfg.part_dim
    level1 = r.array("<f4", (P, k1, m), "level-1 codebooks").astype(np.float32)
    level2 = r.array("<f4", (P, k1, k2, m), "level-2 codebooks").astype(np.float32)
    pair_table = r.array("<f4", (cfg.p_line, k1, k1), "pair table").astype(np.float32)
    (n_tables,) = struct.unpack("<I", r.take(4, "table count"))
    tables = []
    for t in range(n_tables):
        slope, length = struct.unpack("<dQ", r.take(16, f"slope table {t} header"))
        entries = r.array("<i4", (length, 2), f"slope table {t}").astype(np.int32)
        tables.append(OrderTable(slope, entries))
    (n,) = struct.unpack("<Q", r.take(8, "vector count"))
    offsets = r.array("<u8", (cfg.hash_size + 1,), "offsets").astype(np.int64)
    ids = r.array("<u4", (n,), "ids").astype(np.int64)
    pid = "u1" if pair_id_bytes(k1) == 1 else "<u2"
    rec = r.array([("lam", "u1"), ("pair", pid)], (n, cfg.p_line), "line codes")
    end = bytes(r.take(len(INDEX_END), "end marker"))
    if end != INDEX_END:
        raise IndexFormatError(f"{path}: missing end marker at byte offset {r.pos - len(INDEX_END)}")
    if r.pos != len(buf):
        raise IndexFormatError(f"{path}: {len(buf) - r.pos} trailing bytes after end marker")
    if offsets[-1] != n or (n and (np.diff(offsets) < 0).any()):
        raise IndexFormatError(f"{path}: inconsistent inverted-list offsets")
    codes = LineCodes(rec["lam"].copy(), rec["pair"].astype(np.uint16))
    if n and int(codes.pair_id.max()) >= pair_count(k1):
        raise IndexFormatError(f"{path}: pair id out of range")
    index = PqtIndex(cfg, TreeCodebooks(level1, level2), pair_table,
                     InvertedLists(offsets, ids), codes, tables)
    if db is not None:
        index.attach(db)
    return index
