"""Hyperparameters of a PQT index."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PqtConfig:
    """All knobs of tree training, indexing and querying.

    ``hash_size=0`` means "choose at build time" (``min(2**26, 4 * n)``).
    ``max_bins`` caps the length of the proposed bin sequence per query.
    """

    dim: int
    p_tree: int = 2
    k1: int = 16
    k2: int = 8
    w: int = 4
    p_line: int = 32
    hash_size: int = 0
    candidate_budget: int = 4096
    rerank_exact: int = 64
    resort_bins: bool = False
    train_iters: int = 25
    seed: int = 0
    table_len: int = 4096
    max_bins: int = 1 << 17

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        ints = {f.name: getattr(self, f.name) for f in dataclasses.fields(self) if f.name != "resort_bins"}
        for name, value in ints.items():
            if not isinstance(value, int) or isinstance(value, bool):
                raise ConfigError(f"{name} must be an integer, got {value!r}")
        for name in ("dim", "p_tree", "k1", "k2", "w", "p_line", "candidate_budget", "table_len", "max_bins"):
            if ints[name] < 1:
                raise ConfigError(f"{name} must be >= 1, got {ints[name]}")
        for name in ("hash_size", "rerank_exact", "train_iters", "seed"):
            if ints[name] < 0:
                raise ConfigError(f"{name} must be >= 0, got {ints[name]}")
        if self.dim % self.p_tree:
            raise ConfigError(f"dim={self.dim} is not divisible by p_tree={self.p_tree}")
        if self.p_line % self.p_tree:
            raise ConfigError(f"p_line={self.p_line} is not a multiple of p_tree={self.p_tree}")
        if self.dim % self.p_line:
            raise ConfigError(f"dim={self.dim} is not divisible by p_line={self.p_line}")
        if self.w > self.k1:
            raise ConfigError(f"w={self.w} exceeds k1={self.k1}")
        if self.k1 * (self.k1 - 1) // 2 > 65536:
            raise ConfigError(f"k1={self.k1} too large for 16-bit pair ids")

    @property
    def part_dim(self) -> int:
        return self.dim // self.p_tree

    @property
    def fine_dim(self) -> int:
        return self.dim // self.p_line

    @property
    def fine_per_part(self) -> int:
        return self.p_line // self.p_tree

    @property
    def n_bins(self) -> int:
        """(k1 * k2) ** p_tree, the number of addressable bins before hashing."""
        return (self.k1 * self.k2) ** self.p_tree

    def replace(self, **changes) -> "PqtConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)
