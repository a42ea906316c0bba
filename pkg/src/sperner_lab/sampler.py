"""Reproducible Bernoulli subsampling of families.

Every random draw goes through an :class:`RngStream`, a value identified by
``(master_seed, stream_id)``.  The stream is turned into a Philox key by
hashing, so streams are stateless, independent of scheduling, and identical
on every platform.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import GuardExceeded
from .lattice import Family, MiddleGraph, check_n

GROUND_GUARD = 1 << 28
_U64 = (1 << 64) - 1


def _mix(*words: int) -> bytes:
    data = b"".join(int(w).to_bytes(8, "little") for w in words)
    return hashlib.blake2b(data, digest_size=16, person=b"sperner-lab.rng").digest()


@dataclass(frozen=True)
class RngStream:
    master_seed: int
    stream_id: int

    def __post_init__(self):
        for name in ("master_seed", "stream_id"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or not 0 <= v <= _U64:
                raise ValueError(f"{name} must be a 64-bit unsigned integer, got {v!r}")

    @property
    def key(self) -> int:
        return int.from_bytes(_mix(self.master_seed, self.stream_id), "little")

    def generator(self) -> np.random.Generator:
        """A fresh generator positioned at the start of this stream."""
        return np.random.Generator(np.random.Philox(key=self.key))

    def first_u64(self) -> int:
        return int(np.random.Philox(key=self.key).random_raw())

    def head_bytes(self, size: int = 64) -> bytes:
        words = -(-size // 8)
        raw = np.random.Philox(key=self.key).random_raw(words).astype("<u8")
        return raw.tobytes()[:size]

    def substream(self, index: int) -> "RngStream":
        """A stream for a pipeline stage below this one."""
        sid = int.from_bytes(_mix(self.stream_id, index, 0x5354414745)[:8], "little")
        return RngStream(self.master_seed, sid)


def derive_stream(master_seed: int, stream_id: int) -> RngStream:
    return RngStream(int(master_seed), int(stream_id))


Ground = Union[Family, str, np.ndarray]

_GROUND_RE = re.compile(r"^\s*([PM])\(\s*(\d+)\s*\)\s*$")


def ground_size(descriptor: str) -> int:
    m = _GROUND_RE.match(descriptor)
    if not m:
        raise ValueError(f"unknown ground descriptor {descriptor!r}; use 'P(n)' or 'M(k)'")
    kind, val = m.group(1), int(m.group(2))
    if kind == "P":
        return 1 << check_n(val)
    return 2 * MiddleGraph(val).part_size


def ground_family(descriptor: str) -> Family:
    """Materialize ``P(n)`` (all subsets) or ``M(k)`` (both middle layers)."""
    size = ground_size(descriptor)
    if size > GROUND_GUARD:
        raise GuardExceeded("ground size", size, GROUND_GUARD)
    kind, val = _GROUND_RE.match(descriptor).groups()
    if kind == "P":
        return Family.full(int(val))
    return MiddleGraph(int(val)).vertices()


def bernoulli_mask(size: int, p: float, rng: RngStream) -> np.ndarray:
    """One uniform draw per ground element, in canonical order, kept iff < p."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    if size > GROUND_GUARD:
        raise GuardExceeded("ground size", size, GROUND_GUARD)
    return rng.generator().random(size) < p


def sample_family(ground: Union[Family, str], p: float, rng: RngStream) -> Family:
    """Include each ground element independently with probability ``p``."""
    if isinstance(ground, str):
        if ground_size(ground) > GROUND_GUARD:
            raise GuardExceeded("ground size", ground_size(ground), GROUND_GUARD)
        ground = ground_family(ground)
    keep = bernoulli_mask(len(ground), p, rng)
    members = ground.members
    return Family(ground.n, tuple(members[i] for i in np.flatnonzero(keep)))


def sample_subset(items, p: float, rng: RngStream) -> list:
    """Bernoulli subsample of an already sorted sequence of masks."""
    items = list(items)
    keep = bernoulli_mask(len(items), p, rng)
    return [items[i] for i in np.flatnonzero(keep)]
