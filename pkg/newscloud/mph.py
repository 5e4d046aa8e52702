"""Minimal perfect hashing of a static key set (hash, displace and compress).

Keys are first hashed into buckets holding about two keys each. Buckets are then placed
largest first: for each one, find a displacement d such that a second, d-seeded hash sends
all of the bucket's keys to distinct free slots. Buckets with a single key are placed last,
straight into whatever slots remain, and record the slot directly (as -slot-1) instead of a
displacement. Lookup is two hashes and one array read, regardless of the number of keys.
"""

from __future__ import annotations

import dataclasses
import logging
import math
import struct
from typing import Sequence

import mmh3
import numpy as np

from .errors import MPHConstructionError, ModelFormatError
from .util import bit_width, pack_bits, packed_size, unpack_bits, zigzag_decode, zigzag_encode

logger = logging.getLogger(__name__)

DEFAULT_KEYS_PER_BUCKET = 2.0
DEFAULT_MAX_ATTEMPTS = 8
DEFAULT_MAX_DISPLACEMENT = 1 << 16

_GOLDEN = 0x9E3779B1
_HEADER = struct.Struct("<IIIB")  # n_keys, seed, n_buckets, displacement bit width


def _bucket_of(key: bytes, seed: int, n_buckets: int) -> int:
    return mmh3.hash(key, seed, signed=False) % n_buckets


def _slot_of(key: bytes, seed: int, displacement: int, n_keys: int) -> int:
    return mmh3.hash(key, (seed * _GOLDEN + displacement) & 0xFFFFFFFF, signed=False) % n_keys


def _place_buckets(
    buckets: list[list[bytes]], n_keys: int, seed: int, max_displacement: int
) -> np.ndarray | None:
    """One construction attempt. Returns the displacement table, or None on failure."""
    order = sorted(range(len(buckets)), key=lambda b: -len(buckets[b]))
    taken = np.zeros(n_keys, dtype=bool)
    displacements = np.zeros(len(buckets), dtype=np.int64)

    singles = []
    for b in order:
        keys = buckets[b]
        if len(keys) == 0:
            break
        if len(keys) == 1:
            singles.append(b)
            continue
        for d in range(max_displacement):
            slots = [_slot_of(k, seed, d, n_keys) for k in keys]
            if len(set(slots)) == len(slots) and not taken[slots].any():
                break
        else:
            logger.debug("seed %d: no displacement for a bucket of %d keys", seed, len(keys))
            return None
        taken[slots] = True
        displacements[b] = d

    free = np.flatnonzero(~taken)
    # every multi-key bucket took exactly len(bucket) slots, so the free slots match the singles
    for b, slot in zip(singles, free):
        displacements[b] = -int(slot) - 1
    return displacements


@dataclasses.dataclass(frozen=True)
class MinimalPerfectHash:
    """Maps each of n build keys to a distinct slot in [0, n).

    Any other key also maps to some slot in [0, n); callers that need to reject non-keys
    store a fingerprint per slot.
    """

    n_keys: int
    seed: int
    displacements: np.ndarray = dataclasses.field(repr=False)

    @property
    def n_buckets(self) -> int:
        return len(self.displacements)

    @classmethod
    def build(
        cls,
        keys: Sequence[bytes],
        seed: int = 0,
        keys_per_bucket: float = DEFAULT_KEYS_PER_BUCKET,
        max_attempts: int = DEFAULT_MAX_ATTEMPTS,
        max_displacement: int = DEFAULT_MAX_DISPLACEMENT,
    ) -> "MinimalPerfectHash":
        """Construct the hash for a set of distinct byte-string keys.

        Each failed attempt retries with the next seed. Raises MPHConstructionError once
        max_attempts seeds have failed.
        """
        n_keys = len(keys)
        if len(set(keys)) != n_keys:
            raise ValueError("minimal perfect hash keys must be distinct")
        if n_keys == 0:
            return cls(0, seed & 0xFFFFFFFF, np.zeros(0, dtype=np.int64))

        n_buckets = max(1, math.ceil(n_keys / keys_per_bucket))
        for attempt in range(max_attempts):
            trial_seed = (seed + attempt) & 0xFFFFFFFF
            buckets: list[list[bytes]] = [[] for _ in range(n_buckets)]
            for key in keys:
                buckets[_bucket_of(key, trial_seed, n_buckets)].append(key)
            displacements = _place_buckets(buckets, n_keys, trial_seed, max_displacement)
            if displacements is not None:
                logger.debug(
                    "built MPH over %d keys (%d buckets) with seed %d after %d attempt(s)",
                    n_keys,
                    n_buckets,
                    trial_seed,
                    attempt + 1,
                )
                return cls(n_keys, trial_seed, displacements)

        raise MPHConstructionError(
            f"could not build a minimal perfect hash over {n_keys} keys with seeds "
            f"{seed}..{seed + max_attempts - 1}; try a different seed"
        )

    def __call__(self, key: bytes) -> int:
        """Slot of a key"""
        if self.n_keys == 0:
            raise ValueError("empty minimal perfect hash has no slots")
        d = int(self.displacements[_bucket_of(key, self.seed, self.n_buckets)])
        if d < 0:
            return -d - 1
        return _slot_of(key, self.seed, d, self.n_keys)

    def to_bytes(self) -> bytes:
        encoded = zigzag_encode(self.displacements)
        width = bit_width(int(encoded.max())) if len(encoded) else 1
        header = _HEADER.pack(self.n_keys, self.seed, self.n_buckets, width)
        return header + pack_bits(encoded, width)

    @classmethod
    def from_bytes(cls, data: bytes, offset: int = 0) -> tuple["MinimalPerfectHash", int]:
        """Decode from data[offset:]. Returns the hash and the offset just past it."""
        try:
            n_keys, seed, n_buckets, width = _HEADER.unpack_from(data, offset)
            offset += _HEADER.size
            encoded = unpack_bits(data[offset:], width, n_buckets)
        except (struct.error, ValueError) as e:
            raise ModelFormatError(f"truncated minimal perfect hash table: {e}") from e
        offset += packed_size(width, n_buckets)
        return cls(n_keys, seed, zigzag_decode(encoded)), offset

    @property
    def size_in_bytes(self) -> int:
        return len(self.to_bytes())
