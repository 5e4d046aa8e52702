"""Numeric helpers shared by scoring, rendering and the binary containers."""

from __future__ import annotations  # for pre-Python 3.12 compatibility

import math
from typing import NamedTuple, Sequence

import numpy as np

Vec = Sequence[float]


class ValueRange(NamedTuple):
    """Encapsulates a range from min..max"""

    min: float
    max: float

    @property
    def width(self) -> float:
        return self.max - self.min


def clamp(x, min_x, max_x):
    """x limited to [min_x, max_x]"""
    return max(min_x, min(max_x, x))


def clamp_rgb(rgb):
    """Round each channel and clip it to 0..255"""
    return tuple(clamp(round(x), 0, 255) for x in rgb)


def interp(piecewise: Sequence[Vec], x: float) -> Vec:
    """Point at fraction x along a path of evenly spaced stops (colour ramps).

    Parameters
    ----------
    piecewise: stops; piecewise[0] is at x = 0.0 and piecewise[-1] at x = 1.0
    x:         fraction, clipped to 0..1
    """
    last = len(piecewise) - 1
    pos = x * last
    i = math.floor(pos)
    if i < 0:
        return piecewise[0]
    if i >= last:
        return piecewise[-1]
    t = pos - i
    return tuple(a + (b - a) * t for a, b in zip(piecewise[i], piecewise[i + 1]))


def calc_value_range(values: Sequence[float]) -> ValueRange:
    """Min/max of the values, or (0, 0) for no values"""
    if not values:
        return ValueRange(0.0, 0.0)
    return ValueRange(float(min(values)), float(max(values)))


def min_max_normalize(values: Sequence[float], degenerate: float = 0.0) -> list[float]:
    """Scale values linearly onto 0..1.

    Parameters
    ----------
    values:     Sequence[float]
    degenerate: float
                value reported for every element when all values are equal
    """
    vr = calc_value_range(values)
    if vr.width == 0:
        return [degenerate] * len(values)
    return [(v - vr.min) / vr.width for v in values]


def linear_scale(value: float, in_range: ValueRange, out_range: ValueRange) -> float:
    """Map value from in_range onto out_range. A zero-width input range maps to out_range.max"""
    if in_range.width == 0:
        return out_range.max
    frac = (value - in_range.min) / in_range.width
    return out_range.min + frac * out_range.width


# Bit-level packing used by the binary containers.


def bit_width(max_value: int) -> int:
    """Number of bits needed to hold values 0..max_value (at least 1)"""
    return max(1, int(max_value).bit_length())


def zigzag_encode(values: np.ndarray) -> np.ndarray:
    """Map signed ints onto unsigned: 0, -1, 1, -2, ... -> 0, 1, 2, 3, ..."""
    signed = np.asarray(values, dtype=np.int64)
    return ((signed << 1) ^ (signed >> 63)).astype(np.uint64)


def zigzag_decode(values: np.ndarray) -> np.ndarray:
    unsigned = np.asarray(values, dtype=np.uint64)
    half = (unsigned >> np.uint64(1)).astype(np.int64)
    return half ^ -((unsigned & np.uint64(1)).astype(np.int64))


def pack_bits(values: np.ndarray, width: int) -> bytes:
    """Pack unsigned ints into a little-endian bit stream, 'width' bits per value."""
    if not 1 <= width <= 64:
        raise ValueError(f"bit width must be 1..64, got {width}")
    arr = np.asarray(values, dtype=np.uint64)
    if arr.size == 0:
        return b""
    shifts = np.arange(width, dtype=np.uint64)
    bits = ((arr[:, None] >> shifts) & np.uint64(1)).astype(np.uint8)
    return np.packbits(bits.ravel(), bitorder="little").tobytes()


def unpack_bits(data: bytes, width: int, count: int) -> np.ndarray:
    """Inverse of pack_bits. Raises ValueError if 'data' is too short."""
    if count == 0:
        return np.zeros(0, dtype=np.uint64)
    needed = packed_size(width, count)
    if len(data) < needed:
        raise ValueError(f"bit stream truncated: need {needed} bytes, have {len(data)}")
    raw = np.frombuffer(data, dtype=np.uint8, count=needed)
    bits = np.unpackbits(raw, count=count * width, bitorder="little").reshape(count, width)
    shifts = np.arange(width, dtype=np.uint64)
    return (bits.astype(np.uint64) << shifts).sum(axis=1, dtype=np.uint64)


def packed_size(width: int, count: int) -> int:
    """Bytes used by pack_bits for 'count' values of 'width' bits"""
    return (width * count + 7) // 8
