"""Quantize real values (log probabilities) into small integer codes."""

from __future__ import annotations

import dataclasses
import math
from typing import Sequence

import numpy as np

from .util import ValueRange, calc_value_range, clamp


@dataclasses.dataclass(frozen=True)
class UniformQuantizer:
    """Equal-width bins over a closed value range.

    A value is coded as the index of the bin containing it, and decoded as that bin's centre,
    so reconstruction error is at most bin_width / 2. Values outside the range are clamped to
    the edge bins.

    This is the only quantizer the LM container stores. A codebook quantizer (e.g. k-means
    centroids) would plug in by providing the same encode/decode/codebook interface.
    """

    value_range: ValueRange
    bits: int
    reserved: int = 0  # top codes left out of the bins, for the caller's own use

    def __post_init__(self):
        if not 1 <= self.bits <= 16:
            raise ValueError(f"quantizer bits must be 1..16, got {self.bits}")
        if not 0 <= self.reserved < 1 << self.bits:
            raise ValueError(f"cannot reserve {self.reserved} of {1 << self.bits} codes")
        if self.value_range.max < self.value_range.min:
            raise ValueError(f"empty value range {self.value_range}")

    @classmethod
    def fit(
        cls, values: Sequence[float] | np.ndarray, bits: int, reserved: int = 0
    ) -> "UniformQuantizer":
        """Quantizer spanning min..max of the values"""
        values = np.asarray(values, dtype=np.float64)
        if values.size == 0:
            return cls(ValueRange(0.0, 0.0), bits, reserved)
        value_range = calc_value_range([float(values.min()), float(values.max())])
        return cls(value_range, bits, reserved)

    @property
    def num_bins(self) -> int:
        return (1 << self.bits) - self.reserved

    @property
    def bin_width(self) -> float:
        return self.value_range.width / self.num_bins

    def encode(self, values: Sequence[float] | np.ndarray) -> np.ndarray:
        """Bin indexes (uint16) for an array of values"""
        values = np.asarray(values, dtype=np.float64)
        if self.value_range.width == 0:
            return np.zeros(values.shape, dtype=np.uint16)
        idx = np.floor((values - self.value_range.min) / self.bin_width)
        return np.clip(idx, 0, self.num_bins - 1).astype(np.uint16)

    def encode_one(self, value: float) -> int:
        if self.value_range.width == 0:
            return 0
        idx = math.floor((value - self.value_range.min) / self.bin_width)
        return clamp(idx, 0, self.num_bins - 1)

    @property
    def codebook(self) -> np.ndarray:
        """Reconstruction value of every bin code (reserved codes not included)"""
        return self.value_range.min + (np.arange(self.num_bins) + 0.5) * self.bin_width

    def decode(self, codes: Sequence[int] | np.ndarray) -> np.ndarray:
        return self.codebook[np.asarray(codes, dtype=np.int64)]
