"""Color scales for cloud labels, interpolated in CIE L*a*b* space and emitted as CSS hex."""

import math
from typing import Callable, Sequence

from .util import Vec, clamp, clamp_rgb, interp

# linear RGB -> XYZ, white point (0.95047, 1.0, 1.08883) folded in; rows are output columns
_RGB_TO_XYZN = (
    (0.43394994055572506, 0.376209769903311, 0.18984028954096394),
    (0.2126729, 0.7151522, 0.072175),
    (0.01775658275396527, 0.10946796102238184, 0.8727754562236529),
)
_XYZN_TO_RGB = (
    (3.079954503474, -1.5371385, -0.542815944262),
    (-0.92125825502, 1.8760108, 0.04524741948),
    (0.052887382398000005, -0.2040259, 1.151138514516),
)
_EPSILON = 0.008856451679035631  # (6/29)**3
_KAPPA_INV = 0.12841854934601665  # 3 * (6/29)**2
_OFFSET = 0.13793103448275862  # 4/29


def _dot_rows(matrix, v) -> tuple[float, ...]:
    return tuple(sum(m * x for m, x in zip(row, v)) for row in matrix)


def _to_linear(channel: float) -> float:
    c = channel / 255.0
    return ((c + 0.055) / 1.055) ** 2.4 if c > 0.04045 else c / 12.92


def _from_linear(channel: float) -> int:
    if channel > 0.0031308:
        return clamp(round(255 * (1.055 * math.pow(channel, 1 / 2.4) - 0.055)), 0, 255)
    return clamp(round(255 * 12.92 * channel), 0, 255)


def rgb_to_lab(rgb: Vec) -> Vec:
    fx, fy, fz = (
        t ** (1 / 3) if t > _EPSILON else _OFFSET + t / _KAPPA_INV
        for t in _dot_rows(_RGB_TO_XYZN, [_to_linear(c) for c in rgb])
    )
    return (116 * fy - 16, 500 * (fx - fy), 200 * (fy - fz))


def lab_to_rgb(lab: Vec) -> Vec:
    fy = (lab[0] + 16) / 116
    f_xyz = (lab[1] / 500 + fy, fy, fy - lab[2] / 200)
    xyzn = [t**3 if t > 6 / 29 else _KAPPA_INV * (t - _OFFSET) for t in f_xyz]
    return tuple(_from_linear(c) for c in _dot_rows(_XYZN_TO_RGB, xyzn))


def hex_color(rgb: Vec) -> str:
    r, g, b = clamp_rgb(rgb)
    return f"#{r:02x}{g:02x}{b:02x}"


def color_scale(points: Sequence[Vec], steps: int = 64) -> Callable[[float], str]:
    """Function mapping 0.0..1.0 to a CSS color, interpolating 'points' in Lab space.

    Parameters
    ----------
    points: Sequence[Vec]
            Evenly spaced RGB colors for 0.0..1.0
    steps:  int
            Number of distinct output colors
    """
    if steps < 2:
        raise ValueError(f"a color scale needs at least 2 steps, got {steps}")
    lab_points = [rgb_to_lab(p) for p in points]
    table = tuple(hex_color(lab_to_rgb(interp(lab_points, i / (steps - 1)))) for i in range(steps))

    def color(frac: float) -> str:
        return table[clamp(round(frac * (steps - 1)), 0, steps - 1)]

    return color


SLATE = (96, 110, 130)
TEAL = (0, 128, 128)
NAVY = (20, 40, 120)
CRIMSON = (180, 20, 50)

# rarely mentioned phrases fade toward slate, the most frequent are crimson
CLOUD_SCALE = color_scale([SLATE, TEAL, NAVY, CRIMSON])
