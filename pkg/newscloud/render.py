"""Static HTML+SVG rendering of a tag cloud."""

from __future__ import annotations

import html
import logging
import math
import os
from pathlib import Path
from typing import Callable, NamedTuple, Sequence

from .cloud import CloudEntry, TagCloud
from .colors import CLOUD_SCALE
from .corpus import format_timestamp
from .util import ValueRange, calc_value_range, linear_scale

logger = logging.getLogger(__name__)

DEFAULT_MIN_FONT = 12.0
DEFAULT_MAX_FONT = 48.0

# rough glyph advance and line height, as fractions of the font size
CHAR_WIDTH = 0.55
LINE_HEIGHT = 1.2
MARGIN = 10.0

# Archimedean spiral, stretched horizontally since labels are wider than tall
SPIRAL_STEP = 0.1
SPIRAL_GROWTH = 4.0
SPIRAL_ASPECT = 2.0
MAX_SPIRAL_STEPS = 50_000


class Placement(NamedTuple):
    entry: CloudEntry
    font_size: float
    x: float  # center
    y: float
    width: float
    height: float

    def overlaps(self, other: "Placement") -> bool:
        return (
            abs(self.x - other.x) * 2 < self.width + other.width
            and abs(self.y - other.y) * 2 < self.height + other.height
        )


def font_sizes(
    entries: Sequence[CloudEntry],
    min_font: float = DEFAULT_MIN_FONT,
    max_font: float = DEFAULT_MAX_FONT,
) -> list[float]:
    """Font size per entry, linear in count: the largest count gets max_font, the smallest
    min_font. If all counts are equal every entry gets max_font."""
    if not 0 < min_font <= max_font:
        raise ValueError(f"need 0 < min_font <= max_font, got {min_font}, {max_font}")
    counts = calc_value_range([e.count for e in entries])
    fonts = ValueRange(min_font, max_font)
    return [linear_scale(e.count, counts, fonts) for e in entries]


def _spiral_points():
    for step in range(MAX_SPIRAL_STEPS):
        t = step * SPIRAL_STEP
        r = SPIRAL_GROWTH * t / (2 * math.pi)
        yield r * SPIRAL_ASPECT * math.cos(t), r * math.sin(t)


def layout(
    entries: Sequence[CloudEntry],
    min_font: float = DEFAULT_MIN_FONT,
    max_font: float = DEFAULT_MAX_FONT,
) -> list[Placement]:
    """Place labels in order along a spiral from the center, each at the first point where
    it overlaps nothing placed before it. Deterministic."""
    placed: list[Placement] = []
    for entry, size in zip(entries, font_sizes(entries, min_font, max_font)):
        width = CHAR_WIDTH * size * len(entry.label) + size * 0.4
        height = LINE_HEIGHT * size
        candidate = None
        for x, y in _spiral_points():
            candidate = Placement(entry, size, x, y, width, height)
            if not any(candidate.overlaps(p) for p in placed):
                break
        else:
            logger.warning("no free spot for %r; it overlaps other labels", entry.phrase)
        placed.append(candidate)
    return placed


def _f(value: float) -> str:
    return f"{value:.1f}"


def _svg(placed: Sequence[Placement], color: Callable[[float], str]) -> list[str]:
    left = min(p.x - p.width / 2 for p in placed) - MARGIN
    top = min(p.y - p.height / 2 for p in placed) - MARGIN
    right = max(p.x + p.width / 2 for p in placed) + MARGIN
    bottom = max(p.y + p.height / 2 for p in placed) + MARGIN
    width, height = right - left, bottom - top
    sizes = calc_value_range([p.font_size for p in placed])
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_f(width)}" height="{_f(height)}" '
        f'viewBox="{_f(left)} {_f(top)} {_f(width)} {_f(height)}" role="img">'
    ]
    for p in placed:
        frac = (p.font_size - sizes.min) / sizes.width if sizes.width else 1.0
        docs = html.escape(", ".join(p.entry.doc_ids))
        lines.append(
            f'  <text x="{_f(p.x)}" y="{_f(p.y)}" font-size="{_f(p.font_size)}" '
            f'fill="{color(frac)}" text-anchor="middle" dominant-baseline="central">'
            f"{html.escape(p.entry.label)}<title>{docs}</title></text>"
        )
    lines.append("</svg>")
    return lines


_STYLE = (
    "body { font-family: Helvetica, Arial, sans-serif; margin: 2em; color: #222; }\n"
    "svg text { font-family: inherit; }\n"
    ".meta { color: #666; font-size: 0.9em; }\n"
    ".empty { color: #999; font-style: italic; }\n"
)


def cloud_title(cloud: TagCloud) -> str:
    return f"News cloud: {cloud.topic}" if cloud.topic else "News cloud"


def render_cloud_html(
    cloud: TagCloud,
    min_font: float = DEFAULT_MIN_FONT,
    max_font: float = DEFAULT_MAX_FONT,
    color: Callable[[float], str] = CLOUD_SCALE,
) -> str:
    """Self-contained HTML page with the cloud as inline SVG. Labels read 'phrase (count)'."""
    title = html.escape(cloud_title(cloud))
    stamp = html.escape(format_timestamp(cloud.generated_at))
    lines = [
        "<!DOCTYPE html>",
        '<html lang="en">',
        "<head>",
        '<meta charset="utf-8">',
        f"<title>{title}</title>",
        f"<style>\n{_STYLE}</style>",
        "</head>",
        "<body>",
        f"<h1>{title}</h1>",
    ]
    if cloud.entries:
        lines += _svg(layout(cloud.entries, min_font, max_font), color)
    else:
        lines.append('<p class="empty">no entries</p>')
    lines += [
        f'<p class="meta">generated at {stamp}, {len(cloud.entries)} keyphrases</p>',
        "</body>",
        "</html>",
    ]
    return "\n".join(lines) + "\n"


def render_cloud(
    cloud: TagCloud,
    path: os.PathLike | str,
    min_font: float = DEFAULT_MIN_FONT,
    max_font: float = DEFAULT_MAX_FONT,
) -> None:
    """Write the cloud page to path. Same cloud, same bytes."""
    Path(path).write_text(render_cloud_html(cloud, min_font, max_font), encoding="utf-8")
    logger.info("wrote cloud with %d entries to %s", len(cloud.entries), path)
