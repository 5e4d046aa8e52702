"""Top-news selection over a time window, and aggregation of their keyphrases into tag clouds."""

from __future__ import annotations

import dataclasses
import json
import logging
import math
import os
from collections import Counter, defaultdict
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Any, Callable, Iterable, NamedTuple, Optional, Sequence

from .corpus import NewsDocument, format_timestamp
from .extract import RankedKeyphrase
from .util import min_max_normalize

logger = logging.getLogger(__name__)


@dataclasses.dataclass(frozen=True)
class CloudConfig:
    """Cloud composition parameters

    window_hours:        only news broadcast in [now - window, now] count
    top_news:            number of news selected
    keyphrases_per_news: top keyphrases taken from each selected news
    cloud_size:          entries kept in the cloud
    topic_filter:        restrict to news with this topic
    w_*:                 weights of the top-news score, summing to 1
    duplicate_overlap:   shared keyphrases that make two news the same story
    """

    # pylint: disable=too-many-instance-attributes
    window_hours: float = 6.0
    top_news: int = 10
    keyphrases_per_news: int = 10
    cloud_size: int = 20
    topic_filter: Optional[str] = None
    w_recency: float = 0.4
    w_position: float = 0.3
    w_duplication: float = 0.3
    duplicate_overlap: int = 3

    def __post_init__(self):
        if not self.window_hours > 0:
            raise ValueError(f"window_hours must be > 0, got {self.window_hours}")
        for name in ("top_news", "keyphrases_per_news", "cloud_size", "duplicate_overlap"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        weights = self.weights
        if min(weights) < 0:
            raise ValueError(f"top-news weights must be non-negative, got {weights}")
        if not math.isclose(sum(weights), 1.0, abs_tol=1e-6):
            raise ValueError(f"top-news weights must sum to 1, got {weights} (sum {sum(weights)})")

    @property
    def weights(self) -> tuple[float, float, float]:
        return (self.w_recency, self.w_position, self.w_duplication)

    @property
    def window(self) -> timedelta:
        return timedelta(hours=self.window_hours)


@dataclasses.dataclass(frozen=True)
class ExtractedNews:
    """A news document with its ranked keyphrases"""

    doc: NewsDocument
    keyphrases: tuple[RankedKeyphrase, ...]

    @property
    def id(self) -> str:
        return self.doc.id

    def top(self, n: int) -> tuple[RankedKeyphrase, ...]:
        return self.keyphrases[:n]


class NewsScore(NamedTuple):
    news: ExtractedNews
    score: float
    recency: float
    position: float
    duplication: float


def _check_aware(now: datetime) -> None:
    if now.tzinfo is None:
        raise ValueError("'now' must be a timezone-aware timestamp")


def in_window(doc: NewsDocument, now: datetime, window: timedelta) -> bool:
    """True if now - window <= broadcast time <= now"""
    return now - window <= doc.broadcast_time <= now


def _topic_matches(news: ExtractedNews, topic: Optional[str]) -> bool:
    return topic is None or news.doc.topic == topic


def duplicate_counts(news: Sequence[ExtractedNews], keyphrases: int, overlap: int) -> list[int]:
    """For each news, the number of other news sharing at least 'overlap' normalized
    keyphrases among their top 'keyphrases'"""
    forms = [{k.normalized for k in item.top(keyphrases)} for item in news]
    counts = [0] * len(news)
    for i, mine in enumerate(forms):
        for j in range(i + 1, len(forms)):
            if len(mine & forms[j]) >= overlap:
                counts[i] += 1
                counts[j] += 1
    return counts


def score_news(
    news: Iterable[ExtractedNews], now: datetime, cfg: CloudConfig
) -> list[NewsScore]:
    """Score every in-window (and on-topic) news, best first.

    score = w_recency * recency + w_position * (1 - position) + w_duplication * duplication,
    where recency is broadcast time min-max normalized over the window, position is the
    position in the program divided by the largest position seen for that program, and
    duplication is the min-max normalized count of other news telling the same story.
    Ties go to the newer news, then the smaller id.
    """
    _check_aware(now)
    candidates = [
        item
        for item in news
        if in_window(item.doc, now, cfg.window) and _topic_matches(item, cfg.topic_filter)
    ]
    if not candidates:
        return []

    recency = min_max_normalize([item.doc.broadcast_time.timestamp() for item in candidates], 1.0)

    max_position: dict[tuple[str, str], int] = defaultdict(int)
    for item in candidates:
        key = (item.doc.channel, item.doc.program)
        max_position[key] = max(max_position[key], item.doc.position_in_program)
    position = [
        item.doc.position_in_program / max_position[(item.doc.channel, item.doc.program)]
        if max_position[(item.doc.channel, item.doc.program)]
        else 0.0
        for item in candidates
    ]

    dups = duplicate_counts(candidates, cfg.keyphrases_per_news, cfg.duplicate_overlap)
    duplication = min_max_normalize(dups, 0.0)

    scored = [
        NewsScore(
            item,
            cfg.w_recency * r + cfg.w_position * (1.0 - p) + cfg.w_duplication * d,
            r,
            p,
            d,
        )
        for item, r, p, d in zip(candidates, recency, position, duplication)
    ]
    scored.sort(key=lambda s: (-s.score, -s.news.doc.broadcast_time.timestamp(), s.news.id))
    return scored


def select_top_news(
    news: Iterable[ExtractedNews], now: datetime, cfg: CloudConfig
) -> list[ExtractedNews]:
    """The cfg.top_news best news of the window, best first"""
    scored = score_news(news, now, cfg)
    top = [s.news for s in scored[: cfg.top_news]]
    logger.info(
        "%d news in the %gh window before %s; top: %s",
        len(scored),
        cfg.window_hours,
        format_timestamp(now),
        ", ".join(item.id for item in top),
    )
    return top


@dataclasses.dataclass(frozen=True)
class CloudEntry:
    phrase: str
    count: int
    doc_ids: tuple[str, ...]
    normalized: str = ""

    @property
    def label(self) -> str:
        return f"{self.phrase} ({self.count})"


@dataclasses.dataclass(frozen=True)
class TagCloud:
    entries: tuple[CloudEntry, ...]
    generated_at: datetime
    topic: Optional[str] = None

    def __len__(self):
        return len(self.entries)

    def show(self, printer: Callable[[str], Any] = print) -> None:
        """Print 'phrase (count)' lines, most frequent first"""
        title = f"topic {self.topic}" if self.topic else "all topics"
        printer(f"{title}, {format_timestamp(self.generated_at)}")
        for entry in self.entries:
            printer(entry.label)


def _pick_surface(surfaces: Counter[str]) -> str:
    """Most frequent surface form; ties to the lexicographically smallest"""
    return min(surfaces.items(), key=lambda kv: (-kv[1], kv[0]))[0]


def build_cloud(
    top: Sequence[ExtractedNews],
    cfg: CloudConfig,
    generated_at: Optional[datetime] = None,
) -> TagCloud:
    """Pool the top keyphrases of each news and keep the most frequent ones.

    A phrase's count is its number of occurrences summed over the news it was taken from.
    Entries are ordered by count descending, then phrase.
    """
    if generated_at is None:
        latest = [item.doc.broadcast_time for item in top]
        generated_at = max(latest) if latest else datetime.now(timezone.utc)
    counts: Counter[str] = Counter()
    surfaces: dict[str, Counter[str]] = defaultdict(Counter)
    doc_ids: dict[str, set[str]] = defaultdict(set)
    for item in top:
        if not _topic_matches(item, cfg.topic_filter):
            continue
        for kp in item.top(cfg.keyphrases_per_news):
            counts[kp.normalized] += max(1, kp.tf)
            surfaces[kp.normalized][kp.surface] += 1
            doc_ids[kp.normalized].add(item.id)

    entries = [
        CloudEntry(_pick_surface(surfaces[form]), count, tuple(sorted(doc_ids[form])), form)
        for form, count in counts.items()
    ]
    entries.sort(key=lambda e: (-e.count, e.phrase, e.normalized))
    return TagCloud(tuple(entries[: cfg.cloud_size]), generated_at, cfg.topic_filter)


def generate_cloud(news: Iterable[ExtractedNews], now: datetime, cfg: CloudConfig) -> TagCloud:
    """select_top_news then build_cloud"""
    return build_cloud(select_top_news(news, now, cfg), cfg, now)


def window_topics(news: Iterable[ExtractedNews], now: datetime, cfg: CloudConfig) -> list[str]:
    """Sorted topics of the news in the window"""
    _check_aware(now)
    return sorted(
        {item.doc.topic for item in news if item.doc.topic and in_window(item.doc, now, cfg.window)}
    )


def build_topic_clouds(
    news: Sequence[ExtractedNews],
    now: datetime,
    cfg: CloudConfig,
    topics: Optional[Iterable[str]] = None,
) -> dict[Optional[str], TagCloud]:
    """The all-topics cloud under key None, plus one cloud per topic.

    topics defaults to every topic present in the window.
    """
    news = list(news)
    if topics is None:
        topics = window_topics(news, now, cfg)
    clouds: dict[Optional[str], TagCloud] = {
        None: generate_cloud(news, now, dataclasses.replace(cfg, topic_filter=None))
    }
    for topic in topics:
        clouds[topic] = generate_cloud(news, now, dataclasses.replace(cfg, topic_filter=topic))
    return clouds


def cloud_to_dict(cloud: TagCloud) -> dict[str, Any]:
    return {
        "generated_at": format_timestamp(cloud.generated_at),
        "topic": cloud.topic,
        "entries": [
            {"phrase": e.phrase, "count": e.count, "doc_ids": list(e.doc_ids)}
            for e in cloud.entries
        ],
    }


def dumps_cloud(cloud: TagCloud) -> str:
    return json.dumps(cloud_to_dict(cloud), ensure_ascii=False, indent=1)


def save_cloud_json(cloud: TagCloud, path: os.PathLike | str) -> None:
    Path(path).write_text(dumps_cloud(cloud) + "\n", encoding="utf-8")
