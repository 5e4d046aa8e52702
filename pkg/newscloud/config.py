"""Run configuration: a key = value text file, overridden by command-line flags."""

from __future__ import annotations

import dataclasses
import logging
import math
import os
from pathlib import Path
from typing import Any, Callable, Optional

from .cloud import CloudConfig
from .errors import ConfigError, ResourceError
from .features import parse_feature_set
from .tree import Algorithm, TreeParams

logger = logging.getLogger(__name__)


def _optional(convert: Callable[[str], Any]) -> Callable[[str], Any]:
    def parse(text: str) -> Any:
        return None if text.lower() in ("", "none") else convert(text)

    return parse


def _path_list(text: str) -> tuple[str, ...]:
    return tuple(p.strip() for p in text.split(",") if p.strip())


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(w) for w in _path_list(text))


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """Everything a run depends on besides its input files."""

    # pylint: disable=too-many-instance-attributes
    language: str = "pt"
    stopwords: Optional[str] = None
    ne_lexicon: Optional[str] = None
    pos_lexicon: Optional[str] = None
    lm: tuple[str, ...] = ()
    lm_weights: tuple[float, ...] = ()
    algorithm: str = "cart"
    n_bags: int = 10
    seed: int = 0
    min_leaf: int = 2
    max_depth: Optional[int] = None
    alpha: float = 0.0
    confidence: float = 0.25
    negative_ratio: Optional[float] = None
    features: str = "all"
    n: int = 30
    threads: int = 1
    window_hours: float = 6.0
    top_news: int = 10
    keyphrases_per_news: int = 10
    cloud_size: int = 20
    topic: Optional[str] = None
    w_recency: float = 0.4
    w_position: float = 0.3
    w_duplication: float = 0.3
    duplicate_overlap: int = 3
    min_font: float = 12.0
    max_font: float = 48.0

    def validate(self) -> "RunConfig":
        """Raise ConfigError for out-of-range values; returns self"""
        try:
            Algorithm(self.algorithm)
            parse_feature_set(self.features)
            self.tree_params()
            self.cloud_config()
        except ValueError as e:
            raise ConfigError(str(e)) from e
        if self.lm_weights and len(self.lm_weights) != len(self.lm):
            raise ConfigError(
                f"{len(self.lm_weights)} lm_weights given for {len(self.lm)} language models"
            )
        if self.lm_weights and (
            min(self.lm_weights) < 0 or not math.isclose(sum(self.lm_weights), 1.0)
        ):
            raise ConfigError(
                f"lm_weights must be non-negative and sum to 1, got {list(self.lm_weights)}"
            )
        for name in ("n_bags", "n", "threads"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not 0 < self.min_font <= self.max_font:
            raise ConfigError(
                f"need 0 < min_font <= max_font, got {self.min_font}, {self.max_font}"
            )
        return self

    def tree_params(self) -> TreeParams:
        return TreeParams(
            max_depth=self.max_depth,
            min_leaf=self.min_leaf,
            alpha=self.alpha,
            confidence=self.confidence,
        )

    def cloud_config(self) -> CloudConfig:
        return CloudConfig(
            window_hours=self.window_hours,
            top_news=self.top_news,
            keyphrases_per_news=self.keyphrases_per_news,
            cloud_size=self.cloud_size,
            topic_filter=self.topic,
            w_recency=self.w_recency,
            w_position=self.w_position,
            w_duplication=self.w_duplication,
            duplicate_overlap=self.duplicate_overlap,
        )

    def feature_names(self) -> tuple[str, ...]:
        return parse_feature_set(self.features)

    def with_overrides(self, **overrides: Any) -> "RunConfig":
        """Copy with the given fields replaced; None values are ignored."""
        return dataclasses.replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def to_text(self) -> str:
        """Config file text that loads back to this config"""
        lines = []
        for field in dataclasses.fields(self):
            value = getattr(self, field.name)
            if value is None:
                text = "none"
            elif isinstance(value, tuple):
                text = ", ".join(str(v) for v in value)
            else:
                text = str(value)
            lines.append(f"{field.name} = {text}")
        return "\n".join(lines) + "\n"

    def log(self, log: logging.Logger = logger) -> None:
        for line in self.to_text().splitlines():
            log.info("config: %s", line)


_CONVERTERS: dict[str, Callable[[str], Any]] = {
    "language": str,
    "stopwords": _optional(str),
    "ne_lexicon": _optional(str),
    "pos_lexicon": _optional(str),
    "lm": _path_list,
    "lm_weights": _float_list,
    "algorithm": str.lower,
    "n_bags": int,
    "seed": int,
    "min_leaf": int,
    "max_depth": _optional(int),
    "alpha": float,
    "confidence": float,
    "negative_ratio": _optional(float),
    "features": str,
    "n": int,
    "threads": int,
    "window_hours": float,
    "top_news": int,
    "keyphrases_per_news": int,
    "cloud_size": int,
    "topic": _optional(str),
    "w_recency": float,
    "w_position": float,
    "w_duplication": float,
    "duplicate_overlap": int,
    "min_font": float,
    "max_font": float,
}


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    """Parse 'key = value' lines. '#' starts a comment; blank lines are ignored."""
    values: dict[str, Any] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip().lower(), value.strip()
        if not sep:
            raise ConfigError(f"{source}:{line_no}: expected 'key = value', got {raw!r}")
        if key not in _CONVERTERS:
            raise ConfigError(f"{source}:{line_no}: unknown key {key!r}")
        try:
            values[key] = _CONVERTERS[key](value)
        except ValueError as e:
            raise ConfigError(f"{source}:{line_no}: bad value for {key!r}: {value!r}") from e
    return RunConfig(**values)


def load_config(path: os.PathLike | str) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError as e:
        raise ResourceError(path, "config file not found") from e
    return parse_config(text, str(path))
