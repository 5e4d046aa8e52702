"""News document data model and the corpus JSON format."""

from __future__ import annotations

import dataclasses
import json
import logging
import os
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any, NamedTuple, Optional, Sequence

from .errors import CorpusFormatError, CorpusValidationError, ResourceError
from .preprocess import LanguageResources, Token, default_resources, tokenize

logger = logging.getLogger(__name__)

MAX_KEYPHRASE_WORDS = 5


class Split(Enum):
    """Which part of an experiment a corpus file is"""

    TRAIN = "train"
    TEST = "test"
    UNLABELED = "unlabeled"

    @property
    def needs_gold(self) -> bool:
        return self is not Split.UNLABELED


@dataclasses.dataclass(frozen=True)
class NewsDocument:
    """One segmented news story."""

    # pylint: disable=too-many-instance-attributes
    id: str
    channel: str
    program: str
    broadcast_time: datetime  # timezone-aware, UTC
    position_in_program: int
    text: str
    topic: Optional[str] = None
    gold_keyphrases: Optional[tuple[str, ...]] = None
    tokens: tuple[Token, ...] = ()

    @classmethod
    def from_text(
        cls,
        resources: Optional[LanguageResources] = None,
        **fields: Any,
    ) -> "NewsDocument":
        """Build a document, deriving its tokens from 'text'."""
        gold = fields.pop("gold_keyphrases", None)
        doc = cls(**fields, gold_keyphrases=tuple(gold) if gold is not None else None)
        return doc.retokenized(resources)

    def retokenized(self, resources: Optional[LanguageResources] = None) -> "NewsDocument":
        return dataclasses.replace(self, tokens=tuple(tokenize(self.text, resources)))

    @property
    def word_count(self) -> int:
        return len(self.tokens)


@dataclasses.dataclass(frozen=True)
class Corpus:
    """An ordered collection of documents of one split"""

    documents: tuple[NewsDocument, ...]
    split: Split

    def __len__(self):
        return len(self.documents)

    def __iter__(self):
        return iter(self.documents)


class CorpusStats(NamedTuple):
    documents: int
    total_words: int
    mean_keyphrases: float


def parse_timestamp(value: str) -> datetime:
    """RFC 3339 timestamp to an aware UTC datetime. Raises ValueError for naive timestamps."""
    if not isinstance(value, str):
        raise ValueError(f"timestamp must be a string, got {type(value).__name__}")
    text = value.strip()
    if text[-1:] in ("Z", "z"):
        text = text[:-1] + "+00:00"
    stamp = datetime.fromisoformat(text)
    if stamp.tzinfo is None:
        raise ValueError(f"timestamp {value!r} has no UTC offset")
    return stamp.astimezone(timezone.utc)


def format_timestamp(stamp: datetime) -> str:
    return stamp.astimezone(timezone.utc).isoformat().replace("+00:00", "Z")


_REQUIRED = ("id", "channel", "program", "broadcast_time", "position_in_program", "text")


def _document_from_json(
    entry: Any, index: int, split: Split, resources: LanguageResources
) -> NewsDocument:
    if not isinstance(entry, dict):
        raise CorpusValidationError(f"#{index}", "document entry must be a JSON object")
    doc_id = entry.get("id")
    if not isinstance(doc_id, str) or not doc_id:
        raise CorpusValidationError(f"#{index}", "missing or non-string 'id'")
    for field in _REQUIRED:
        if field not in entry:
            raise CorpusValidationError(doc_id, f"missing required field {field!r}")
    for field in ("channel", "program", "text"):
        if not isinstance(entry[field], str):
            raise CorpusValidationError(doc_id, f"field {field!r} must be a string")

    position = entry["position_in_program"]
    if not isinstance(position, int) or isinstance(position, bool) or position < 0:
        raise CorpusValidationError(doc_id, "position_in_program must be an integer >= 0")

    try:
        stamp = parse_timestamp(entry["broadcast_time"])
    except ValueError as e:
        raise CorpusValidationError(doc_id, f"bad broadcast_time: {e}") from e

    topic = entry.get("topic")
    if topic is not None and not isinstance(topic, str):
        raise CorpusValidationError(doc_id, "topic must be a string or null")

    gold = entry.get("gold_keyphrases")
    if gold is not None:
        if not isinstance(gold, list) or not all(isinstance(g, str) for g in gold):
            raise CorpusValidationError(doc_id, "gold_keyphrases must be a list of strings")
        for phrase in gold:
            n_words = len(tokenize(phrase, resources))
            if not 1 <= n_words <= MAX_KEYPHRASE_WORDS:
                raise CorpusValidationError(
                    doc_id,
                    f"gold keyphrase {phrase!r} has {n_words} words "
                    f"(allowed: 1..{MAX_KEYPHRASE_WORDS})",
                )
    elif split.needs_gold:
        raise CorpusValidationError(doc_id, f"{split.value} corpus requires gold_keyphrases")

    return NewsDocument.from_text(
        resources,
        id=doc_id,
        channel=entry["channel"],
        program=entry["program"],
        broadcast_time=stamp,
        position_in_program=position,
        text=entry["text"],
        topic=topic,
        gold_keyphrases=gold,
    )


def parse_corpus(
    text: str,
    split: Split | str,
    resources: Optional[LanguageResources] = None,
    path: Optional[os.PathLike | str] = None,
) -> Corpus:
    """Parse and validate corpus JSON text"""
    split = Split(split)
    if resources is None:
        resources = default_resources()
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as e:
        lines = text.splitlines()
        context = lines[e.lineno - 1] if 0 < e.lineno <= len(lines) else ""
        raise CorpusFormatError(e.msg, path, e.lineno, e.colno, context) from e

    if not isinstance(payload, dict) or not isinstance(payload.get("documents"), list):
        raise CorpusFormatError("top level must be an object with a 'documents' list", path)

    docs = []
    seen: set[str] = set()
    for index, entry in enumerate(payload["documents"]):
        doc = _document_from_json(entry, index, split, resources)
        if doc.id in seen:
            raise CorpusValidationError(doc.id, "duplicate document id")
        seen.add(doc.id)
        docs.append(doc)
    return Corpus(tuple(docs), split)


def load_corpus(
    path: os.PathLike | str,
    split: Split | str,
    resources: Optional[LanguageResources] = None,
) -> Corpus:
    """Read a corpus JSON file and tokenize every document."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError as e:
        raise ResourceError(path, "corpus file not found") from e
    except UnicodeDecodeError as e:
        raise CorpusFormatError(f"not valid UTF-8 at byte {e.start}", path) from e
    corpus = parse_corpus(text, split, resources, path)
    logger.info("loaded %s corpus %s: %d documents", corpus.split.value, path, len(corpus))
    return corpus


def document_to_json(doc: NewsDocument) -> dict[str, Any]:
    out: dict[str, Any] = {
        "id": doc.id,
        "channel": doc.channel,
        "program": doc.program,
        "broadcast_time": format_timestamp(doc.broadcast_time),
        "position_in_program": doc.position_in_program,
        "text": doc.text,
    }
    if doc.topic is not None:
        out["topic"] = doc.topic
    if doc.gold_keyphrases is not None:
        out["gold_keyphrases"] = list(doc.gold_keyphrases)
    return out


def dumps_corpus(documents: Sequence[NewsDocument]) -> str:
    return json.dumps(
        {"documents": [document_to_json(d) for d in documents]}, ensure_ascii=False, indent=1
    )


def save_corpus(corpus: Corpus | Sequence[NewsDocument], path: os.PathLike | str) -> None:
    documents = corpus.documents if isinstance(corpus, Corpus) else corpus
    Path(path).write_text(dumps_corpus(documents) + "\n", encoding="utf-8")


def corpus_stats(corpus: Corpus) -> CorpusStats:
    """Document count, total tokens, and mean number of gold keyphrases per document"""
    n_docs = len(corpus.documents)
    total_words = sum(doc.word_count for doc in corpus.documents)
    if n_docs == 0:
        return CorpusStats(0, 0, 0.0)
    total_gold = sum(len(doc.gold_keyphrases or ()) for doc in corpus.documents)
    return CorpusStats(n_docs, total_words, total_gold / n_docs)
