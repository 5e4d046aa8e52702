"""Candidate keyphrase generation.

A candidate is any run of 1..5 consecutive words that stays inside one sentence and neither
starts nor ends with a stopword. Stopwords in the middle are fine ("primeiro ministro de
portugal"). Runs with the same stemmed form are merged into a single candidate.
"""

from __future__ import annotations

import dataclasses
from typing import Iterable, NamedTuple, Optional, Sequence

from .corpus import MAX_KEYPHRASE_WORDS, NewsDocument
from .preprocess import LanguageResources, Token, tokenize, words_to_stems


class Span(NamedTuple):
    """Word index range [start, stop) of one occurrence"""

    start: int
    stop: int


@dataclasses.dataclass(frozen=True)
class CandidatePhrase:
    """A distinct (by stemmed form) phrase of a document and where it occurs."""

    surface: str  # text of the first occurrence, original casing
    normalized: str  # stems joined by single spaces
    n_words: int
    occurrences: tuple[Span, ...]  # document order

    @property
    def tf(self) -> int:
        return len(self.occurrences)

    @property
    def first(self) -> Span:
        return self.occurrences[0]

    @property
    def last(self) -> Span:
        return self.occurrences[-1]

    def words(self, doc: NewsDocument, occurrence: int = 0) -> tuple[Token, ...]:
        """Tokens of one occurrence (the first by default)"""
        span = self.occurrences[occurrence]
        return doc.tokens[span.start : span.stop]


def surface_of(tokens: Sequence[Token]) -> str:
    return " ".join(t.surface for t in tokens)


def _stop_flags(tokens: Sequence[Token], resources: Optional[LanguageResources]) -> list[bool]:
    if resources is None:
        return [t.is_stopword for t in tokens]
    return [t.lower in resources.stopwords for t in tokens]


def is_valid_span(
    tokens: Sequence[Token], start: int, stop: int, resources: Optional[LanguageResources] = None
) -> bool:
    """Whether tokens[start:stop] may be a candidate: length, boundary and stopword-ends rules"""
    if not 1 <= stop - start <= MAX_KEYPHRASE_WORDS or start < 0 or stop > len(tokens):
        return False
    stops = _stop_flags(tokens[start:stop], resources)
    if stops[0] or stops[-1]:
        return False
    # a boundary after any word but the last would split the phrase
    return not any(t.sentence_boundary_after for t in tokens[start : stop - 1])


def iter_spans(
    tokens: Sequence[Token], resources: Optional[LanguageResources] = None
) -> Iterable[Span]:
    """All valid candidate spans, ordered by start then length"""
    stops = _stop_flags(tokens, resources)
    for start in range(len(tokens)):
        if stops[start]:
            continue
        for stop in range(start + 1, min(start + MAX_KEYPHRASE_WORDS, len(tokens)) + 1):
            if not stops[stop - 1]:
                yield Span(start, stop)
            if tokens[stop - 1].sentence_boundary_after:
                break


def merge_occurrences(cands: Iterable[CandidatePhrase]) -> list[CandidatePhrase]:
    """Merge candidates sharing a normalized form.

    Occurrences are concatenated in document order. The surface of the merged candidate is
    the surface of its earliest occurrence. Output is ordered by first occurrence.
    """
    groups: dict[str, list[CandidatePhrase]] = {}
    for cand in cands:
        groups.setdefault(cand.normalized, []).append(cand)

    merged = []
    for normalized, group in groups.items():
        if len(group) == 1:
            merged.append(group[0])
            continue
        occurrences = tuple(sorted(occ for cand in group for occ in cand.occurrences))
        earliest = min(group, key=lambda c: c.first)
        merged.append(
            CandidatePhrase(
                surface=earliest.surface,
                normalized=normalized,
                n_words=earliest.n_words,
                occurrences=occurrences,
            )
        )
    merged.sort(key=lambda c: (c.first, c.normalized))
    return merged


def generate_candidates(doc: NewsDocument, resources: LanguageResources) -> list[CandidatePhrase]:
    """Distinct candidate phrases of a document, ordered by first occurrence."""
    tokens = doc.tokens
    singles = (
        CandidatePhrase(
            surface=surface_of(tokens[span.start : span.stop]),
            normalized=words_to_stems(tokens[span.start : span.stop]),
            n_words=span.stop - span.start,
            occurrences=(span,),
        )
        for span in iter_spans(tokens, resources)
    )
    return merge_occurrences(singles)


def normalize_phrase(text: str, resources: LanguageResources) -> str:
    """Normalized (stemmed) form of free text, e.g. a gold keyphrase"""
    return words_to_stems(tokenize(text, resources))
