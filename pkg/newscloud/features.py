"""Per-candidate features: the base set and the five extended groups f1..f5."""

from __future__ import annotations

import dataclasses
import hashlib
import logging
import math
from collections import Counter
from enum import Enum
from types import MappingProxyType
from typing import Mapping, NamedTuple, Optional, Sequence

import numpy as np

from .candidates import CandidatePhrase, generate_candidates
from .corpus import Corpus, NewsDocument
from .ngram_lm import LOGZERO, LanguageModel, phrase_score
from .preprocess import LanguageResources, PosTag, Token, tag_word

logger = logging.getLogger(__name__)

FEATURE_SCHEMA_VERSION = 1


class PosPattern(Enum):
    """Shape of a phrase's part-of-speech sequence; values are the numeric feature codes"""

    NOUN_ONLY = 0
    NOUN_PHRASE = 1
    CONTAINS_VERB = 2
    OTHER = 3


FEATURE_GROUPS = MappingProxyType(
    {
        "base": ("tf", "idf", "tfidf", "first_pos", "last_pos", "spread", "n_words"),
        "f1": ("f1_chars",),
        "f2": ("f2_named_entities",),
        "f3": ("f3_capitals",),
        "f4": ("f4_pos_noun_frac", "f4_pos_pattern"),
        "f5": ("f5_lm_logprob",),
    }
)
FEATURE_NAMES = tuple(name for group in FEATURE_GROUPS.values() for name in group)
CATEGORICAL = frozenset({"f4_pos_pattern"})


def parse_feature_set(text: str) -> tuple[str, ...]:
    """Feature names selected by a set description like "base+f1+f3" or "all".

    Names come back in schema order whatever order the groups were given in.
    """
    groups = [g.strip().lower() for g in text.split("+") if g.strip()]
    if not groups:
        raise ValueError("empty feature set")
    if groups == ["all"]:
        return FEATURE_NAMES
    unknown = [g for g in groups if g not in FEATURE_GROUPS]
    if unknown:
        raise ValueError(
            f"unknown feature group(s) {unknown}; choose from {list(FEATURE_GROUPS)} or 'all'"
        )
    selected = {name for g in groups for name in FEATURE_GROUPS[g]}
    return tuple(name for name in FEATURE_NAMES if name in selected)


def describe_feature_set(names: Sequence[str]) -> str:
    """Inverse of parse_feature_set for whole groups: ("tf", ..., "f1_chars") -> "base+f1" """
    if tuple(names) == FEATURE_NAMES:
        return "all"
    groups = [g for g, members in FEATURE_GROUPS.items() if set(members) <= set(names)]
    covered = {name for g in groups for name in FEATURE_GROUPS[g]}
    extra = [name for name in names if name not in covered]
    return "+".join(groups + extra)


def schema_hash(names: Sequence[str]) -> bytes:
    """8-byte digest identifying a feature schema version and column list"""
    text = f"v{FEATURE_SCHEMA_VERSION}:" + ",".join(names)
    return hashlib.sha256(text.encode("utf-8")).digest()[:8]


@dataclasses.dataclass(frozen=True)
class FeatureVector:
    """All features of one candidate"""

    # pylint: disable=too-many-instance-attributes
    tf: int
    idf: float
    tfidf: float
    first_pos: float
    last_pos: float
    spread: float
    n_words: int
    f1_chars: int = 0
    f2_named_entities: int = 0
    f3_capitals: int = 0
    f4_pos_noun_frac: float = 0.0
    f4_pos_pattern: PosPattern = PosPattern.OTHER
    f5_lm_logprob: float = LOGZERO

    def value(self, name: str) -> float:
        v = getattr(self, name)
        return float(v.value) if isinstance(v, Enum) else float(v)

    def to_array(self, names: Sequence[str] = FEATURE_NAMES) -> np.ndarray:
        return np.array([self.value(name) for name in names], dtype=np.float64)


class ExtendedFeatures(NamedTuple):
    f1_chars: int
    f2_named_entities: int
    f3_capitals: int
    f4_pos_noun_frac: float
    f4_pos_pattern: PosPattern
    f5_lm_logprob: float


@dataclasses.dataclass(frozen=True)
class IdfTable:
    """Document frequencies of normalized candidate phrases over a training corpus"""

    doc_count: int
    doc_freq: Mapping[str, int]

    def df(self, phrase: str) -> int:
        """Document frequency; phrases never seen count as appearing in one document"""
        return self.doc_freq.get(phrase, 1)

    def idf(self, phrase: str) -> float:
        return math.log10(self.doc_count / self.df(phrase))


def build_idf(
    corpus: Corpus | Sequence[NewsDocument], resources: LanguageResources
) -> IdfTable:
    """Count, for each normalized candidate, the number of documents that contain it."""
    documents = corpus.documents if isinstance(corpus, Corpus) else tuple(corpus)
    if not documents:
        raise ValueError("cannot build an IDF table from an empty corpus")
    counts: Counter[str] = Counter()
    for doc in documents:
        counts.update({cand.normalized for cand in generate_candidates(doc, resources)})
    logger.info("IDF table: %d documents, %d distinct phrases", len(documents), len(counts))
    return IdfTable(len(documents), MappingProxyType(dict(counts)))


def base_features(cand: CandidatePhrase, doc: NewsDocument, idf: IdfTable) -> FeatureVector:
    """TF, IDF, TFxIDF, first/last occurrence position, spread, and phrase length.

    Positions are occurrence start indexes divided by the document's word count.
    The extended fields are left at their defaults.
    """
    word_count = doc.word_count
    idf_value = idf.idf(cand.normalized)
    first_pos = cand.first.start / word_count
    last_pos = cand.last.start / word_count
    return FeatureVector(
        tf=cand.tf,
        idf=idf_value,
        tfidf=cand.tf / word_count * idf_value,
        first_pos=first_pos,
        last_pos=last_pos,
        spread=last_pos - first_pos,
        n_words=cand.n_words,
    )


def tag_named_entities(words: Sequence[Token], resources: LanguageResources) -> int:
    """Number of words that look like names.

    A word counts if it is in the NE lexicon, or if it is capitalized, does not start a
    sentence, and is not a stopword.
    """
    count = 0
    for word in words:
        if word.lower in resources.ne_lexicon:
            count += 1
        elif (
            word.surface[:1].isupper()
            and not word.sentence_start
            and word.lower not in resources.stopwords
        ):
            count += 1
    return count


def tag_pos(words: Sequence[Token], resources: LanguageResources) -> tuple[float, PosPattern]:
    """(fraction of nouns, pattern) for a phrase"""
    if not words:
        return 0.0, PosPattern.OTHER
    tags = [tag_word(w, resources) for w in words]
    nouns = tags.count(PosTag.NOUN)
    verbs = tags.count(PosTag.VERB)
    if nouns == len(tags):
        pattern = PosPattern.NOUN_ONLY
    elif verbs:
        pattern = PosPattern.CONTAINS_VERB
    elif nouns:
        pattern = PosPattern.NOUN_PHRASE
    else:
        pattern = PosPattern.OTHER
    return nouns / len(tags), pattern


def extended_features(
    cand: CandidatePhrase,
    doc: NewsDocument,
    resources: LanguageResources,
    lm: Optional[LanguageModel] = None,
) -> ExtendedFeatures:
    """f1..f5, computed on the candidate's first occurrence.

    Without a language model f5 is the log-zero floor for every candidate.
    """
    words = cand.words(doc)
    noun_frac, pattern = tag_pos(words, resources)
    if lm is None:
        lm_score = LOGZERO
    else:
        lm_score = phrase_score(lm, [w.lower for w in words])
    return ExtendedFeatures(
        f1_chars=len(cand.surface),
        f2_named_entities=tag_named_entities(words, resources),
        f3_capitals=sum(1 for c in cand.surface if c.isupper()),
        f4_pos_noun_frac=noun_frac,
        f4_pos_pattern=pattern,
        f5_lm_logprob=lm_score,
    )


@dataclasses.dataclass(frozen=True)
class FeatureExtractor:
    """Everything needed to turn a document into (candidate, features) pairs."""

    resources: LanguageResources
    idf: IdfTable
    lm: Optional[LanguageModel] = None
    feature_names: tuple[str, ...] = FEATURE_NAMES

    @property
    def schema_hash(self) -> bytes:
        return schema_hash(self.feature_names)

    def _needs_extended(self) -> bool:
        return any(name not in FEATURE_GROUPS["base"] for name in self.feature_names)

    def features(self, cand: CandidatePhrase, doc: NewsDocument) -> FeatureVector:
        base = base_features(cand, doc, self.idf)
        if not self._needs_extended():
            return base
        lm = self.lm if "f5_lm_logprob" in self.feature_names else None
        ext = extended_features(cand, doc, self.resources, lm)
        return dataclasses.replace(base, **ext._asdict())

    def extract(self, doc: NewsDocument) -> list[tuple[CandidatePhrase, FeatureVector]]:
        cands = generate_candidates(doc, self.resources)
        return [(cand, self.features(cand, doc)) for cand in cands]

    def matrix(self, vectors: Sequence[FeatureVector]) -> np.ndarray:
        return feature_matrix(vectors, self.feature_names)


def feature_matrix(
    vectors: Sequence[FeatureVector], names: Sequence[str] = FEATURE_NAMES
) -> np.ndarray:
    """Rows of feature values, one per vector, columns in 'names' order"""
    if not vectors:
        return np.zeros((0, len(names)), dtype=np.float64)
    return np.vstack([v.to_array(names) for v in vectors])


def categorical_columns(names: Sequence[str]) -> frozenset[int]:
    return frozenset(i for i, name in enumerate(names) if name in CATEGORICAL)
