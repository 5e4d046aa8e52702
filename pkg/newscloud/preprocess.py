"""Tokenization, stopwords and stemming shared by the rest of the pipeline."""

from __future__ import annotations

import dataclasses
import functools
import logging
import os
import re
from enum import Enum
from importlib import resources as importlib_resources
from pathlib import Path
from types import MappingProxyType
from typing import Callable, Iterable, Mapping, Optional, Sequence

from nltk.stem.porter import PorterStemmer
from nltk.stem.snowball import PortugueseStemmer

from .errors import ResourceError

logger = logging.getLogger(__name__)

# punctuation that ends a sentence (a newline does too)
BOUNDARY_CHARS = frozenset(".!?:;")

# stemmers are rule cascades; a few passes always reach a fixpoint in practice
MAX_STEM_PASSES = 10


class PosTag(Enum):
    """Coarse part-of-speech classes"""

    NOUN = "noun"
    VERB = "verb"
    ADJ = "adj"
    ADV = "adv"
    OTHER = "other"

    @classmethod
    def parse(cls, text: str) -> "PosTag":
        text = text.strip().lower()
        if text in ("propn", "pnoun", "name"):
            return cls.NOUN
        return cls(text)


@dataclasses.dataclass(frozen=True)
class Token:
    """One word of a transcript."""

    surface: str
    lower: str
    stem: str
    char_offset: int
    is_stopword: bool
    sentence_boundary_after: bool = False
    sentence_start: bool = False


@dataclasses.dataclass(frozen=True)
class NamedStemmer:
    """A stemming function with a name, so profiles can report which stemmer they use."""

    name: str
    func: Callable[[str], str]

    def __call__(self, word: str) -> str:
        return self.func(word)


@dataclasses.dataclass(frozen=True, eq=False)
class LanguageResources:
    """Everything language-dependent: stopwords, stemmer, and the two lexicons."""

    # pylint: disable=too-many-instance-attributes
    language: str
    stopwords: frozenset[str]
    stemmer: NamedStemmer
    ne_lexicon: frozenset[str] = frozenset()
    pos_lexicon: Mapping[str, PosTag] = dataclasses.field(
        default_factory=lambda: MappingProxyType({})
    )
    # (suffix, tag), checked in order; first match wins
    pos_suffixes: tuple[tuple[str, PosTag], ...] = ()

    def __post_init__(self):
        if not self.stopwords:
            raise ValueError(f"stopword list for language profile {self.language!r} is empty")


_snowball_pt = PortugueseStemmer()
_porter = PorterStemmer()

STEMMERS = MappingProxyType(
    {
        "pt": NamedStemmer("snowball-portuguese", _snowball_pt.stem),
        "en": NamedStemmer("porter", _porter.stem),
    }
)


def _suffixes(spec: Iterable[tuple[PosTag, str]]) -> tuple[tuple[str, PosTag], ...]:
    """Expand (tag, 'suf1 suf2 ...') into (suffix, tag) pairs, longest suffix first."""
    pairs = [(suffix, tag) for tag, suffixes in spec for suffix in suffixes.split()]
    return tuple(sorted(pairs, key=lambda pair: -len(pair[0])))


POS_SUFFIXES = MappingProxyType(
    {
        "pt": _suffixes(
            [
                (PosTag.ADV, "mente"),
                (PosTag.NOUN, "ção ções são sões dade dades mento mentos"),
                (PosTag.NOUN, "ismo ismos ista istas"),
                (PosTag.NOUN, "agem agens ência ências ância âncias eza ezas ura uras"),
                (PosTag.ADJ, "oso osa osos osas ivo iva ivos ivas ável áveis ível íveis"),
                (PosTag.ADJ, "ico ica icos icas"),
                (PosTag.VERB, "ar er ir ando endo indo aram eram iram ava avam"),
            ]
        ),
        "en": _suffixes(
            [
                (PosTag.ADV, "ly"),
                (PosTag.NOUN, "tion tions sion sions ment ments ness ity ities ism"),
                (PosTag.ADJ, "ous ive able ible ful less ical"),
                (PosTag.VERB, "ing ed ize izes ise ises"),
            ]
        ),
    }
)

PROFILES = ("pt", "en")


def _data_path(name: str):
    return importlib_resources.files("newscloud") / "data" / name


def _read_lines(source) -> Iterable[str]:
    """Non-blank, non-comment lines of a UTF-8 resource"""
    try:
        text = source.read_text(encoding="utf-8")
    except FileNotFoundError as e:
        raise ResourceError(source) from e
    except OSError as e:
        raise ResourceError(source, f"cannot read resource file ({e.strerror})") from e
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            yield line


def read_wordlist(source) -> frozenset[str]:
    """One word per line, '#' comments. Words are case-folded."""
    return frozenset(fold_case(line) for line in _read_lines(source))


def read_tsv_lexicon(source) -> dict[str, str]:
    """word<TAB>tag lines. Words are case-folded; a missing tag is stored as ''."""
    out = {}
    for line in _read_lines(source):
        word, _, tag = line.partition("\t")
        out[fold_case(word.strip())] = tag.strip()
    return out


def _as_source(path: Optional[os.PathLike | str], default_name: str):
    if path is None:
        return _data_path(default_name)
    return Path(path)


@functools.lru_cache(maxsize=16)
def load_resources(
    language: str = "pt",
    stopwords: Optional[os.PathLike | str] = None,
    ne_lexicon: Optional[os.PathLike | str] = None,
    pos_lexicon: Optional[os.PathLike | str] = None,
) -> LanguageResources:
    """Load a language profile, with optional replacement resource files.

    Parameters
    ----------
    language:    "pt" (default) or "en"
    stopwords:   path to a stopword list, default: the shipped list for the language
    ne_lexicon:  path to a word<TAB>tag named-entity lexicon
    pos_lexicon: path to a word<TAB>tag part-of-speech lexicon
    """
    if language not in PROFILES:
        raise ValueError(f"unknown language profile {language!r} (expected one of {PROFILES})")

    stop = read_wordlist(_as_source(stopwords, f"stopwords_{language}.txt"))
    names = frozenset(read_tsv_lexicon(_as_source(ne_lexicon, f"ne_lexicon_{language}.tsv")))
    pos_raw = read_tsv_lexicon(_as_source(pos_lexicon, f"pos_lexicon_{language}.tsv"))
    try:
        pos = {word: PosTag.parse(tag) for word, tag in pos_raw.items()}
    except ValueError as e:
        raise ValueError(f"unknown tag in POS lexicon for {language!r}: {e}") from e

    logger.debug(
        "language profile %s: %d stopwords, %d names, %d POS entries",
        language,
        len(stop),
        len(names),
        len(pos),
    )
    return LanguageResources(
        language=language,
        stopwords=stop,
        stemmer=STEMMERS[language],
        ne_lexicon=names,
        pos_lexicon=MappingProxyType(pos),
        pos_suffixes=POS_SUFFIXES[language],
    )


def default_resources() -> LanguageResources:
    return load_resources("pt")


def fold_case(word: str) -> str:
    """Lowercase with simple (one-to-one) case mapping.

    str.lower() maps some characters to several code points (U+0130 becomes "i" plus a combining
    dot) and lowers a final sigma by context. Here every character maps on its own to one code
    point, so offsets and lengths are kept.
    """
    if word.isascii():
        return word.lower()
    return "".join(c.lower()[0] for c in word)


def is_stopword(word: str, resources: LanguageResources) -> bool:
    """Case-insensitive stopword membership"""
    return fold_case(word) in resources.stopwords


@functools.lru_cache(maxsize=65536)
def _stem_folded(folded: str, stemmer: NamedStemmer) -> str:
    current = folded
    for _ in range(MAX_STEM_PASSES):
        nxt = stemmer(current) or current
        if nxt == current:
            break
        current = nxt
    return current


def stem(word: str, resources: LanguageResources) -> str:
    """Stem the case-folded word, repeating the stemmer until it stops changing.

    Words without letters (numbers, codes) are returned case-folded but otherwise untouched.
    """
    folded = fold_case(word)
    if not any(c.isalpha() for c in folded):
        return folded
    return _stem_folded(folded, resources.stemmer)


def _strip_edges(chunk: str) -> tuple[int, int]:
    """Index range [lo, hi) of chunk with leading and trailing non-alphanumerics removed."""
    lo, hi = 0, len(chunk)
    while lo < hi and not chunk[lo].isalnum():
        lo += 1
    while hi > lo and not chunk[hi - 1].isalnum():
        hi -= 1
    return lo, hi


_chunk_re = re.compile(r"\S+")


def tokenize(text: str, resources: Optional[LanguageResources] = None) -> list[Token]:
    """Split a transcript into word tokens.

    Splits on whitespace, strips punctuation at either end of each chunk and keeps anything
    inside (hyphens, digits, apostrophes). A '.', '!', '?', ':' or ';' among the stripped
    characters, or a newline in the following whitespace, marks a sentence boundary after the
    word. Chunks that are pure punctuation mark a boundary on the preceding word.
    """
    if resources is None:
        resources = default_resources()

    # [surface, offset, boundary_after]
    raw: list[list] = []
    for match in _chunk_re.finditer(text):
        chunk = match.group()
        lo, hi = _strip_edges(chunk)
        lead, core, trail = chunk[:lo], chunk[lo:hi], chunk[hi:]
        if raw and BOUNDARY_CHARS.intersection(lead):
            raw[-1][2] = True
        if not core:
            continue
        boundary = bool(BOUNDARY_CHARS.intersection(trail))
        raw.append([core, match.start() + lo, boundary])
        if "\n" in _whitespace_after(text, match.end()):
            raw[-1][2] = True

    tokens = []
    sentence_start = True
    for surface, offset, boundary in raw:
        lower = fold_case(surface)
        tokens.append(
            Token(
                surface=surface,
                lower=lower,
                stem=stem(surface, resources),
                char_offset=offset,
                is_stopword=lower in resources.stopwords,
                sentence_boundary_after=boundary,
                sentence_start=sentence_start,
            )
        )
        sentence_start = boundary
    return tokens


def _whitespace_after(text: str, pos: int) -> str:
    end = pos
    while end < len(text) and text[end].isspace():
        end += 1
    return text[pos:end]


def tag_word(token: Token, resources: LanguageResources) -> PosTag:
    """Coarse POS of one word: lexicon, then stopword / number, then suffix table, else noun."""
    tag = resources.pos_lexicon.get(token.lower)
    if tag is not None:
        return tag
    if token.lower in resources.stopwords or not any(c.isalpha() for c in token.lower):
        return PosTag.OTHER
    for suffix, suffix_tag in resources.pos_suffixes:
        if token.lower.endswith(suffix) and len(token.lower) > len(suffix) + 1:
            return suffix_tag
    return PosTag.NOUN


def words_to_stems(words: Sequence[Token]) -> str:
    """Normalized form of a word sequence: stems joined by single spaces"""
    return " ".join(t.stem for t in words)
