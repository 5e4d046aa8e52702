"""Back-off n-gram language models: ARPA text, a compressed MPH-backed store, and mixtures.

All probabilities are base-10 logarithms, as in ARPA files.
"""

from __future__ import annotations

import dataclasses
import logging
import math
import os
import re
import struct
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping, Optional, Protocol, Sequence

import mmh3
import numpy as np

from .errors import ArpaFormatError, ModelFormatError, ModelVersionError, ResourceError
from .mph import MinimalPerfectHash
from .quantize import UniformQuantizer
from .util import pack_bits, packed_size, unpack_bits

logger = logging.getLogger(__name__)

LOGZERO = -99.0  # log10 "probability" of impossible events
UNK = "<unk>"
MAX_PHRASE_WORDS = 5
MAX_HISTORY = 3  # 4-gram domain model

FINGERPRINT_BITS = range(8, 17)
QUANT_BITS = range(4, 9)
DEFAULT_BACKOFF_PENALTY = -0.7

Ngram = tuple[str, ...]


class LanguageModel(Protocol):
    """What feature extraction needs from a language model"""

    @property
    def max_order(self) -> int: ...

    def log_prob(self, word: str, history: Sequence[str] = ()) -> float: ...


def log_prob(model: LanguageModel, word: str, history: Sequence[str] = ()) -> float:
    return model.log_prob(word, history)


def lookup_compressed(cm: CompressedNGramModel, ngram: Sequence[str]) -> Optional[float]:
    return cm.lookup(ngram)


def phrase_score(model: LanguageModel, words: Sequence[str]) -> float:
    """Mean per-word log10 probability of a phrase, each word conditioned on up to 3 previous.

    Parameters
    ----------
    model: any LanguageModel
    words: 1..5 words
    """
    if not 1 <= len(words) <= MAX_PHRASE_WORDS:
        raise ValueError(f"phrase must have 1..{MAX_PHRASE_WORDS} words, got {len(words)}")
    total = sum(
        model.log_prob(word, words[max(0, i - MAX_HISTORY) : i]) for i, word in enumerate(words)
    )
    return total / len(words)


# ARPA text models ##########################################################################


def _truncate(history: Ngram, length: int) -> Ngram:
    """The last 'length' words of a history"""
    return history[len(history) - min(len(history), max(length, 0)) :]


@dataclasses.dataclass(frozen=True)
class ArpaModel:
    """A back-off model as read from an ARPA file.

    probs[k][ngram] and backoffs[k][ngram] hold the entries of the k-gram section. N-grams
    listed without a back-off weight have none stored (weight 0).
    """

    probs: Mapping[int, Mapping[Ngram, float]]
    backoffs: Mapping[int, Mapping[Ngram, float]]

    @property
    def max_order(self) -> int:
        return max(self.probs, default=0)

    @property
    def counts(self) -> dict[int, int]:
        return {order: len(entries) for order, entries in sorted(self.probs.items())}

    @property
    def vocab(self) -> frozenset[str]:
        return frozenset(ngram[0] for ngram in self.probs.get(1, {}))

    @property
    def has_unk(self) -> bool:
        return (UNK,) in self.probs.get(1, {})

    def _map_word(self, word: str) -> Optional[str]:
        if (word,) in self.probs.get(1, {}):
            return word
        return UNK if self.has_unk else None

    def log_prob(self, word: str, history: Sequence[str] = ()) -> float:
        """Katz back-off: the longest stored n-gram ending in 'word', plus the back-off
        weights of every longer history that had to be dropped to reach it."""
        target = self._map_word(word)
        if target is None:
            return LOGZERO
        history = _truncate(tuple(self._map_word(h) or h for h in history), self.max_order - 1)

        penalty = 0.0
        for start in range(len(history) + 1):
            context = history[start:]
            ngram = context + (target,)
            prob = self.probs.get(len(ngram), {}).get(ngram)
            if prob is not None:
                return prob + penalty
            penalty += self.backoffs.get(len(context), {}).get(context, 0.0)
        # unreachable: the unigram is always present
        return LOGZERO

    def entries(self, order: int) -> Iterable[tuple[Ngram, float]]:
        return self.probs.get(order, {}).items()


_section_re = re.compile(r"\\(\d+)-grams:")
_count_re = re.compile(r"ngram\s+(\d+)\s*=\s*(\d+)")


def _parse_float(text: str, line_no: int, line: str) -> float:
    try:
        value = float(text)
    except ValueError as e:
        raise ArpaFormatError(f"bad number {text!r}", line_no, line) from e
    if math.isnan(value) or value == math.inf:
        raise ArpaFormatError(f"bad log probability {text!r}", line_no, line)
    return max(value, LOGZERO)


def parse_arpa(lines: Iterable[str]) -> ArpaModel:
    """Parse ARPA text, checking each section against the counts in the \\data\\ header."""
    # pylint: disable=too-many-branches
    declared: dict[int, int] = {}
    probs: dict[int, dict[Ngram, float]] = {}
    backoffs: dict[int, dict[Ngram, float]] = {}
    state = "preamble"
    order = 0
    line_no = 0

    def close_section(at_line: int, text: str):
        if order and len(probs[order]) != declared[order]:
            raise ArpaFormatError(
                f"\\data\\ header declares {declared[order]} {order}-grams, "
                f"section has {len(probs[order])}",
                at_line,
                text,
            )

    for line_no, raw in enumerate(lines, 1):
        line = raw.strip()
        if state == "preamble":
            if line == "\\data\\":
                state = "data"
            continue
        if not line:
            continue
        if line == "\\end\\":
            close_section(line_no, line)
            state = "end"
            break

        section = _section_re.fullmatch(line)
        if section:
            close_section(line_no, line)
            order = int(section.group(1))
            if order not in declared:
                raise ArpaFormatError(f"{order}-gram section not declared in header", line_no, line)
            if order in probs:
                raise ArpaFormatError(f"duplicate {order}-gram section", line_no, line)
            probs[order], backoffs[order] = {}, {}
            state = "ngrams"
            continue

        if state == "data":
            count = _count_re.fullmatch(line)
            if not count:
                raise ArpaFormatError("expected 'ngram N=count' in \\data\\ header", line_no, line)
            declared[int(count.group(1))] = int(count.group(2))
            continue

        parts = line.split()
        if len(parts) not in (order + 1, order + 2):
            raise ArpaFormatError(f"expected a {order}-gram entry", line_no, line)
        ngram = tuple(parts[1 : order + 1])
        probs[order][ngram] = _parse_float(parts[0], line_no, line)
        if len(parts) == order + 2:
            backoffs[order][ngram] = _parse_float(parts[-1], line_no, line)
        if len(probs[order]) > declared[order]:
            raise ArpaFormatError(
                f"more {order}-grams than the {declared[order]} declared in header", line_no, line
            )

    if state == "preamble":
        raise ArpaFormatError("no \\data\\ header found")
    if state != "end":
        raise ArpaFormatError("missing \\end\\ marker", line_no)
    missing = sorted(set(declared) - set(probs))
    if missing:
        raise ArpaFormatError(f"header declares {missing[0]}-grams but the section is missing")

    return ArpaModel(
        MappingProxyType({k: MappingProxyType(v) for k, v in probs.items()}),
        MappingProxyType({k: MappingProxyType(v) for k, v in backoffs.items()}),
    )


def load_arpa(path: os.PathLike | str) -> ArpaModel:
    path = Path(path)
    try:
        with path.open(encoding="utf-8") as stream:
            model = parse_arpa(stream)
    except FileNotFoundError as e:
        raise ResourceError(path, "language model not found") from e
    except UnicodeDecodeError as e:
        raise ArpaFormatError(f"{path}: not valid UTF-8 at byte {e.start}") from e
    logger.info("loaded ARPA model %s: counts %s", path, model.counts)
    return model


# Compressed store ##########################################################################

MAGIC = b"NCLM"
FORMAT_VERSION = 1
_FILE_HEADER = struct.Struct("<4sHBBBBId")  # magic, version, max_order, b, q, flags, seed, penalty
_ORDER_HEADER = struct.Struct("<I")  # codebook size
_FLAG_UNK = 1


def _key(ngram: Sequence[str]) -> bytes:
    return " ".join(ngram).encode("utf-8")


def _fingerprint_seed(seed: int) -> int:
    return (seed ^ 0x5BD1E995) & 0xFFFFFFFF


def _fingerprint(key: bytes, seed: int, bits: int) -> int:
    return mmh3.hash(key, _fingerprint_seed(seed), signed=False) & ((1 << bits) - 1)


@dataclasses.dataclass(frozen=True)
class CompressedOrder:
    """The stored n-grams of one order: MPH slot -> (fingerprint, probability code)."""

    mph: MinimalPerfectHash
    fingerprints: np.ndarray = dataclasses.field(repr=False)
    codes: np.ndarray = dataclasses.field(repr=False)
    codebook: np.ndarray = dataclasses.field(repr=False)

    @property
    def n_keys(self) -> int:
        return self.mph.n_keys


@dataclasses.dataclass(frozen=True)
class CompressedNGramModel:
    """N-gram probabilities behind one minimal perfect hash per order.

    Stores no back-off weights: a missing n-gram falls back to the next shorter one with a
    fixed 'backoff_penalty' per dropped word.
    """

    orders: tuple[CompressedOrder, ...]  # orders[k - 1] holds the k-grams
    fingerprint_bits: int
    quant_bits: int
    seed: int
    backoff_penalty: float = DEFAULT_BACKOFF_PENALTY
    has_unk: bool = False

    @property
    def max_order(self) -> int:
        return len(self.orders)

    @property
    def counts(self) -> dict[int, int]:
        return {k + 1: order.n_keys for k, order in enumerate(self.orders)}

    def lookup(self, ngram: Sequence[str]) -> Optional[float]:
        """Stored (quantized) log10 probability, or None for n-grams not in the store.

        A non-stored n-gram is wrongly accepted only when its fingerprint collides, which
        happens with probability 2**-fingerprint_bits.
        """
        if not 1 <= len(ngram) <= self.max_order:
            return None
        order = self.orders[len(ngram) - 1]
        if order.n_keys == 0:
            return None
        key = _key(ngram)
        slot = order.mph(key)
        if int(order.fingerprints[slot]) != _fingerprint(key, self.seed, self.fingerprint_bits):
            return None
        return float(order.codebook[order.codes[slot]])

    def log_prob(self, word: str, history: Sequence[str] = ()) -> float:
        if self.lookup((word,)) is None:
            if not self.has_unk:
                return LOGZERO
            word = UNK
        if self.has_unk:
            history = tuple(h if self.lookup((h,)) is not None else UNK for h in history)
        history = _truncate(tuple(history), self.max_order - 1)
        penalty = 0.0
        for start in range(len(history) + 1):
            prob = self.lookup(history[start:] + (word,))
            if prob is not None:
                return prob + penalty
            penalty += self.backoff_penalty
        return LOGZERO

    def to_bytes(self) -> bytes:
        """Serialize to the versioned binary container described in docs/formats.md"""
        flags = _FLAG_UNK if self.has_unk else 0
        out = [
            _FILE_HEADER.pack(
                MAGIC,
                FORMAT_VERSION,
                self.max_order,
                self.fingerprint_bits,
                self.quant_bits,
                flags,
                self.seed,
                self.backoff_penalty,
            )
        ]
        for order in self.orders:
            out.append(order.mph.to_bytes())
            out.append(pack_bits(order.fingerprints, self.fingerprint_bits))
            out.append(pack_bits(order.codes, self.quant_bits))
            out.append(_ORDER_HEADER.pack(len(order.codebook)))
            out.append(np.asarray(order.codebook, dtype="<f8").tobytes())
        return b"".join(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> "CompressedNGramModel":
        try:
            magic, version, max_order, b, q, flags, seed, penalty = _FILE_HEADER.unpack_from(data)
        except struct.error as e:
            raise ModelFormatError(f"truncated language model header: {e}") from e
        if magic != MAGIC:
            raise ModelFormatError(f"not a compressed language model (magic {magic!r})")
        if version != FORMAT_VERSION:
            raise ModelVersionError("language model", version, FORMAT_VERSION)

        offset = _FILE_HEADER.size
        orders = []
        try:
            for _ in range(max_order):
                mph, offset = MinimalPerfectHash.from_bytes(data, offset)
                fingerprints = unpack_bits(data[offset:], b, mph.n_keys).astype(np.uint16)
                offset += packed_size(b, mph.n_keys)
                codes = unpack_bits(data[offset:], q, mph.n_keys).astype(np.uint16)
                offset += packed_size(q, mph.n_keys)
                (n_codes,) = _ORDER_HEADER.unpack_from(data, offset)
                offset += _ORDER_HEADER.size
                codebook = np.frombuffer(data, dtype="<f8", count=n_codes, offset=offset)
                offset += 8 * n_codes
                orders.append(CompressedOrder(mph, fingerprints, codes, codebook.astype(float)))
        except (struct.error, ValueError) as e:
            raise ModelFormatError(f"truncated language model: {e}") from e
        return cls(tuple(orders), b, q, seed, penalty, bool(flags & _FLAG_UNK))

    def save(self, path: os.PathLike | str) -> int:
        """Write the container; returns its size in bytes"""
        data = self.to_bytes()
        Path(path).write_bytes(data)
        return len(data)

    @classmethod
    def load(cls, path: os.PathLike | str) -> "CompressedNGramModel":
        path = Path(path)
        try:
            data = path.read_bytes()
        except FileNotFoundError as e:
            raise ResourceError(path, "language model not found") from e
        return cls.from_bytes(data)

    @property
    def size_in_bytes(self) -> int:
        return len(self.to_bytes())


def _fit_quantizer(values: np.ndarray, quant_bits: int) -> tuple[UniformQuantizer, bool]:
    """Quantizer over the non-floor values, and whether the order holds floor values.

    Floor values (e.g. <s>) get the reserved top code, which decodes to LOGZERO exactly.
    """
    floor = values <= LOGZERO
    has_floor = bool(floor.any())
    quantizer = UniformQuantizer.fit(values[~floor], quant_bits, reserved=int(has_floor))
    return quantizer, has_floor


def _compress_order(
    entries: Sequence[tuple[Ngram, float]], fingerprint_bits: int, quant_bits: int, seed: int
) -> tuple[CompressedOrder, UniformQuantizer]:
    keys = [_key(ngram) for ngram, _ in entries]
    values = np.array([prob for _, prob in entries], dtype=np.float64)
    mph = MinimalPerfectHash.build(keys, seed=seed)
    quantizer, has_floor = _fit_quantizer(values, quant_bits)
    codebook = quantizer.codebook
    encoded = quantizer.encode(values)
    if has_floor:
        codebook = np.append(codebook, LOGZERO)
        encoded[values <= LOGZERO] = quantizer.num_bins

    slots = np.array([mph(key) for key in keys], dtype=np.int64)
    fingerprints = np.zeros(len(keys), dtype=np.uint16)
    codes = np.zeros(len(keys), dtype=np.uint16)
    fingerprints[slots] = [_fingerprint(key, seed, fingerprint_bits) for key in keys]
    codes[slots] = encoded
    return CompressedOrder(mph, fingerprints, codes, codebook), quantizer


def compress(
    model: ArpaModel,
    fingerprint_bits: int = 12,
    quant_bits: int = 8,
    seed: int = 0,
    backoff_penalty: float = DEFAULT_BACKOFF_PENALTY,
) -> CompressedNGramModel:
    """Build the compressed store of an ARPA model.

    Parameters
    ----------
    fingerprint_bits: 8..16, bits of key fingerprint kept per n-gram
    quant_bits:       4..8, bits per quantized probability
    seed:             hash seed; MPH construction retries from here on failure
    backoff_penalty:  log10 penalty per word dropped when an n-gram is missing
    """
    if fingerprint_bits not in FINGERPRINT_BITS:
        raise ValueError(f"fingerprint bits must be 8..16, got {fingerprint_bits}")
    if quant_bits not in QUANT_BITS:
        raise ValueError(f"quantization bits must be 4..8, got {quant_bits}")

    orders = []
    for k in range(1, model.max_order + 1):
        entries = sorted(model.entries(k))
        order, quantizer = _compress_order(entries, fingerprint_bits, quant_bits, seed)
        logger.debug(
            "order %d: %d n-grams, MPH seed %d, bin width %.5f",
            k,
            len(entries),
            order.mph.seed,
            quantizer.bin_width,
        )
        orders.append(order)
    compressed = CompressedNGramModel(
        tuple(orders), fingerprint_bits, quant_bits, seed, backoff_penalty, model.has_unk
    )
    logger.info("compressed LM counts %s into %d bytes", model.counts, compressed.size_in_bytes)
    return compressed


def bin_widths(model: ArpaModel, quant_bits: int) -> dict[int, float]:
    """Quantization bin width that compress() would use for each order"""
    out = {}
    for k in range(1, model.max_order + 1):
        values = np.array([p for _, p in model.entries(k)], dtype=np.float64)
        out[k] = _fit_quantizer(values, quant_bits)[0].bin_width
    return out


# Mixtures ##################################################################################


@dataclasses.dataclass(frozen=True)
class InterpolatedModel:
    """Linear interpolation of several models: P(w|h) = sum_i weight_i * P_i(w|h)"""

    models: tuple[LanguageModel, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        if not self.models or len(self.models) != len(self.weights):
            raise ValueError("need one weight per model, and at least one model")
        if any(w < 0 for w in self.weights) or not math.isclose(sum(self.weights), 1.0):
            raise ValueError(f"interpolation weights must be >= 0 and sum to 1: {self.weights}")

    @classmethod
    def uniform(cls, models: Sequence[LanguageModel]) -> "InterpolatedModel":
        return cls(tuple(models), tuple(1.0 / len(models) for _ in models))

    @property
    def max_order(self) -> int:
        return max(m.max_order for m in self.models)

    def log_prob(self, word: str, history: Sequence[str] = ()) -> float:
        total = sum(
            weight * 10.0 ** model.log_prob(word, history)
            for model, weight in zip(self.models, self.weights)
            if weight > 0
        )
        return max(math.log10(total), LOGZERO) if total > 0 else LOGZERO


def load_language_model(path: os.PathLike | str) -> LanguageModel:
    """Load either a compressed container or an ARPA text file, by sniffing the magic bytes."""
    path = Path(path)
    try:
        with path.open("rb") as stream:
            head = stream.read(len(MAGIC))
    except FileNotFoundError as e:
        raise ResourceError(path, "language model not found") from e
    if head == MAGIC:
        model = CompressedNGramModel.load(path)
        logger.info("loaded compressed LM %s: counts %s", path, model.counts)
        return model
    return load_arpa(path)


def load_language_models(
    paths: Sequence[os.PathLike | str], weights: Optional[Sequence[float]] = None
) -> Optional[LanguageModel]:
    """None for no paths, the model itself for one path, else an InterpolatedModel"""
    if not paths:
        return None
    models = [load_language_model(p) for p in paths]
    if len(models) == 1 and not weights:
        return models[0]
    if weights:
        return InterpolatedModel(tuple(models), tuple(weights))
    return InterpolatedModel.uniform(models)
