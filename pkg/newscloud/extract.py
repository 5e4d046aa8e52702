"""Ranking candidates by model probability, top-N extraction, and P/R/F1 evaluation."""

from __future__ import annotations

import dataclasses
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Iterable, NamedTuple, Optional, Sequence

from .candidates import CandidatePhrase, normalize_phrase
from .corpus import Corpus, NewsDocument
from .ensemble import BaggedTreeModel, TrainingInstance
from .errors import CorpusValidationError
from .features import (
    FEATURE_NAMES,
    FeatureExtractor,
    FeatureVector,
    build_idf,
    describe_feature_set,
)
from .ngram_lm import LanguageModel
from .preprocess import LanguageResources

logger = logging.getLogger(__name__)

# The n values the evaluation tables are reported at
SWEEP_NS = (10, 20, 30, 35, 40)


@dataclasses.dataclass(frozen=True)
class RankedKeyphrase:
    surface: str
    normalized: str
    score: float
    rank: int
    tfidf: float = 0.0
    first_pos: float = 0.0
    tf: int = 1

    def to_dict(self) -> dict[str, Any]:
        return {
            "rank": self.rank,
            "score": self.score,
            "phrase": self.surface,
            "normalized": self.normalized,
            "tf": self.tf,
        }


def _rank_key(item: tuple[CandidatePhrase, FeatureVector, float]):
    cand, fv, score = item
    return (-score, -fv.tfidf, fv.first_pos, cand.normalized)


def rank_scored(
    scored: Iterable[tuple[CandidatePhrase, FeatureVector, float]],
) -> list[RankedKeyphrase]:
    """Order (candidate, features, score) triples: score descending, then tfidf descending,
    then first position ascending, then normalized form. Input order never matters."""
    ordered = sorted(scored, key=_rank_key)
    return [
        RankedKeyphrase(
            cand.surface, cand.normalized, score, rank, fv.tfidf, fv.first_pos, cand.tf
        )
        for rank, (cand, fv, score) in enumerate(ordered, start=1)
    ]


def rank_candidates(
    doc: NewsDocument, model: BaggedTreeModel, extractor: FeatureExtractor
) -> list[RankedKeyphrase]:
    """Score every candidate of doc with the model and rank them.

    Raises SchemaMismatchError if the extractor computes different features than the model was
    trained on.
    """
    model.check_schema(extractor.feature_names)
    pairs = extractor.extract(doc)
    if not pairs:
        return []
    scores = model.predict_many(extractor.matrix([fv for _, fv in pairs]))
    return rank_scored((cand, fv, float(s)) for (cand, fv), s in zip(pairs, scores))


def extract_top_n(ranked: Sequence[RankedKeyphrase], n: int) -> list[RankedKeyphrase]:
    if n < 1:
        raise ValueError(f"number of keyphrases to extract must be >= 1, got {n}")
    return list(ranked[:n])


def gold_forms(doc: NewsDocument, resources: LanguageResources) -> frozenset[str]:
    """Distinct normalized forms of a document's gold keyphrases"""
    return frozenset(normalize_phrase(g, resources) for g in doc.gold_keyphrases or ())


def match_keyphrases(
    extracted: Iterable[RankedKeyphrase | str],
    gold: Iterable[str],
    resources: LanguageResources,
) -> int:
    """Number of gold phrases hit by some extracted phrase, comparing stemmed forms.

    Each gold phrase counts at most once, however many extracted phrases share its form.
    """
    extracted_forms = {
        e.normalized if isinstance(e, RankedKeyphrase) else normalize_phrase(e, resources)
        for e in extracted
    }
    gold_set = {normalize_phrase(g, resources) for g in gold}
    return len(extracted_forms & gold_set)


def f1_score(precision: float, recall: float) -> float:
    """Harmonic mean of precision and recall; 0 when both are 0"""
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def training_instances(corpus: Corpus, extractor: FeatureExtractor) -> list[TrainingInstance]:
    """Every candidate of every document, labelled by whether it matches a gold keyphrase"""
    instances = []
    for doc in corpus.documents:
        if doc.gold_keyphrases is None:
            raise CorpusValidationError(doc.id, "training needs gold_keyphrases")
        gold = gold_forms(doc, extractor.resources)
        instances.extend(
            TrainingInstance(fv, cand.normalized in gold, doc.id)
            for cand, fv in extractor.extract(doc)
        )
    logger.info(
        "%d training instances from %d documents", len(instances), len(corpus.documents)
    )
    return instances


class DocScore(NamedTuple):
    doc_id: str
    n_extracted: int
    n_identified: int
    n_gold: int
    precision: float
    recall: float
    f1: float


class MacroScores(NamedTuple):
    """Per-document values averaged over documents. precision/recall/f1 are fractions."""

    identified: float
    precision: float
    recall: float
    f1: float


def score_document(doc_id: str, extracted: Sequence[RankedKeyphrase], gold: frozenset[str]):
    n_identified = len({k.normalized for k in extracted} & gold)
    precision = n_identified / len(extracted) if extracted else 0.0
    recall = n_identified / len(gold) if gold else 0.0
    return DocScore(
        doc_id,
        len(extracted),
        n_identified,
        len(gold),
        precision,
        recall,
        f1_score(precision, recall),
    )


@dataclasses.dataclass(frozen=True)
class EvaluationReport:
    n: int
    per_doc: tuple[DocScore, ...]
    features: str = "all"

    @property
    def macro(self) -> MacroScores:
        if not self.per_doc:
            return MacroScores(0.0, 0.0, 0.0, 0.0)
        count = len(self.per_doc)
        return MacroScores(
            sum(d.n_identified for d in self.per_doc) / count,
            sum(d.precision for d in self.per_doc) / count,
            sum(d.recall for d in self.per_doc) / count,
            sum(d.f1 for d in self.per_doc) / count,
        )

    def to_dict(self) -> dict[str, Any]:
        macro = self.macro
        return {
            "n": self.n,
            "features": self.features,
            "macro": {
                "identified": macro.identified,
                "precision": macro.precision,
                "recall": macro.recall,
                "f1": macro.f1,
            },
            "per_doc": [d._asdict() for d in self.per_doc],
        }

    def show(self, printer: Callable[[str], Any] = print) -> None:
        """Print the report as a one-row table"""
        for line in format_table([self]).splitlines():
            printer(line)


TABLE_HEADER = (
    "# Keyphrases Extracted",
    "Features",
    "#Keyphrases Identified",
    "P",
    "R",
    "F1",
)


def _table_row(report: EvaluationReport) -> tuple[str, ...]:
    macro = report.macro
    return (
        str(report.n),
        report.features,
        f"{macro.identified:.1f}",
        f"{100 * macro.precision:.2f}",
        f"{100 * macro.recall:.2f}",
        f"{100 * macro.f1:.2f}",
    )


def format_table(reports: Sequence[EvaluationReport]) -> str:
    """Aligned text table, one row per report, P/R/F1 as percentages"""
    rows = [TABLE_HEADER] + [_table_row(r) for r in reports]
    widths = [max(len(row[col]) for row in rows) for col in range(len(TABLE_HEADER))]
    lines = [" | ".join(cell.rjust(w) for cell, w in zip(row, widths)) for row in rows]
    lines.insert(1, "-+-".join("-" * w for w in widths))
    return "\n".join(lines)


def reports_to_json(reports: Sequence[EvaluationReport]) -> str:
    return json.dumps({"reports": [r.to_dict() for r in reports]}, indent=1)


def _rank_all(
    documents: Sequence[NewsDocument],
    model: BaggedTreeModel,
    extractor: FeatureExtractor,
    threads: int,
) -> list[list[RankedKeyphrase]]:
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda d: rank_candidates(d, model, extractor), documents))
    return [rank_candidates(d, model, extractor) for d in documents]


def evaluate_sweep(
    corpus: Corpus,
    model: BaggedTreeModel,
    extractor: FeatureExtractor,
    ns: Sequence[int] = SWEEP_NS,
    threads: int = 1,
) -> list[EvaluationReport]:
    """One report per n, ranking each document once.

    Documents are processed in id order, so reports do not depend on corpus order or on the
    number of threads.
    """
    for n in ns:
        if n < 1:
            raise ValueError(f"number of keyphrases to extract must be >= 1, got {n}")
    documents = sorted(corpus.documents, key=lambda d: d.id)
    for doc in documents:
        if not doc.gold_keyphrases:
            raise CorpusValidationError(doc.id, "evaluation needs gold_keyphrases")
    golds = [gold_forms(doc, extractor.resources) for doc in documents]
    rankings = _rank_all(documents, model, extractor, threads)
    features = describe_feature_set(model.feature_names)

    reports = []
    for n in ns:
        per_doc = tuple(
            score_document(doc.id, extract_top_n(ranked, n), gold)
            for doc, ranked, gold in zip(documents, rankings, golds)
        )
        report = EvaluationReport(n, per_doc, features)
        macro = report.macro
        logger.info(
            "n=%d: identified %.2f, P %.4f, R %.4f, F1 %.4f",
            n,
            macro.identified,
            macro.precision,
            macro.recall,
            macro.f1,
        )
        reports.append(report)
    return reports


def evaluate(
    corpus: Corpus,
    model: BaggedTreeModel,
    extractor: FeatureExtractor,
    n: int = 30,
    threads: int = 1,
) -> EvaluationReport:
    """Macro-averaged P/R/F1 of the top-n keyphrases of every document against its gold set"""
    return evaluate_sweep(corpus, model, extractor, (n,), threads)[0]


def extract_keyphrases(
    documents: Iterable[NewsDocument],
    model: BaggedTreeModel,
    extractor: FeatureExtractor,
    n: int,
    threads: int = 1,
) -> list[tuple[NewsDocument, list[RankedKeyphrase]]]:
    """Top-n keyphrases for each document, in input order"""
    if n < 1:
        raise ValueError(f"number of keyphrases to extract must be >= 1, got {n}")
    documents = list(documents)
    rankings = _rank_all(documents, model, extractor, threads)
    return [(doc, extract_top_n(ranked, n)) for doc, ranked in zip(documents, rankings)]


def build_extractor(
    training: Corpus,
    resources: LanguageResources,
    lm: Optional[LanguageModel] = None,
    feature_names: Optional[Sequence[str]] = None,
) -> FeatureExtractor:
    """Feature extractor whose IDF table comes from the training corpus"""
    idf = build_idf(training, resources)
    return FeatureExtractor(resources, idf, lm, tuple(feature_names or FEATURE_NAMES))


def extractor_for_model(
    model: BaggedTreeModel,
    resources: LanguageResources,
    lm: Optional[LanguageModel] = None,
) -> FeatureExtractor:
    """Feature extractor matching a trained model: its feature columns and its IDF table"""
    if model.idf is None:
        raise ValueError("model was saved without document frequencies; retrain it")
    if lm is None and "f5_lm_logprob" in model.feature_names:
        logger.warning("model uses the language model feature but no language model is loaded")
    return FeatureExtractor(resources, model.idf, lm, model.feature_names)
