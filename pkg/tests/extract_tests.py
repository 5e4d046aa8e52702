"""Tests for ranking, top-n extraction and P/R/F1 evaluation"""

import dataclasses
import json
import random

import pytest

import gen_news_corpus
from newscloud import extract
from newscloud.candidates import CandidatePhrase, Span
from newscloud.corpus import Corpus, Split
from newscloud.ensemble import train_bagging
from newscloud.errors import CorpusValidationError, SchemaMismatchError
from newscloud.extract import DocScore, EvaluationReport, RankedKeyphrase
from newscloud.features import FeatureVector, parse_feature_set
from newscloud.preprocess import default_resources

# (n, features, identified, P, R, F1) as reported for bagging over C4.5 and over CART
PUBLISHED_ROWS = [
    (30, "base", 8.5, 28.33, 31.71, 29.93),
    (30, "base+f1", 8.6, 28.67, 32.02, 30.25),
    (30, "base+f2", 9, 30, 33.69, 31.74),
    (30, "base+f3", 9.2, 30.67, 35.4, 32.86),
    (30, "base+f4", 8.1, 27, 30.56, 28.67),
    (30, "base+f5", 8.9, 29.67, 33.73, 31.57),
    (30, "base+f1+f2", 8.6, 28.67, 32.02, 30.25),
    (30, "all prev.+f3", 9.4, 31.33, 35.81, 33.42),
    (30, "all prev.+f4", 9.7, 32.33, 36.86, 34.45),
    (10, "all prev.+f4", 5, 50, 19.39, 27.95),
    (10, "All", 5.3, 53, 20.63, 29.7),
    (20, "All", 7.4, 37, 28.21, 32.01),
    (30, "All", 9.2, 30.67, 35.12, 32.74),
    (35, "All", 10, 28.57, 37.79, 32.54),
    (40, "All", 10.3, 25.75, 38.87, 30.98),
    (30, "base", 8.6, 28.67, 32.32, 30.38),
    (30, "base+f1", 9.4, 31.33, 35.48, 33.28),
    (30, "base+f2", 9.3, 31, 35.34, 33.03),
    (30, "base+f3", 9, 30, 33.9, 31.83),
    (30, "base+f4", 9.1, 30.33, 34.55, 32.3),
    (30, "base+f5", 8.9, 29.67, 33.19, 31.33),
    (30, "base+f1+f2", 9.4, 31.33, 35.48, 33.28),
    (30, "all prev.+f3", 9.4, 31.33, 35.78, 33.41),
    (30, "all prev.+f4", 9.4, 31.33, 35.39, 33.24),
    (10, "all prev.+f4", 4.4, 44, 16.76, 24.27),
    (10, "All", 4.6, 46, 17.33, 25.18),
    (20, "All", 7.1, 35.5, 26.86, 30.58),
    (30, "All", 9.4, 31.33, 36.19, 33.59),
    (35, "All", 9.8, 28, 37.68, 32.13),
    (40, "All", 10.4, 26, 40.18, 31.57),
]


@pytest.mark.parametrize("n,features,identified,p,r,f1", PUBLISHED_ROWS)
def test_published_row_identities(n, features, identified, p, r, f1):
    assert features
    assert 100 * extract.f1_score(p / 100, r / 100) == pytest.approx(f1, abs=0.02)
    # every document yields at least n candidates, so macro P is mean identified / n
    assert 100 * identified / n == pytest.approx(p, abs=0.02)


def test_f1_score():
    assert extract.f1_score(0, 0) == 0
    assert extract.f1_score(1, 1) == 1
    assert extract.f1_score(0.3133, 0.3619) == pytest.approx(0.3359, abs=1e-4)


def test_precision_from_identified():
    """Ten documents with 8 or 9 of their 30 extracted phrases correct average to 28.33% P"""
    per_doc = tuple(
        DocScore(f"d{i}", 30, 8 + i % 2, 27, (8 + i % 2) / 30, (8 + i % 2) / 27, 0.0)
        for i in range(10)
    )
    macro = EvaluationReport(30, per_doc, "base").macro
    assert macro.identified == 8.5
    assert 100 * macro.precision == pytest.approx(28.33, abs=0.01)


# Ranking #################################################################################


def cand(normalized, start=0):
    return CandidatePhrase(normalized, normalized, 1, (Span(start, start + 1),))


def fv(tfidf=0.0, first_pos=0.0):
    return FeatureVector(1, 1.0, tfidf, first_pos, first_pos, 0.0, 1)


def test_rank_by_score():
    ranked = extract.rank_scored([(cand("a"), fv(), 0.3), (cand("b"), fv(), 0.9)])
    assert [(k.normalized, k.rank) for k in ranked] == [("b", 1), ("a", 2)]


def test_tie_breaks():
    scored = [
        (cand("lex-b"), fv(0.01, 0.5), 0.5),
        (cand("lex-a"), fv(0.01, 0.5), 0.5),
        (cand("late"), fv(0.01, 0.6), 0.5),
        (cand("low-tfidf"), fv(0.01, 0.1), 0.5),
        (cand("high-tfidf"), fv(0.05, 0.9), 0.5),
    ]
    ranked = extract.rank_scored(scored)
    assert [k.normalized for k in ranked] == ["high-tfidf", "low-tfidf", "lex-a", "lex-b", "late"]
    assert [k.rank for k in ranked] == [1, 2, 3, 4, 5]


def test_ranking_ignores_input_order():
    rng = random.Random(1)
    scored = [
        (
            cand(f"p{i}"),
            fv(rng.choice([0.01, 0.02]), rng.choice([0.1, 0.2])),
            rng.choice([0.2, 0.8]),
        )
        for i in range(40)
    ]
    expected = extract.rank_scored(scored)
    for _ in range(20):
        rng.shuffle(scored)
        assert extract.rank_scored(scored) == expected


def test_extract_top_n():
    ranked = extract.rank_scored([(cand(f"p{i:02d}"), fv(), i / 50) for i in range(50)])
    assert extract.extract_top_n(ranked, 30) == ranked[:30]
    assert len(extract.extract_top_n(ranked[:5], 30)) == 5
    with pytest.raises(ValueError):
        extract.extract_top_n(ranked, 0)


def test_ranked_to_dict():
    item = RankedKeyphrase("Greve Geral", "grev geral", 0.75, 1, tf=3)
    assert item.to_dict() == {
        "rank": 1,
        "score": 0.75,
        "phrase": "Greve Geral",
        "normalized": "grev geral",
        "tf": 3,
    }


# Matching and scoring ######################################################################


def test_match_by_stem(resources):
    assert extract.match_keyphrases(["governos"], ["governo"], resources) == 1
    assert extract.match_keyphrases(["greve"], ["governo"], resources) == 0
    assert extract.match_keyphrases(["Governo", "governos", "governo"], ["governo"], resources) == 1


def test_score_document_perfect():
    gold = frozenset({"a", "b"})
    extracted = [RankedKeyphrase("a", "a", 0.9, 1), RankedKeyphrase("b", "b", 0.8, 2)]
    score = extract.score_document("d", extracted, gold)
    assert (score.precision, score.recall, score.f1) == (1.0, 1.0, 1.0)


def test_score_document_empty():
    score = extract.score_document("d", [], frozenset({"a"}))
    assert (score.precision, score.recall, score.f1) == (0.0, 0.0, 0.0)


def test_table_format():
    per_doc = tuple(
        DocScore(f"d{i}", 30, 8 + i % 2, 27, (8 + i % 2) / 30, 0.3171, 0.2993) for i in range(10)
    )
    report = EvaluationReport(30, per_doc, "base")
    lines = extract.format_table([report]).splitlines()
    assert [c.strip() for c in lines[0].split("|")] == list(extract.TABLE_HEADER)
    row = [c.strip() for c in lines[2].split("|")]
    assert row == ["30", "base", "8.5", "28.33", "31.71", "29.93"]
    printed = []
    report.show(printed.append)
    assert printed == lines


def test_reports_to_json():
    per_doc = (DocScore("d0", 10, 5, 10, 0.5, 0.5, 0.5),)
    data = json.loads(extract.reports_to_json([EvaluationReport(10, per_doc, "all")]))
    (report,) = data["reports"]
    assert report["macro"] == {"identified": 5, "precision": 0.5, "recall": 0.5, "f1": 0.5}
    assert report["per_doc"][0]["doc_id"] == "d0"


# With a trained model ######################################################################


@pytest.fixture(scope="module")
def small_setup():
    resources = default_resources()
    train = gen_news_corpus.load_entries(
        gen_news_corpus.gen_documents(30, seed=5, n_keyphrases=5, n_words=120), Split.TRAIN
    )
    test_entries = gen_news_corpus.gen_documents(6, seed=6, prefix="t", n_keyphrases=5, n_words=120)
    test = gen_news_corpus.load_entries(test_entries, Split.TEST)
    extractor = extract.build_extractor(train, resources)
    data = extract.training_instances(train, extractor)
    model = train_bagging(data, n_bags=3, seed=1, idf=extractor.idf)
    return resources, train, test, extractor, model, data


def test_training_labels(small_setup):
    resources, train, _, extractor, _, data = small_setup
    doc = train.documents[0]
    candidates = {c.normalized for c, _ in extractor.extract(doc)}
    gold = extract.gold_forms(doc, resources)
    assert gold <= candidates
    assert sum(inst.label for inst in data if inst.doc_id == doc.id) == len(gold)
    assert sum(inst.doc_id == doc.id for inst in data) == len(candidates)


def test_training_needs_gold(small_setup, resources):
    _, _, _, extractor, _, _ = small_setup
    entries = gen_news_corpus.gen_documents(2, seed=8, with_gold=False)
    unlabeled = gen_news_corpus.load_entries(entries, Split.UNLABELED, resources)
    with pytest.raises(CorpusValidationError):
        extract.training_instances(unlabeled, extractor)


def test_rank_candidates(small_setup):
    _, _, test, extractor, model, _ = small_setup
    ranked = extract.rank_candidates(test.documents[0], model, extractor)
    assert [k.rank for k in ranked] == list(range(1, len(ranked) + 1))
    assert all(a.score >= b.score for a, b in zip(ranked, ranked[1:]))
    assert all(0 < k.score < 1 for k in ranked)


def test_schema_mismatch(small_setup):
    resources, train, test, _, model, _ = small_setup
    base = parse_feature_set("base")
    base_extractor = extract.build_extractor(train, resources, feature_names=base)
    with pytest.raises(SchemaMismatchError):
        extract.rank_candidates(test.documents[0], model, base_extractor)


def test_evaluate_sweep(small_setup):
    _, _, test, extractor, model, _ = small_setup
    reports = extract.evaluate_sweep(test, model, extractor, ns=(5, 10))
    assert [r.n for r in reports] == [5, 10]
    assert [d.doc_id for d in reports[0].per_doc] == sorted(d.id for d in test.documents)
    for report in reports:
        for d in report.per_doc:
            assert d.n_extracted == report.n
            assert d.n_gold == 5
            assert d.precision == pytest.approx(d.n_identified / report.n)
    single = extract.evaluate(test, model, extractor, n=5)
    assert single == reports[0]


def test_evaluate_independent_of_order_and_threads(small_setup):
    _, _, test, extractor, model, _ = small_setup
    reversed_corpus = Corpus(tuple(reversed(test.documents)), Split.TEST)
    a = extract.evaluate(test, model, extractor, n=10)
    b = extract.evaluate(reversed_corpus, model, extractor, n=10, threads=3)
    assert a == b


def test_evaluate_needs_gold(small_setup):
    _, _, test, extractor, model, _ = small_setup
    docs = list(test.documents)
    docs[1] = dataclasses.replace(docs[1], gold_keyphrases=())
    with pytest.raises(CorpusValidationError):
        extract.evaluate(Corpus(tuple(docs), Split.TEST), model, extractor)


def test_extract_keyphrases(small_setup):
    _, _, test, extractor, model, _ = small_setup
    results = extract.extract_keyphrases(test.documents, model, extractor, n=3, threads=2)
    assert [doc.id for doc, _ in results] == [doc.id for doc in test.documents]
    for doc, top in results:
        assert top == extract.rank_candidates(doc, model, extractor)[:3]


def test_extractor_for_model(small_setup):
    resources, _, _, extractor, model, data = small_setup
    restored = extract.extractor_for_model(model, resources)
    assert restored.idf == extractor.idf
    assert restored.feature_names == model.feature_names
    bare = train_bagging(data, n_bags=1)
    with pytest.raises(ValueError):
        extract.extractor_for_model(bare, resources)
