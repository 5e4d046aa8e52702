"""Tests for tokenization, stemming and the language profiles"""

import numpy as np
import pytest

from newscloud import preprocess
from newscloud.errors import ResourceError
from newscloud.preprocess import PosTag


def test_tokenize_surfaces_and_offsets(resources):
    text = "O Presidente falou. Depois, a ministra!"
    tokens = preprocess.tokenize(text, resources)
    assert [t.surface for t in tokens] == ["O", "Presidente", "falou", "Depois", "a", "ministra"]
    for t in tokens:
        assert text[t.char_offset : t.char_offset + len(t.surface)] == t.surface


def test_tokenize_sentence_boundaries(resources):
    tokens = preprocess.tokenize("O Presidente falou. Depois, a ministra!", resources)
    assert [t.sentence_boundary_after for t in tokens] == [False, False, True, False, False, True]
    assert [t.sentence_start for t in tokens] == [True, False, False, True, False, False]


def test_tokenize_newline_is_boundary(resources):
    tokens = preprocess.tokenize("greve geral\nsindicato", resources)
    assert tokens[1].sentence_boundary_after
    assert tokens[2].sentence_start


def test_tokenize_keeps_inner_punctuation(resources):
    tokens = preprocess.tokenize("(pré-aviso) d'água 3,5%", resources)
    assert [t.surface for t in tokens] == ["pré-aviso", "d'água", "3,5"]


def test_tokenize_lone_punctuation_marks_previous(resources):
    tokens = preprocess.tokenize("greve geral . sindicato", resources)
    assert [t.surface for t in tokens] == ["greve", "geral", "sindicato"]
    assert tokens[1].sentence_boundary_after


def test_stopwords_case_insensitive(resources):
    tokens = preprocess.tokenize("De Lisboa para o Porto", resources)
    assert [t.is_stopword for t in tokens] == [True, False, True, True, False]
    assert preprocess.is_stopword("PARA", resources)


def test_stem_folds_case_and_plural(resources):
    assert preprocess.stem("Governo", resources) == preprocess.stem("governos", resources)


def test_stem_is_fixed_point(resources):
    for word in ("nacionalizações", "presidentes", "económicas", "ministra", "governamentais"):
        once = preprocess.stem(word, resources)
        assert preprocess.stem(once, resources) == once


def test_stem_is_fixed_point_over_corpus(resources, small_train, planted_train):
    corpora = (small_train, planted_train)
    words = {t.surface for corpus in corpora for doc in corpus.documents for t in doc.tokens}
    assert len(words) > 100
    for word in sorted(words):
        once = preprocess.stem(word, resources)
        assert preprocess.stem(once, resources) == once, word


def test_fold_case_is_one_to_one():
    assert preprocess.fold_case("Orçamento") == "orçamento"
    assert preprocess.fold_case("İSTANBUL") == "istanbul"
    assert preprocess.fold_case("ΟΔΟΣ") == "οδοσ"
    assert preprocess.fold_case("Straße") == "straße"


_ALPHABET = list(
    "abcXYZ019 \u00e1\u00e3\u00e7\u00c9\u00d5\u00c7\u0130\u0131\u00df\u017f\u03a3\u03c3\u03c2"
    "\u0414\u0436\u4e2d\u6587\U0001f600.,;:!?-'\"()\u00ab\u00bb\u2026"
    " \t\n\u00a0\u2003\u200b\u0301"
)


def test_tokenize_random_unicode(resources):
    rng = np.random.default_rng(7)
    for _ in range(300):
        text = "".join(rng.choice(_ALPHABET, size=int(rng.integers(0, 60))))
        tokens = preprocess.tokenize(text, resources)
        offsets = [t.char_offset for t in tokens]
        assert offsets == sorted(set(offsets))
        for t in tokens:
            assert t.surface
            assert text[t.char_offset :].startswith(t.surface)
            assert t.surface[0].isalnum() and t.surface[-1].isalnum()
            assert len(t.lower) == len(t.surface)
        if tokens:
            assert tokens[-1].sentence_boundary_after or not text.endswith(".")


def test_stem_leaves_numbers(resources):
    assert preprocess.stem("2010", resources) == "2010"
    assert preprocess.stem("A1", resources) != ""


def test_english_profile():
    en = preprocess.load_resources("en")
    assert en.stemmer.name == "porter"
    assert preprocess.stem("running", en) == "run"
    assert "the" in en.stopwords


def test_unknown_language():
    with pytest.raises(ValueError):
        preprocess.load_resources("xx")


def test_missing_stopword_file(tmp_path):
    with pytest.raises(ResourceError):
        preprocess.load_resources("pt", stopwords=str(tmp_path / "nope.txt"))


def test_empty_stopword_file(tmp_path):
    path = tmp_path / "empty.txt"
    path.write_text("# only a comment\n", encoding="utf-8")
    with pytest.raises(ValueError):
        preprocess.load_resources("pt", stopwords=str(path))


def test_replacement_lexicons(tmp_path):
    stop = tmp_path / "stop.txt"
    stop.write_text("xyz\n", encoding="utf-8")
    pos = tmp_path / "pos.tsv"
    pos.write_text("greve\tverb\n", encoding="utf-8")
    res = preprocess.load_resources("pt", stopwords=str(stop), pos_lexicon=str(pos))
    assert res.stopwords == frozenset({"xyz"})
    token = preprocess.tokenize("greve", res)[0]
    assert preprocess.tag_word(token, res) == PosTag.VERB


def test_bad_pos_tag(tmp_path):
    pos = tmp_path / "pos.tsv"
    pos.write_text("greve\tgerund\n", encoding="utf-8")
    with pytest.raises(ValueError):
        preprocess.load_resources("pt", pos_lexicon=str(pos))


@pytest.mark.parametrize(
    "word,tag",
    [
        ("governo", PosTag.NOUN),  # lexicon
        ("de", PosTag.OTHER),  # stopword
        ("2010", PosTag.OTHER),
        ("rapidamente", PosTag.ADV),
        ("privatização", PosTag.NOUN),
        ("perigoso", PosTag.ADJ),
        ("trabalhar", PosTag.VERB),
        ("Tuvrek", PosTag.NOUN),  # fallback
    ],
)
def test_tag_word(resources, word, tag):
    token = preprocess.tokenize(word, resources)[0]
    assert preprocess.tag_word(token, resources) == tag


def test_words_to_stems(resources):
    tokens = preprocess.tokenize("Primeiros  Ministros", resources)
    assert preprocess.words_to_stems(tokens) == " ".join(t.stem for t in tokens)
    assert "  " not in preprocess.words_to_stems(tokens)
