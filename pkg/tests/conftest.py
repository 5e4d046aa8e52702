import random

import pytest

import gen_arpa_model
import gen_news_corpus
from newscloud.corpus import Split
from newscloud.preprocess import default_resources


@pytest.fixture(scope="session")
def resources():
    return default_resources()


@pytest.fixture()
def rng():
    random.seed(1)
    return random.Random(1)


@pytest.fixture(scope="session")
def planted_entries():
    """(train, test) corpus JSON entries: 100 + 10 documents, 10 planted keyphrases each"""
    return gen_news_corpus.planted_corpora(seed=1)


@pytest.fixture(scope="session")
def planted_train(planted_entries):
    return gen_news_corpus.load_entries(planted_entries[0], Split.TRAIN)


@pytest.fixture(scope="session")
def planted_test(planted_entries):
    return gen_news_corpus.load_entries(planted_entries[1], Split.TEST)


@pytest.fixture()
def small_train():
    """20 short training documents"""
    entries = gen_news_corpus.gen_documents(20, seed=3, n_keyphrases=4, n_words=80)
    return gen_news_corpus.load_entries(entries, Split.TRAIN)


@pytest.fixture()
def small_corpus_file(tmp_path):
    """A 20-document training corpus on disk"""
    entries = gen_news_corpus.gen_documents(20, seed=3, n_keyphrases=4, n_words=80)
    path = tmp_path / "train.json"
    path.write_text(gen_news_corpus.corpus_json(entries), encoding="utf-8")
    return path


@pytest.fixture()
def normalized_model():
    """(probs, backoffs) of a normalized trigram model over 6 words plus </s>"""
    return gen_arpa_model.gen_model(vocab_size=6, max_order=3, seed=1)


@pytest.fixture()
def arpa_path(tmp_path, normalized_model):
    return gen_arpa_model.write_arpa(tmp_path / "small.arpa", *normalized_model)
