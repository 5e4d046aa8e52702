"""Tests for bagging and the model container"""

import numpy as np
import pytest
from sklearn.metrics import roc_auc_score

from newscloud import ensemble, tree
from newscloud.ensemble import BaggedTreeModel, TrainingInstance
from newscloud.errors import ModelFormatError, ModelVersionError, ResourceError, SchemaMismatchError
from newscloud.features import FEATURE_NAMES, FeatureVector, IdfTable, PosPattern, parse_feature_set
from newscloud.tree import Algorithm

BASE = parse_feature_set("base")


def make_instances(n, seed, noise=0.1):
    """Positives have high tfidf and appear early; labels flipped with probability 'noise'"""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        tfidf = float(rng.uniform(0, 1))
        first = float(rng.uniform(0, 1))
        label = (tfidf - 0.5 * first > 0.25) ^ bool(rng.uniform() < noise)
        fv = FeatureVector(
            tf=int(rng.integers(1, 6)),
            idf=float(rng.uniform(0, 2)),
            tfidf=tfidf,
            first_pos=first,
            last_pos=min(1.0, first + 0.1),
            spread=0.1,
            n_words=int(rng.integers(1, 4)),
            f4_pos_pattern=PosPattern(int(rng.integers(0, 4))),
        )
        out.append(TrainingInstance(fv, label, f"d{i % 20}"))
    return out


@pytest.fixture(scope="module")
def instances():
    return make_instances(600, seed=1)


def test_single_identity_bag_is_plain_tree(instances):
    model = ensemble.train_bagging(
        instances, Algorithm.CART, n_bags=1, sampler=ensemble.identity_sample
    )
    X, y = ensemble.instances_to_arrays(instances)
    plain = tree.train_tree(X, y, Algorithm.CART, categorical=frozenset({11}))
    assert FEATURE_NAMES[11] == "f4_pos_pattern"
    assert model.trees[0] == plain


@pytest.mark.parametrize("algorithm", [Algorithm.C45, Algorithm.CART])
def test_deterministic_bytes(instances, algorithm):
    a = ensemble.train_bagging(instances, algorithm, n_bags=4, seed=3)
    b = ensemble.train_bagging(instances, algorithm, n_bags=4, seed=3, threads=4)
    assert ensemble.dumps_model(a) == ensemble.dumps_model(b)
    assert ensemble.model_digest(a) == ensemble.model_digest(b)


def test_seed_changes_model(instances):
    a = ensemble.train_bagging(instances, n_bags=3, seed=1)
    b = ensemble.train_bagging(instances, n_bags=3, seed=2)
    assert ensemble.dumps_model(a) != ensemble.dumps_model(b)


def test_bags_differ(instances):
    model = ensemble.train_bagging(instances, n_bags=3, seed=0)
    roots = [t.root for t in model.trees]
    assert roots[0] != roots[1] or roots[1] != roots[2]


def test_prediction_is_mean_of_trees(instances):
    model = ensemble.train_bagging(instances, n_bags=5, seed=4)
    fv = instances[0].features
    row = fv.to_array(model.feature_names)
    expected = np.mean([t.predict_proba(row) for t in model.trees])
    assert model.predict_proba(fv) == pytest.approx(expected)
    assert ensemble.predict_proba(model, row) == pytest.approx(expected)
    assert 0 < model.predict_proba(fv) < 1


@pytest.mark.parametrize("algorithm", [Algorithm.C45, Algorithm.CART])
def test_ranking_quality(instances, algorithm):
    model = ensemble.train_bagging(instances, algorithm, n_bags=10, seed=0)
    held_out = make_instances(400, seed=99, noise=0.0)
    X, y = ensemble.instances_to_arrays(held_out)
    assert roc_auc_score(y, model.predict_many(X)) > 0.85


def test_probability_follows_signal(instances):
    model = ensemble.train_bagging(instances, n_bags=10, seed=0)
    low = FeatureVector(
        tf=2, idf=1.0, tfidf=0.05, first_pos=0.9, last_pos=1.0, spread=0.1, n_words=1
    )
    high = FeatureVector(
        tf=2, idf=1.0, tfidf=0.95, first_pos=0.05, last_pos=0.15, spread=0.1, n_words=1
    )
    assert model.predict_proba(high) > 0.5 > model.predict_proba(low)


def test_negative_ratio(instances):
    model = ensemble.train_bagging(instances, n_bags=4, seed=5, negative_ratio=0.5)
    for t in model.trees:
        negatives = t.root.total - t.root.pos
        assert negatives == max(1, round(0.5 * t.root.pos))


def test_base_feature_subset(instances):
    model = ensemble.train_bagging(instances, n_bags=2, feature_names=BASE)
    assert model.feature_names == BASE
    X, _ = ensemble.instances_to_arrays(instances, BASE)
    assert model.predict_many(X).shape == (len(instances),)
    assert model.predict_proba(instances[3].features) == pytest.approx(
        model.predict_many(X[3:4])[0]
    )


def test_schema_mismatch(instances):
    model = ensemble.train_bagging(instances, n_bags=2, feature_names=BASE)
    model.check_schema(BASE)
    with pytest.raises(SchemaMismatchError):
        model.check_schema(FEATURE_NAMES)
    with pytest.raises(SchemaMismatchError):
        model.predict_proba(np.zeros(len(FEATURE_NAMES)))
    with pytest.raises(SchemaMismatchError):
        model.predict_many(np.zeros((2, len(FEATURE_NAMES))))


@pytest.mark.parametrize(
    "kwargs",
    [{"n_bags": 0}, {"seed": -1}, {"seed": 2**64}, {"negative_ratio": 0.0}, {"algorithm": "id3"}],
)
def test_bad_arguments(instances, kwargs):
    with pytest.raises(ValueError):
        ensemble.train_bagging(instances, **kwargs)


def test_empty_training_data():
    with pytest.raises(ValueError):
        ensemble.train_bagging([])


def test_model_needs_consistent_trees(instances):
    X, y = ensemble.instances_to_arrays(instances[:50])
    c45 = tree.train_tree(X, y, Algorithm.C45)
    cart = tree.train_tree(X, y, Algorithm.CART)
    with pytest.raises(ValueError):
        BaggedTreeModel((), 0, Algorithm.CART)
    with pytest.raises(ValueError):
        BaggedTreeModel((c45, cart), 0, Algorithm.CART)


# Container ################################################################################


@pytest.fixture(scope="module")
def model(instances):
    idf = IdfTable(3, {"grev": 2, "govern": 1, "lisbo": 3})
    return ensemble.train_bagging(instances, Algorithm.C45, n_bags=3, seed=11, idf=idf)


def test_save_load(tmp_path, model):
    path = tmp_path / "model.ncbt"
    ensemble.save_model(model, path)
    loaded = ensemble.load_model(path)
    assert loaded.trees == model.trees
    assert (loaded.seed, loaded.algorithm) == (11, Algorithm.C45)
    assert loaded.feature_names == FEATURE_NAMES
    assert loaded.idf.doc_count == 3
    assert dict(loaded.idf.doc_freq) == {"grev": 2, "govern": 1, "lisbo": 3}
    assert ensemble.dumps_model(loaded) == path.read_bytes()


def test_save_without_idf(instances):
    model = ensemble.train_bagging(instances, n_bags=1)
    assert ensemble.loads_model(ensemble.dumps_model(model)).idf is None


def test_missing_model(tmp_path):
    with pytest.raises(ResourceError):
        ensemble.load_model(tmp_path / "none.ncbt")


def test_corrupt_magic(model):
    data = ensemble.dumps_model(model)
    with pytest.raises(ModelFormatError, match="magic"):
        ensemble.loads_model(b"NCLM" + data[4:])


def test_version_mismatch(model):
    data = ensemble.dumps_model(model)
    newer = data[:4] + (ensemble.FORMAT_VERSION + 1).to_bytes(2, "little") + data[6:]
    with pytest.raises(ModelVersionError):
        ensemble.loads_model(newer)
    # feature schema version lives after the algorithm byte
    schema = data[:7] + (99).to_bytes(2, "little") + data[9:]
    with pytest.raises(ModelVersionError, match="feature schema"):
        ensemble.loads_model(schema)


@pytest.mark.parametrize("cut", [3, 30, 200, -1])
def test_truncated(model, cut):
    data = ensemble.dumps_model(model)
    with pytest.raises(ModelFormatError):
        ensemble.loads_model(data[:cut])


def test_trailing_bytes(model):
    with pytest.raises(ModelFormatError, match="trailing"):
        ensemble.loads_model(ensemble.dumps_model(model) + b"\0")


def test_tampered_schema_hash(model):
    data = bytearray(ensemble.dumps_model(model))
    data[9] ^= 0xFF  # first byte of the schema hash
    with pytest.raises(ModelFormatError, match="hash"):
        ensemble.loads_model(bytes(data))


def test_version_error_is_format_error():
    assert issubclass(ModelVersionError, ModelFormatError)
