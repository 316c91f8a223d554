import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lipread import classify as clf
from lipread.errors import DimensionMismatch, EmptyClass, RankTooLarge


def test_identity_svd():
    p, V = clf.fit_svd(np.eye(3), 3)
    np.testing.assert_allclose(p.singular_values, 1.0)
    np.testing.assert_allclose(p.left_vectors * p.singular_values @ V.T, np.eye(3), atol=1e-14)


def test_rank_one():
    rng = np.random.default_rng(0)
    u, v = rng.normal(size=7), rng.normal(size=11)
    X = np.outer(u, v)
    p, V = clf.fit_svd(X, 1)
    rec = p.left_vectors * p.singular_values @ V.T
    assert np.linalg.norm(X - rec) <= 1e-10 * np.linalg.norm(X)


def test_truncation_energy():
    X = np.random.default_rng(1).normal(size=(50, 200))
    p, V = clf.fit_svd(X, 30)
    full, _ = clf.fit_svd(X, 50)
    rec = p.left_vectors * p.singular_values @ V.T
    tail = np.sum(full.singular_values[30:] ** 2)
    assert np.linalg.norm(X - rec) ** 2 == pytest.approx(tail, rel=1e-8)


def test_rank_errors():
    with pytest.raises(RankTooLarge):
        clf.fit_svd(np.ones((3, 4)), 4)
    with pytest.raises(RankTooLarge):
        clf.fit_svd(np.ones((3, 4)), 2)  # numerical rank 1
    assert clf.numerical_rank(np.ones((3, 4))) == 1


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 30), st.integers(2, 60), st.integers(0, 2 ** 31), st.booleans())
def test_svd_properties(D, N, seed, center):
    X = np.random.default_rng(seed).normal(size=(D, N))
    r = max(1, min(D, N) - 1 - int(center))
    p, V = clf.fit_svd(X, r, center=center)
    U = p.left_vectors
    assert np.max(np.abs(U.T @ U - np.eye(r))) <= 1e-8
    assert np.all(np.diff(p.singular_values) <= 0) and np.all(p.singular_values > 0)
    assert np.max(np.abs(clf.project(p, X) - V)) <= 1e-8


def test_project_examples():
    X = np.random.default_rng(2).normal(size=(8, 20))
    p, V = clf.fit_svd(X, 4)
    np.testing.assert_allclose(clf.project(p, X[:, 5]), V[5], atol=1e-8)
    np.testing.assert_array_equal(clf.project(p, np.zeros(8)), np.zeros(4))
    e1 = clf.project(p, p.left_vectors[:, 0] * p.singular_values[0])
    np.testing.assert_allclose(e1, np.eye(4)[0], atol=1e-12)
    with pytest.raises(DimensionMismatch):
        clf.project(p, np.zeros(9))


def test_projection_dict_round_trip():
    p, _ = clf.fit_svd(np.random.default_rng(3).normal(size=(6, 9)), 3, center=True)
    q = clf.SvdProjection.from_dict(p.to_dict())
    np.testing.assert_array_equal(q.left_vectors, p.left_vectors)
    np.testing.assert_array_equal(q.mean, p.mean)


@pytest.mark.parametrize("n, frac, n_train", [(4, 0.75, 3), (1000, 0.75, 750), (10, 0.25, 3), (2, 0.75, 2)])
def test_split_sizes(n, frac, n_train):
    tr, te = clf.split(n, frac, seed=9)
    assert len(tr) == n_train and len(te) == n - n_train


@given(st.integers(1, 300), st.floats(0.01, 0.99), st.integers(0, 2 ** 31))
def test_split_partition(n, frac, seed):
    tr, te = clf.split(n, frac, seed)
    assert sorted(np.concatenate([tr, te]).tolist()) == list(range(n))
    a, b = clf.split(n, frac, seed)
    assert np.array_equal(a, tr) and np.array_equal(b, te)


def test_split_fraction_bounds():
    with pytest.raises(ValueError):
        clf.split(10, 1.0)


def test_nb_two_gaussians():
    rng = np.random.default_rng(4)
    x = np.concatenate([rng.normal(-5, 1, 200), rng.normal(5, 1, 200)])[:, None]
    y = np.r_[np.ones(200, int), np.full(200, 2)]
    tr, te = clf.split(400, 0.75, 0)
    m = clf.nb_train(x[tr], y[tr])
    assert clf.evaluate_classifier(m.predict, x, y, (tr, te)) >= 0.99
    assert abs(m.priors.sum() - 1) <= 1e-12


def test_nb_single_point_per_class():
    x = np.array([[0.0, 1.0], [3.0, -2.0], [7.0, 7.0]])
    m = clf.nb_train(x, [3, 1, 2])
    assert [clf.nb_predict(m, row) for row in x] == [3, 1, 2]
    assert np.all(m.variances >= m.var_floor)


def test_nb_midpoint_tie():
    x = np.array([[-1.0], [-3.0], [1.0], [3.0]])
    m = clf.nb_train(x, [2, 2, 5, 5])
    assert clf.nb_predict(m, np.array([0.0])) == 2


def test_nb_errors():
    with pytest.raises(EmptyClass):
        clf.nb_train(np.zeros((3, 2)), [1, 1, 2], classes=[1, 2, 3])
    m = clf.nb_train(np.random.default_rng(0).normal(size=(6, 2)), [1, 2] * 3)
    with pytest.raises(DimensionMismatch):
        m.predict(np.zeros((1, 3)))


def test_knn_examples():
    pts = np.array([[0.0], [1.0], [1.1], [5.0]])
    m1 = clf.KnnModel(pts, [4, 1, 1, 2], k=1)
    assert clf.knn_predict(m1, np.array([5.0])) == 2
    m3 = clf.KnnModel(pts, [1, 1, 2, 2], k=3)
    assert clf.knn_predict(m3, np.array([0.4])) == 1
    m2 = clf.KnnModel(np.array([[-1.0], [1.0]]), [2, 1], k=2)
    assert clf.knn_predict(m2, np.array([0.0])) == 1


def test_knn_distance_tie_goes_to_lower_index():
    m = clf.KnnModel(np.array([[1.0], [-1.0]]), [7, 3], k=1)
    assert clf.knn_predict(m, np.array([0.0])) == 7


def test_knn_errors():
    with pytest.raises(ValueError):
        clf.KnnModel(np.zeros((2, 1)), [1, 2], k=3)
    with pytest.raises(DimensionMismatch):
        clf.KnnModel(np.zeros((2, 1)), [1, 2]).predict(np.zeros((1, 2)))


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 40), st.integers(1, 5), st.integers(0, 2 ** 31))
def test_knn_training_accuracy(n, dim, seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, dim))
    y = rng.integers(1, 5, n)
    m = clf.KnnModel(x, y, 1)
    assert np.array_equal(m.predict(x), y)


@settings(max_examples=30, deadline=None)
@given(st.integers(4, 40), st.integers(0, 2 ** 31))
def test_permutation_invariance(n, seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, 3))
    y = np.r_[[1, 2], rng.integers(1, 4, n - 2)]
    q = rng.normal(size=(15, 3))
    perm = rng.permutation(n)
    for k in (1, 3):
        k = min(k, n)
        assert np.array_equal(clf.KnnModel(x, y, k).predict(q), clf.KnnModel(x[perm], y[perm], k).predict(q))
    a, b = clf.nb_train(x, y), clf.nb_train(x[perm], y[perm])
    np.testing.assert_allclose(a.log_posterior(q), b.log_posterior(q), rtol=1e-10)


def test_evaluate_classifier_trivial():
    y = np.array([1, 2, 3, 4] * 25)
    split = clf.split(100, 0.5, 0)
    assert clf.evaluate_classifier(lambda c: y[split[1]], np.zeros((100, 1)), y, split) == 1.0
    acc = clf.evaluate_classifier(lambda c: np.ones(len(c), int), np.zeros((100, 1)), y, split)
    assert abs(acc - 0.25) < 0.15


def test_frame_classifier_round_trip(tmp_path):
    rng = np.random.default_rng(6)
    X = rng.normal(size=(10, 40))
    p, V = clf.fit_svd(X, 5)
    y = rng.integers(1, 4, 40)
    for model in (clf.KnnModel(V, y, 1), clf.nb_train(V, y)):
        fc = clf.FrameClassifier(p, model, "phoneme")
        fc.save(tmp_path / "m.json")
        back = clf.FrameClassifier.load(tmp_path / "m.json")
        assert back.mode == "phoneme"
        np.testing.assert_array_equal(back.predict_columns(X), fc.predict_columns(X))


def test_feature_matrix_validation():
    with pytest.raises(ValueError):
        clf.FeatureMatrix(np.array([[np.nan]]), [("v", 1)])
    with pytest.raises(DimensionMismatch):
        clf.FeatureMatrix(np.zeros((2, 2)), [("v", 1)])
