import numpy as np
import pytest
from sklearn.svm import SVC

from cbmorph.errors import DegenerateLabelsError
from cbmorph.regions import ParameterSpace
from cbmorph.svm import (MulticlassSvm, SvmModel, predict, predict_region, rbf_kernel, train_binary,
                         train_multiclass)


def _disc_data(seed=0, n=120, noise=0.08):
    rng = np.random.default_rng(seed)
    X = rng.uniform(0, 1, (n, 2))
    y = np.where(((X - 0.5) ** 2).sum(1) < 0.09, 1.0, -1.0)
    y[rng.random(n) < noise] *= -1
    return X, y


def test_rbf_kernel_values():
    K = rbf_kernel([[0.0, 0.0]], [[1.0, 0.0], [0.0, 0.0]], 0.5)
    np.testing.assert_allclose(K, [[np.exp(-0.5), 1.0]])


def test_matches_reference_solver():
    X, y = _disc_data()
    m = train_binary(X, y, C=10.0)
    ref = SVC(C=10.0, gamma=0.5, tol=1e-3).fit(X, y)
    G = np.random.default_rng(1).uniform(0, 1, (2000, 2))
    a, b = m.decision(G), ref.decision_function(G)
    assert np.max(np.abs(a - b)) < 2e-2
    assert np.mean(np.sign(a) == np.sign(b)) > 0.995


def test_kkt_conditions_hold():
    X, y = _disc_data(2)
    C, tol = 10.0, 1e-3
    m = train_binary(X, y, C=C, tol=tol)
    f = m.decision(X)
    alpha = np.zeros(len(X))
    for sv, a in zip(m.support_vectors, m.alphas):
        alpha[np.flatnonzero(np.all(X == sv, axis=1))[0]] = abs(a)
    yf = y * f
    assert np.all(yf[alpha < 1e-9] >= 1 - 10 * tol)
    assert np.all(yf[alpha > C - 1e-9] <= 1 + 10 * tol)
    free = (alpha > 1e-9) & (alpha < C - 1e-9)
    np.testing.assert_allclose(yf[free], 1.0, atol=10 * tol)
    assert abs(np.sum(m.alphas)) < 1e-9


def test_separable_training_accuracy():
    X = np.array([[0.1, 0.1], [0.2, 0.15], [0.15, 0.3], [0.8, 0.9], [0.9, 0.7], [0.75, 0.8]])
    y = np.array([1, 1, 1, -1, -1, -1])
    m = train_binary(X, y)
    assert [predict(m, x)[0] for x in X] == y.tolist()


def test_degenerate_labels():
    with pytest.raises(DegenerateLabelsError):
        train_binary(np.zeros((3, 1)) + np.arange(3)[:, None], np.ones(3))
    with pytest.raises(ValueError):
        train_binary(np.zeros((2, 1)), [0, 1])


def test_deterministic_and_serializable():
    X, y = _disc_data(3)
    sp = ParameterSpace([[0, 1], [0, 1]])
    m1, m2 = train_binary(X, y, space=sp), train_binary(X, y, space=sp)
    np.testing.assert_array_equal(m1.alphas, m2.alphas)
    m3 = SvmModel.from_dict(m1.to_dict())
    G = np.random.default_rng(0).uniform(0, 1, (50, 2))
    np.testing.assert_array_equal(m1.decision(G), m3.decision(G))
    assert m3.space == sp


def test_multiclass_routing_of_blobs():
    rng = np.random.default_rng(4)
    centers = {1: (0.2, 0.2), 2: (0.8, 0.2), 3: (0.5, 0.85)}
    X = np.vstack([rng.normal(c, 0.06, (30, 2)) for c in centers.values()])
    tags = np.repeat([1, 2, 3], 30)
    sp = ParameterSpace([[0, 1], [0, 1]])
    router = train_multiclass(X, tags, space=sp)
    assert len(router.models) == 3
    ids, low = router.route_normalized(np.array(list(centers.values())))
    assert ids.tolist() == [1, 2, 3] and not low.any()
    assert predict_region(router, [0.2, 0.2]) == 1
    router2 = MulticlassSvm.from_dict(router.to_dict())
    G = rng.uniform(0, 1, (100, 2))
    np.testing.assert_array_equal(router.route(G)[0], router2.route(G)[0])


def test_multiclass_confident_away_from_boundary():
    X = np.array([[0.1], [0.2], [0.3], [0.7], [0.8], [0.9]])
    router = train_multiclass(X, [1, 1, 1, 2, 2, 2])
    ids, low = router.route_normalized(np.array([[0.05], [0.5], [0.95]]))
    assert ids[0] == 1 and ids[2] == 2
    assert not low[0] and not low[2]


def test_single_region_router():
    router = train_multiclass(np.array([[0.1], [0.5]]), [4, 4])
    ids, low = router.route_normalized(np.array([[0.3]]))
    assert ids.tolist() == [4] and not low.any()
