import numpy as np
import pytest

from fourierpricer.errors import ValidationError
from fourierpricer.surrogates.ensembles import (
    TreeEnsembleConfig,
    cross_validate_depth,
    fit_ensemble,
    gbdt_fit,
    rf_fit,
)
from fourierpricer.surrogates.trees import tree_fit


@pytest.fixture
def data():
    rng = np.random.default_rng(0)
    X = rng.uniform(size = (120, 4))
    y = np.sin(3 * X[:, 0]) + X[:, 1] ** 2
    return X, y


def test_config_defaults():
    assert TreeEnsembleConfig(kind = 'rf').max_depth == 20
    assert TreeEnsembleConfig(kind = 'gbdt').max_depth == 15
    with pytest.raises(ValidationError):
        TreeEnsembleConfig(kind = 'xgboost')
    with pytest.raises(ValidationError):
        TreeEnsembleConfig(subsample = 0.0)
    with pytest.raises(ValidationError):
        TreeEnsembleConfig(n_trees = 0)


def test_single_boosting_round_is_mean_plus_residual_tree(data):
    X, y = data
    cfg = TreeEnsembleConfig(kind = 'gbdt', n_trees = 1, max_depth = 3, subsample = 1.0, shrinkage = 1.0)
    model = gbdt_fit(X, y, cfg)

    tree = tree_fit(X, y - y.mean(), max_depth = 3)
    assert model.base == pytest.approx(y.mean(), abs = 1e-15)
    assert np.allclose(model.predict(X), y.mean() + tree.predict(X), atol = 1e-12)


def test_single_forest_tree_is_a_plain_tree(data):
    X, y = data
    cfg = TreeEnsembleConfig(kind = 'rf', n_trees = 1, max_depth = 4, subsample = 1.0)
    tree = tree_fit(X, y, max_depth = 4)
    assert np.array_equal(rf_fit(X, y, cfg).predict(X), tree.predict(X))


def test_forest_of_identical_trees(data):
    X, y = data
    one = rf_fit(X, y, TreeEnsembleConfig(kind = 'rf', n_trees = 1, max_depth = 4, subsample = 1.0))
    many = rf_fit(X, y, TreeEnsembleConfig(kind = 'rf', n_trees = 3, max_depth = 4, subsample = 1.0))
    assert len(many.trees) == 3
    assert np.allclose(many.predict(X), one.predict(X), atol = 1e-15)


@pytest.mark.parametrize('kind', ['rf', 'gbdt'])
def test_fits_are_deterministic(data, kind):
    X, y = data
    cfg = TreeEnsembleConfig(kind = kind, n_trees = 8, max_depth = 4, seed = 5)
    first = fit_ensemble(X, y, cfg)
    second = fit_ensemble(X, y, cfg)
    assert np.array_equal(first.predict(X), second.predict(X))


def test_forest_does_not_depend_on_worker_count(data):
    X, y = data
    sequential = rf_fit(X, y, TreeEnsembleConfig(kind = 'rf', n_trees = 6, max_depth = 4, seed = 5))
    parallel = rf_fit(X, y, TreeEnsembleConfig(kind = 'rf', n_trees = 6, max_depth = 4, seed = 5, workers = 2))
    assert np.array_equal(sequential.predict(X), parallel.predict(X))


def test_boosting_lowers_training_error(data):
    X, y = data
    short = gbdt_fit(X, y, TreeEnsembleConfig(kind = 'gbdt', n_trees = 5, max_depth = 3, seed = 1))
    long = gbdt_fit(X, y, TreeEnsembleConfig(kind = 'gbdt', n_trees = 50, max_depth = 3, seed = 1))
    assert np.mean((long.predict(X) - y) ** 2) < np.mean((short.predict(X) - y) ** 2)


@pytest.mark.parametrize('shrinkage', [0.1, 1.0])
def test_full_sample_boosting_loss_never_increases(data, shrinkage):
    X, y = data
    model = gbdt_fit(X, y, TreeEnsembleConfig(kind = 'gbdt', n_trees = 30, max_depth = 3, subsample = 1.0, shrinkage = shrinkage))

    prediction = np.full(len(y), model.base)
    losses = [np.mean((y - prediction) ** 2)]
    for tree in model.trees:
        prediction = prediction + model.shrinkage * tree.predict(X)
        losses.append(np.mean((y - prediction) ** 2))
    assert all(later <= earlier + 1e-15 for earlier, later in zip(losses, losses[1:]))
    assert losses[-1] < losses[0]

def test_cross_validation_prefers_the_smallest_perfect_depth():
    x = np.arange(60) % 4
    X = x[:, None].astype(float)
    y = (x >= 2).astype(float)
    cfg = TreeEnsembleConfig(kind = 'rf', n_trees = 1, subsample = 1.0, seed = 3)

    best, losses = cross_validate_depth(X, y, 'rf', [3, 1, 2], folds = 3, cfg = cfg)
    assert best == 1
    assert sorted(losses) == [1, 2, 3]
    assert all(loss == 0.0 for loss in losses.values())


def test_cross_validation_validation(data):
    X, y = data
    with pytest.raises(ValidationError):
        cross_validate_depth(X, y, 'rf', [1, 2], folds = 1)
    with pytest.raises(ValidationError):
        cross_validate_depth(X, y, 'rf', [], folds = 3)
