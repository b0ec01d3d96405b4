"""Random forests (bagging) and gradient-boosted trees (boosting)."""
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from sklearn.model_selection import KFold

from fourierpricer.errors import ValidationError
from fourierpricer.surrogates.trees import QuantileBinner, RegressionTree, tree_fit

LOGGER = logging.getLogger(__name__)

DEFAULT_DEPTH = {'rf': 20, 'gbdt': 15}


@dataclass(frozen = True)
class TreeEnsembleConfig:
    kind: str = 'rf'
    n_trees: int = 100
    max_depth: Optional[int] = None
    subsample: float = 0.7
    shrinkage: float = 0.1
    bins: int = 256
    min_leaf: int = 1
    seed: int = 20250829
    workers: int = 1

    def __post_init__(self):
        if self.kind not in DEFAULT_DEPTH:
            raise ValidationError(f"Ensemble kind must be rf or gbdt, got {self.kind}")
        if self.max_depth is None:
            object.__setattr__(self, 'max_depth', DEFAULT_DEPTH[self.kind])
        if self.max_depth < 1:
            raise ValidationError(f"max_depth must be >= 1, got {self.max_depth}")
        if not 0 < self.subsample <= 1:
            raise ValidationError(f"subsample must be in (0, 1], got {self.subsample}")
        if self.n_trees < 1:
            raise ValidationError(f"n_trees must be >= 1, got {self.n_trees}")


class TreeEnsemble:
    def __init__(self, kind: str, trees: list[RegressionTree], base: float = 0.0, shrinkage: float = 1.0):
        self.kind = kind
        self.trees = trees
        self.base = base
        self.shrinkage = shrinkage

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype = float))
        outputs = np.stack([tree.predict(X) for tree in self.trees])
        if self.kind == 'rf':
            return np.mean(outputs, axis = 0)
        return self.base + self.shrinkage * np.sum(outputs, axis = 0)


def _subsample(n: int, fraction: float, rng: np.random.Generator) -> np.ndarray:
    if fraction >= 1.0:
        return np.arange(n)
    size = max(1, int(round(fraction * n)))
    return np.sort(rng.choice(n, size = size, replace = False))


def _tree_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key = (index,)))


def _fit_forest_tree(args: tuple) -> RegressionTree:
    index, X, y, codes, binner, cfg = args
    rows = _subsample(len(y), cfg.subsample, _tree_rng(cfg.seed, index))
    return tree_fit(X[rows], y[rows], cfg.max_depth, cfg.bins, cfg.min_leaf, binner = binner, codes = codes[rows])


def rf_fit(X: np.ndarray, y: np.ndarray, cfg: TreeEnsembleConfig) -> TreeEnsemble:
    """average of trees, each grown on a subsample drawn without replacement"""
    X = np.asarray(X, dtype = float)
    y = np.asarray(y, dtype = float)
    binner = QuantileBinner(cfg.bins).fit(X)
    codes = binner.transform(X)

    tasks = [(index, X, y, codes, binner, cfg) for index in range(cfg.n_trees)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers = cfg.workers) as executor:
            trees = list(executor.map(_fit_forest_tree, tasks))
    else:
        trees = []
        for task in tasks:
            trees.append(_fit_forest_tree(task))
            if len(trees) % 10 == 0:
                LOGGER.info(f"Fitted {len(trees)}/{cfg.n_trees} forest trees")
    return TreeEnsemble('rf', trees)


def gbdt_fit(X: np.ndarray, y: np.ndarray, cfg: TreeEnsembleConfig) -> TreeEnsemble:
    """mean start plus shrunken trees fitted to residuals"""
    X = np.asarray(X, dtype = float)
    y = np.asarray(y, dtype = float)
    binner = QuantileBinner(cfg.bins).fit(X)
    codes = binner.transform(X)

    base = float(np.mean(y))
    prediction = np.full(len(y), base)
    trees = []
    for index in range(cfg.n_trees):
        rows = _subsample(len(y), cfg.subsample, _tree_rng(cfg.seed, index))
        residual = y - prediction
        tree = tree_fit(X[rows], residual[rows], cfg.max_depth, cfg.bins, cfg.min_leaf, binner = binner, codes = codes[rows])
        prediction += cfg.shrinkage * tree.predict(X)
        trees.append(tree)
        if (index + 1) % 10 == 0:
            LOGGER.info(f"Boosting round {index + 1}/{cfg.n_trees}: train mse {np.mean((y - prediction) ** 2):.6g}")
    return TreeEnsemble('gbdt', trees, base = base, shrinkage = cfg.shrinkage)


def fit_ensemble(X: np.ndarray, y: np.ndarray, cfg: TreeEnsembleConfig) -> TreeEnsemble:
    return rf_fit(X, y, cfg) if cfg.kind == 'rf' else gbdt_fit(X, y, cfg)


def cross_validate_depth(
    X: np.ndarray,
    y: np.ndarray,
    kind: str,
    depths: Sequence[int],
    folds: int = 3,
    cfg: Optional[TreeEnsembleConfig] = None
) -> tuple[int, dict[int, float]]:
    """
    K-fold validation MSE per maximum depth.

    Returns:
        best depth (smallest among ties) and mean validation loss per depth
    """
    if folds < 2:
        raise ValidationError(f"Cross-validation needs folds >= 2, got {folds}")
    if not depths:
        raise ValidationError("Depth grid is empty")
    cfg = cfg or TreeEnsembleConfig(kind = kind)
    X = np.asarray(X, dtype = float)
    y = np.asarray(y, dtype = float)
    splitter = KFold(n_splits = folds, shuffle = True, random_state = cfg.seed % (2 ** 32))

    losses: dict[int, float] = {}
    for depth in sorted(set(int(d) for d in depths)):
        depth_cfg = TreeEnsembleConfig(
            kind = kind, n_trees = cfg.n_trees, max_depth = depth, subsample = cfg.subsample,
            shrinkage = cfg.shrinkage, bins = cfg.bins, min_leaf = cfg.min_leaf, seed = cfg.seed,
            workers = cfg.workers
        )
        fold_losses = []
        for train, valid in splitter.split(X):
            model = fit_ensemble(X[train], y[train], depth_cfg)
            fold_losses.append(float(np.mean((model.predict(X[valid]) - y[valid]) ** 2)))
        losses[depth] = float(np.mean(fold_losses))
        LOGGER.info(f"{kind} depth {depth}: cv mse {losses[depth]:.6g}")

    best = min(losses, key = lambda d: (losses[d], d))
    return best, losses
