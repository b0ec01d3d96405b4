"""Trained surrogate container: prediction, validation and npz serialization."""
import json
import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Union

import numpy as np

from fourierpricer.dataset import FEATURE_NAMES, rescale_price
from fourierpricer.errors import ValidationError
from fourierpricer.surrogates.ensembles import TreeEnsemble
from fourierpricer.surrogates.mlp import Mlp, MlpArchitecture
from fourierpricer.surrogates.trees import RegressionTree

LOGGER = logging.getLogger(__name__)

ALGORITHMS = ('nn', 'rf', 'gbdt')


def data_hash(X: np.ndarray, y: np.ndarray) -> str:
    digest = hashlib.sha256()
    digest.update(np.ascontiguousarray(X, dtype = float).tobytes())
    digest.update(np.ascontiguousarray(y, dtype = float).tobytes())
    return digest.hexdigest()


def check_features(features) -> np.ndarray:
    """(n, 10) finite matrix with a binary op_type column"""
    X = np.asarray(features, dtype = float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != len(FEATURE_NAMES):
        raise ValidationError(f"Features must have {len(FEATURE_NAMES)} columns, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValidationError("Features contain non-finite values")
    if not np.all(np.isin(X[:, 0], (0.0, 1.0))):
        raise ValidationError("op_type column must be 0 or 1")
    return X


@dataclass
class SurrogateModel:
    algo: str
    estimator: Union[Mlp, TreeEnsemble]
    metadata: dict[str, Any] = field(default_factory = dict)

    def __post_init__(self):
        if self.algo not in ALGORITHMS:
            raise ValidationError(f"Unknown algorithm '{self.algo}', expected one of {ALGORITHMS}")

    def predict(self, features) -> np.ndarray:
        """normalized prices clamped to [0, 1]"""
        X = check_features(features)
        if isinstance(self.estimator, Mlp):
            raw = self.estimator.predict_raw(X)
        else:
            raw = self.estimator.predict(X)
        return np.clip(raw, 0.0, 1.0)

    def predict_actual(self, features, s0) -> np.ndarray:
        X = check_features(features)
        return rescale_price(self.predict(X), np.asarray(s0, dtype = float), X[:, 0])


def save_model(model: SurrogateModel, path: str | Path) -> Path:
    """
    Write a self-describing npz container.

    Args:
        model: trained surrogate
        path: output file, '.npz' appended by numpy when missing

    Returns:
        path written
    """
    path = Path(path)
    if path.suffix != '.npz':
        path = path.with_suffix('.npz')
    path.parent.mkdir(parents = True, exist_ok = True)

    arrays: dict[str, np.ndarray] = {}
    metadata: dict = {'algo': model.algo}
    estimator = model.estimator
    if isinstance(estimator, Mlp):
        metadata['widths'] = list(estimator.architecture.widths)
        metadata['leaky_slope'] = estimator.architecture.leaky_slope
        for i, (w, b) in enumerate(zip(estimator.weights, estimator.biases)):
            arrays[f"w{i}"] = w
            arrays[f"b{i}"] = b
    else:
        metadata['base'] = estimator.base
        metadata['shrinkage'] = estimator.shrinkage
        arrays['tree_sizes'] = np.array([t.n_nodes for t in estimator.trees], dtype = np.int64)
        for name in ('feature', 'threshold', 'left', 'right', 'value'):
            arrays[name] = np.concatenate([getattr(t, name) for t in estimator.trees])

    metadata['user'] = model.metadata
    arrays['metadata'] = np.array(json.dumps(metadata))
    np.savez(path, **arrays)
    LOGGER.info(f"Saved {model.algo} model to {path}")
    return path


def load_model(path: str | Path) -> SurrogateModel:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"Model file not found: {path}")

    with np.load(path, allow_pickle = False) as data:
        metadata = json.loads(str(data['metadata']))
        algo = metadata.pop('algo')
        if algo == 'nn':
            architecture = MlpArchitecture(
                widths = tuple(metadata.pop('widths')), leaky_slope = metadata.pop('leaky_slope')
            )
            layers = len(architecture.widths) - 1
            estimator = Mlp(
                architecture,
                [data[f"w{i}"] for i in range(layers)],
                [data[f"b{i}"] for i in range(layers)]
            )
        else:
            columns = [data[name] for name in ('feature', 'threshold', 'left', 'right', 'value')]
            bounds = np.concatenate([[0], np.cumsum(data['tree_sizes'])])
            trees = [
                RegressionTree(*(column[start:stop] for column in columns))
                for start, stop in zip(bounds[:-1], bounds[1:])
            ]
            estimator = TreeEnsemble(algo, trees, base = metadata.pop('base'), shrinkage = metadata.pop('shrinkage'))

    return SurrogateModel(algo = algo, estimator = estimator, metadata = metadata.get('user', {}))
