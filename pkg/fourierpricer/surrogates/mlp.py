"""Fully connected network with leaky rectifiers, trained by mini-batch gradient descent."""
import math
import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from fourierpricer.errors import DivergenceError, ValidationError

LOGGER = logging.getLogger(__name__)


@dataclass(frozen = True)
class MlpArchitecture:
    widths: tuple[int, ...] = (10, 128, 128, 128, 128, 128, 1)
    leaky_slope: float = 0.01

    def __post_init__(self):
        if len(self.widths) < 2 or any(int(w) != w or w < 1 for w in self.widths):
            raise ValidationError(f"Layer widths must be positive integers, got {self.widths}")
        if not self.leaky_slope > 0:
            raise ValidationError(f"Leaky slope must be positive, got {self.leaky_slope}")
        object.__setattr__(self, 'widths', tuple(int(w) for w in self.widths))


@dataclass(frozen = True)
class TrainConfig:
    batch_size: int = 256
    epochs: int = 3000
    learning_rate: float = 3e-6
    lr_decay: float = 0.1
    decay_every: int = 500
    seed: int = 20250829
    log_every: int = 100

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValidationError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.learning_rate > 0:
            raise ValidationError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.epochs < 1 or self.decay_every < 1:
            raise ValidationError("epochs and decay_every must be >= 1")

    def rate_at(self, epoch: int) -> float:
        return self.learning_rate * self.lr_decay ** (epoch // self.decay_every)


class Mlp:
    def __init__(self, architecture: MlpArchitecture, weights: list[np.ndarray], biases: list[np.ndarray]):
        """
        Args:
            architecture: layer widths and leaky slope
            weights: matrices of shape (fan_in, fan_out), one per affine layer
            biases: vectors of length fan_out
        """
        shapes = list(zip(architecture.widths[:-1], architecture.widths[1:]))
        if len(weights) != len(shapes) or len(biases) != len(shapes):
            raise ValidationError(f"Expected {len(shapes)} layers, got {len(weights)} weights")
        for (fan_in, fan_out), w, b in zip(shapes, weights, biases):
            if w.shape != (fan_in, fan_out) or b.shape != (fan_out,):
                raise ValidationError(f"Layer shape mismatch: {w.shape}, {b.shape} for {fan_in}->{fan_out}")
        self.architecture = architecture
        self.weights = [np.asarray(w, dtype = float) for w in weights]
        self.biases = [np.asarray(b, dtype = float) for b in biases]

    @classmethod
    def initialize(cls, architecture: MlpArchitecture, rng: np.random.Generator) -> 'Mlp':
        """He-uniform weights, zero biases"""
        weights, biases = [], []
        for fan_in, fan_out in zip(architecture.widths[:-1], architecture.widths[1:]):
            limit = math.sqrt(6.0 / fan_in)
            weights.append(rng.uniform(-limit, limit, size = (fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(architecture, weights, biases)

    def _activate(self, h: np.ndarray) -> np.ndarray:
        return np.where(h > 0, h, self.architecture.leaky_slope * h)

    def forward(self, X: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray]]:
        """pre-activations and layer inputs for backprop"""
        inputs, pre = [], []
        a = X
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            inputs.append(a)
            h = a @ w + b
            pre.append(h)
            a = h if i == last else self._activate(h)
        return inputs, pre

    def predict_raw(self, X: np.ndarray) -> np.ndarray:
        _, pre = self.forward(np.atleast_2d(np.asarray(X, dtype = float)))
        return pre[-1][:, 0]

    def loss_and_gradients(self, X: np.ndarray, y: np.ndarray) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
        """mean squared error and its gradients"""
        inputs, pre = self.forward(X)
        residual = pre[-1][:, 0] - y
        loss = float(np.mean(residual ** 2))

        grad_w = [None] * len(self.weights)
        grad_b = [None] * len(self.weights)
        delta = (2.0 / len(y)) * residual[:, None]
        for i in reversed(range(len(self.weights))):
            grad_w[i] = inputs[i].T @ delta
            grad_b[i] = np.sum(delta, axis = 0)
            if i > 0:
                delta = delta @ self.weights[i].T
                delta = delta * np.where(pre[i - 1] > 0, 1.0, self.architecture.leaky_slope)
        return loss, grad_w, grad_b


def mlp_forward(model: Mlp, features) -> np.ndarray | float:
    """unclamped network output for one feature vector or a matrix of them"""
    X = np.asarray(features, dtype = float)
    out = model.predict_raw(X)
    return float(out[0]) if X.ndim == 1 else out


def mlp_train(
    X: np.ndarray,
    y: np.ndarray,
    architecture: MlpArchitecture,
    cfg: TrainConfig,
    on_epoch: Optional[Callable[[int, float], None]] = None
) -> tuple[Mlp, list[float]]:
    """
    Fit by plain mini-batch gradient descent with step decay.

    Args:
        X: feature matrix (n, input width)
        y: targets (n,)
        architecture: network shape
        cfg: batch size, epochs and learning-rate schedule
        on_epoch: optional callback receiving (epoch, mean loss)

    Returns:
        trained network and the per-epoch mean of batch losses
    """
    X = np.asarray(X, dtype = float)
    y = np.asarray(y, dtype = float)
    if len(y) == 0:
        raise ValidationError("Training data is empty")
    if X.shape != (len(y), architecture.widths[0]):
        raise ValidationError(f"Expected features of shape ({len(y)}, {architecture.widths[0]}), got {X.shape}")

    rng = np.random.default_rng(cfg.seed)
    model = Mlp.initialize(architecture, rng)
    trace = []

    for epoch in range(cfg.epochs):
        rate = cfg.rate_at(epoch)
        order = rng.permutation(len(y))
        losses = []
        for start in range(0, len(y), cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            loss, grad_w, grad_b = model.loss_and_gradients(X[batch], y[batch])
            if not math.isfinite(loss):
                raise DivergenceError(
                    f"Loss diverged at epoch {epoch} with learning rate {rate:.3g}",
                    epoch = epoch, learning_rate = rate
                )
            for w, b, gw, gb in zip(model.weights, model.biases, grad_w, grad_b):
                w -= rate * gw
                b -= rate * gb
            losses.append(loss)

        mean_loss = float(np.mean(losses))
        trace.append(mean_loss)
        if on_epoch:
            on_epoch(epoch, mean_loss)
        if cfg.log_every and (epoch + 1) % cfg.log_every == 0:
            LOGGER.info(f"Epoch {epoch + 1}/{cfg.epochs}: mean loss {mean_loss:.6g}, lr {rate:.3g}")

    return model, trace
