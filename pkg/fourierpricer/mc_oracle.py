"""Monte Carlo benchmark prices and characteristic-function probes.

Paths are simulated in fixed-size batches. Batch b draws from the stream
SeedSequence(seed, spawn_key = (b,)), so estimates do not depend on how many
workers evaluate the batches.
"""
import math
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from fourierpricer.errors import UnsupportedModelError, ValidationError
from fourierpricer.levy_models import EVGP, GBM, Heston, MarketSpec, ModelSpec, compensator
from fourierpricer.offsets import OptionKind, OptionSpec

LOGGER = logging.getLogger(__name__)


@dataclass(frozen = True)
class McConfig:
    paths: int = 1_000_000
    steps_per_year: int = 512
    seed: int = 20250829
    batch_size: int = 100_000
    workers: int = 1

    def __post_init__(self):
        if self.paths < 1000:
            raise ValidationError(f"Monte Carlo needs at least 1000 paths, got {self.paths}")
        if self.steps_per_year < 1:
            raise ValidationError(f"steps_per_year must be positive, got {self.steps_per_year}")
        if self.batch_size < 1:
            raise ValidationError(f"batch_size must be positive, got {self.batch_size}")

    def batch_sizes(self) -> list[int]:
        full, rest = divmod(self.paths, self.batch_size)
        return [self.batch_size] * full + ([rest] if rest else [])


@dataclass(frozen = True)
class McResult:
    price: float
    std_error: float
    paths: int
    seed: int


@dataclass(frozen = True)
class CfProbe:
    value: complex
    std_error_re: float
    std_error_im: float
    paths: int
    seed: int


def heston_steps(T: float, steps_per_year: int) -> int:
    return max(1, math.ceil(steps_per_year * T))


def sample_log_returns(
    model: ModelSpec,
    market: MarketSpec,
    n: int,
    rng: np.random.Generator,
    steps_per_year: int = 512
) -> np.ndarray:
    """
    Draw X_T = ln(S_T / s0) - r*T.

    Args:
        model: stock price model
        market: maturity is used, spot and rate are not
        n: number of draws
        rng: numpy generator
        steps_per_year: Euler grid density (Heston only)

    Returns:
        array of n compensated log-returns
    """
    T = market.T
    if T == 0:
        return np.zeros(n)

    if isinstance(model, GBM):
        return -0.5 * model.sigma ** 2 * T + model.sigma * math.sqrt(T) * rng.standard_normal(n)

    if isinstance(model, EVGP):
        zeta = compensator(model)
        # Gamma subordinator with shape T/nu and scale nu
        clock = rng.gamma(shape = T / model.nu, scale = model.nu, size = n)
        return zeta * T + model.theta * clock + model.sigma * np.sqrt(clock) * rng.standard_normal(n)

    if isinstance(model, Heston):
        steps = heston_steps(T, steps_per_year)
        dt = T / steps
        x = np.zeros(n)
        v = np.full(n, model.v0)
        mix = math.sqrt(1.0 - model.rho ** 2)
        for _ in range(steps):
            z1 = rng.standard_normal(n)
            z2 = rng.standard_normal(n)
            # Full truncation
            v_plus = np.maximum(v, 0.0)
            root = np.sqrt(v_plus * dt)
            x += -0.5 * v_plus * dt + root * z1
            v += model.kappa * (model.theta - v_plus) * dt + model.sigma * root * (model.rho * z1 + mix * z2)
        return x

    raise UnsupportedModelError(f"Unsupported model type {type(model).__name__}")


def _batch_rng(seed: int, batch: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key = (batch,)))


def _payoff_moments(args: tuple) -> np.ndarray:
    opt, model, steps_per_year, seed, batch, size = args
    x = sample_log_returns(model, opt.market, size, _batch_rng(seed, batch), steps_per_year)
    growth = np.exp(opt.r * opt.T + x)
    if opt.kind is OptionKind.EUROPEAN:
        payoff = opt.s0 * np.maximum(growth - opt.strike / opt.s0, 0.0)
    else:
        payoff = (opt.s0 * growth >= opt.strike).astype(float)
    return np.array([np.sum(payoff), np.sum(payoff ** 2)])


def _cf_moments(args: tuple) -> np.ndarray:
    model, market, z, steps_per_year, seed, batch, size = args
    x = sample_log_returns(model, market, size, _batch_rng(seed, batch), steps_per_year)
    cos, sin = np.cos(z * x), np.sin(z * x)
    return np.array([np.sum(cos), np.sum(cos ** 2), np.sum(sin), np.sum(sin ** 2)])


def _run_batches(func: Callable, tasks: list[tuple], workers: int) -> np.ndarray:
    if workers <= 1 or len(tasks) < 2:
        moments = [func(task) for task in tasks]
    else:
        with ProcessPoolExecutor(max_workers = workers) as executor:
            moments = list(executor.map(func, tasks))
    # Pairwise summation in batch order
    return np.sum(np.stack(moments, axis = 1), axis = 1)


def _mean_and_error(total: float, total_sq: float, n: int) -> tuple[float, float]:
    mean = total / n
    variance = max(total_sq - n * mean ** 2, 0.0) / (n - 1)
    return mean, math.sqrt(variance / n)


def mc_price(opt: OptionSpec, model: ModelSpec, cfg: McConfig) -> McResult:
    """discounted Monte Carlo price with its standard error"""
    tasks = [
        (opt, model, cfg.steps_per_year, cfg.seed, batch, size)
        for batch, size in enumerate(cfg.batch_sizes())
    ]
    LOGGER.info(f"Simulating {cfg.paths} {model.name} paths in {len(tasks)} batches (seed {cfg.seed})")
    total, total_sq = _run_batches(_payoff_moments, tasks, cfg.workers)

    mean, error = _mean_and_error(total, total_sq, cfg.paths)
    discount = math.exp(-opt.r * opt.T)
    return McResult(price = discount * mean, std_error = discount * error, paths = cfg.paths, seed = cfg.seed)


def mc_cf_probe(model: ModelSpec, market: MarketSpec, z: float, cfg: McConfig) -> CfProbe:
    """sample mean of exp(i z X_T) with component-wise standard errors"""
    tasks = [
        (model, market, float(z), cfg.steps_per_year, cfg.seed, batch, size)
        for batch, size in enumerate(cfg.batch_sizes())
    ]
    cos_sum, cos_sq, sin_sum, sin_sq = _run_batches(_cf_moments, tasks, cfg.workers)

    re, re_error = _mean_and_error(cos_sum, cos_sq, cfg.paths)
    im, im_error = _mean_and_error(sin_sum, sin_sq, cfg.paths)
    return CfProbe(
        value = complex(re, im),
        std_error_re = re_error,
        std_error_im = im_error,
        paths = cfg.paths,
        seed = cfg.seed
    )
