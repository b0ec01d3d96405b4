"""One-by-one (OBO) pricing by Simpson-rule inverse Fourier transform."""
import math
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from fourierpricer.errors import DegenerateMaturityError, QuadratureDiagnosticError, ValidationError
from fourierpricer.levy_models import ModelSpec
from fourierpricer.offsets import (
    OffsetKind,
    OptionKind,
    OptionSpec,
    eta,
    normal_cdf,
    offset_value,
    shifted_origin,
)

LOGGER = logging.getLogger(__name__)

# Negative normalized prices down to this level are clamped to zero
NEGATIVE_PRICE_TOLERANCE = 1e-6


@dataclass(frozen = True)
class QuadratureConfig:
    offset: OffsetKind
    B: float
    N: int

    def __post_init__(self):
        if not isinstance(self.offset, OffsetKind):
            object.__setattr__(self, 'offset', OffsetKind.parse(self.offset))
        if not (math.isfinite(self.B) and self.B > 0):
            raise ValidationError(f"Truncation point must satisfy B > 0, got B = {self.B}")
        if int(self.N) != self.N or self.N < 2 or self.N % 2:
            raise ValidationError(f"Simpson rule needs an even N >= 2, got N = {self.N}")
        object.__setattr__(self, 'N', int(self.N))

    @property
    def dz(self) -> float:
        return self.B / self.N


@dataclass(frozen = True)
class PriceResult:
    price: float
    normalized_price: float
    config: QuadratureConfig
    clamped: bool = False


def simpson_weights(N: int) -> np.ndarray:
    """composite Simpson weights (1/3)*{1,4,2,...,2,4,1} for N subintervals"""
    if int(N) != N or N < 2 or N % 2:
        raise ValidationError(f"Simpson rule needs an even N >= 2, got N = {N}")
    weights = np.full(int(N) + 1, 2.0)
    weights[1::2] = 4.0
    weights[0] = weights[-1] = 1.0
    return weights / 3.0


def normalized_vhat(opt: OptionSpec, model: ModelSpec, cfg: QuadratureConfig) -> float:
    """inverse transform of eta at the option's log-strike"""
    dz = cfg.dz
    z = dz * np.arange(cfg.N + 1)
    z[0] = shifted_origin(dz)

    values = eta(cfg.offset, opt.kind, model, opt.market, z)
    terms = simpson_weights(cfg.N) * np.exp(-1j * z * opt.log_strike) * values
    return dz / math.pi * float(np.sum(terms).real)


def price_single(opt: OptionSpec, model: ModelSpec, cfg: QuadratureConfig) -> PriceResult:
    """
    Price one option as inverse transform plus offset.

    Args:
        opt: option contract
        model: stock price model
        cfg: offset kind, truncation point and subinterval count

    Returns:
        PriceResult at the caller's scale (s0 for European, 1 for digital)
    """
    normalized = normalized_vhat(opt, model, cfg) + offset_value(cfg.offset, opt)

    clamped = False
    if normalized < 0:
        if normalized < -NEGATIVE_PRICE_TOLERANCE:
            raise QuadratureDiagnosticError(
                f"Negative price {normalized:.3g} at B = {cfg.B}, N = {cfg.N}",
                B = cfg.B, N = cfg.N, value = normalized
            )
        LOGGER.warning(f"Clamping price {normalized:.3g} to zero (B = {cfg.B}, N = {cfg.N})")
        normalized = 0.0
        clamped = True

    return PriceResult(
        price = normalized * opt.scale,
        normalized_price = normalized,
        config = cfg,
        clamped = clamped
    )


def closed_form_bs(opt: OptionSpec, sigma: float) -> float:
    """Black-Scholes call or cash-or-nothing digital call value"""
    if not sigma > 0:
        raise ValidationError(f"Black-Scholes requires sigma > 0, got sigma = {sigma}")
    if not opt.T > 0:
        raise DegenerateMaturityError("Black-Scholes requires T > 0")

    vol = sigma * math.sqrt(opt.T)
    d1 = (math.log(opt.s0 / opt.strike) + (opt.r + 0.5 * sigma ** 2) * opt.T) / vol
    d2 = d1 - vol
    discount = math.exp(-opt.r * opt.T)
    if opt.kind is OptionKind.EUROPEAN:
        return float(opt.s0 * normal_cdf(d1) - opt.strike * discount * normal_cdf(d2))
    return float(discount * normal_cdf(d2))


def _price_pair(args: tuple) -> PriceResult:
    opt, model, cfg = args
    return price_single(opt, model, cfg)


def price_many(
    contracts: Sequence[tuple[OptionSpec, ModelSpec]],
    cfg: QuadratureConfig,
    workers: int = 1
) -> list[PriceResult]:
    """price (option, model) pairs in input order, optionally across processes"""
    tasks = [(opt, model, cfg) for opt, model in contracts]
    if workers <= 1 or len(tasks) < 2:
        return [_price_pair(task) for task in tasks]

    chunksize = max(1, len(tasks) // (workers * 4))
    with ProcessPoolExecutor(max_workers = workers) as executor:
        return list(executor.map(_price_pair, tasks, chunksize = chunksize))
