"""Offset terms and the transforms of offset-modified prices.

Prices here are normalized (s0 = 1) and written as functions of the log-strike
k = ln(K / s0). An offset is a closed-form function subtracted from the price so
that the remainder has a Fourier transform eta(z), which the pricers invert
numerically.
"""
import math
import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import erfc

from fourierpricer.errors import DegenerateMaturityError, DomainError, ValidationError
from fourierpricer.levy_models import MarketSpec, ModelSpec, cf_dagger, cf_wedge

LOGGER = logging.getLogger(__name__)


class OptionKind(str, Enum):
    EUROPEAN = 'european'
    DIGITAL = 'digital'

    @classmethod
    def parse(cls, value: str) -> 'OptionKind':
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValidationError(f"Unknown option kind '{value}', expected european or digital")


class OffsetKind(str, Enum):
    CARR_MADAN = 'cm'
    SMOOTH = 'smooth'

    @classmethod
    def parse(cls, value: str) -> 'OffsetKind':
        aliases = {'cm': cls.CARR_MADAN, 'cma': cls.CARR_MADAN, 'carr-madan': cls.CARR_MADAN,
                   'carr_madan': cls.CARR_MADAN, 'smooth': cls.SMOOTH, 'soa': cls.SMOOTH}
        key = str(value).strip().lower()
        if key not in aliases:
            raise ValidationError(f"Unknown offset kind '{value}', expected cm or smooth")
        return aliases[key]


@dataclass(frozen = True)
class OptionSpec:
    kind: OptionKind
    strike: float
    s0: float
    T: float
    r: float

    def __post_init__(self):
        if not isinstance(self.kind, OptionKind):
            object.__setattr__(self, 'kind', OptionKind.parse(self.kind))
        if not (math.isfinite(self.strike) and self.strike > 0):
            raise DomainError(f"Strike must satisfy K > 0, got K = {self.strike}")
        MarketSpec(r = self.r, T = self.T, s0 = self.s0)

    @property
    def market(self) -> MarketSpec:
        return MarketSpec(r = self.r, T = self.T, s0 = self.s0)

    @property
    def log_strike(self) -> float:
        return math.log(self.strike / self.s0)

    @property
    def scale(self) -> float:
        """multiplier from normalized to actual price"""
        return self.s0 if self.kind is OptionKind.EUROPEAN else 1.0


def normal_cdf(x):
    """standard normal CDF through the complementary error function"""
    return 0.5 * erfc(-np.asarray(x, dtype = float) / math.sqrt(2.0))


def _d12(k, r: float, T: float) -> tuple[np.ndarray, np.ndarray]:
    root = math.sqrt(T)
    d1 = (-k + (r + 0.5) * T) / root
    d2 = (-k + (r - 0.5) * T) / root
    return d1, d2


def offset_value(kind: OffsetKind, opt: OptionSpec, k=None):
    """
    Discounted normalized offset term.

    Args:
        kind: Carr-Madan or smooth offset
        opt: option whose kind, rate and maturity are used
        k: normalized log-strike(s), the option's own when omitted

    Returns:
        float for scalar k, array otherwise
    """
    k = np.asarray(opt.log_strike if k is None else k, dtype = float)
    r, T = opt.r, opt.T
    discount = math.exp(-r * T)

    if kind is OffsetKind.CARR_MADAN:
        if opt.kind is OptionKind.EUROPEAN:
            value = discount * np.maximum(math.exp(r * T) - np.exp(k), 0.0)
        else:
            value = discount * (r * T >= k).astype(float)
    elif kind is OffsetKind.SMOOTH:
        if T == 0:
            raise DegenerateMaturityError("Smooth offset requires T > 0")
        d1, d2 = _d12(k, r, T)
        if opt.kind is OptionKind.EUROPEAN:
            value = normal_cdf(d1) - np.exp(k - r * T) * normal_cdf(d2)
        else:
            value = discount * normal_cdf(d2)
    else:
        raise ValidationError(f"Unknown offset kind {kind}")

    return float(value) if value.ndim == 0 else value


def eta(kind: OffsetKind, opt_kind: OptionKind, model: ModelSpec, market: MarketSpec, z):
    """
    Fourier transform of the offset-modified normalized price at frequency z.

    The formulas have a removable singularity at z = 0; quadrature callers
    evaluate the first node at a small positive shift instead.
    """
    z = np.asarray(z, dtype = float)
    if np.any(z == 0) or not np.all(np.isfinite(z)):
        raise ValidationError("eta requires finite non-zero frequencies")

    r, T = market.r, market.T
    if opt_kind is OptionKind.EUROPEAN:
        shifted = z - 1j
        anchor = 1.0 if kind is OffsetKind.CARR_MADAN else cf_wedge(shifted, T)
        numerator = cf_dagger(model, market, shifted) - anchor
        values = np.exp(1j * z * r * T) * numerator / (1j * z * (1j * z + 1.0))
    else:
        anchor = 1.0 if kind is OffsetKind.CARR_MADAN else cf_wedge(z, T)
        numerator = cf_dagger(model, market, z) - anchor
        values = np.exp((1j * z - 1.0) * r * T) * numerator / (1j * z)

    return complex(values) if np.ndim(values) == 0 else values


def shifted_origin(dz: float) -> float:
    """evaluation point standing in for z = 0"""
    return max(dz * 1e-4, 1e-8)
