"""Stock price models: characteristic functions and compensators.

Every model writes the stock price as S_T = s0 * exp(r*T + X_T), where X is the
compensated log-return process. The transforms here are vectorized over numpy
arrays of complex frequencies; scalar inputs return Python complex numbers.
"""
import math
import logging
from dataclasses import dataclass, asdict
from typing import Any, ClassVar, Mapping, Optional, Union

import numpy as np

from fourierpricer.errors import (
    DomainError,
    NumericOverflowError,
    UnsupportedModelError,
    ValidationError,
)

LOGGER = logging.getLogger(__name__)

# Below this |tau * T| the Heston hyperbolic terms use their series limits
HESTON_SMALL_TAU = 1e-8


def _check_finite(name: str, **params: float):
    for key, value in params.items():
        if not math.isfinite(value):
            raise DomainError(f"{name}.{key} must be finite, got {value}")


@dataclass(frozen = True)
class GBM:
    sigma: float

    name: ClassVar[str] = 'gbm'

    def __post_init__(self):
        _check_finite('GBM', sigma = self.sigma)
        if not self.sigma > 0:
            raise DomainError(f"GBM requires sigma > 0, got sigma = {self.sigma}")


@dataclass(frozen = True)
class Heston:
    kappa: float
    theta: float
    sigma: float
    rho: float
    v0: float

    name: ClassVar[str] = 'heston'

    def __post_init__(self):
        _check_finite(
            'Heston',
            kappa = self.kappa, theta = self.theta, sigma = self.sigma, rho = self.rho, v0 = self.v0
        )
        for key in ('kappa', 'theta', 'sigma', 'v0'):
            if getattr(self, key) < 0:
                raise DomainError(f"Heston requires {key} >= 0, got {key} = {getattr(self, key)}")
        if abs(self.rho) > 1:
            raise DomainError(f"Heston requires |rho| <= 1, got rho = {self.rho}")


@dataclass(frozen = True)
class EVGP:
    theta: float
    sigma: float
    nu: float

    name: ClassVar[str] = 'evgp'

    def __post_init__(self):
        _check_finite('EVGP', theta = self.theta, sigma = self.sigma, nu = self.nu)
        if not self.sigma > 0:
            raise DomainError(f"EVGP requires sigma > 0, got sigma = {self.sigma}")
        if not self.nu > 0:
            raise DomainError(f"EVGP requires nu > 0, got nu = {self.nu}")
        if not self.admissibility > 0:
            raise DomainError(
                f"EVGP requires 1 - theta*nu - sigma^2*nu/2 > 0, got {self.admissibility:.6g}"
            )

    @property
    def admissibility(self) -> float:
        """argument of the compensator logarithm"""
        return 1.0 - self.theta * self.nu - 0.5 * self.sigma ** 2 * self.nu


ModelSpec = Union[GBM, Heston, EVGP]

MODEL_TYPES: dict[str, type] = {'gbm': GBM, 'heston': Heston, 'evgp': EVGP}

MODEL_KEYS: dict[str, tuple[str, ...]] = {
    'gbm': ('sigma',),
    'heston': ('kappa', 'theta', 'sigma', 'rho', 'v0'),
    'evgp': ('theta', 'sigma', 'nu'),
}


@dataclass(frozen = True)
class MarketSpec:
    r: float
    T: float
    s0: float = 1.0

    def __post_init__(self):
        _check_finite('MarketSpec', r = self.r, T = self.T, s0 = self.s0)
        if self.T < 0:
            raise DomainError(f"Maturity must satisfy T >= 0, got T = {self.T}")
        if not self.s0 > 0:
            raise DomainError(f"Spot must satisfy s0 > 0, got s0 = {self.s0}")


def model_from_mapping(mapping: Mapping[str, Any]) -> ModelSpec:
    """
    Parse a model from a configuration mapping.

    Args:
        mapping: 'model' in {gbm, heston, evgp} plus that model's parameter keys

    Returns:
        GBM, Heston or EVGP instance
    """
    kind = str(mapping.get('model', '')).strip().lower()
    if kind not in MODEL_TYPES:
        raise UnsupportedModelError(f"Unknown model '{kind}', expected one of {sorted(MODEL_TYPES)}")

    params = {}
    for key in MODEL_KEYS[kind]:
        if mapping.get(key) is None:
            raise ValidationError(f"Model '{kind}' requires parameter '{key}'")
        try:
            params[key] = float(mapping[key])
        except (TypeError, ValueError):
            raise ValidationError(f"Parameter '{key}' must be a number, got {mapping[key]!r}")

    return MODEL_TYPES[kind](**params)


def model_to_mapping(model: ModelSpec) -> dict[str, Any]:
    return {'model': model.name, **asdict(model)}


def compensator(model: ModelSpec) -> Optional[float]:
    """
    Drift correction zeta making exp(X_t) a martingale.

    Returns None for Heston, whose transform comes from the log-price
    characteristic function instead.
    """
    if isinstance(model, GBM):
        return -0.5 * model.sigma ** 2
    if isinstance(model, EVGP):
        if not model.admissibility > 0:
            raise DomainError(
                f"EVGP requires 1 - theta*nu - sigma^2*nu/2 > 0, got {model.admissibility:.6g}"
            )
        return math.log(model.admissibility) / model.nu
    if isinstance(model, Heston):
        return None
    raise UnsupportedModelError(f"Unsupported model type {type(model).__name__}")


def _as_complex(z) -> tuple[np.ndarray, bool]:
    arr = np.asarray(z, dtype = complex)
    return arr, arr.ndim == 0


def _finish(values: np.ndarray, scalar: bool, what: str):
    if not np.all(np.isfinite(values)):
        raise NumericOverflowError(f"Non-finite value in {what}")
    if scalar:
        return complex(values)
    return values


def cf_levy(model: ModelSpec, z, t: float):
    """characteristic function of the uncompensated Levy increment X_t"""
    if t < 0:
        raise DomainError(f"Time must satisfy t >= 0, got t = {t}")
    z, scalar = _as_complex(z)

    with np.errstate(over = 'ignore', invalid = 'ignore'):
        if isinstance(model, GBM):
            values = np.exp(-0.5 * model.sigma ** 2 * z ** 2 * t)
        elif isinstance(model, EVGP):
            base = 1.0 - 1j * z * model.theta * model.nu + 0.5 * model.sigma ** 2 * model.nu * z ** 2
            # Principal branch of the complex power
            values = np.exp((-t / model.nu) * np.log(base))
        elif isinstance(model, Heston):
            raise UnsupportedModelError("Heston has no Levy characteristic function, use cf_dagger")
        else:
            raise UnsupportedModelError(f"Unsupported model type {type(model).__name__}")

    return _finish(values, scalar, f"{model.name} characteristic function")


def heston_integrated_variance(model: Heston, T: float) -> float:
    """integral of the mean variance path v0 -> theta over [0, T]"""
    if model.kappa == 0:
        return model.v0 * T
    return model.theta * T + (model.v0 - model.theta) * -math.expm1(-model.kappa * T) / model.kappa


def _heston_log_cf(model: Heston, z: np.ndarray, T: float) -> np.ndarray:
    """log of E[exp(i z X_T)] for the centred Heston log-return"""
    kappa, theta, sigma, rho, v0 = model.kappa, model.theta, model.sigma, model.rho, model.v0
    quad = z ** 2 + 1j * z

    if sigma == 0:
        # Deterministic variance: only its integral over [0, T] matters
        return -0.5 * heston_integrated_variance(model, T) * quad

    beta = kappa - 1j * rho * sigma * z
    tau = np.sqrt(sigma ** 2 * quad + beta ** 2)

    # The denominator is even in tau, so flip the root where tau + beta cancels
    cancel = np.abs(tau + beta) < 1e-12 * np.maximum(1.0, np.abs(tau))
    tau = np.where(cancel, -tau, tau)

    small = np.abs(tau * T) < HESTON_SMALL_TAU
    tau_safe = np.where(small, 1.0, tau)

    # cosh(x) + (beta/tau) sinh(x) = e^x (tau + beta)/(2 tau) (1 - g e^{-tau T})
    decay = np.exp(-tau_safe * T)
    g = (beta - tau_safe) / (beta + tau_safe)
    log_denominator = np.where(
        small,
        np.log(1.0 + 0.5 * beta * T),
        0.5 * tau_safe * T + np.log((tau_safe + beta) / (2.0 * tau_safe)) + np.log1p(-g * decay),
    )

    # tau coth(tau T / 2) + beta
    coth_term = np.where(
        small,
        2.0 / T + beta,
        tau_safe * (1.0 + decay) / (-np.expm1(-tau_safe * T)) + beta,
    )

    ratio = kappa * theta / sigma ** 2
    return ratio * beta * T - 2.0 * ratio * log_denominator - quad * v0 / coth_term


def cf_dagger(model: ModelSpec, market: MarketSpec, z):
    """characteristic function of the compensated log-return X_T at maturity"""
    z, scalar = _as_complex(z)
    T = market.T
    if T == 0:
        return _finish(np.ones_like(z), scalar, f"{model.name} cf_dagger")

    with np.errstate(over = 'ignore', invalid = 'ignore', divide = 'ignore'):
        if isinstance(model, Heston):
            values = np.exp(_heston_log_cf(model, z, T))
        else:
            zeta = compensator(model)
            values = np.exp(1j * zeta * z * T) * cf_levy(model, z, T)

    return _finish(values, scalar, f"{model.name} cf_dagger")


def cf_wedge(z, T: float):
    """characteristic function of the unit-volatility compensated GBM log-return"""
    if T < 0:
        raise DomainError(f"Maturity must satisfy T >= 0, got T = {T}")
    z, scalar = _as_complex(z)
    with np.errstate(over = 'ignore', invalid = 'ignore'):
        values = np.exp(-0.5 * T * (1j * z + z ** 2))
    return _finish(values, scalar, "cf_wedge")
