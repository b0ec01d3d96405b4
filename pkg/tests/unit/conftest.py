import pytest

from fourierpricer.levy_models import EVGP, GBM, Heston
from fourierpricer.offsets import OptionKind, OptionSpec
from fourierpricer.tuner import reference_cases


def reference_option(kind: OptionKind = OptionKind.EUROPEAN, **overrides) -> OptionSpec:
    """the 150/100 call with a quarter-year maturity"""
    params = dict(kind = kind, strike = 100.0, s0 = 150.0, T = 0.25, r = 0.02)
    params.update(overrides)
    return OptionSpec(**params)


@pytest.fixture
def gbm():
    return GBM(sigma = 0.25)


@pytest.fixture
def heston():
    return Heston(kappa = 2.30, theta = 0.36, sigma = 0.10, rho = 0.60, v0 = 0.49)


@pytest.fixture
def evgp():
    return EVGP(theta = 0.10, sigma = 0.20, nu = 0.30)


@pytest.fixture
def european():
    return reference_option(OptionKind.EUROPEAN)


@pytest.fixture
def digital():
    return reference_option(OptionKind.DIGITAL)


@pytest.fixture
def cases():
    return reference_cases()
