import cmath
import math

import numpy as np
import pytest

from fourierpricer.errors import DomainError, UnsupportedModelError, ValidationError
from fourierpricer.levy_models import (
    EVGP,
    GBM,
    Heston,
    MarketSpec,
    cf_dagger,
    cf_levy,
    cf_wedge,
    compensator,
    heston_integrated_variance,
    model_from_mapping,
    model_to_mapping,
)
from fourierpricer.mc_oracle import McConfig, mc_cf_probe


def random_models(rng: np.random.Generator, count: int):
    """admissible draws from the dataset sampling box"""
    models = []
    while len(models) < count:
        models.append(GBM(sigma = rng.uniform(1e-3, 0.2)))
        models.append(Heston(
            kappa = rng.uniform(1e-3, 0.2), theta = rng.uniform(1e-3, 0.2), sigma = rng.uniform(1e-3, 0.2),
            rho = rng.uniform(0.0, 0.2), v0 = rng.uniform(1e-3, 0.2)
        ))
        theta, sigma, nu = rng.uniform(0, 0.2), rng.uniform(1e-3, 0.2), rng.uniform(1e-3, 0.2)
        if 1 - theta * nu - 0.5 * sigma ** 2 * nu > 0:
            models.append(EVGP(theta = theta, sigma = sigma, nu = nu))
    return models


def test_compensators(gbm, heston, evgp):
    assert compensator(gbm) == pytest.approx(-0.03125, abs = 1e-15)
    assert compensator(evgp) == pytest.approx(math.log(1 - 0.03 - 0.006) / 0.3, abs = 1e-15)
    assert compensator(EVGP(theta = 0.0, sigma = 1e-9, nu = 0.3)) == pytest.approx(0.0, abs = 1e-15)
    assert compensator(heston) is None


def test_inadmissible_evgp_names_the_inequality():
    with pytest.raises(DomainError, match = 'theta\\*nu'):
        EVGP(theta = 1.0, sigma = 0.2, nu = 1.0)


@pytest.mark.parametrize('kwargs', [
    {'sigma': 0.0},
    {'sigma': -0.1},
    {'sigma': math.inf},
])
def test_gbm_rejects_bad_volatility(kwargs):
    with pytest.raises(DomainError):
        GBM(**kwargs)


def test_heston_rejects_bad_correlation():
    with pytest.raises(DomainError):
        Heston(kappa = 1.0, theta = 0.1, sigma = 0.1, rho = 1.5, v0 = 0.1)


def test_market_rejects_negative_maturity():
    with pytest.raises(DomainError):
        MarketSpec(r = 0.02, T = -1.0)


def test_cf_levy_values(gbm, evgp):
    assert cf_levy(gbm, 0.0, 0.25) == 1
    assert cf_levy(evgp, 0.0, 0.25) == pytest.approx(1, abs = 1e-15)
    assert cf_levy(gbm, 1.0, 0.25) == pytest.approx(math.exp(-0.00390625), abs = 1e-15)
    assert cf_levy(evgp, 1.0, 0.3) == pytest.approx(1 / (1 - 0.03j + 0.006), abs = 1e-14)


def test_cf_levy_rejects_heston(heston):
    with pytest.raises(UnsupportedModelError):
        cf_levy(heston, 1.0, 0.25)


def test_cf_levy_is_vectorized(gbm):
    z = np.linspace(0, 10, 11)
    values = cf_levy(gbm, z, 0.25)
    assert values.shape == z.shape
    assert np.allclose(values, np.exp(-0.5 * 0.0625 * z ** 2 * 0.25), atol = 1e-15)


def test_cf_wedge_values():
    assert cf_wedge(0.0, 0.25) == 1
    assert cf_wedge(-1j, 0.25) == pytest.approx(1, abs = 1e-15)
    assert cf_wedge(1.0, 0.25) == pytest.approx(math.exp(-0.125) * cmath.exp(-0.125j), abs = 1e-15)


def test_cf_dagger_normalization_and_martingale_identity():
    rng = np.random.default_rng(7)
    for model in random_models(rng, 1000):
        market = MarketSpec(r = rng.uniform(0, 0.05), T = rng.uniform(1 / 365, 1.0))
        assert abs(cf_dagger(model, market, 0.0) - 1) < 1e-12
        assert abs(cf_dagger(model, market, -1j) - 1) < 1e-9


def test_cf_dagger_hermitian_symmetry(gbm, heston, evgp):
    market = MarketSpec(r = 0.02, T = 0.25)
    z = np.linspace(0.1, 100.0, 200)
    for model in (gbm, heston, evgp):
        assert np.allclose(cf_dagger(model, market, -z), np.conj(cf_dagger(model, market, z)), rtol = 0, atol = 1e-12)


def test_cf_dagger_at_zero_maturity(heston):
    assert cf_dagger(heston, MarketSpec(r = 0.02, T = 0.0), 3.0) == 1


def test_heston_degenerates_to_gbm():
    market = MarketSpec(r = 0.02, T = 0.25)
    heston = Heston(kappa = 1e-3, theta = 0.0625, sigma = 1e-5, rho = 0.0, v0 = 0.0625)
    z = np.linspace(0.0, 50.0, 101)
    assert np.max(np.abs(cf_dagger(heston, market, z) - cf_dagger(GBM(sigma = 0.25), market, z))) < 1e-6


def test_heston_without_vol_of_vol_is_black_scholes():
    market = MarketSpec(r = 0.02, T = 0.25)
    heston = Heston(kappa = 1.0, theta = 0.04, sigma = 0.0, rho = 0.5, v0 = 0.09)
    integrated = 0.04 * 0.25 + 0.05 * (1.0 - math.exp(-0.25))
    assert heston_integrated_variance(heston, 0.25) == pytest.approx(integrated, rel = 1e-14)

    z = np.linspace(-20.0, 20.0, 81)
    gbm = GBM(sigma = math.sqrt(integrated / 0.25))
    assert np.max(np.abs(cf_dagger(heston, market, z) - cf_dagger(gbm, market, z))) < 1e-14

    flat = Heston(kappa = 0.0, theta = 0.3, sigma = 0.0, rho = 0.0, v0 = 0.09)
    assert heston_integrated_variance(flat, 0.25) == pytest.approx(0.09 * 0.25, rel = 1e-15)


def test_small_vol_of_vol_converges_to_deterministic_variance():
    market = MarketSpec(r = 0.02, T = 0.25)
    z = np.linspace(-20.0, 20.0, 81)
    limit = cf_dagger(Heston(kappa = 1.0, theta = 0.04, sigma = 0.0, rho = 0.5, v0 = 0.09), market, z)
    errors = [
        np.max(np.abs(cf_dagger(Heston(kappa = 1.0, theta = 0.04, sigma = s, rho = 0.5, v0 = 0.09), market, z) - limit))
        for s in (1e-2, 1e-3, 1e-4)
    ]
    assert errors[0] > errors[1] > errors[2]
    assert errors[2] < 1e-5


def test_heston_matches_monte_carlo_probe(heston):
    market = MarketSpec(r = 0.02, T = 0.25)
    probe = mc_cf_probe(heston, market, 1.0, McConfig(paths = 200_000, batch_size = 50_000, seed = 11))
    value = cf_dagger(heston, market, 1.0)
    assert abs(value.real - probe.value.real) <= 4 * probe.std_error_re
    assert abs(value.imag - probe.value.imag) <= 4 * probe.std_error_im


def test_model_mapping_roundtrip(gbm, heston, evgp):
    for model in (gbm, heston, evgp):
        assert model_from_mapping(model_to_mapping(model)) == model


def test_model_from_mapping_errors():
    with pytest.raises(UnsupportedModelError):
        model_from_mapping({'model': 'merton', 'sigma': 0.2})
    with pytest.raises(ValidationError):
        model_from_mapping({'model': 'heston', 'sigma': 0.2})
    with pytest.raises(ValidationError):
        model_from_mapping({'model': 'gbm', 'sigma': 'high'})
