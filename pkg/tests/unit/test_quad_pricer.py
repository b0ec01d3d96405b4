import math

import numpy as np
import pytest

from fourierpricer.bench import time_workload
from fourierpricer.errors import DegenerateMaturityError, QuadratureDiagnosticError, ValidationError
from fourierpricer.levy_models import GBM, Heston, heston_integrated_variance
from fourierpricer.offsets import OffsetKind, OptionKind, normal_cdf, offset_value
from fourierpricer import quad_pricer
from fourierpricer.quad_pricer import (
    QuadratureConfig,
    closed_form_bs,
    price_many,
    price_single,
    simpson_weights,
)

from tests.unit.conftest import reference_option

SOA = QuadratureConfig(OffsetKind.SMOOTH, 40.0, 64)
CMA = QuadratureConfig(OffsetKind.CARR_MADAN, 360.0, 576)


def relative_bps(value: float, reference: float) -> float:
    return abs(value / reference - 1.0) * 1e4


def test_simpson_weights():
    assert np.allclose(simpson_weights(2), [1 / 3, 4 / 3, 1 / 3], atol = 1e-15)
    assert np.allclose(simpson_weights(4), [1 / 3, 4 / 3, 2 / 3, 4 / 3, 1 / 3], atol = 1e-15)
    assert simpson_weights(64).sum() * (40.0 / 64) == pytest.approx(40.0, abs = 1e-12)


@pytest.mark.parametrize('N', [0, 3, 65])
def test_simpson_weights_need_even_n(N):
    with pytest.raises(ValidationError):
        simpson_weights(N)


@pytest.mark.parametrize('B, N', [(40.0, 63), (0.0, 64), (-1.0, 64), (40.0, 0)])
def test_quadrature_config_validation(B, N):
    with pytest.raises(ValidationError):
        QuadratureConfig(OffsetKind.SMOOTH, B, N)


def test_quadrature_config_parses_offset():
    cfg = QuadratureConfig('soa', 40.0, 64)
    assert cfg.offset is OffsetKind.SMOOTH
    assert cfg.dz == 0.625


def test_closed_form_reference_call():
    option = reference_option()
    d1 = (math.log(1.5) + (0.02 + 0.03125) * 0.25) / (0.25 * math.sqrt(0.25))
    d2 = d1 - 0.25 * math.sqrt(0.25)
    expected = 150 * normal_cdf(d1) - 100 * math.exp(-0.005) * normal_cdf(d2)
    assert closed_form_bs(option, 0.25) == pytest.approx(expected, rel = 1e-14)
    assert closed_form_bs(option, 0.25) == pytest.approx(50.50, abs = 0.01)


def test_closed_form_limits():
    deep = reference_option(strike = 1e-8 * 150.0)
    assert closed_form_bs(deep, 0.25) == pytest.approx(150.0, rel = 2e-8)

    forward = reference_option()
    assert closed_form_bs(forward, 1e-6) == pytest.approx(150 - 100 * math.exp(-0.005), rel = 1e-12)


def test_closed_form_rejects_degenerate_inputs():
    with pytest.raises(ValidationError):
        closed_form_bs(reference_option(), 0.0)
    with pytest.raises(DegenerateMaturityError):
        closed_form_bs(reference_option(T = 0.0), 0.25)


@pytest.mark.parametrize('kind', list(OptionKind))
def test_smooth_offset_matches_black_scholes(gbm, kind):
    option = reference_option(kind)
    result = price_single(option, gbm, SOA)
    assert relative_bps(result.price, closed_form_bs(option, 0.25)) < 2.0
    assert result.config is SOA
    assert not result.clamped


def test_carr_madan_european_matches_black_scholes(gbm):
    option = reference_option()
    assert relative_bps(price_single(option, gbm, CMA).price, closed_form_bs(option, 0.25)) < 2.0


def test_carr_madan_digital_truncation_error(gbm):
    # The Carr-Madan digital transform decays like 1/z, so truncation at B = 360 leaves about 21 bps
    option = reference_option(OptionKind.DIGITAL)
    assert relative_bps(price_single(option, gbm, CMA).price, closed_form_bs(option, 0.25)) < 25.0


def test_unit_volatility_price_is_the_smooth_offset():
    option = reference_option()
    for B, N in ((10.0, 2), (40.0, 64), (100.0, 500)):
        result = price_single(option, GBM(sigma = 1.0), QuadratureConfig(OffsetKind.SMOOTH, B, N))
        assert result.normalized_price == pytest.approx(offset_value(OffsetKind.SMOOTH, option), abs = 1e-12)


def test_price_scales_with_spot(gbm):
    european = reference_option()
    result = price_single(european, gbm, SOA)
    assert result.price == pytest.approx(150.0 * result.normalized_price, rel = 1e-15)

    digital = reference_option(OptionKind.DIGITAL)
    result = price_single(digital, gbm, SOA)
    assert result.price == result.normalized_price
    assert 0 <= result.price <= math.exp(-0.005)


def test_european_price_non_increasing_in_strike(gbm, heston, evgp):
    strikes = np.linspace(0.95, 1.05, 21) * 150.0
    for model in (gbm, heston, evgp):
        prices = [price_single(reference_option(strike = k), model, SOA).price for k in strikes]
        assert np.all(np.diff(prices) <= 1e-8)


def test_smooth_converges_before_carr_madan(gbm):
    option = reference_option()
    benchmark = closed_form_bs(option, 0.25)

    def worst_error(offset):
        errors = []
        for B in range(40, 110, 10):
            N = int(1.6 * B) - int(1.6 * B) % 2
            price = price_single(option, gbm, QuadratureConfig(offset, float(B), N)).price
            errors.append(relative_bps(price, benchmark))
        return max(errors)

    assert worst_error(OffsetKind.SMOOTH) < 2.0
    assert worst_error(OffsetKind.CARR_MADAN) > 2.0


def test_small_negative_prices_are_clamped(monkeypatch, gbm):
    option = reference_option(OptionKind.DIGITAL)
    offset = offset_value(OffsetKind.SMOOTH, option)
    monkeypatch.setattr(quad_pricer, 'normalized_vhat', lambda *args: -offset - 5e-7)

    result = price_single(option, gbm, SOA)
    assert result.price == 0.0
    assert result.clamped


def test_large_negative_prices_raise(monkeypatch, gbm):
    option = reference_option(OptionKind.DIGITAL)
    offset = offset_value(OffsetKind.SMOOTH, option)
    monkeypatch.setattr(quad_pricer, 'normalized_vhat', lambda *args: -offset - 1e-3)

    with pytest.raises(QuadratureDiagnosticError) as info:
        price_single(option, gbm, SOA)
    assert info.value.B == 40.0
    assert info.value.N == 64


def test_price_many_keeps_input_order(gbm, evgp):
    contracts = [(reference_option(strike = k), model) for k in (140.0, 150.0, 160.0) for model in (gbm, evgp)]
    sequential = [price_single(option, model, SOA).price for option, model in contracts]

    assert [r.price for r in price_many(contracts, SOA)] == sequential
    assert [r.price for r in price_many(contracts, SOA, workers = 2)] == sequential


@pytest.mark.parametrize('kind', [OptionKind.EUROPEAN, OptionKind.DIGITAL])
def test_heston_without_vol_of_vol_prices_as_black_scholes(kind):
    heston = Heston(kappa = 1.0, theta = 0.04, sigma = 0.0, rho = 0.0, v0 = 0.09)
    option = reference_option(kind, strike = 150.0)
    sigma = math.sqrt(heston_integrated_variance(heston, option.T) / option.T)

    price = price_single(option, heston, QuadratureConfig(OffsetKind.SMOOTH, 80.0, 1024)).price
    assert relative_bps(price, closed_form_bs(option, sigma)) < 0.01


def test_smooth_converges_before_carr_madan_in_every_case(cases):
    fine = QuadratureConfig(OffsetKind.SMOOTH, 1000.0, 40_000)

    for case in cases:
        if case.model.name == 'gbm':
            reference = closed_form_bs(case.option, case.model.sigma)
        else:
            reference = price_single(case.option, case.model, fine).price

        def worst_error(offset):
            errors = []
            for B in range(40, 110, 10):
                N = int(1.6 * B) - int(1.6 * B) % 2
                errors.append(relative_bps(price_single(case.option, case.model, QuadratureConfig(offset, float(B), N)).price, reference))
            return max(errors)

        assert worst_error(OffsetKind.SMOOTH) <= worst_error(OffsetKind.CARR_MADAN), case.label


@pytest.mark.parametrize('cfg', [SOA, CMA])
def test_single_option_runtime(gbm, cfg):
    options = [reference_option(OptionKind.EUROPEAN), reference_option(OptionKind.DIGITAL)]
    samples = time_workload('obo', lambda: [price_single(o, gbm, cfg) for o in options], repetitions = 20)
    assert sorted(s.seconds for s in samples)[10] / len(options) < 5e-3
