import json
import math

import numpy as np
import pandas as pd
import pytest

from fourierpricer import dataset
from fourierpricer.dataset import (
    FEATURE_NAMES,
    RECORD_KEYS,
    SENTINEL,
    DatasetRecord,
    SamplingBounds,
    decode,
    encode,
    export_parquet,
    generate,
    read_dataset,
    read_header,
    rescale_price,
    sample_contract,
    validate_records,
)
from fourierpricer.errors import ValidationError
from fourierpricer.levy_models import EVGP, GBM, Heston
from fourierpricer.offsets import OffsetKind, OptionKind, OptionSpec
from fourierpricer.quad_pricer import QuadratureConfig, closed_form_bs

GBM_SLICE = SamplingBounds(sigma = (0.1, 0.2), t = (0.25, 1.0), models = ('gbm',))


def unit_option(kind = OptionKind.EUROPEAN) -> OptionSpec:
    return OptionSpec(kind = kind, strike = 1.02, s0 = 1.0, T = 0.5, r = 0.03)


def test_encode_examples(gbm, heston, evgp):
    option = OptionSpec(kind = OptionKind.EUROPEAN, strike = 100.0, s0 = 150.0, T = 0.25, r = 0.02)
    assert encode(option, gbm) == (1.0, 100.0 / 150.0, 0.25, 0.02, 0.25, -1.0, -1.0, -1.0, -1.0, -1.0)

    digital = OptionSpec(kind = OptionKind.DIGITAL, strike = 100.0, s0 = 150.0, T = 0.25, r = 0.02)
    assert encode(digital, heston) == (0.0, 100.0 / 150.0, 0.25, 0.02, 0.10, 2.30, 0.36, 0.60, 0.49, -1.0)
    assert encode(option, evgp) == (1.0, 100.0 / 150.0, 0.25, 0.02, 0.20, -1.0, 0.10, -1.0, -1.0, 0.30)


@pytest.mark.parametrize('kind', list(OptionKind))
def test_decode_inverts_encode(kind, gbm, heston, evgp):
    option = unit_option(kind)
    for model in (gbm, heston, evgp):
        decoded_option, decoded_model = decode(encode(option, model))
        assert decoded_option == option
        assert decoded_model == model


def test_decode_rescales_spot(gbm):
    option, _ = decode(encode(unit_option(), gbm), s0 = 150.0)
    assert option.s0 == 150.0
    assert option.strike == pytest.approx(153.0, rel = 1e-15)


@pytest.mark.parametrize('features', [
    (1.0, 1.0, 0.5),
    (1.0, math.nan, 0.5, 0.02, 0.1, -1.0, -1.0, -1.0, -1.0, -1.0),
    (0.5, 1.0, 0.5, 0.02, 0.1, -1.0, -1.0, -1.0, -1.0, -1.0),
])
def test_decode_rejects_bad_vectors(features):
    with pytest.raises(ValidationError):
        decode(features)


def test_rescale_price():
    assert rescale_price(0.3367, 150.0, 1.0) == pytest.approx(50.505, abs = 1e-12)
    assert rescale_price(0.5, 150.0, 0.0) == 0.5


def test_degenerate_bounds_are_deterministic():
    bounds = SamplingBounds(
        s0 = (150.0, 150.0), k_ratio = (1.0, 1.0), t = (0.0, 0.0), r = (0.01, 0.01),
        sigma = (0.1, 0.1), models = ('gbm',)
    )
    rng = np.random.default_rng(0)
    for _ in range(20):
        option, model = sample_contract(bounds, rng)
        assert option.strike == option.s0 == 150.0
        assert option.T == dataset.MATURITY_FLOOR
        assert model == GBM(sigma = 0.1)


def test_bounds_validation():
    with pytest.raises(ValidationError):
        SamplingBounds(sigma = (0.2, 0.1))
    with pytest.raises(ValidationError):
        SamplingBounds(models = ('merton',))


def test_option_types_are_balanced():
    rng = np.random.default_rng(1)
    bounds = SamplingBounds(models = ('gbm',))
    draws = [sample_contract(bounds, rng)[0].kind is OptionKind.EUROPEAN for _ in range(100_000)]
    assert np.mean(draws) == pytest.approx(0.5, abs = 0.01)


def test_sampled_models_respect_bounds():
    rng = np.random.default_rng(2)
    evgp_bounds = SamplingBounds(theta = (0.0, 0.2), models = ('evgp',))
    for _ in range(1000):
        _, model = sample_contract(evgp_bounds, rng)
        assert isinstance(model, EVGP)
        assert 1 - model.theta * model.nu - 0.5 * model.sigma ** 2 * model.nu > 0

    heston_bounds = SamplingBounds(models = ('heston',))
    for _ in range(1000):
        _, model = sample_contract(heston_bounds, rng)
        assert isinstance(model, Heston)
        assert min(model.kappa, model.theta, model.sigma, model.v0) >= dataset.VOL_FLOOR


def test_empty_dataset_has_only_a_header(tmp_path):
    summary = generate(0, SamplingBounds(), seed = 1, out_path = tmp_path / 'empty.jsonl')
    lines = summary.path.read_text().splitlines()
    assert len(lines) == 1
    assert json.loads(lines[0])['header'] is True
    assert summary.written == summary.skipped == 0

    X, y, records = read_dataset(summary.path)
    assert X.shape == (0, len(FEATURE_NAMES))
    assert len(y) == len(records) == 0


def test_generation_is_reproducible(tmp_path):
    first = generate(50, SamplingBounds(), seed = 42, out_path = tmp_path / 'a.jsonl', shard_size = 20)
    second = generate(50, SamplingBounds(), seed = 42, out_path = tmp_path / 'b.jsonl', shard_size = 20)
    parallel = generate(50, SamplingBounds(), seed = 42, out_path = tmp_path / 'c.jsonl', shard_size = 20, workers = 2)

    assert first.written + first.skipped == 50
    assert first.path.read_bytes() == second.path.read_bytes()
    assert first.path.read_bytes() == parallel.path.read_bytes()

    other = generate(50, SamplingBounds(), seed = 43, out_path = tmp_path / 'd.jsonl', shard_size = 20)
    assert other.path.read_bytes() != first.path.read_bytes()


def test_header_describes_the_run(tmp_path):
    summary = generate(5, GBM_SLICE, seed = 3, out_path = tmp_path / 'data.jsonl')
    header = read_header(summary.path)
    assert header['seed'] == 3
    assert header['n_requested'] == 5
    assert header['feature_names'] == list(FEATURE_NAMES)
    assert header['soa_config'] == {'offset': 'smooth', 'B': 40.0, 'N': 64}
    assert header['model_mix'] == {'gbm': 1.0}


def test_read_header_requires_a_header(tmp_path):
    path = tmp_path / 'bare.jsonl'
    path.write_text(json.dumps({'y': 0.1}) + '\n')
    with pytest.raises(ValidationError):
        read_header(path)


def test_generator_rejects_carr_madan_labels(tmp_path):
    with pytest.raises(ValidationError):
        generate(1, SamplingBounds(), 1, tmp_path / 'x.jsonl', soa_cfg = QuadratureConfig(OffsetKind.CARR_MADAN, 40.0, 64))


def test_gbm_labels_match_closed_form(tmp_path):
    cfg = QuadratureConfig(OffsetKind.SMOOTH, 80.0, 1024)
    summary = generate(300, GBM_SLICE, seed = 9, out_path = tmp_path / 'gbm.jsonl', soa_cfg = cfg)
    assert summary.written == 300

    _, y, records = read_dataset(summary.path)
    for label, record in zip(y, records):
        option, model = decode(record.features)
        exact = closed_form_bs(option, model.sigma)
        assert abs(label - exact) <= 2e-4 * max(exact, 0.05), record


def test_failed_labels_are_skipped(tmp_path, monkeypatch):
    original = dataset.label_contract
    calls = {'count': 0}

    def flaky(opt, model, soa_cfg):
        calls['count'] += 1
        if calls['count'] % 5 == 0:
            raise ValidationError('label out of range')
        return original(opt, model, soa_cfg)

    monkeypatch.setattr(dataset, 'label_contract', flaky)
    summary = generate(
        20, GBM_SLICE, seed = 4, out_path = tmp_path / 'data.jsonl', soa_cfg = QuadratureConfig(OffsetKind.SMOOTH, 80.0, 1024)
    )
    assert summary.written == 16
    assert summary.skipped == 4


def test_validate_records(tmp_path):
    summary = generate(30, SamplingBounds(), seed = 5, out_path = tmp_path / 'data.jsonl')
    _, _, records = read_dataset(summary.path)
    assert validate_records(records, SamplingBounds()) == []

    bad = DatasetRecord(
        features = (1.0, 2.0, 0.5, 0.01, 0.1, -1.0, -1.0, -1.0, -1.0, -1.0), y = 1.5,
        model = 'gbm', s0_raw = 150.0, k_raw = 300.0
    )
    problems = validate_records([bad], SamplingBounds())
    assert len(problems) == 2
    assert any('k_prime' in p for p in problems)
    assert any('label' in p for p in problems)


def test_record_needs_every_key():
    with pytest.raises(ValidationError):
        DatasetRecord.from_dict({'y': 0.1})


def test_export_parquet(tmp_path):
    summary = generate(10, SamplingBounds(), seed = 6, out_path = tmp_path / 'data.jsonl')
    out = export_parquet(summary.path, tmp_path / 'data.parquet')

    frame = pd.read_parquet(out)
    assert list(frame.columns) == list(RECORD_KEYS)
    assert len(frame) == summary.written
    _, y, _ = read_dataset(summary.path)
    assert np.array_equal(frame['y'].to_numpy(), y)
    assert (frame.loc[frame['model'] == 'gbm', 'nu'] == SENTINEL).all()


def test_missing_dataset(tmp_path):
    with pytest.raises(ValidationError):
        read_dataset(tmp_path / 'missing.jsonl')
    with pytest.raises(ValidationError):
        read_header(tmp_path / 'missing.jsonl')


def test_malformed_lines_name_their_line(tmp_path):
    header = json.dumps({'header': True, 'seed': 8})
    record = DatasetRecord(features = (1.0, 1.0, 0.5, 0.02, 0.2) + (SENTINEL,) * 5, y = 0.06, model = 'gbm', s0_raw = 150.0, k_raw = 150.0)
    lines = [header, json.dumps(record.to_dict())]

    broken = tmp_path / 'broken.jsonl'
    broken.write_text('\n'.join(lines + ['{"op_type": 1']) + '\n')
    with pytest.raises(ValidationError, match = ':3:'):
        read_dataset(broken)

    partial = tmp_path / 'partial.jsonl'
    partial.write_text('\n'.join(lines[:1] + ['{"op_type": 1}']) + '\n')
    with pytest.raises(ValidationError, match = ':2:'):
        read_dataset(partial)

    listed = tmp_path / 'listed.jsonl'
    listed.write_text('\n'.join(lines[:1] + ['[1, 2, 3]']) + '\n')
    with pytest.raises(ValidationError, match = ':2:'):
        read_dataset(listed)


def test_non_numeric_record_field():
    row = {key: 0.5 for key in RECORD_KEYS}
    row.update(model = 'gbm', sigma = 'high')
    with pytest.raises(ValidationError):
        DatasetRecord.from_dict(row)
