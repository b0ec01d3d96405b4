"""Random contract generation, feature encoding and SOA labelling.

Features are a 10-slot vector [op_type, k_prime, t, r, sigma, kappa, theta,
rho, v0, nu]; slots a model does not use hold the sentinel -1. Labels are
normalized prices (s0 = 1).
"""
import json
import math
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterator, Optional, Sequence

import numpy as np
import pandas as pd

from fourierpricer import __version__
from fourierpricer.errors import DomainError, PricingError, ValidationError
from fourierpricer.levy_models import EVGP, GBM, Heston, ModelSpec
from fourierpricer.offsets import OffsetKind, OptionKind, OptionSpec
from fourierpricer.quad_pricer import QuadratureConfig, price_single

LOGGER = logging.getLogger(__name__)

FEATURE_NAMES = ('op_type', 'k_prime', 't', 'r', 'sigma', 'kappa', 'theta', 'rho', 'v0', 'nu')
RECORD_KEYS = FEATURE_NAMES + ('y', 'model', 's0_raw', 'k_raw')
SENTINEL = -1.0
MODEL_NAMES = ('gbm', 'heston', 'evgp')

# Floors keeping the smooth offset and the transforms well defined
VOL_FLOOR = 1e-3
MATURITY_FLOOR = 1.0 / 365.0
MAX_RESAMPLES = 100
LABEL_TOLERANCE = 1e-6


@dataclass(frozen = True)
class SamplingBounds:
    s0: tuple[float, float] = (140.0, 160.0)
    k_ratio: tuple[float, float] = (0.95, 1.05)
    t: tuple[float, float] = (0.0, 1.0)
    r: tuple[float, float] = (0.0, 0.05)
    sigma: tuple[float, float] = (0.0, 0.2)
    kappa: tuple[float, float] = (0.0, 0.2)
    theta: tuple[float, float] = (0.0, 0.2)
    rho: tuple[float, float] = (0.0, 0.2)
    v0: tuple[float, float] = (0.0, 0.2)
    nu: tuple[float, float] = (0.0, 0.2)
    models: tuple[str, ...] = MODEL_NAMES

    def __post_init__(self):
        for name in ('s0', 'k_ratio', 't', 'r', 'sigma', 'kappa', 'theta', 'rho', 'v0', 'nu'):
            low, high = getattr(self, name)
            if not low <= high:
                raise ValidationError(f"Bound '{name}' needs lower <= upper, got [{low}, {high}]")
            object.__setattr__(self, name, (float(low), float(high)))
        if not self.models or any(m not in MODEL_NAMES for m in self.models):
            raise ValidationError(f"Models must be drawn from {MODEL_NAMES}, got {self.models}")

    def feature_ranges(self) -> dict[str, tuple[float, float]]:
        """allowed range per feature slot, floors included"""
        def floored(bounds: tuple[float, float], floor: float) -> tuple[float, float]:
            return (max(bounds[0], floor), max(bounds[1], floor))

        return {
            'op_type': (0.0, 1.0),
            'k_prime': self.k_ratio,
            't': floored(self.t, MATURITY_FLOOR),
            'r': self.r,
            'sigma': floored(self.sigma, VOL_FLOOR),
            'kappa': floored(self.kappa, VOL_FLOOR),
            'theta': (min(self.theta[0], VOL_FLOOR), max(self.theta[1], VOL_FLOOR)),
            'rho': self.rho,
            'v0': floored(self.v0, VOL_FLOOR),
            'nu': floored(self.nu, VOL_FLOOR),
        }


@dataclass(frozen = True)
class DatasetRecord:
    features: tuple[float, ...]
    y: float
    model: str
    s0_raw: float
    k_raw: float

    def to_dict(self) -> dict:
        row = dict(zip(FEATURE_NAMES, self.features))
        row.update(y = self.y, model = self.model, s0_raw = self.s0_raw, k_raw = self.k_raw)
        return row

    @classmethod
    def from_dict(cls, row: dict) -> 'DatasetRecord':
        missing = [key for key in RECORD_KEYS if key not in row]
        if missing:
            raise ValidationError(f"Record is missing keys {missing}")
        try:
            return cls(
                features = tuple(float(row[key]) for key in FEATURE_NAMES),
                y = float(row['y']),
                model = str(row['model']),
                s0_raw = float(row['s0_raw']),
                k_raw = float(row['k_raw'])
            )
        except (TypeError, ValueError) as e:
            raise ValidationError(f"Record has a non-numeric field ({e})")


@dataclass
class GenerateSummary:
    path: Path
    written: int
    skipped: int
    header: dict = field(default_factory = dict)


def _uniform(rng: np.random.Generator, bounds: tuple[float, float], floor: float = -math.inf) -> float:
    return max(float(rng.uniform(bounds[0], bounds[1])), floor)


def sample_contract(bounds: SamplingBounds, rng: np.random.Generator) -> tuple[OptionSpec, ModelSpec]:
    """
    Draw one contract and model.

    Args:
        bounds: per-attribute uniform ranges
        rng: numpy generator

    Returns:
        (option, model) pair; EVGP draws are resampled until admissible
    """
    kind = OptionKind.EUROPEAN if rng.random() < 0.5 else OptionKind.DIGITAL
    s0 = _uniform(rng, bounds.s0)
    strike = _uniform(rng, bounds.k_ratio) * s0
    T = _uniform(rng, bounds.t, MATURITY_FLOOR)
    r = _uniform(rng, bounds.r)
    option = OptionSpec(kind = kind, strike = strike, s0 = s0, T = T, r = r)

    name = bounds.models[int(rng.integers(len(bounds.models)))]
    if name == 'gbm':
        return option, GBM(sigma = _uniform(rng, bounds.sigma, VOL_FLOOR))
    if name == 'heston':
        return option, Heston(
            kappa = _uniform(rng, bounds.kappa, VOL_FLOOR),
            theta = _uniform(rng, bounds.theta, VOL_FLOOR),
            sigma = _uniform(rng, bounds.sigma, VOL_FLOOR),
            rho = _uniform(rng, bounds.rho),
            v0 = _uniform(rng, bounds.v0, VOL_FLOOR)
        )

    for _ in range(MAX_RESAMPLES):
        theta = _uniform(rng, bounds.theta)
        sigma = _uniform(rng, bounds.sigma, VOL_FLOOR)
        nu = _uniform(rng, bounds.nu, VOL_FLOOR)
        if 1.0 - theta * nu - 0.5 * sigma ** 2 * nu > 0:
            return option, EVGP(theta = theta, sigma = sigma, nu = nu)
    raise DomainError(f"No admissible EVGP draw in {MAX_RESAMPLES} attempts")


def encode(opt: OptionSpec, model: ModelSpec) -> tuple[float, ...]:
    """10-slot feature vector with -1 in slots the model does not use"""
    slots = dict.fromkeys(FEATURE_NAMES, SENTINEL)
    slots.update(
        op_type = 1.0 if opt.kind is OptionKind.EUROPEAN else 0.0,
        k_prime = opt.strike / opt.s0,
        t = opt.T,
        r = opt.r,
        sigma = model.sigma
    )
    if isinstance(model, Heston):
        slots.update(kappa = model.kappa, theta = model.theta, rho = model.rho, v0 = model.v0)
    elif isinstance(model, EVGP):
        slots.update(theta = model.theta, nu = model.nu)
    return tuple(float(slots[name]) for name in FEATURE_NAMES)


def decode(features: Sequence[float], s0: float = 1.0) -> tuple[OptionSpec, ModelSpec]:
    """inverse of encode; the model is read from which sentinel slots are filled"""
    features = validate_features(features)
    slots = dict(zip(FEATURE_NAMES, features))

    kind = OptionKind.EUROPEAN if slots['op_type'] == 1.0 else OptionKind.DIGITAL
    option = OptionSpec(kind = kind, strike = slots['k_prime'] * s0, s0 = s0, T = slots['t'], r = slots['r'])

    if slots['nu'] != SENTINEL:
        model = EVGP(theta = slots['theta'], sigma = slots['sigma'], nu = slots['nu'])
    elif slots['kappa'] != SENTINEL:
        model = Heston(
            kappa = slots['kappa'], theta = slots['theta'], sigma = slots['sigma'],
            rho = slots['rho'], v0 = slots['v0']
        )
    else:
        model = GBM(sigma = slots['sigma'])
    return option, model


def validate_features(features: Sequence[float]) -> tuple[float, ...]:
    values = tuple(float(v) for v in features)
    if len(values) != len(FEATURE_NAMES):
        raise ValidationError(f"Feature vector needs {len(FEATURE_NAMES)} slots, got {len(values)}")
    if not all(math.isfinite(v) for v in values):
        raise ValidationError("Feature vector contains non-finite values")
    if values[0] not in (0.0, 1.0):
        raise ValidationError(f"op_type must be 0 or 1, got {values[0]}")
    return values


def rescale_price(y: float, s0: float, op_type: float) -> float:
    """actual price from a normalized one: s0*y for European, y for digital"""
    return ((s0 - 1.0) * op_type + 1.0) * y


def _label_upper(opt: OptionSpec) -> float:
    return 1.0 if opt.kind is OptionKind.EUROPEAN else math.exp(-opt.r * opt.T)


def label_contract(opt: OptionSpec, model: ModelSpec, soa_cfg: QuadratureConfig) -> DatasetRecord:
    """price with the smooth offset and check the label range"""
    y = price_single(opt, model, soa_cfg).normalized_price
    upper = _label_upper(opt)
    if not -LABEL_TOLERANCE <= y <= upper + LABEL_TOLERANCE:
        raise ValidationError(f"Label {y:.6g} outside [0, {upper:.6g}] for {model.name}")
    return DatasetRecord(features = encode(opt, model), y = y, model = model.name, s0_raw = opt.s0, k_raw = opt.strike)


def _shard_rng(seed: int, shard: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key = (shard,)))


def _generate_shard(args: tuple) -> tuple[list[dict], int]:
    shard, size, bounds, seed, soa_cfg = args
    rng = _shard_rng(seed, shard)
    rows, skipped = [], 0
    for index in range(size):
        try:
            opt, model = sample_contract(bounds, rng)
            rows.append(label_contract(opt, model, soa_cfg).to_dict())
        except PricingError as e:
            LOGGER.error(f"Skipping record {index} of shard {shard}: {e}")
            skipped += 1
    return rows, skipped


def generate(
    n: int,
    bounds: SamplingBounds,
    seed: int,
    out_path: str | Path,
    soa_cfg: Optional[QuadratureConfig] = None,
    shard_size: int = 10_000,
    workers: int = 1
) -> GenerateSummary:
    """
    Stream n labelled records to a JSON-lines file.

    The first line is a header; each shard draws from SeedSequence(seed, spawn_key = (shard,))
    and shards are written in order, so the file does not depend on the worker count.
    """
    if n < 0:
        raise ValidationError(f"Record count must be non-negative, got {n}")
    soa_cfg = soa_cfg or QuadratureConfig(offset = OffsetKind.SMOOTH, B = 40.0, N = 64)
    if soa_cfg.offset is not OffsetKind.SMOOTH:
        raise ValidationError("Dataset labels use the smooth offset")

    out_path = Path(out_path)
    out_path.parent.mkdir(parents = True, exist_ok = True)
    header = {
        'header': True,
        'generator_version': __version__,
        'seed': seed,
        'n_requested': n,
        'shard_size': shard_size,
        'bounds': asdict(bounds),
        'model_mix': {name: 1.0 / len(bounds.models) for name in bounds.models},
        'soa_config': {'offset': soa_cfg.offset.value, 'B': soa_cfg.B, 'N': soa_cfg.N},
        'feature_names': list(FEATURE_NAMES),
    }

    shards = [
        (shard, min(shard_size, n - start), bounds, seed, soa_cfg)
        for shard, start in enumerate(range(0, n, shard_size))
    ]

    written, skipped = 0, 0
    executor = ProcessPoolExecutor(max_workers = workers) if workers > 1 and len(shards) > 1 else None
    try:
        results = executor.map(_generate_shard, shards) if executor else map(_generate_shard, shards)
        with open(out_path, 'w') as f:
            f.write(json.dumps(header) + '\n')
            for (shard, *_), (rows, shard_skipped) in zip(shards, results):
                for row in rows:
                    f.write(json.dumps(row) + '\n')
                written += len(rows)
                skipped += shard_skipped
                LOGGER.info(f"Wrote shard {shard} ({len(rows)} records, {shard_skipped} skipped)")
    finally:
        if executor:
            executor.shutdown()

    LOGGER.info(f"Saved {written} records to {out_path} ({skipped} skipped)")
    return GenerateSummary(path = out_path, written = written, skipped = skipped, header = header)


def parse_json_line(line: str, path: str | Path, line_no: int) -> Any:
    try:
        return json.loads(line)
    except json.JSONDecodeError as e:
        raise ValidationError(f"{path}:{line_no}: invalid JSON ({e.msg})")


def iter_records(path: str | Path) -> Iterator[DatasetRecord]:
    if not Path(path).exists():
        raise ValidationError(f"Dataset not found: {path}")
    with open(path, 'r') as f:
        for line_no, line in enumerate(f, start = 1):
            line = line.strip()
            if not line:
                continue
            row = parse_json_line(line, path, line_no)
            if not isinstance(row, dict):
                raise ValidationError(f"{path}:{line_no}: expected a JSON object")
            if row.get('header'):
                continue
            try:
                yield DatasetRecord.from_dict(row)
            except ValidationError as e:
                raise ValidationError(f"{path}:{line_no}: {e}")


def read_header(path: str | Path) -> dict:
    if not Path(path).exists():
        raise ValidationError(f"Dataset not found: {path}")
    with open(path, 'r') as f:
        first = f.readline().strip()
    header = parse_json_line(first, path, 1) if first else {}
    if not isinstance(header, dict) or not header.get('header'):
        raise ValidationError(f"{path} has no dataset header")
    return header


def read_dataset(path: str | Path) -> tuple[np.ndarray, np.ndarray, list[DatasetRecord]]:
    """feature matrix, normalized targets and records"""
    records = list(iter_records(path))
    X = np.array([r.features for r in records], dtype = float).reshape(-1, len(FEATURE_NAMES))
    y = np.array([r.y for r in records], dtype = float)
    return X, y, records


def validate_records(records: Sequence[DatasetRecord], bounds: SamplingBounds) -> list[str]:
    """problems found in a bulk pass over records, empty when all are valid"""
    ranges = bounds.feature_ranges()
    problems = []
    for index, record in enumerate(records):
        for name, value in zip(FEATURE_NAMES, record.features):
            low, high = ranges[name]
            if value == SENTINEL and name not in ('op_type', 'k_prime', 't', 'r', 'sigma'):
                continue
            if not low - 1e-12 <= value <= high + 1e-12:
                problems.append(f"record {index}: {name} = {value} outside [{low}, {high}]")
        op_type, t, r = record.features[0], record.features[2], record.features[3]
        upper = 1.0 if op_type == 1.0 else math.exp(-r * t)
        if not -LABEL_TOLERANCE <= record.y <= upper + LABEL_TOLERANCE:
            problems.append(f"record {index}: label {record.y} outside [0, {upper}]")
    return problems


def export_parquet(path: str | Path, out_path: str | Path) -> Path:
    """write the records of a JSON-lines dataset as parquet"""
    records = list(iter_records(path))
    frame = pd.DataFrame([r.to_dict() for r in records], columns = list(RECORD_KEYS))
    out_path = Path(out_path)
    frame.to_parquet(out_path, index = False)
    LOGGER.info(f"Saved {len(frame)} records to {out_path}")
    return out_path
