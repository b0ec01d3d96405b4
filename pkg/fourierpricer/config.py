import os
import json
import logging
from pathlib import Path
from typing import Any, Mapping, Optional

from dotenv import dotenv_values

from fourierpricer.errors import ValidationError

LOGGER = logging.getLogger(__name__)

# Environment variable prefix
ENV_PREFIX = 'FOURIERPRICER_'
LOG_LEVELS = ('DEBUG', 'INFO', 'WARNING', 'ERROR')

DEFAULTS: dict[str, Any] = {
    # Tuned quadrature configurations
    'soa_b': 40.0,
    'soa_n': 64,
    'cma_b': 360.0,
    'cma_n': 576,

    # Monte Carlo benchmarks
    'mc_paths': 1_000_000,
    'mc_steps_per_year': 512,
    'mc_batch_size': 100_000,

    # Tuner grid
    'tuner_b_min': 10.0,
    'tuner_b_max': 2000.0,
    'tuner_b_step': 10.0,
    'tuner_iota_min': 0.1,
    'tuner_iota_max': 5.0,
    'tuner_iota_step': 0.1,
    'tuner_threshold_bps': 2.0,

    # FFT ladder
    'fft_b': 40.0,
    'fft_n': 64,
    'otm_flag_threshold': 0.05,

    # MLP training
    'leaky_slope': 0.01,
    'batch_size': 256,
    'epochs': 3000,
    'learning_rate': 3e-6,
    'lr_decay': 0.1,
    'lr_decay_every': 500,
    'log_every': 100,

    # Tree ensembles
    'n_trees': 100,
    'rf_max_depth': 20,
    'gbdt_max_depth': 15,
    'subsample': 0.7,
    'shrinkage': 0.1,
    'bins': 256,
    'min_leaf': 1,
    'cv_folds': 3,

    # Timing
    'timing_repetitions': 100,
    'timing_warmups': 3,

    # Run
    'seed': 20250829,
    'workers': 1,
    'out_dir': 'runs',
    'log_level': 'INFO',
}


def _normalize_key(key: str) -> str:
    key = key.strip().lower().replace('-', '_')
    prefix = ENV_PREFIX.lower()
    if key.startswith(prefix):
        key = key[len(prefix):]
    return key


def _coerce(key: str, value: Any) -> Any:
    """coerce a raw value to the type of its default"""
    default = DEFAULTS[key]
    if value is None:
        return default
    try:
        if isinstance(default, bool):
            if isinstance(value, str):
                return value.strip().lower() in ('1', 'true', 'yes', 'on')
            return bool(value)
        if isinstance(default, int):
            if isinstance(value, str):
                value = value.strip()
            number = float(value)
            if number != int(number):
                raise ValueError(f"{value} is not an integer")
            return int(number)
        if isinstance(default, float):
            return float(value)
        if key == 'log_level':
            level = str(value).strip().upper()
            if level not in LOG_LEVELS:
                raise ValueError(f"expected one of {LOG_LEVELS}")
            return level
        return str(value)
    except (TypeError, ValueError) as e:
        raise ValidationError(f"Invalid value for '{key}': {value!r} ({e})")


def read_config_file(path: str | Path) -> dict[str, Any]:
    """
    Read a configuration file.

    Args:
        path: dotenv-style KEY=value file, or a run manifest (*.json) whose
            'config' section is replayed

    Returns:
        dict of normalized keys to raw values
    """
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"Config file not found: {path}")

    if path.suffix == '.json':
        with open(path, 'r') as f:
            manifest = json.load(f)
        raw = manifest.get('config', manifest)
    else:
        raw = dotenv_values(path)

    return {_normalize_key(key): value for key, value in raw.items()}


class Config:
    def __init__(
        self,
        overrides: Optional[Mapping[str, Any]] = None,
        config_file: Optional[str | Path] = None,
        environ: Optional[Mapping[str, str]] = None
    ):
        """
        Resolve configuration with precedence flags > config file > environment > defaults.

        Args:
            overrides: values from command-line flags (None entries are ignored)
            config_file: optional dotenv or manifest file
            environ: environment mapping, os.environ when omitted
        """
        environ = os.environ if environ is None else environ
        self.values: dict[str, Any] = dict(DEFAULTS)
        self.sources: dict[str, str] = {key: 'default' for key in DEFAULTS}

        # Environment
        for name, value in environ.items():
            if not name.startswith(ENV_PREFIX):
                continue
            key = _normalize_key(name)
            if key in DEFAULTS:
                self._set(key, value, 'env')

        # Config file
        if config_file is not None:
            for key, value in read_config_file(config_file).items():
                if key not in DEFAULTS:
                    raise ValidationError(f"Unknown config key '{key}' in {config_file}")
                self._set(key, value, 'file')

        # Flags
        for key, value in (overrides or {}).items():
            if value is None:
                continue
            key = _normalize_key(key)
            if key not in DEFAULTS:
                raise ValidationError(f"Unknown config key '{key}'")
            self._set(key, value, 'flag')

    def _set(self, key: str, value: Any, source: str):
        self.values[key] = _coerce(key, value)
        self.sources[key] = source

    def __getattr__(self, key: str) -> Any:
        values = self.__dict__.get('values')
        if values is not None and key in values:
            return values[key]
        raise AttributeError(key)

    def __getitem__(self, key: str) -> Any:
        return self.values[_normalize_key(key)]

    def as_dict(self) -> dict[str, Any]:
        return dict(self.values)
