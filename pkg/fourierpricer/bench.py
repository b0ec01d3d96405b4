"""Error metrics, wall-clock timing and through-origin regressions."""
import os
import json
import math
import time
import logging
import platform
from contextlib import contextmanager
from dataclasses import asdict, dataclass
from functools import lru_cache
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import pandas as pd
import scipy
import scipy.stats

from fourierpricer.errors import ValidationError

LOGGER = logging.getLogger(__name__)

RELATIVE_FLOOR = 1e-4
WARMUPS = 3


@dataclass(frozen = True)
class ErrorMetrics:
    absolute: float
    relative: float
    n: int
    excluded: int

    @property
    def relative_bps(self) -> float:
        return self.relative * 1e4


@dataclass(frozen = True)
class TimingSample:
    label: str
    seconds: float
    repetition: int
    fingerprint: str


@dataclass(frozen = True)
class OriginRegressionResult:
    beta: float
    std_error: float
    t_stat: float
    p_value: float
    ci_low: float
    ci_high: float
    n: int
    exact_fit: bool = False


def abs_rel_errors(predicted: Sequence[float], actual: Sequence[float], floor: float = RELATIVE_FLOOR) -> ErrorMetrics:
    """
    Root-mean-square error over all records and mean |pred / actual - 1|
    over records whose actual value is at least floor.
    """
    predicted = np.asarray(predicted, dtype = float)
    actual = np.asarray(actual, dtype = float)
    if predicted.size == 0 or actual.size == 0:
        raise ValidationError("Error metrics need non-empty inputs")
    if predicted.shape != actual.shape:
        raise ValidationError(f"Length mismatch: {predicted.shape} vs {actual.shape}")

    absolute = math.sqrt(float(np.mean((predicted - actual) ** 2)))
    kept = actual >= floor
    if not kept.any():
        raise ValidationError(f"No actual values at or above {floor} for the relative error")
    relative = float(np.mean(np.abs(predicted[kept] / actual[kept] - 1.0)))
    return ErrorMetrics(absolute = absolute, relative = relative, n = int(actual.size), excluded = int((~kept).sum()))


def ols_origin(x: Sequence[float], y: Sequence[float]) -> OriginRegressionResult:
    """least squares y = beta * x without intercept, t inference with n - 1 degrees of freedom"""
    x = np.asarray(x, dtype = float)
    y = np.asarray(y, dtype = float)
    n = x.size
    if n < 2 or y.size != n:
        raise ValidationError(f"Regression needs at least 2 paired observations, got {n} and {y.size}")
    sxx = float(np.sum(x * x))
    if not sxx > 0:
        raise ValidationError("Regression regressor is identically zero")

    beta = float(np.sum(x * y)) / sxx
    residual = y - beta * x
    std_error = math.sqrt(float(np.sum(residual ** 2)) / (n - 1) / sxx)
    dof = n - 1

    if std_error == 0:
        t_stat = math.copysign(math.inf, beta) if beta != 0 else 0.0
        p_value = 0.0 if beta != 0 else 1.0
        return OriginRegressionResult(
            beta = beta, std_error = 0.0, t_stat = t_stat, p_value = p_value,
            ci_low = beta, ci_high = beta, n = n, exact_fit = True
        )

    t_stat = beta / std_error
    p_value = float(2.0 * scipy.stats.t.sf(abs(t_stat), dof))
    half_width = float(scipy.stats.t.ppf(0.975, dof)) * std_error
    return OriginRegressionResult(
        beta = beta, std_error = std_error, t_stat = t_stat, p_value = p_value,
        ci_low = beta - half_width, ci_high = beta + half_width, n = n
    )


@lru_cache(maxsize = 1)
def machine_fingerprint() -> str:
    return '; '.join([
        platform.platform(),
        platform.machine(),
        platform.processor() or 'unknown-cpu',
        f"python {platform.python_version()}",
        f"numpy {np.__version__}",
        f"scipy {scipy.__version__}",
        f"cpus {os.cpu_count()}",
    ])


@contextmanager
def pinned_to_one_cpu():
    """pin the process to its first allowed CPU where the platform supports it"""
    if not hasattr(os, 'sched_getaffinity'):
        yield
        return
    original = os.sched_getaffinity(0)
    try:
        os.sched_setaffinity(0, {min(original)})
    except OSError as e:
        LOGGER.warning(f"Could not pin timing run to one CPU: {e}")
    try:
        yield
    finally:
        os.sched_setaffinity(0, original)


def time_workload(label: str, workload: Callable[[], object], repetitions: int, warmups: int = WARMUPS) -> list[TimingSample]:
    """
    Time a workload on the monotonic clock.

    Args:
        label: name recorded on each sample
        workload: zero-argument callable
        repetitions: measured runs
        warmups: discarded runs before measuring

    Returns:
        one TimingSample per measured run
    """
    if repetitions < 1:
        raise ValidationError(f"repetitions must be >= 1, got {repetitions}")

    fingerprint = machine_fingerprint()
    samples = []
    with pinned_to_one_cpu():
        for _ in range(warmups):
            workload()
        for repetition in range(repetitions):
            start = time.perf_counter_ns()
            workload()
            # Clock resolution floor of one nanosecond
            elapsed = max(time.perf_counter_ns() - start, 1)
            samples.append(TimingSample(label = label, seconds = elapsed / 1e9, repetition = repetition, fingerprint = fingerprint))

    LOGGER.info(f"Timed {label}: mean {np.mean([s.seconds for s in samples]):.6g} s over {repetitions} runs")
    return samples


def compare_timings(baseline: Sequence[TimingSample], candidate: Sequence[TimingSample]) -> OriginRegressionResult:
    """regress candidate times on baseline times, paired by repetition"""
    if len(baseline) != len(candidate):
        raise ValidationError(f"Timing series differ in length: {len(baseline)} vs {len(candidate)}")
    baseline = sorted(baseline, key = lambda s: s.repetition)
    candidate = sorted(candidate, key = lambda s: s.repetition)
    return ols_origin([s.seconds for s in baseline], [s.seconds for s in candidate])


def timing_frame(samples: Sequence[TimingSample]) -> pd.DataFrame:
    return pd.DataFrame([asdict(s) for s in samples], columns = list(TimingSample.__annotations__))


def save_regression(result: OriginRegressionResult, path: str | Path, labels: tuple[str, str]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents = True, exist_ok = True)
    payload = dict(asdict(result), baseline = labels[0], candidate = labels[1])
    with open(path, 'w') as f:
        json.dump(payload, f, indent = 2)
    LOGGER.info(f"Saved regression {labels[1]} ~ {labels[0]} to {path}")
    return path
