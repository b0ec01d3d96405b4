"""Grid search for the smallest (B, N) pair meeting a mean relative error threshold."""
import json
import math
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from fourierpricer.errors import DivisionGuardError, ExhaustedGridError, NumericError, ValidationError
from fourierpricer.levy_models import EVGP, GBM, Heston, ModelSpec
from fourierpricer.mc_oracle import McConfig, mc_price
from fourierpricer.offsets import OffsetKind, OptionKind, OptionSpec
from fourierpricer.quad_pricer import QuadratureConfig, closed_form_bs, price_single

LOGGER = logging.getLogger(__name__)

BPS = 1e4


@dataclass(frozen = True)
class TunerGrid:
    b_min: float = 10.0
    b_max: float = 2000.0
    b_step: float = 10.0
    iota_min: float = 0.1
    iota_max: float = 5.0
    iota_step: float = 0.1
    threshold_bps: float = 2.0

    def __post_init__(self):
        if not self.b_step > 0 or self.b_min < self.b_step:
            raise ValidationError(f"Tuner grid needs b_min >= b_step > 0, got {self.b_min}, {self.b_step}")
        if not self.iota_min > 0 or not self.iota_step > 0:
            raise ValidationError("Tuner grid needs iota_min > 0 and iota_step > 0")
        if self.b_max < self.b_min or self.iota_max < self.iota_min:
            raise ValidationError("Tuner grid is empty")

    @staticmethod
    def _axis(low: float, high: float, step: float) -> list[float]:
        count = int(math.floor((high - low) / step + 1e-9)) + 1
        return [round(low + i * step, 10) for i in range(count)]

    @property
    def b_values(self) -> list[float]:
        return self._axis(self.b_min, self.b_max, self.b_step)

    @property
    def iota_values(self) -> list[float]:
        return self._axis(self.iota_min, self.iota_max, self.iota_step)


def nodes_for(iota: float, B: float) -> int:
    """floor(iota * B) rounded down to even"""
    n = int(math.floor(iota * B + 1e-9))
    return n - n % 2


@dataclass(frozen = True)
class TunerCase:
    label: str
    option: OptionSpec
    model: ModelSpec


@dataclass(frozen = True)
class Benchmark:
    price: float
    provenance: str


@dataclass(frozen = True)
class TraceRow:
    B: float
    iota: float
    N: int
    mean_error_bps: float
    passed: bool


@dataclass
class TunerReport:
    offset: str
    B: float
    iota: float
    N: int
    mean_error_bps: float
    case_errors_bps: list[float]
    case_labels: list[str]
    provenance: list[str]
    threshold_bps: float
    trace: list[TraceRow] = field(default_factory = list)

    def to_dict(self) -> dict:
        data = asdict(self)
        data.pop('trace')
        return data

    def trace_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(row) for row in self.trace], columns = list(TraceRow.__annotations__))


def reference_cases() -> list[TunerCase]:
    """European and digital calls on the reference contract under the three reference models"""
    models = [
        GBM(sigma = 0.25),
        Heston(kappa = 2.30, theta = 0.36, sigma = 0.10, rho = 0.60, v0 = 0.49),
        EVGP(theta = 0.10, sigma = 0.20, nu = 0.30),
    ]
    cases = []
    for kind in (OptionKind.EUROPEAN, OptionKind.DIGITAL):
        for model in models:
            option = OptionSpec(kind = kind, strike = 100.0, s0 = 150.0, T = 0.25, r = 0.02)
            cases.append(TunerCase(label = f"{kind.value}-{model.name}", option = option, model = model))
    return cases


def benchmark_prices(cases: Sequence[TunerCase], mc_cfg: Optional[McConfig] = None) -> list[Benchmark]:
    """closed form for GBM, Monte Carlo otherwise"""
    mc_cfg = mc_cfg or McConfig()
    benchmarks = []
    for case in cases:
        if isinstance(case.model, GBM):
            price = closed_form_bs(case.option, case.model.sigma)
            benchmarks.append(Benchmark(price = price, provenance = 'closed-form'))
        else:
            result = mc_price(case.option, case.model, mc_cfg)
            provenance = (
                f"mc(paths={mc_cfg.paths}, seed={mc_cfg.seed}, "
                f"steps_per_year={mc_cfg.steps_per_year}, std_error={result.std_error:.6g})"
            )
            benchmarks.append(Benchmark(price = result.price, provenance = provenance))
        LOGGER.info(f"Benchmark {case.label}: {benchmarks[-1].price:.10g} ({benchmarks[-1].provenance})")
    return benchmarks


def case_errors(cfg: QuadratureConfig, cases: Sequence[TunerCase], benchmarks: Sequence[float]) -> list[float]:
    """relative errors |V_numeric / V_benchmark - 1| per case"""
    if len(cases) != len(benchmarks):
        raise ValidationError(f"Got {len(cases)} cases but {len(benchmarks)} benchmarks")
    errors = []
    for case, benchmark in zip(cases, benchmarks):
        benchmark = benchmark.price if isinstance(benchmark, Benchmark) else float(benchmark)
        if not benchmark > 0:
            raise DivisionGuardError(f"Benchmark for {case.label} must be positive, got {benchmark}")
        price = price_single(case.option, case.model, cfg).price
        errors.append(abs(price / benchmark - 1.0))
    return errors


def _evaluate_cell(args: tuple) -> tuple[float, list[float]]:
    offset, B, N, cases, prices = args
    try:
        errors = case_errors(QuadratureConfig(offset = offset, B = B, N = N), cases, prices)
    except NumericError as e:
        LOGGER.debug(f"Cell B = {B}, N = {N} failed: {e}")
        return math.inf, [math.inf] * len(cases)
    return float(np.mean(errors)) * BPS, [e * BPS for e in errors]


def tune(
    offset: OffsetKind,
    grid: TunerGrid,
    cases: Optional[Sequence[TunerCase]] = None,
    benchmarks: Optional[Sequence[Benchmark]] = None,
    mc_cfg: Optional[McConfig] = None,
    workers: int = 1
) -> TunerReport:
    """
    Scan B ascending (outer) and iota ascending (inner), returning the first
    configuration whose mean error is within the threshold.

    Args:
        offset: Carr-Madan or smooth
        grid: scan ranges and threshold
        cases: option/model pairs, the six reference cases when omitted
        benchmarks: prices per case, computed with benchmark_prices when omitted
        mc_cfg: Monte Carlo settings for computed benchmarks
        workers: processes evaluating cells; the result equals the sequential scan

    Returns:
        TunerReport with the scan trace up to the selected cell
    """
    cases = list(cases) if cases is not None else reference_cases()
    benchmarks = list(benchmarks) if benchmarks is not None else benchmark_prices(cases, mc_cfg)
    prices = [b.price if isinstance(b, Benchmark) else float(b) for b in benchmarks]
    provenance = [b.provenance if isinstance(b, Benchmark) else 'user' for b in benchmarks]

    cells = []
    for B in grid.b_values:
        for iota in grid.iota_values:
            N = nodes_for(iota, B)
            if N >= 2:
                cells.append((B, iota, N))

    trace: list[TraceRow] = []
    best = math.inf
    last_iota = grid.iota_values[-1]
    chunk = max(1, workers * 4)
    executor = ProcessPoolExecutor(max_workers = workers) if workers > 1 else None
    try:
        for start in range(0, len(cells), chunk):
            block = cells[start:start + chunk]
            tasks = [(offset, B, N, cases, prices) for B, _, N in block]
            results = executor.map(_evaluate_cell, tasks) if executor else map(_evaluate_cell, tasks)

            for (B, iota, N), (mean_bps, errors_bps) in zip(block, results):
                passed = mean_bps <= grid.threshold_bps
                trace.append(TraceRow(B = B, iota = iota, N = N, mean_error_bps = mean_bps, passed = passed))
                best = min(best, mean_bps)
                if passed:
                    LOGGER.info(f"Selected B = {B}, iota = {iota}, N = {N} with mean error {mean_bps:.4f} bps")
                    return TunerReport(
                        offset = offset.value,
                        B = B,
                        iota = iota,
                        N = N,
                        mean_error_bps = mean_bps,
                        case_errors_bps = errors_bps,
                        case_labels = [case.label for case in cases],
                        provenance = provenance,
                        threshold_bps = grid.threshold_bps,
                        trace = trace
                    )
                if iota == last_iota:
                    LOGGER.info(f"Scanned B = {B}, best mean error so far {best:.4f} bps")
    finally:
        if executor:
            executor.shutdown()

    raise ExhaustedGridError(
        f"No configuration reached {grid.threshold_bps} bps, best was {best:.4f} bps",
        best_error_bps = best
    )


def save_report(report: TunerReport, out_dir: str | Path) -> tuple[Path, Path]:
    """write the report as JSON and the scan trace as CSV"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents = True, exist_ok = True)
    report_path = out_dir / f"tuner_{report.offset}.json"
    trace_path = out_dir / f"tuner_{report.offset}_trace.csv"

    with open(report_path, 'w') as f:
        json.dump(report.to_dict(), f, indent = 2)
    report.trace_frame().to_csv(trace_path, index = False, float_format = '%.17g')

    LOGGER.info(f"Saved tuner report to {report_path} and trace to {trace_path}")
    return report_path, trace_path
