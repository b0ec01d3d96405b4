"""Plot-ready and table-shaped CSV outputs."""
import math
import logging
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

from fourierpricer.errors import NumericError
from fourierpricer.offsets import OffsetKind, OptionKind, OptionSpec, eta, offset_value
from fourierpricer.quad_pricer import QuadratureConfig, price_single
from fourierpricer.tuner import Benchmark, TunerCase, nodes_for

LOGGER = logging.getLogger(__name__)

FLOAT_FORMAT = '%.17g'


def write_csv(frame: pd.DataFrame, path: str | Path) -> Path:
    """CSV with a header row and 17 significant digits"""
    path = Path(path)
    path.parent.mkdir(parents = True, exist_ok = True)
    frame.to_csv(path, index = False, float_format = FLOAT_FORMAT)
    LOGGER.info(f"Saved {len(frame)} rows to {path}")
    return path


def offset_curves(k_values: Sequence[float], r: float = 0.02, T: float = 0.25) -> pd.DataFrame:
    """Carr-Madan and smooth offsets across log-strikes for both option kinds"""
    k = np.asarray(k_values, dtype = float)
    frame = pd.DataFrame({'k': k})
    for kind in OptionKind:
        option = OptionSpec(kind = kind, strike = 1.0, s0 = 1.0, T = T, r = r)
        for offset in OffsetKind:
            frame[f"{offset.value}_{kind.value}"] = offset_value(offset, option, k)
    return frame


def eta_curves(cases: Sequence[TunerCase], z_values: Sequence[float]) -> pd.DataFrame:
    """|eta| under both offsets per case"""
    z = np.asarray(z_values, dtype = float)
    frames = []
    for case in cases:
        market = case.option.market
        frames.append(pd.DataFrame({
            'case': case.label,
            'z': z,
            'abs_eta_cm': np.abs(eta(OffsetKind.CARR_MADAN, case.option.kind, case.model, market, z)),
            'abs_eta_smooth': np.abs(eta(OffsetKind.SMOOTH, case.option.kind, case.model, market, z)),
        }))
    return pd.concat(frames, ignore_index = True)


def convergence_curves(
    cases: Sequence[TunerCase],
    benchmarks: Sequence[Benchmark],
    b_values: Sequence[float],
    iota: float = 1.6
) -> pd.DataFrame:
    """prices under both offsets as the truncation point grows"""
    rows = []
    for case, benchmark in zip(cases, benchmarks):
        for B in b_values:
            N = nodes_for(iota, B)
            if N < 2:
                continue
            row = {'case': case.label, 'B': B, 'N': N, 'benchmark': benchmark.price}
            for offset, column in ((OffsetKind.CARR_MADAN, 'cma_price'), (OffsetKind.SMOOTH, 'soa_price')):
                try:
                    row[column] = price_single(case.option, case.model, QuadratureConfig(offset, B, N)).price
                except NumericError as e:
                    LOGGER.warning(f"{case.label} {offset.value} at B = {B}: {e}")
                    row[column] = math.nan
            rows.append(row)
    return pd.DataFrame(rows, columns = ['case', 'B', 'N', 'cma_price', 'soa_price', 'benchmark'])


def performance_table(rows: Sequence[Mapping]) -> pd.DataFrame:
    """
    Surrogate accuracy and speed summary.

    Args:
        rows: mappings with algo, absolute, relative_bps and beta (time ratio to SOA)

    Returns:
        DataFrame adding improvement = 1 - beta
    """
    frame = pd.DataFrame(list(rows), columns = ['algo', 'absolute', 'relative_bps', 'beta'])
    frame['improvement'] = 1.0 - frame['beta']
    return frame


def loss_trace_frame(trace: Sequence[float]) -> pd.DataFrame:
    return pd.DataFrame({'epoch': np.arange(1, len(trace) + 1), 'mean_loss': np.asarray(trace, dtype = float)})


def cv_frame(kind: str, losses: Mapping[int, float]) -> pd.DataFrame:
    depths = sorted(losses)
    return pd.DataFrame({'kind': kind, 'max_depth': depths, 'cv_mse': [losses[d] for d in depths]})
