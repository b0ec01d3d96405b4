"""Strike-ladder pricing with a single FFT.

All options in a ladder share kind, spot, rate and maturity. With N nodes,
dz = B / (N - 1) and dk = 2*pi / (N * dz), the inverse transforms on the
log-strike grid k_n = k_lower + n * dk form one N-point DFT.
"""
import math
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd
from scipy import fft as sp_fft

from fourierpricer.errors import DomainError, GridTooCoarseError, ValidationError
from fourierpricer.levy_models import MarketSpec, ModelSpec
from fourierpricer.offsets import OffsetKind, OptionKind, OptionSpec, eta, offset_value, shifted_origin
from fourierpricer.quad_pricer import QuadratureConfig, price_many

LOGGER = logging.getLogger(__name__)

# Strikes with a normalized price below this level are flagged as unstable
OTM_FLAG_THRESHOLD = 0.05

# Rows per block in the brute-force DFT
DFT_BLOCK = 256


@dataclass(frozen = True)
class StrikeLadder:
    kind: OptionKind
    s0: float
    r: float
    T: float
    strikes: tuple[float, ...]

    def __post_init__(self):
        if not isinstance(self.kind, OptionKind):
            object.__setattr__(self, 'kind', OptionKind.parse(self.kind))
        strikes = tuple(float(k) for k in self.strikes)
        if not strikes:
            raise ValidationError("Strike ladder needs at least one strike")
        for strike in strikes:
            if not (math.isfinite(strike) and strike > 0):
                raise DomainError(f"Strikes must be finite and positive, got {strike}")
        object.__setattr__(self, 'strikes', strikes)
        MarketSpec(r = self.r, T = self.T, s0 = self.s0)

    @property
    def market(self) -> MarketSpec:
        return MarketSpec(r = self.r, T = self.T, s0 = self.s0)

    @property
    def log_strikes(self) -> np.ndarray:
        return np.log(np.asarray(self.strikes) / self.s0)

    def option(self, strike: float) -> OptionSpec:
        return OptionSpec(kind = self.kind, strike = strike, s0 = self.s0, T = self.T, r = self.r)

    @classmethod
    def from_csv(cls, path: str | Path, kind: OptionKind, s0: float, r: float, T: float) -> 'StrikeLadder':
        """read one strike per row, with an optional 'strike' header"""
        if not Path(path).exists():
            raise ValidationError(f"Ladder file not found: {path}")
        frame = pd.read_csv(path, header = None, comment = '#')
        column = pd.to_numeric(frame.iloc[:, 0], errors = 'coerce')
        if column.isna().iloc[0] and str(frame.iloc[0, 0]).strip().lower() == 'strike':
            column = column.iloc[1:]
        if column.isna().any():
            raise ValidationError(f"Non-numeric strike in {path}")
        return cls(kind = kind, s0 = s0, r = r, T = T, strikes = tuple(column.to_numpy(dtype = float)))


@dataclass(frozen = True)
class FftGrid:
    B: float
    N: int
    dz: float
    dk: float
    k_lower: float
    k_min: float
    k_max: float

    @property
    def k_upper(self) -> float:
        return self.k_lower + (self.N - 1) * self.dk

    @property
    def z_nodes(self) -> np.ndarray:
        return self.dz * np.arange(self.N)

    @property
    def k_nodes(self) -> np.ndarray:
        return self.k_lower + self.dk * np.arange(self.N)


@dataclass(frozen = True)
class FftResult:
    grid: FftGrid
    terms: np.ndarray
    vhat: np.ndarray
    grid_normalized: np.ndarray
    normalized: np.ndarray
    prices: np.ndarray
    flags: np.ndarray


def grid_span(B: float, N: int) -> float:
    """(N - 1) * dk, the log-strike range a grid covers"""
    return (N - 1) ** 2 / N * (2.0 * math.pi / B)


def minimal_nodes(B: float, width: float) -> int:
    """smallest N with grid_span(B, N) > width"""
    n = 2
    while grid_span(B, n) <= width:
        n += 1
    return n


def build_grid(ladder: StrikeLadder, B: float, N: int, k_lower: Optional[float] = None) -> FftGrid:
    """
    Couple the frequency and log-strike grids for a ladder.

    Args:
        ladder: strikes to cover
        B: truncation point
        N: node count
        k_lower: expert override of the lower log-strike bound, symmetric by default

    Returns:
        FftGrid covering every ladder log-strike
    """
    if not (math.isfinite(B) and B > 0):
        raise ValidationError(f"Truncation point must satisfy B > 0, got B = {B}")
    if int(N) != N or N < 2:
        raise ValidationError(f"FFT grid needs N >= 2 nodes, got N = {N}")
    N = int(N)

    log_strikes = ladder.log_strikes
    k_min, k_max = float(log_strikes.min()), float(log_strikes.max())
    span = grid_span(B, N)
    if not span > k_max - k_min:
        needed = minimal_nodes(B, k_max - k_min)
        raise GridTooCoarseError(
            f"Grid with B = {B}, N = {N} spans {span:.6g} < {k_max - k_min:.6g}, needs N >= {needed}",
            minimal_n = needed
        )

    if k_lower is None:
        k_lower = 0.5 * (k_min + k_max - span)
    elif not (k_lower < k_min and k_lower + span > k_max):
        raise ValidationError(f"k_lower = {k_lower} does not cover [{k_min}, {k_max}]")

    dz = B / (N - 1)
    return FftGrid(B = B, N = N, dz = dz, dk = 2.0 * math.pi / (N * dz), k_lower = k_lower, k_min = k_min, k_max = k_max)


def fft_weights(N: int) -> np.ndarray:
    """Simpson-pattern weights 1/3, 4/3, 2/3, 4/3, ... for any node count"""
    j = np.arange(N)
    weights = (3.0 + (-1.0) ** (j + 1)) / 3.0
    weights[0] = 1.0 / 3.0
    return weights


def fft_terms(ladder: StrikeLadder, model: ModelSpec, offset: OffsetKind, grid: FftGrid) -> np.ndarray:
    """the sequence x_j whose DFT gives the inverse transforms on the grid"""
    z = grid.z_nodes
    z_eval = z.copy()
    z_eval[0] = shifted_origin(grid.dz)
    values = eta(offset, ladder.kind, model, ladder.market, z_eval)
    return grid.dz / math.pi * fft_weights(grid.N) * np.exp(-1j * z * grid.k_lower) * values


def direct_dft(x: np.ndarray) -> np.ndarray:
    """O(N^2) DFT, sum_j exp(-2 pi i n j / N) x_j, evaluated in row blocks"""
    x = np.asarray(x, dtype = complex)
    n = len(x)
    index = np.arange(n)
    out = np.empty(n, dtype = complex)
    for start in range(0, n, DFT_BLOCK):
        rows = index[start:start + DFT_BLOCK]
        # Reduce n*j mod N so the phase stays exact in integers
        phase = np.outer(rows, index) % n
        out[start:start + len(rows)] = np.exp(-2j * math.pi * phase / n) @ x
    return out


def fft_price_ladder(
    ladder: StrikeLadder,
    model: ModelSpec,
    offset: OffsetKind,
    B: float,
    N: int,
    k_lower: Optional[float] = None,
    flag_threshold: float = OTM_FLAG_THRESHOLD
) -> FftResult:
    """
    Price every strike of a ladder from one FFT.

    Grid prices (offset included) are linearly interpolated at the ladder
    log-strikes. Strikes whose normalized price falls below flag_threshold
    are flagged.
    """
    grid = build_grid(ladder, B, N, k_lower)
    terms = fft_terms(ladder, model, offset, grid)
    vhat = sp_fft.fft(terms).real

    reference = ladder.option(ladder.strikes[0])
    grid_normalized = vhat + offset_value(offset, reference, grid.k_nodes)
    normalized = np.interp(ladder.log_strikes, grid.k_nodes, grid_normalized)
    scale = ladder.s0 if ladder.kind is OptionKind.EUROPEAN else 1.0
    flags = normalized < flag_threshold

    if flags.any():
        LOGGER.warning(f"{int(flags.sum())} of {len(flags)} strikes flagged as out-of-the-money unstable")

    return FftResult(
        grid = grid,
        terms = terms,
        vhat = vhat,
        grid_normalized = grid_normalized,
        normalized = normalized,
        prices = normalized * scale,
        flags = flags
    )


def compare_with_obo(
    ladder: StrikeLadder,
    model: ModelSpec,
    offset: OffsetKind,
    B: float,
    N: int,
    obo_cfg: Optional[QuadratureConfig] = None
) -> pd.DataFrame:
    """
    FFT ladder prices next to one-by-one prices.

    Args:
        obo_cfg: quadrature for the one-by-one prices, defaults to the same
            offset with B and an even subinterval count at the FFT spacing

    Returns:
        DataFrame with strike, obo_price, fft_price, deviation_bps, flag_otm_unstable
    """
    if obo_cfg is None:
        obo_cfg = QuadratureConfig(offset = offset, B = B, N = max(2, (N - 1) - (N - 1) % 2))
    result = fft_price_ladder(ladder, model, offset, B, N)

    obo = price_many([(ladder.option(strike), model) for strike in ladder.strikes], obo_cfg)
    obo_prices = np.array([r.price for r in obo])
    obo_normalized = np.array([r.normalized_price for r in obo])

    with np.errstate(divide = 'ignore', invalid = 'ignore'):
        deviation = np.abs(result.prices / obo_prices - 1.0) * 1e4

    return pd.DataFrame({
        'strike': ladder.strikes,
        'obo_price': obo_prices,
        'fft_price': result.prices,
        'deviation_bps': deviation,
        'flag_otm_unstable': obo_normalized < OTM_FLAG_THRESHOLD,
    })
