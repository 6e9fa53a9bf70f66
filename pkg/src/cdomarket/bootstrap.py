"""Deterministic extraction of band-integrated defaultable bond prices from
observed STCDO spreads, assuming independence of the loss process and the
risk-free curve.

Everything here is exact rational arithmetic on observed quotes: maturity
T_1 contracts have no future spread payments, so their (default-leg) values
invert directly to the first column of the bond surface; each later column
follows from the quoted spread and the columns already extracted.
Inconsistent inputs produce flags, not aborts: diagnosing bad data is the
tool's job.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

__all__ = [
    "QuoteSurface", "BondSurface", "independence_crossing",
    "bootstrap_step1", "bootstrap_advance", "bootstrap_surface",
    "implied_band_rates", "quotes_from_surface",
]


@dataclass(frozen=True)
class QuoteSurface:
    """Observed market data at one valuation date.

    ``maturities`` are T_1..T_m (years); ``riskfree[k]`` is P(t, T_{k+1})
    in the same order.  ``bands`` partition [0, 1].  ``t1_legs[i]`` is the
    value of the maturity-T_1 contract on band i (a pure default leg);
    ``spreads[j-1, i]`` is the quoted spread S(t, T_{j+1}, band_i) for
    j = 1..m-1.
    """

    maturities: tuple[float, ...]
    riskfree: np.ndarray
    bands: tuple[tuple[float, float], ...]
    t1_legs: np.ndarray
    spreads: np.ndarray

    def __post_init__(self):
        m = len(self.maturities)
        rf = np.asarray(self.riskfree, dtype=float)
        t1 = np.asarray(self.t1_legs, dtype=float)
        sp = np.asarray(self.spreads, dtype=float)
        if any(b <= a for a, b in zip(self.maturities, self.maturities[1:])):
            raise DataError("maturities must be strictly increasing")
        if rf.shape != (m,):
            raise DataError(f"need one risk-free price per maturity, got {rf.shape}")
        # nonincreasing, not strict: the zero-rate case P(t, T_k) = 1 is a
        # legitimate quoted configuration with its own shortcut recursion
        if np.any(rf <= 0.0) or np.any(np.diff(rf) > 1e-15):
            raise DataError("risk-free curve must be positive and "
                            "nonincreasing in maturity")
        lo = [b[0] for b in self.bands]
        hi = [b[1] for b in self.bands]
        if lo[0] != 0.0 or hi[-1] != 1.0 or any(
                h != l2 for h, l2 in zip(hi[:-1], lo[1:])) or any(
                h <= l for l, h in zip(lo, hi)):
            raise DataError(f"bands must partition [0, 1], got {self.bands}")
        if t1.shape != (len(self.bands),):
            raise DataError("need one T_1 leg value per band")
        if sp.shape != (m - 1, len(self.bands)):
            raise DataError(f"spreads must be (maturities-1, bands) = "
                            f"({m - 1}, {len(self.bands)}), got {sp.shape}")
        if np.any(sp < 0.0):
            raise DataError("negative spread quote")
        object.__setattr__(self, "riskfree", rf)
        object.__setattr__(self, "t1_legs", t1)
        object.__setattr__(self, "spreads", sp)

    @property
    def widths(self) -> np.ndarray:
        return np.array([hi - lo for lo, hi in self.bands])


@dataclass
class BondSurface:
    """Band-integrated defaultable bond prices
    values[k-1, i] = int_{band_i} P(t, T_k, y) dy, with data-quality flags."""

    maturities: tuple[float, ...]
    bands: tuple[tuple[float, float], ...]
    values: np.ndarray
    flags: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.flags


def independence_crossing(bonds: BondSurface, riskfree: np.ndarray,
                          k: int, band: int) -> float:
    """Band-integrated crossing value under the independence assumption:
    e(t, T_{k+1}, band) = (P(t,T_{k+1})/P(t,T_k)) P(t,T_k,band) - P(t,T_{k+1},band).
    May come out negative only on arbitrage-inconsistent inputs."""
    if not 1 <= k < len(bonds.maturities):
        raise DataError(f"need 1 <= k <= m-1, got {k}")
    ratio = riskfree[k] / riskfree[k - 1]
    return float(ratio * bonds.values[k - 1, band] - bonds.values[k, band])


def bootstrap_step1(quotes: QuoteSurface) -> np.ndarray:
    """First column: maturity-T_1 contracts carry no future spread payments,
    so the observed value is int_band (P(t,T_1) - P(t,T_1,y)) dy and
    P(t,T_1,band) = width * P(t,T_1) - value."""
    return quotes.widths * quotes.riskfree[0] - quotes.t1_legs


def bootstrap_advance(quotes: QuoteSurface, values: np.ndarray, j: int,
                      flags: list[str] | None = None) -> np.ndarray:
    """Extend the surface from maturities T_1..T_j to T_{j+1}:

        P(t,T_{j+1},band) = (P(t,T_{j+1})/P(t,T_j)) P(t,T_j,band)
            + sum_{k=1}^{j-1} [(P(t,T_{k+1})/P(t,T_k)) P(t,T_k,band)
                               - P(t,T_{k+1},band)]
            - S(t,T_{j+1},band) * sum_{k=1}^{j} P(t,T_k,band)

    ``values`` holds the extracted columns for k = 1..j.  Out-of-range
    results are flagged but still returned."""
    if not 1 <= j < len(quotes.maturities):
        raise DataError(f"advance needs 1 <= j <= m-1, got {j}")
    rf = quotes.riskfree
    out = (rf[j] / rf[j - 1]) * values[j - 1]
    for k in range(1, j):
        out = out + (rf[k] / rf[k - 1]) * values[k - 1] - values[k]
    out = out - quotes.spreads[j - 1] * values[:j].sum(axis=0)
    if flags is not None:
        cap = quotes.widths * rf[j]
        for i, v in enumerate(out):
            if v < -1e-12 or v > cap[i] + 1e-12:
                flags.append(
                    f"inconsistent quote: P(t,T_{j + 1},band{i}) = {v:.6g} "
                    f"outside [0, {cap[i]:.6g}]")
    return out


def bootstrap_surface(quotes: QuoteSurface, zero_rates: bool = False,
                      ) -> BondSurface:
    """Full extraction: step 1 then the j -> j+1 recursion.  With
    ``zero_rates`` (requires P(t,T_k) = 1 for all k) the shortcut
    P(t,T_{j+1},band) = P(t,T_1,band) - S * sum_{k<=j} P(t,T_k,band)
    is used instead; both routes agree identically on a flat unit curve."""
    m = len(quotes.maturities)
    flags: list[str] = []
    values = np.zeros((m, len(quotes.bands)))
    values[0] = bootstrap_step1(quotes)
    cap0 = quotes.widths * quotes.riskfree[0]
    for i, v in enumerate(values[0]):
        if v < -1e-12 or v > cap0[i] + 1e-12:
            raise DataError(
                f"inconsistent T_1 quote: band {i} value {v:.6g} outside "
                f"[0, {cap0[i]:.6g}]")
    if zero_rates and not np.allclose(quotes.riskfree, 1.0, atol=1e-12):
        raise DataError("zero-rate shortcut needs P(t, T_k) = 1 for all k")
    for j in range(1, m):
        if zero_rates:
            values[j] = (values[0]
                         - quotes.spreads[j - 1] * values[:j].sum(axis=0))
        else:
            values[j] = bootstrap_advance(quotes, values[:j], j, flags)
    for i in range(len(quotes.bands)):
        col = values[:, i]
        if np.any(np.diff(col) > 1e-12):
            k = int(np.argmax(np.diff(col) > 1e-12)) + 1
            flags.append(
                f"band {i}: surface increasing in maturity at k={k} "
                f"({col[k - 1]:.6g} -> {col[k]:.6g})")
    return BondSurface(maturities=quotes.maturities, bands=quotes.bands,
                       values=values, flags=flags)


def implied_band_rates(bonds: BondSurface, riskfree: np.ndarray,
                       ) -> tuple[np.ndarray, list[str]]:
    """Band-averaged defaultable forward rates,
    (P(t,T_k,band)/P(t,T_{k+1},band) - 1)/delta_k.  Wiped bands (zero
    denominator) are flagged and reported as NaN."""
    m = len(bonds.maturities)
    deltas = np.diff(np.asarray(bonds.maturities))
    rates = np.full((m - 1, len(bonds.bands)), np.nan)
    flags: list[str] = []
    for k in range(1, m):
        for i in range(len(bonds.bands)):
            denom = bonds.values[k, i]
            if denom <= 0.0:
                flags.append(f"band {i} wiped out at maturity k={k + 1}; "
                             f"no implied rate")
                continue
            rates[k - 1, i] = (bonds.values[k - 1, i] / denom - 1.0) / deltas[k - 1]
    return rates, flags


def quotes_from_surface(maturities, riskfree, bands, values) -> QuoteSurface:
    """Forward direction (used for round-trip checks): produce the T_1 leg
    values and the spread quotes a given band-integrated bond surface would
    imply under the independence assumption."""
    maturities = tuple(float(t) for t in maturities)
    rf = np.asarray(riskfree, dtype=float)
    values = np.asarray(values, dtype=float)
    m = len(maturities)
    widths = np.array([hi - lo for lo, hi in bands])
    t1 = widths * rf[0] - values[0]
    spreads = np.zeros((m - 1, len(bands)))
    for j in range(1, m):
        e_sum = np.zeros(len(bands))
        p_sum = np.zeros(len(bands))
        for k in range(1, j + 1):
            e_sum += (rf[k] / rf[k - 1]) * values[k - 1] - values[k]
            p_sum += values[k - 1]
        spreads[j - 1] = e_sum / p_sum
    return QuoteSurface(maturities=maturities, riskfree=rf,
                        bands=tuple(bands), t1_legs=t1, spreads=spreads)
