"""Single-tranche CDO cash flows and Monte Carlo valuation.

Premium payments S*f(A_{T_k}) arrive at T_1..T_{m-1}; default payments
f(A_{T_k}) - f(A_{T_{k+1}}) at T_2..T_m (default losses in a period are
paid at its end, without accrued interest).  The level integral over the
tranche [x1, x2] is evaluated pathwise-exactly for the default leg, since
int_{x1}^{x2} 1_{A <= y} dy = (x2 - max(A, x1))^+ = f(A), and exactly over
the step representation of the initial curve for the premium leg.

All expectations run under the terminal measure with density reweighting;
a payoff resolved at T_j carries weight prod_{i >= k} (1 + delta_i L(T_j, T_i))
for the forward measure attached to T_k.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .engine import ChunkRecord
from .errors import DataError, InsufficientPathsError
from .model import MarketModel

__all__ = [
    "STCDOSpec", "PriceResult", "CrossingValue", "tranche_payoff",
    "mc_estimate", "crossing_value", "stcdo_value", "fair_spread",
]


@dataclass(frozen=True)
class STCDOSpec:
    """Single-tranche CDO: payment dates (tenor dates T_1..T_m), attachment
    and detachment points, and the contractual spread per period."""

    dates: tuple[float, ...]
    attach: float
    detach: float
    spread: float

    def __post_init__(self):
        if not 0.0 <= self.attach < self.detach <= 1.0:
            raise DataError(f"need 0 <= attach < detach <= 1, got "
                            f"[{self.attach}, {self.detach}]")
        if len(self.dates) < 2:
            raise DataError("an STCDO needs at least two dates")

    def tenor_indices(self, model: MarketModel) -> list[int]:
        idx = []
        for t in self.dates:
            hits = [k for k, tk in enumerate(model.tenor.dates)
                    if abs(tk - t) < 1e-12]
            if not hits:
                raise DataError(f"STCDO date {t} is not a tenor date")
            idx.append(hits[0])
        if idx != sorted(idx) or len(set(idx)) != len(idx) or idx[0] < 1:
            raise DataError("STCDO dates must be increasing tenor dates >= T_1")
        return idx


def tranche_payoff(x, spec: STCDOSpec):
    """Remaining tranche notional f(x) = (x2 - x)^+ - (x1 - x)^+."""
    x = np.asarray(x, dtype=float)
    out = (np.clip(spec.detach - x, 0.0, None)
           - np.clip(spec.attach - x, 0.0, None))
    return float(out) if out.ndim == 0 else out


@dataclass
class MeanAccumulator:
    """Streaming mean/SE with deterministic chunk-ordered reduction.
    Antithetic records reduce over pair averages."""

    total: float = 0.0
    total_sq: float = 0.0
    count: int = 0

    def add(self, values: np.ndarray, antithetic: bool = False) -> None:
        values = np.asarray(values, dtype=float)
        if not np.all(np.isfinite(values)):
            bad = int(np.flatnonzero(~np.isfinite(values))[0])
            raise DataError(f"non-finite payoff sample at path index {bad}")
        if antithetic:
            values = values.reshape(-1, 2).mean(axis=1)
        self.total += float(values.sum())
        self.total_sq += float((values * values).sum())
        self.count += len(values)

    @property
    def mean(self) -> float:
        if self.count == 0:
            raise InsufficientPathsError("no samples accumulated")
        return self.total / self.count

    @property
    def se(self) -> float:
        """Standard error; NaN with a single sample (flagged upstream)."""
        if self.count < 2:
            return float("nan")
        var = max(self.total_sq / self.count - self.mean ** 2, 0.0)
        return float(np.sqrt(var / self.count))


def _density_at(rec: ChunkRecord, model: MarketModel, date_idx: int,
                measure_k: int) -> np.ndarray:
    """Normalized terminal-measure density of the T_{measure_k} forward
    measure at tenor date T_{date_idx} (payoffs resolved there); its
    terminal-measure mean is 1."""
    n = model.tenor.n
    deltas = model.tenor.deltas
    w = np.full(rec.n_paths, model.snapshot.P(n) / model.snapshot.P(measure_k))
    for j in range(measure_k, n):
        w = w * (1.0 + deltas[j] * rec.L[:, date_idx, j - 1])
    return w


def mc_estimate(payoff_fn, measure_k: int, date_idx: int,
                records: Iterable[ChunkRecord], model: MarketModel,
                ) -> tuple[float, float]:
    """Estimate P(0, T_k) E_{Q_{T_k}}[Y] for a payoff resolved at tenor date
    ``date_idx`` via density reweighting under the terminal measure.
    ``payoff_fn(record)`` returns the per-path payoff array.  Returns
    (mean, SE)."""
    acc = MeanAccumulator()
    Pk = model.snapshot.P(measure_k)
    for rec in records:
        y = np.asarray(payoff_fn(rec), dtype=float)
        acc.add(Pk * y * _density_at(rec, model, date_idx, measure_k),
                antithetic=rec.antithetic)
    return acc.mean, acc.se


@dataclass
class CrossingValue:
    """Time-0 value of the unit payment at T_{k+1} triggered by the loss
    crossing level x during (T_k, T_{k+1}]: both the direct indicator form
    and the defaultable-forward-measure (spread) form, with their standard
    errors.  The indicator form is the headline value."""

    k: int
    x: float
    indicator: float
    indicator_se: float
    lemma: float
    lemma_se: float
    diff_se: float
    n_survivors: int

    @property
    def value(self) -> float:
        return self.indicator

    @property
    def agreement_z(self) -> float:
        """|indicator - lemma| in standard errors of the pathwise difference
        (the two estimators share paths, so the paired SE is the honest one)."""
        if self.diff_se > 0.0:
            return abs(self.indicator - self.lemma) / self.diff_se
        return 0.0 if self.indicator == self.lemma else float("inf")


def crossing_value(model: MarketModel, records: Iterable[ChunkRecord],
                   k: int, x: float, t: float = 0.0) -> CrossingValue:
    """e(0, T_{k+1}, x) by Monte Carlo under terminal-measure reweighting.

    Indicator form:  P(0,T_n) E*[(1_{A_{T_k}<=x} - 1_{A_{T_{k+1}}<=x}) * dens].
    Spread form:     delta_k P(0,T_n) E*[h(T_k,T_k,x) F(T_k,T_{k+1},x) * dens],
    the two agreeing when the model carries a maturity-independent
    no-arbitrage exponent and a law-consistent initial surface.
    """
    if t != 0.0:
        raise DataError("crossing_value is a time-0 valuation "
                        "(paths are simulated from 0 without conditioning)")
    if not 1 <= k <= model.tenor.n - 1:
        raise DataError(f"need 1 <= k <= n-1, got k={k}")
    xi = model.levels.index(x)
    deltas = model.tenor.deltas
    Pk1 = model.snapshot.P(k + 1)
    acc_ind = MeanAccumulator()
    acc_lem = MeanAccumulator()
    acc_diff = MeanAccumulator()
    survivors = 0
    for rec in records:
        dens_next = _density_at(rec, model, k + 1, k + 1)
        ind = Pk1 * ((rec.A[:, k] <= x).astype(float)
                     - (rec.A[:, k + 1] <= x).astype(float)) * dens_next
        acc_ind.add(ind, antithetic=rec.antithetic)
        dens_k = _density_at(rec, model, k, k + 1)
        lem = Pk1 * (deltas[k] * rec.h[:, k, k - 1, xi]
                     * rec.F[:, k, k, xi] * dens_k)
        acc_lem.add(lem, antithetic=rec.antithetic)
        acc_diff.add(ind - lem, antithetic=rec.antithetic)
        survivors += int((rec.A[:, k] <= x).sum())
    if survivors == 0:
        raise InsufficientPathsError(
            f"no path survived to T_{k} below level {x}; "
            f"the crossing estimator has no effective samples")
    return CrossingValue(k=k, x=x,
                         indicator=acc_ind.mean, indicator_se=acc_ind.se,
                         lemma=acc_lem.mean, lemma_se=acc_lem.se,
                         diff_se=acc_diff.se, n_survivors=survivors)


@dataclass
class PriceResult:
    """STCDO legs and fair spread.  ``total = premium - default`` exactly;
    the premium leg is deterministic given the initial curves, so the
    standard error of the total equals that of the default leg."""

    premium: float
    default: float
    fair_spread: float
    premium_unit: float
    default_se: float
    spread_se: float
    paths: int
    period_dates: tuple[float, ...] = ()
    period_defaults: tuple[float, ...] = ()
    period_default_ses: tuple[float, ...] = ()

    @property
    def total(self) -> float:
        return self.premium - self.default

    @property
    def total_se(self) -> float:
        return self.default_se

    @property
    def se_undefined(self) -> bool:
        return self.paths < 2


def stcdo_value(model: MarketModel, spec: STCDOSpec,
                records: Iterable[ChunkRecord], t: float = 0.0) -> PriceResult:
    """Value the STCDO at time 0: premium leg from the initial defaultable
    curve (exact level integral of the step representation), default leg by
    Monte Carlo of the pathwise-exact tranche-loss increments."""
    if t != 0.0:
        raise DataError("stcdo_value is a time-0 valuation")
    idx = spec.tenor_indices(model)
    if model.levels is not None:
        missing = [b for b in (spec.attach, spec.detach)
                   if b not in model.levels.levels]
        if missing:
            raise DataError(
                f"tranche bounds {missing} are not on the level grid; refine "
                f"the grid (LevelGrid.refine) so the step integral is exact")
    premium_unit = sum(model.snapshot.band_integral(k, spec.attach, spec.detach)
                       for k in idx[:-1])
    acc = MeanAccumulator()
    per_period = [MeanAccumulator() for _ in idx[1:]]
    count = 0
    for rec in records:
        total = np.zeros(rec.n_paths)
        for k_pos in range(len(idx) - 1):
            k, k_next = idx[k_pos], idx[k_pos + 1]
            dens = _density_at(rec, model, k_next, k_next)
            df = (tranche_payoff(rec.A[:, k], spec)
                  - tranche_payoff(rec.A[:, k_next], spec))
            vals = model.snapshot.P(k_next) * df * dens
            per_period[k_pos].add(vals, antithetic=rec.antithetic)
            total += vals
        acc.add(total, antithetic=rec.antithetic)
        count += rec.n_paths
    default = acc.mean
    default_se = acc.se
    fair = default / premium_unit if premium_unit > 0.0 else float("nan")
    spread_se = default_se / premium_unit if premium_unit > 0.0 else float("nan")
    return PriceResult(premium=spec.spread * premium_unit, default=default,
                       fair_spread=fair, premium_unit=premium_unit,
                       default_se=default_se, spread_se=spread_se, paths=count,
                       period_dates=tuple(spec.dates[1:]),
                       period_defaults=tuple(a.mean for a in per_period),
                       period_default_ses=tuple(a.se for a in per_period))


def fair_spread(model: MarketModel, spec: STCDOSpec,
                records: Iterable[ChunkRecord], t: float = 0.0) -> float:
    """The spread S* that zeroes the STCDO value: default leg over the
    level-integrated premium annuity.  The value is affine in S, so
    re-pricing at S* gives exactly zero up to floating point."""
    res = stcdo_value(model, spec, records, t)
    if not res.premium_unit > 0.0:
        raise DataError("degenerate tranche: zero premium annuity")
    return res.fair_spread
