"""Tenor structure, loss-level grid and initial market curves.

The market data lives on a discrete tenor 0 = T_0 < T_1 < ... < T_n and a
finite grid of loss levels x in [0, 1].  A defaultable curve point
P(0, T_k, x) is the price of a bond paying 1 at T_k if the aggregate pool
loss is still <= x.  The x = 1 column coincides with the risk-free curve.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError

__all__ = [
    "TenorStructure",
    "LevelGrid",
    "MarketSnapshot",
    "ValidationReport",
    "validate_snapshot",
    "initial_libor",
    "initial_spread",
    "read_riskfree_csv",
    "read_defaultable_csv",
]


@dataclass(frozen=True)
class TenorStructure:
    """Tenor dates T_0..T_n (in years, T_0 = 0) and accruals delta_k."""

    dates: tuple[float, ...]

    def __init__(self, dates):
        dates = tuple(float(t) for t in dates)
        if len(dates) < 2:
            raise DataError("tenor needs at least two dates")
        if abs(dates[0]) > 0.0:
            raise DataError(f"first tenor date must be 0, got {dates[0]}")
        if any(b <= a for a, b in zip(dates, dates[1:])):
            raise DataError(f"tenor dates must be strictly increasing: {dates}")
        object.__setattr__(self, "dates", dates)

    @property
    def n(self) -> int:
        """Number of accrual periods (dates are T_0..T_n)."""
        return len(self.dates) - 1

    @property
    def horizon(self) -> float:
        return self.dates[-1]

    def delta(self, k: int) -> float:
        """Accrual factor delta_k = T_{k+1} - T_k."""
        return self.dates[k + 1] - self.dates[k]

    @property
    def deltas(self) -> np.ndarray:
        return np.diff(np.asarray(self.dates))


@dataclass(frozen=True)
class LevelGrid:
    """Finite increasing grid of attainable loss levels, 0 = x_0 < ... < x_m = 1."""

    levels: tuple[float, ...]

    def __init__(self, levels):
        levels = tuple(float(x) for x in levels)
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise DataError(f"levels must be strictly increasing: {levels}")
        if not levels or levels[0] != 0.0 or levels[-1] != 1.0:
            raise DataError("level grid must start at 0 and end at 1")
        object.__setattr__(self, "levels", levels)

    def __len__(self) -> int:
        return len(self.levels)

    def index(self, x: float) -> int:
        try:
            return self.levels.index(float(x))
        except ValueError:
            raise DataError(f"level {x} is not on the grid {self.levels}") from None

    def refine(self, extra) -> "LevelGrid":
        """Grid extended with additional points (used to align tranche bounds)."""
        return LevelGrid(sorted(set(self.levels) | {float(x) for x in extra}))


@dataclass(frozen=True)
class MarketSnapshot:
    """Initial curves: risk-free P(0, T_k) and, optionally, defaultable
    P(0, T_k, x) on a level grid.

    ``riskfree[k-1]`` is P(0, T_k) for k = 1..n.  ``defaultable[k-1, i]`` is
    P(0, T_k, x_i); the last column (x = 1) must reproduce the risk-free
    curve.  A snapshot without defaultable data drives a pure risk-free
    Libor model.
    """

    tenor: TenorStructure
    riskfree: np.ndarray
    levels: LevelGrid | None = None
    defaultable: np.ndarray | None = None

    def __post_init__(self):
        rf = np.asarray(self.riskfree, dtype=float)
        if rf.shape != (self.tenor.n,):
            raise DataError(
                f"risk-free curve must have one price per tenor date T_1..T_n "
                f"({self.tenor.n}), got shape {rf.shape}"
            )
        if not np.all(np.isfinite(rf)):
            raise DataError("risk-free curve contains non-finite values")
        object.__setattr__(self, "riskfree", rf)
        if (self.levels is None) != (self.defaultable is None):
            raise DataError("levels and defaultable curve must be given together")
        if self.defaultable is not None:
            dflt = np.asarray(self.defaultable, dtype=float)
            want = (self.tenor.n, len(self.levels))
            if dflt.shape != want:
                holes = f"expected shape {want} (tenor x level), got {dflt.shape}"
                raise DataError(f"defaultable curve incomplete: {holes}")
            if not np.all(np.isfinite(dflt)):
                bad = np.argwhere(~np.isfinite(dflt))[0]
                raise DataError(
                    f"defaultable curve has a non-finite entry at "
                    f"(k={bad[0] + 1}, x={self.levels.levels[bad[1]]})"
                )
            object.__setattr__(self, "defaultable", dflt)

    # -- accessors ---------------------------------------------------------

    def P(self, k: int) -> float:
        """P(0, T_k); P(0, T_0) = 1."""
        if k == 0:
            return 1.0
        return float(self.riskfree[k - 1])

    def Px(self, k: int, x: float) -> float:
        """P(0, T_k, x) with right-continuous step interpolation in x."""
        if self.defaultable is None:
            raise DataError("snapshot has no defaultable curve")
        if k == 0:
            return 1.0
        xs = np.asarray(self.levels.levels)
        i = int(np.searchsorted(xs, x, side="right")) - 1
        if i < 0:
            raise DataError(f"level {x} below grid start")
        return float(self.defaultable[k - 1, i])

    def F0(self, k: int, x: float) -> float:
        """Initial forward bond price F(0, T_k, x) = P(0, T_k, x)/P(0, T_k)."""
        return self.Px(k, x) / self.P(k)

    def band_integral(self, k: int, lo: float, hi: float) -> float:
        """Exact integral of the step curve y -> P(0, T_k, y) over [lo, hi]."""
        xs = np.asarray(self.levels.levels)
        cuts = np.unique(np.concatenate([[lo, hi], xs[(xs > lo) & (xs < hi)]]))
        total = 0.0
        for a, b in zip(cuts, cuts[1:]):
            total += (b - a) * self.Px(k, a)
        return total


@dataclass
class ValidationReport:
    """Outcome of the initial-data checks; one entry per violated inequality."""

    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, msg: str) -> None:
        self.violations.append(msg)

    def to_text(self) -> str:
        if self.ok:
            return "snapshot valid: all initial-data conditions hold\n"
        return "".join(f"VIOLATION {v}\n" for v in self.violations)


def validate_snapshot(snapshot: MarketSnapshot, tenor: TenorStructure | None = None,
                      atol: float = 1e-12) -> ValidationReport:
    """Check the initial curves: the risk-free curve must be positive and
    strictly decreasing; the defaultable surface strictly positive, strictly
    decreasing in maturity, nondecreasing in x, with forward bond prices
    F(0, T_k, x) nonincreasing in maturity and the x = 1 column equal to the
    risk-free curve.
    """
    tenor = tenor or snapshot.tenor
    if tenor.dates != snapshot.tenor.dates:
        raise DataError("snapshot/tenor mismatch")
    report = ValidationReport()
    rf = snapshot.riskfree
    n = tenor.n

    if rf[-1] <= 0.0:
        report.add(f"riskfree: P(0,T_{n}) = {rf[-1]} is not > 0")
    for k in range(1, n):
        if not rf[k - 1] > rf[k]:
            report.add(
                f"riskfree monotonicity at k={k}: P(0,T_{k})={rf[k - 1]} "
                f"!> P(0,T_{k + 1})={rf[k]}"
            )

    if snapshot.defaultable is None:
        return report

    levels = snapshot.levels.levels
    dflt = snapshot.defaultable
    for i, x in enumerate(levels):
        col = dflt[:, i]
        if np.any(col <= 0.0):
            k = int(np.argmax(col <= 0.0)) + 1
            report.add(f"defaultable positivity: P(0,T_{k},{x}) = {col[k - 1]} <= 0")
        for k in range(1, n):
            if not col[k - 1] > col[k]:
                report.add(
                    f"defaultable maturity monotonicity at (k={k}, x={x}): "
                    f"{col[k - 1]} !> {col[k]}"
                )
        fwd = col / rf
        for k in range(1, n):
            if fwd[k - 1] < fwd[k] - atol:
                report.add(
                    f"forward price F(0,T_k,{x}) increasing at k={k}: "
                    f"{fwd[k - 1]} < {fwd[k]}"
                )
    for k in range(1, n + 1):
        row = dflt[k - 1]
        if np.any(np.diff(row) < -atol):
            i = int(np.argmax(np.diff(row) < -atol))
            report.add(
                f"level monotonicity at (k={k}): P(0,T_{k},{levels[i]})="
                f"{row[i]} > P(0,T_{k},{levels[i + 1]})={row[i + 1]}"
            )
        if abs(row[-1] - rf[k - 1]) > atol:
            report.add(
                f"x=1 column differs from risk-free at k={k}: "
                f"{row[-1]} vs {rf[k - 1]}"
            )
    return report


def initial_libor(snapshot: MarketSnapshot, tenor: TenorStructure, k: int) -> float:
    """Initial forward Libor L(0, T_k) = (P(0,T_k)/P(0,T_{k+1}) - 1)/delta_k."""
    if not 0 <= k < tenor.n:
        raise DataError(f"initial_libor needs 0 <= k < n = {tenor.n}, got {k}")
    return (snapshot.P(k) / snapshot.P(k + 1) - 1.0) / tenor.delta(k)


def initial_spread(snapshot: MarketSnapshot, tenor: TenorStructure,
                   k: int, x: float) -> float:
    """Initial pre-default spread h(0, T_k, x) from forward bond prices:
    (F(0,T_k,x)/F(0,T_{k+1},x) - 1)/delta_k.  Zero at x = 1 by construction.
    """
    if not 0 <= k < tenor.n:
        raise DataError(f"initial_spread needs 0 <= k < n = {tenor.n}, got {k}")
    f_next = snapshot.F0(k + 1, x)
    if f_next <= 0.0:
        raise DataError(f"degenerate curve: F(0,T_{k + 1},{x}) = {f_next}")
    return (snapshot.F0(k, x) / f_next - 1.0) / tenor.delta(k)


# -- CSV ingestion ----------------------------------------------------------


def _parse_float(raw: str, what: str, where: str) -> float:
    try:
        val = float(raw)
    except ValueError:
        raise DataError(f"{where}: cannot parse {what} from {raw!r}") from None
    if math.isnan(val):
        raise DataError(f"{where}: rejected NaN {what}")
    return val


def read_riskfree_csv(path: str | Path) -> dict[float, float]:
    """Read a risk-free curve file with columns (T, P).  Strict parse:
    prices must be finite and positive."""
    out: dict[float, float] = {}
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].strip().startswith("#") or row[0].strip() == "T":
                continue
            if len(row) != 2:
                raise DataError(f"{path}:{lineno}: expected 2 columns (T, P)")
            t = _parse_float(row[0], "maturity", f"{path}:{lineno}")
            p = _parse_float(row[1], "price", f"{path}:{lineno}")
            if p < 0.0:
                raise DataError(f"{path}:{lineno}: negative price {p}")
            out[t] = p
    return out


def read_defaultable_csv(path: str | Path) -> dict[tuple[float, float], float]:
    """Read a defaultable curve file with columns (T, x, P)."""
    out: dict[tuple[float, float], float] = {}
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].strip().startswith("#") or row[0].strip() == "T":
                continue
            if len(row) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 columns (T, x, P)")
            t = _parse_float(row[0], "maturity", f"{path}:{lineno}")
            x = _parse_float(row[1], "level", f"{path}:{lineno}")
            p = _parse_float(row[2], "price", f"{path}:{lineno}")
            if p < 0.0:
                raise DataError(f"{path}:{lineno}: negative price {p}")
            out[(t, x)] = p
    return out


def snapshot_from_curves(tenor: TenorStructure,
                         riskfree: dict[float, float],
                         levels: LevelGrid | None = None,
                         defaultable: dict[tuple[float, float], float] | None = None,
                         ) -> MarketSnapshot:
    """Assemble a snapshot from curve dictionaries, naming any missing point."""
    rf = np.empty(tenor.n)
    for k in range(1, tenor.n + 1):
        t = tenor.dates[k]
        if t not in riskfree:
            raise DataError(f"risk-free curve missing maturity T_{k} = {t}")
        rf[k - 1] = riskfree[t]
    if levels is None:
        return MarketSnapshot(tenor, rf)
    surf = np.empty((tenor.n, len(levels)))
    for k in range(1, tenor.n + 1):
        for i, x in enumerate(levels.levels):
            key = (tenor.dates[k], x)
            if key not in defaultable:
                raise DataError(
                    f"defaultable curve missing point (k={k}, x={x}) "
                    f"at T={tenor.dates[k]}"
                )
            surf[k - 1, i] = defaultable[key]
    return MarketSnapshot(tenor, rf, levels, surf)
