"""Volatility structures, contagion families and the assembled market model."""
from __future__ import annotations

from dataclasses import dataclass, field
import numpy as np

from .driver import DriverSpec, UniformLoss
from .errors import DataError
from .tenor import (LevelGrid, MarketSnapshot, TenorStructure, initial_libor,
                    initial_spread, validate_snapshot)

__all__ = [
    "PiecewiseConst", "ConstantContagion", "StepContagion", "NoContagion",
    "VolStructure", "SpreadDrift", "MarketModel",
]


@dataclass(frozen=True)
class PiecewiseConst:
    """Deterministic piecewise-constant vector function of time."""

    breaks: tuple[float, ...]
    values: np.ndarray  # (pieces, dim)

    def __post_init__(self):
        values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if len(self.breaks) != values.shape[0] + 1:
            raise DataError("piecewise function needs len(breaks) == pieces + 1")
        if any(b <= a for a, b in zip(self.breaks, self.breaks[1:])):
            raise DataError("piecewise breaks must increase")
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, value) -> "PiecewiseConst":
        return cls((0.0, np.inf), np.atleast_2d(np.asarray(value, dtype=float)))

    def at(self, s: float) -> np.ndarray:
        i = int(np.searchsorted(self.breaks, s, side="right")) - 1
        if i < 0 or i >= self.values.shape[0]:
            raise DataError(f"time {s} outside piecewise support")
        return self.values[i]

    def interior_breaks(self) -> list[float]:
        return [b for b in self.breaks[1:-1]]


class Contagion:
    """Jump response of a pre-default spread to a loss event of size q."""

    breakpoints: tuple[float, ...] = ()

    def value(self, q) -> np.ndarray:
        raise NotImplementedError

    @property
    def bound(self) -> float:
        raise NotImplementedError


@dataclass(frozen=True)
class NoContagion(Contagion):
    def value(self, q):
        return np.zeros_like(np.asarray(q, dtype=float))

    @property
    def bound(self):
        return 0.0


@dataclass(frozen=True)
class ConstantContagion(Contagion):
    """c(.; q) = c0 for every actual loss (q > 0), zero otherwise."""

    c0: float

    def value(self, q):
        q = np.asarray(q, dtype=float)
        return np.where(q > 0.0, self.c0, 0.0)

    @property
    def bound(self):
        return abs(self.c0)


@dataclass(frozen=True)
class StepContagion(Contagion):
    """Piecewise-constant in the loss size: value ``values[i]`` on
    (edges[i], edges[i+1]], with edges spanning (0, 1]."""

    edges: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.edges) != len(self.values) + 1:
            raise DataError("step contagion needs len(edges) == len(values)+1")
        if self.edges[0] != 0.0 or self.edges[-1] != 1.0:
            raise DataError("step contagion edges must span (0, 1]")
        object.__setattr__(self, "breakpoints", tuple(self.edges[1:-1]))

    def value(self, q):
        q = np.asarray(q, dtype=float)
        idx = np.clip(np.searchsorted(self.edges, q, side="left") - 1,
                      0, len(self.values) - 1)
        return np.where(q > 0.0, np.asarray(self.values)[idx], 0.0)

    @property
    def bound(self):
        return max(abs(v) for v in self.values)


@dataclass(frozen=True)
class VolStructure:
    """Deterministic volatilities: sigma(., T_k) for the risk-free rates,
    gamma(., T_k, x) for the pre-default spreads (last component zero), the
    contagion family, and the moment bound (C, eps) the vols must respect.

    ``sigma[k-1]`` and ``gamma[k-1][xi]`` are piecewise-constant functions
    of time with values in R^{d+1}; expiry (zero after T_k) is applied by
    the consumers, not stored here.
    """

    sigma: tuple[PiecewiseConst, ...]
    gamma: tuple[tuple[PiecewiseConst, ...], ...] = ()
    contagion: Contagion = NoContagion()
    C: float = 10.0
    eps: float = 0.5

    @classmethod
    def from_arrays(cls, sigma, gamma=None, contagion=None, C=10.0, eps=0.5):
        """Constant-in-time structure from arrays: sigma (n-1, d+1) and
        optionally gamma (n-1, n_levels, d+1)."""
        sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
        sig = tuple(PiecewiseConst.constant(row) for row in sigma)
        gam: tuple = ()
        if gamma is not None:
            gamma = np.asarray(gamma, dtype=float)
            gam = tuple(tuple(PiecewiseConst.constant(gamma[k, i])
                              for i in range(gamma.shape[1]))
                        for k in range(gamma.shape[0]))
        return cls(sigma=sig, gamma=gam, contagion=contagion or NoContagion(),
                   C=C, eps=eps)

    def interior_breaks(self) -> list[float]:
        out: set[float] = set()
        for f in self.sigma:
            out.update(f.interior_breaks())
        for row in self.gamma:
            for f in row:
                out.update(f.interior_breaks())
        return sorted(b for b in out if np.isfinite(b))


@dataclass(frozen=True)
class SpreadDrift:
    """Drift choice for the pre-default spreads under their own
    forward measures.

    kind 'zero'      -- b(., T_k, x) = 0 (the default);
    kind 'constant'  -- a fixed array (n-1, n_levels) or scalar;
    kind 'triangular'-- solve b(., T_k, x) each step so that the no-arbitrage
                        exponent b^P becomes maturity-independent (the
                        degenerate single-name construction and the exact
                        pathwise-identity configurations use this).
    """

    kind: str = "zero"
    values: np.ndarray | float = 0.0

    def __post_init__(self):
        if self.kind not in ("zero", "constant", "triangular"):
            raise DataError(f"unknown spread-drift kind {self.kind!r}")

    def constant_array(self, n_rates: int, n_levels: int) -> np.ndarray:
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim == 0:
            return np.full((n_rates, n_levels), float(vals))
        if vals.shape != (n_rates, n_levels):
            raise DataError(
                f"spread-drift array must be ({n_rates}, {n_levels}), "
                f"got {vals.shape}")
        return vals


@dataclass(frozen=True)
class MarketModel:
    """Everything needed to evolve the market: tenor, initial curves, driver and
    volatility structure; quadrature resolution for continuous mark families.
    """

    tenor: TenorStructure
    snapshot: MarketSnapshot
    driver: DriverSpec
    vols: VolStructure
    levels: LevelGrid | None = None
    spread_drift: SpreadDrift = field(default_factory=SpreadDrift)
    quad_nodes: int = 32

    def __post_init__(self):
        if self.levels is None and self.snapshot.defaultable is not None:
            object.__setattr__(self, "levels", self.snapshot.levels)
        if self.levels is not None and self.snapshot.levels is not None:
            if self.levels.levels != self.snapshot.levels.levels:
                raise DataError("model levels differ from snapshot levels")
        n_rates = self.tenor.n - 1
        if len(self.vols.sigma) != n_rates:
            raise DataError(f"need one sigma function per rate T_1..T_{n_rates}, "
                            f"got {len(self.vols.sigma)}")
        if self.vols.gamma and len(self.vols.gamma) != n_rates:
            raise DataError("need one gamma row per rate")
        if self.vols.gamma and self.levels is not None:
            for row in self.vols.gamma:
                if len(row) != len(self.levels):
                    raise DataError("need one gamma function per loss level")

    # -- derived initial state ---------------------------------------------

    @property
    def d(self) -> int:
        return self.driver.d

    @property
    def n_levels(self) -> int:
        return 0 if self.levels is None else len(self.levels)

    def initial_libors(self) -> np.ndarray:
        return np.array([initial_libor(self.snapshot, self.tenor, k)
                         for k in range(1, self.tenor.n)])

    def initial_spreads(self) -> np.ndarray:
        """h(0, T_k, x) for k = 1..n-1 on the level grid; empty when the
        model carries no defaultable layer."""
        if self.levels is None:
            return np.zeros((self.tenor.n - 1, 0))
        return np.array([
            [initial_spread(self.snapshot, self.tenor, k, x)
             for x in self.levels.levels]
            for k in range(1, self.tenor.n)
        ])

    def y0(self) -> np.ndarray:
        """Frozen first product factor y(., T_0, x) = F(0, T_1, x)."""
        if self.levels is None:
            return np.zeros(0)
        return np.array([self.snapshot.F0(1, x) for x in self.levels.levels])

    def sigma_matrix(self, s: float) -> np.ndarray:
        """sigma(s, T_k) for k = 1..n-1 with expiry applied, shape (n-1, d+1)."""
        out = np.zeros((self.tenor.n - 1, self.d + 1))
        for k in range(1, self.tenor.n):
            if s < self.tenor.dates[k]:
                out[k - 1] = self.vols.sigma[k - 1].at(s)
        return out

    def gamma_matrix(self, s: float) -> np.ndarray:
        """gamma(s, T_k, x), shape (n-1, n_levels, d+1), zero after T_k."""
        out = np.zeros((self.tenor.n - 1, self.n_levels, self.d + 1))
        if not self.vols.gamma:
            return out
        for k in range(1, self.tenor.n):
            if s < self.tenor.dates[k]:
                for i in range(self.n_levels):
                    out[k - 1, i] = self.vols.gamma[k - 1][i].at(s)
        return out

    # -- validation ---------------------------------------------------------

    def validate(self) -> list[str]:
        """Model-level checks beyond the snapshot conditions: vol bounds,
        nonnegativity, the zero loss-column of gamma, and the structural
        restrictions that keep kernel integrals exact."""
        problems = [f"snapshot: {v}"
                    for v in validate_snapshot(self.snapshot).violations]
        sample_times = sorted(
            {seg.start for seg in self.driver.segments}
            | set(self.vols.interior_breaks())
            | set(self.tenor.dates[:-1])
        )
        C = self.vols.C
        for s in sample_times:
            sig = self.sigma_matrix(s)
            if np.any(sig < 0.0):
                problems.append(f"sigma has a negative component at s={s}")
            if np.any(sig.sum(axis=0) > C + 1e-12):
                problems.append(
                    f"sigma bound violated at s={s}: column sums "
                    f"{sig.sum(axis=0)} exceed C={C}")
            gam = self.gamma_matrix(s)
            if gam.size:
                if np.any(gam < 0.0):
                    problems.append(f"gamma has a negative component at s={s}")
                if np.any(gam[:, :, -1] != 0.0):
                    problems.append(f"gamma loads on the loss component at s={s}")
                tot = sig[:, None, :] + gam
                if np.any(tot.sum(axis=0) > C + 1e-12):
                    problems.append(f"sigma+gamma bound violated at s={s}")
        sigma_loss_used = any(
            np.any(np.asarray(f.values)[:, -1] != 0.0) for f in self.vols.sigma)
        for seg in self.driver.segments:
            for comp in seg.components:
                if isinstance(comp.loss, UniformLoss):
                    if sigma_loss_used:
                        problems.append(
                            "uniform loss marks need sigma^{d+1} = 0 for exact "
                            "kernel integrals; use discrete loss marks instead")
        return problems

    def kernel_atoms(self, t: float):
        """Jump atoms at time t, split at contagion breakpoints so every
        integrand the drift machinery sees is constant per cell."""
        return self.driver.atoms(t, self.quad_nodes,
                                 loss_splits=self.vols.contagion.breakpoints)
