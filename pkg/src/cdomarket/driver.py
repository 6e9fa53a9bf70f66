"""Joint driver: a (d+1)-dimensional semimartingale whose first d components
carry the market noise (Brownian part plus finite-activity jumps) and whose
last component is the compensated aggregate loss process.

Jumps are compound-Poisson per time segment.  Each jump component couples a
market mark in R^d with a loss mark in (0, 1] (either may be degenerate at
zero), so every integral against the jump kernel reduces to a finite sum
over weighted atoms; continuous families contribute quadrature nodes.

Loss marks are capped at 1 - A_{t-} at event time, which keeps the loss
trajectory inside [0, 1] pathwise.  The kernel views used for intensities
and compensators apply the same cap, so simulation and drift integrals see
one consistent measure.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DataError
from .tenor import TenorStructure

__all__ = [
    "MarketMarks", "PointMarket", "DiscreteMarket", "GaussianMarket",
    "UniformMarket", "CustomMarket", "no_market",
    "LossMarks", "PointLoss", "DiscreteLoss", "UniformLoss", "no_loss",
    "JumpComponent", "DriverSegment", "DriverSpec", "JumpAtom",
    "Scenario", "sample_path", "loss_intensity", "marginal_characteristics",
    "check_exponential_moments",
]


# ---------------------------------------------------------------------------
# Market mark families (distributions on R^d)
# ---------------------------------------------------------------------------


class MarketMarks:
    """Base for market-mark families.  Subclasses provide exact sampling and
    a finite weighted-atom view for kernel integrals."""

    dim: int = 0
    #: True when every exponential moment is finite for certain (bounded
    #: support or Gaussian); None when the family cannot be analysed.
    exp_moments_finite: bool | None = True

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def atoms(self, nodes: int) -> list[tuple[float, np.ndarray]]:
        """(probability, mark vector) pairs; probabilities sum to 1."""
        raise NotImplementedError


@dataclass(frozen=True)
class PointMarket(MarketMarks):
    value: tuple[float, ...]

    @property
    def dim(self):
        return len(self.value)

    def sample(self, rng, size):
        return np.tile(np.asarray(self.value), (size, 1))

    def atoms(self, nodes):
        return [(1.0, np.asarray(self.value, dtype=float))]


@dataclass(frozen=True)
class DiscreteMarket(MarketMarks):
    probs: tuple[float, ...]
    values: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        if abs(sum(self.probs) - 1.0) > 1e-12:
            raise DataError("discrete market-mark probabilities must sum to 1")
        if len(self.probs) != len(self.values):
            raise DataError("discrete market-mark probs/values length mismatch")

    @property
    def dim(self):
        return len(self.values[0])

    def sample(self, rng, size):
        idx = rng.choice(len(self.probs), size=size, p=self.probs)
        return np.asarray(self.values, dtype=float)[idx]

    def atoms(self, nodes):
        return [(p, np.asarray(v, dtype=float))
                for p, v in zip(self.probs, self.values)]


@dataclass(frozen=True)
class GaussianMarket(MarketMarks):
    """Independent Gaussian components; atoms are tensor Gauss-Hermite nodes."""

    mean: tuple[float, ...]
    sd: tuple[float, ...]

    @property
    def dim(self):
        return len(self.mean)

    def sample(self, rng, size):
        return rng.normal(self.mean, self.sd, size=(size, self.dim))

    def atoms(self, nodes):
        z, w = np.polynomial.hermite.hermgauss(nodes)
        w = w / np.sqrt(np.pi)
        out = [(1.0, np.zeros(0))]
        for mu, s in zip(self.mean, self.sd):
            pts = mu + np.sqrt(2.0) * s * z
            out = [(p * wi, np.append(v, pi))
                   for p, v in out for wi, pi in zip(w, pts)]
        return out


@dataclass(frozen=True)
class UniformMarket(MarketMarks):
    """Uniform box; atoms are tensor Gauss-Legendre nodes."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    @property
    def dim(self):
        return len(self.lo)

    def sample(self, rng, size):
        return rng.uniform(self.lo, self.hi, size=(size, self.dim))

    def atoms(self, nodes):
        z, w = np.polynomial.legendre.leggauss(nodes)
        out = [(1.0, np.zeros(0))]
        for a, b in zip(self.lo, self.hi):
            pts = 0.5 * (b - a) * z + 0.5 * (a + b)
            wts = 0.5 * w  # relative to the uniform density on [a, b]
            out = [(p * wi, np.append(v, pi))
                   for p, v in out for wi, pi in zip(wts, pts)]
        return out


@dataclass(frozen=True)
class CustomMarket(MarketMarks):
    """Sampler-only family.  Usable for path simulation; kernel integrals and
    the exponential-moment check cannot analyse it."""

    sampler: Callable[[np.random.Generator, int], np.ndarray]
    dim: int = 1
    exp_moments_finite: bool | None = None

    def sample(self, rng, size):
        out = np.asarray(self.sampler(rng, size), dtype=float)
        if out.shape != (size, self.dim):
            raise DataError(f"custom sampler returned shape {out.shape}")
        return out

    def atoms(self, nodes):
        raise DataError("custom market-mark family has no atom representation")


def no_market(d: int) -> PointMarket:
    """Degenerate market mark (zero vector); used by pure-loss components."""
    return PointMarket(tuple([0.0] * d))


# ---------------------------------------------------------------------------
# Loss mark families (distributions on (0, 1])
# ---------------------------------------------------------------------------


class LossMarks:
    """Base for loss-mark families.

    ``tail(thresh)`` is P(q > thresh) for the *uncapped* mark; capping at
    1 - A_{t-} does not change this tail for levels x < 1 and makes it zero
    at x = 1, which is handled by the callers.
    """

    is_none = False

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def tail(self, thresh: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def mean_capped(self, cap: np.ndarray) -> np.ndarray:
        """E[min(q, cap)] -- the loss-size mean under the pathwise cap."""
        raise NotImplementedError

    def cells(self) -> list[tuple[float, float, float]]:
        """(probability, lo, hi) decomposition; atoms have lo == hi."""
        raise NotImplementedError


@dataclass(frozen=True)
class _NoLoss(LossMarks):
    is_none = True

    def sample(self, rng, size):
        return np.zeros(size)

    def tail(self, thresh):
        return np.zeros_like(np.asarray(thresh, dtype=float))

    def mean_capped(self, cap):
        return np.zeros_like(np.asarray(cap, dtype=float))

    def cells(self):
        return []


no_loss = _NoLoss()


@dataclass(frozen=True)
class PointLoss(LossMarks):
    q: float

    def __post_init__(self):
        if not 0.0 < self.q <= 1.0:
            raise DataError(f"loss mark must lie in (0, 1], got {self.q}")

    def sample(self, rng, size):
        return np.full(size, self.q)

    def tail(self, thresh):
        return (self.q > np.asarray(thresh, dtype=float)).astype(float)

    def mean_capped(self, cap):
        return np.minimum(self.q, np.asarray(cap, dtype=float))

    def cells(self):
        return [(1.0, self.q, self.q)]


@dataclass(frozen=True)
class DiscreteLoss(LossMarks):
    probs: tuple[float, ...]
    sizes: tuple[float, ...]

    def __post_init__(self):
        if abs(sum(self.probs) - 1.0) > 1e-12:
            raise DataError("discrete loss-mark probabilities must sum to 1")
        if any(not 0.0 < q <= 1.0 for q in self.sizes):
            raise DataError(f"loss marks must lie in (0, 1], got {self.sizes}")

    def sample(self, rng, size):
        idx = rng.choice(len(self.probs), size=size, p=self.probs)
        return np.asarray(self.sizes)[idx]

    def tail(self, thresh):
        thresh = np.asarray(thresh, dtype=float)
        out = np.zeros_like(thresh)
        for p, q in zip(self.probs, self.sizes):
            out += p * (q > thresh)
        return out

    def mean_capped(self, cap):
        cap = np.asarray(cap, dtype=float)
        out = np.zeros_like(cap)
        for p, q in zip(self.probs, self.sizes):
            out += p * np.minimum(q, cap)
        return out

    def cells(self):
        return [(p, q, q) for p, q in zip(self.probs, self.sizes)]


@dataclass(frozen=True)
class UniformLoss(LossMarks):
    lo: float
    hi: float

    def __post_init__(self):
        if not 0.0 <= self.lo < self.hi <= 1.0:
            raise DataError(f"uniform loss support must be in (0, 1]: "
                            f"({self.lo}, {self.hi}]")

    def sample(self, rng, size):
        # support is the half-open interval (lo, hi]
        return self.hi - rng.uniform(0.0, self.hi - self.lo, size=size)

    def tail(self, thresh):
        thresh = np.asarray(thresh, dtype=float)
        return np.clip((self.hi - thresh) / (self.hi - self.lo), 0.0, 1.0)

    def mean_capped(self, cap):
        cap = np.asarray(cap, dtype=float)
        c = np.clip(cap, self.lo, self.hi)
        width = self.hi - self.lo
        # E[min(U, cap)]: integrate U on (lo, c], constant cap above c
        below = 0.5 * (c * c - self.lo * self.lo) / width
        above = (self.hi - c) / width * c
        return np.where(cap >= self.hi, 0.5 * (self.lo + self.hi),
                        np.where(cap <= self.lo, cap, below + above))

    def cells(self):
        return [(1.0, self.lo, self.hi)]


# ---------------------------------------------------------------------------
# Jump components and the assembled driver
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class JumpComponent:
    """One compound-Poisson jump stream with coupled market/loss marks.

    ``intensity`` is the base arrival rate per year.  ``state_slope`` makes
    the arrival rate affine in the current loss, rate(a) = intensity *
    (1 + state_slope * a); simulation stays exact via thinning against the
    envelope rate.  Coupling is an independent product unless
    ``coupling='paired'``, which zips equal-length discrete families (a
    common jump moves market factors and the loss at once).
    """

    intensity: float
    market: MarketMarks
    loss: LossMarks = no_loss
    coupling: str = "independent"
    state_slope: float = 0.0

    def __post_init__(self):
        if self.intensity < 0.0:
            raise DataError("jump intensity must be >= 0")
        if self.coupling not in ("independent", "paired"):
            raise DataError(f"unknown coupling {self.coupling!r}")
        if self.coupling == "paired":
            ok = (isinstance(self.market, DiscreteMarket)
                  and isinstance(self.loss, DiscreteLoss)
                  and len(self.market.probs) == len(self.loss.sizes)
                  and np.allclose(self.market.probs, self.loss.probs))
            if not ok:
                raise DataError("paired coupling needs equal-length discrete "
                                "families with identical probabilities")
        if self.state_slope < 0.0 and 1.0 + self.state_slope < 0.0:
            raise DataError("state-dependent rate would turn negative")

    def rate(self, a) -> np.ndarray:
        """Arrival rate at current loss level a (per year)."""
        return self.intensity * (1.0 + self.state_slope * np.asarray(a, dtype=float))

    @property
    def envelope_rate(self) -> float:
        """Upper bound of the arrival rate over a in [0, 1], for thinning."""
        return self.intensity * max(1.0, 1.0 + self.state_slope)

    def sample_marks(self, rng: np.random.Generator, size: int
                     ) -> tuple[np.ndarray, np.ndarray]:
        if self.coupling == "paired":
            idx = rng.choice(len(self.loss.probs), size=size, p=self.loss.probs)
            m = np.asarray(self.market.values, dtype=float)[idx]
            q = np.asarray(self.loss.sizes)[idx]
            return m, q
        return self.market.sample(rng, size), self.loss.sample(rng, size)


@dataclass(frozen=True)
class JumpAtom:
    """One weighted atom of a jump kernel: arrival weight (per year, before
    any state multiplier), market part, and a loss part that is either a
    point (lo == hi) or a uniform cell (lo < hi)."""

    rate: float
    market: np.ndarray
    lo: float = 0.0
    hi: float = 0.0
    state_slope: float = 0.0

    @property
    def has_loss(self) -> bool:
        return self.hi > 0.0

    @property
    def is_cell(self) -> bool:
        return self.hi > self.lo

    def weight(self, a) -> np.ndarray:
        return self.rate * (1.0 + self.state_slope * np.asarray(a, dtype=float))

    def loss_eff(self, a) -> np.ndarray:
        """Capped point loss min(q, 1 - a); cells are handled via tails."""
        return np.minimum(self.hi, 1.0 - np.asarray(a, dtype=float))

    def tail_frac(self, a, x: float) -> np.ndarray:
        """Fraction of this atom's mass whose (capped) loss would push the
        pool loss above level x, given current loss a.  Point atoms use the
        same (a + mark) > x arithmetic as the simulated survival indicator."""
        a = np.asarray(a, dtype=float)
        if not self.has_loss:
            return np.zeros_like(a)
        if not self.is_cell:
            return (a + self.loss_eff(a) > x).astype(float)
        if x >= 1.0:
            return np.zeros_like(a)  # capped marks never exceed 1 - a
        return np.clip((self.hi - (x - a)) / (self.hi - self.lo), 0.0, 1.0)


@dataclass(frozen=True)
class DriverSegment:
    """Piecewise-constant characteristics on [start, end)."""

    start: float
    end: float
    c: np.ndarray
    components: tuple[JumpComponent, ...] = ()

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.c, dtype=float))
        if self.end <= self.start:
            raise DataError(f"empty driver segment [{self.start}, {self.end})")
        if c.shape[0] != c.shape[1]:
            raise DataError("diffusion matrix must be square")
        if not np.allclose(c, c.T):
            raise DataError("diffusion matrix must be symmetric")
        if np.any(c[-1, :] != 0.0) or np.any(c[:, -1] != 0.0):
            raise DataError("diffusion matrix needs a zero last row/column "
                            "(the loss component is purely discontinuous)")
        eigvals = np.linalg.eigvalsh(c)
        if eigvals.min() < -1e-12:
            raise DataError(f"diffusion matrix not PSD (min eigenvalue {eigvals.min()})")
        object.__setattr__(self, "c", c)

    @property
    def sqrt_c(self) -> np.ndarray:
        w, v = np.linalg.eigh(self.c)
        return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


@dataclass(frozen=True)
class DriverSpec:
    """Market-factor dimension d plus segmented characteristics.  The full
    driver lives in R^{d+1}; the (d+1)st row and column of each diffusion
    matrix are zero and the loss marks sit in the (d+1)st coordinate."""

    d: int
    segments: tuple[DriverSegment, ...]

    def __post_init__(self):
        if self.d < 0:
            raise DataError("market dimension must be >= 0")
        segs = tuple(self.segments)
        if not segs:
            raise DataError("driver needs at least one segment")
        for a, b in zip(segs, segs[1:]):
            if abs(a.end - b.start) > 1e-12:
                raise DataError("driver segments must tile the horizon")
        for seg in segs:
            if seg.c.shape != (self.d + 1, self.d + 1):
                raise DataError(
                    f"diffusion matrix must be {(self.d + 1, self.d + 1)}, "
                    f"got {seg.c.shape}")
            for comp in seg.components:
                if comp.market.dim != self.d:
                    raise DataError("market-mark dimension mismatch")
        object.__setattr__(self, "segments", segs)

    def segment_at(self, t: float) -> DriverSegment:
        for seg in self.segments:
            if seg.start <= t < seg.end:
                return seg
        if abs(t - self.segments[-1].end) < 1e-12:
            return self.segments[-1]
        raise DataError(f"time {t} outside driver horizon")

    def boundaries(self) -> list[float]:
        out = [self.segments[0].start]
        out += [seg.end for seg in self.segments]
        return out

    def atoms(self, t: float, quad_nodes: int = 32,
              loss_splits: Sequence[float] = ()) -> list[JumpAtom]:
        """Weighted atoms of the joint kernel F_t.  ``loss_splits`` lists
        loss-coordinate breakpoints (e.g. contagion steps) at which uniform
        cells must be cut so that integrands are constant per cell."""
        seg = self.segment_at(t)
        out: list[JumpAtom] = []
        splits = sorted(set(float(s) for s in loss_splits))
        for comp in seg.components:
            if comp.intensity == 0.0:
                continue
            if comp.coupling == "paired":
                pairs = [(p, np.asarray(m, dtype=float), (q, q))
                         for p, m, q in zip(comp.loss.probs,
                                            comp.market.values,
                                            comp.loss.sizes)]
            else:
                mk = comp.market.atoms(quad_nodes)
                cells = comp.loss.cells() or [(1.0, 0.0, 0.0)]
                pairs = [(pm * pl, m, (lo, hi))
                         for pm, m in mk for pl, lo, hi in cells]
            for prob, m, (lo, hi) in pairs:
                for slo, shi, sprob in _split_cell(lo, hi, splits):
                    out.append(JumpAtom(rate=comp.intensity * prob * sprob,
                                        market=m, lo=slo, hi=shi,
                                        state_slope=comp.state_slope))
        return out


def _split_cell(lo: float, hi: float, splits: list[float]
                ) -> list[tuple[float, float, float]]:
    """Cut a loss cell (lo, hi] at the given breakpoints; returns
    (lo, hi, mass fraction) triples.  Point atoms are returned as-is."""
    if hi <= lo:
        return [(lo, hi, 1.0)]
    cuts = [lo] + [s for s in splits if lo < s < hi] + [hi]
    width = hi - lo
    return [(a, b, (b - a) / width) for a, b in zip(cuts, cuts[1:])]


# ---------------------------------------------------------------------------
# Scenario sampling
# ---------------------------------------------------------------------------


@dataclass
class Scenario:
    """One simulated driver path on a fixed grid.

    ``dW`` holds per-step Brownian increments (d+1 columns; the last column
    is never consumed since its diffusion loading is zero).  ``jumps`` lists
    (time, mark) with the mark in R^{d+1}, loss coordinate already capped at
    1 - A_{t-}.  ``A`` is the loss level at each grid time.
    """

    grid: np.ndarray
    dW: np.ndarray
    jumps: list[tuple[float, np.ndarray]]
    A: np.ndarray
    seed: int | None = None

    @property
    def n_steps(self) -> int:
        return len(self.grid) - 1


def build_grid(spec: DriverSpec, tenor: TenorStructure, grid_step: float,
               extra: Sequence[float] = ()) -> np.ndarray:
    """Simulation grid: tenor dates and segment boundaries, each gap
    subdivided into steps of at most ``grid_step`` years."""
    if grid_step <= 0.0:
        raise DataError("grid_step must be > 0")
    anchors = set(tenor.dates) | {b for b in spec.boundaries()
                                  if 0.0 <= b <= tenor.horizon}
    anchors |= {float(e) for e in extra if 0.0 <= e <= tenor.horizon}
    anchors = sorted(anchors)
    grid = [anchors[0]]
    for a, b in zip(anchors, anchors[1:]):
        steps = max(1, int(np.ceil((b - a) / grid_step - 1e-9)))
        grid.extend(a + (b - a) * (i + 1) / steps for i in range(steps))
    return np.asarray(grid)


def sample_path(spec: DriverSpec, tenor: TenorStructure, grid_step: float,
                seed: int, path_index: int = 0,
                extra_times: Sequence[float] = ()) -> Scenario:
    """Sample one driver path: per-step Brownian increments with covariance
    c_s * dt, thinned Poisson arrivals per jump component, and the loss
    trajectory accumulated from capped loss marks.  Deterministic in
    (seed, path_index).  ``extra_times`` adds grid anchors (e.g. volatility
    breaks) so downstream coefficient tables stay piecewise-exact."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, path_index]))
    grid = build_grid(spec, tenor, grid_step, extra=extra_times)
    m_steps = len(grid) - 1
    dW = rng.normal(0.0, 1.0, size=(m_steps, spec.d + 1))
    dW *= np.sqrt(np.diff(grid))[:, None]
    jumps: list[tuple[float, np.ndarray]] = []
    A = np.zeros(len(grid))
    a = 0.0
    for m in range(m_steps):
        t0, t1 = grid[m], grid[m + 1]
        seg = spec.segment_at(t0)
        events: list[tuple[float, JumpComponent]] = []
        for comp in seg.components:
            lam_bar = comp.envelope_rate
            if lam_bar <= 0.0:
                continue
            count = rng.poisson(lam_bar * (t1 - t0))
            times = rng.uniform(t0, t1, size=count)
            events.extend((tau, comp) for tau in times)
        events.sort(key=lambda e: e[0])
        for tau, comp in events:
            if comp.envelope_rate > comp.intensity or comp.state_slope != 0.0:
                accept = rng.uniform() * comp.envelope_rate <= comp.rate(a)
                if not accept:
                    continue
            m_mark, q = comp.sample_marks(rng, 1)
            q_eff = min(float(q[0]), 1.0 - a)
            y = np.append(m_mark[0], q_eff)
            jumps.append((float(tau), y))
            a += q_eff
        A[m + 1] = a
    return Scenario(grid=grid, dW=dW, jumps=jumps, A=A, seed=seed)


# ---------------------------------------------------------------------------
# Kernel views
# ---------------------------------------------------------------------------


def loss_intensity(spec: DriverSpec, t: float, a: float, x: float) -> float:
    """Arrival rate of loss events that push the pool loss above level x:
    the mass of the loss-mark kernel at (t, a) on (x - a, 1]."""
    if a > x:
        raise DataError(f"loss_intensity needs a <= x, got a={a} > x={x}")
    seg = spec.segment_at(t)
    total = 0.0
    for comp in seg.components:
        if comp.loss.is_none or comp.intensity == 0.0:
            continue
        if x >= 1.0:
            continue  # capped marks cannot push A above 1
        total += float(comp.rate(a)) * float(comp.loss.tail(np.asarray(x - a)))
    return total


def mean_loss_rate(spec: DriverSpec, t: float, a) -> np.ndarray:
    """d/dt of the loss compensator: integral of y against the capped loss
    kernel at state a.  Vectorized over a."""
    a = np.asarray(a, dtype=float)
    seg = spec.segment_at(t)
    out = np.zeros_like(a)
    for comp in seg.components:
        if comp.loss.is_none or comp.intensity == 0.0:
            continue
        out += comp.rate(a) * comp.loss.mean_capped(1.0 - a)
    return out


@dataclass(frozen=True)
class MarginalCharacteristics:
    """Characteristic triplets of the two driver blocks per segment: the
    market block is (0, c-block, market kernel atoms); the loss block is
    (0, 0, loss kernel).  Drifts vanish because both blocks are compensated.
    """

    spec: DriverSpec

    def market_drift(self, t: float) -> np.ndarray:
        return np.zeros(self.spec.d)

    def market_diffusion(self, t: float) -> np.ndarray:
        return self.spec.segment_at(t).c[:self.spec.d, :self.spec.d]

    def market_atoms(self, t: float, quad_nodes: int = 32
                     ) -> list[tuple[float, np.ndarray]]:
        """Weighted atoms (rate, mark) of the market-marginal jump kernel."""
        return [(atom.rate, atom.market)
                for atom in self.spec.atoms(t, quad_nodes)]

    def loss_drift(self, t: float) -> float:
        return 0.0

    def loss_diffusion(self, t: float) -> float:
        return float(self.spec.segment_at(t).c[self.spec.d, self.spec.d])

    def loss_tail(self, t: float, a: float, x: float) -> float:
        """Tail mass of the loss-marginal kernel on (x - a, 1]."""
        return loss_intensity(self.spec, t, a, x) if a <= x else 0.0

    def loss_total_rate(self, t: float, a: float = 0.0) -> float:
        seg = self.spec.segment_at(t)
        return float(sum(comp.rate(a) for comp in seg.components
                         if not comp.loss.is_none))


def marginal_characteristics(spec: DriverSpec) -> MarginalCharacteristics:
    return MarginalCharacteristics(spec)


def check_exponential_moments(spec: DriverSpec, C: float, eps: float) -> bool | None:
    """Verify that exp(<u, y>)-integrals of the jump kernel are finite for
    every u in the box [-(1+eps)C, (1+eps)C]^{d+1}.

    Returns True when every mark family is analytically known to have all
    exponential moments (bounded support or Gaussian), None when some family
    cannot be verified.  Compound-Poisson arrivals make the time integrals
    finite whenever the mark-level integrals are.
    """
    if C <= 0.0 or eps <= 0.0:
        raise DataError("moment check needs C > 0 and eps > 0")
    verdict: bool | None = True
    for seg in spec.segments:
        for comp in seg.components:
            if comp.market.exp_moments_finite is None:
                verdict = None
    return verdict
