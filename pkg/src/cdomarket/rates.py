"""Risk-free Libor rates, pre-default spreads and assembled defaultable
quantities.

The heavy lifting (path evolution) lives in the engine; this module exposes
the single-path operations used by replay oracles plus the pure algebraic
assembly of defaultable rates from (L, h, A)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .driver import Scenario
from .engine import ChunkRecord, replay_scenario
from .errors import DataError
from .measures import beta_product, ell
from .model import MarketModel

__all__ = [
    "RateState", "libor_drift", "spread_drift_under_Tk",
    "evolve_libor", "evolve_spread", "evolve_path",
    "assemble_defaultable_libor", "credit_spread_H",
    "forward_bond_price", "telescope_check",
]


@dataclass
class RateState:
    """Rates and spreads at one time point.  ``L[k-1]`` is L(t, T_k);
    ``h[k-1, xi]`` the pre-default spread for level x_i."""

    t: float
    L: np.ndarray
    h: np.ndarray
    A: float = 0.0

    def y(self, deltas: np.ndarray) -> np.ndarray:
        """y(t, T_k, x) = 1/(1 + delta_k h(t, T_k, x)) for k = 1..n-1."""
        return 1.0 / (1.0 + deltas[1:, None] * self.h)

    def g(self, deltas: np.ndarray) -> np.ndarray:
        """g(t, T_k, x) = delta_k h/(1 + delta_k h) in [0, 1)."""
        dh = deltas[1:, None] * self.h
        return dh / (1.0 + dh)


def _weighted_atoms(model: MarketModel, t: float, state: RateState, start: int):
    """Kernel atoms reweighted to the forward measure attached to T_start:
    (weight, y vector) with weight = rate * prod_{j=start}^{n-1} beta_j(y)."""
    sigmas = model.sigma_matrix(t)
    out = []
    for atom in model.kernel_atoms(t):
        q = min(atom.hi, 1.0 - state.A)
        y = np.append(atom.market, q)
        ells = np.array([ell(state.L[j], model.tenor.delta(j + 1))
                         for j in range(len(state.L))])
        w = float(atom.weight(state.A)) * beta_product(ells, sigmas, y, start)
        out.append((w, y, atom))
    return out


def libor_drift(model: MarketModel, s: float, k: int, state: RateState) -> float:
    """Drift rate of log L(., T_k) under its own forward measure:

        -1/2 <sigma, c sigma> - int (e^{<sigma,y>} - 1 - <sigma,y>) F^{T_{k+1}}(dy)

    computed exactly over the (reweighted) kernel atoms."""
    if not 1 <= k <= model.tenor.n - 1:
        raise DataError(f"libor_drift needs 1 <= k <= n-1, got {k}")
    sigma = model.sigma_matrix(s)[k - 1]
    c = model.driver.segment_at(s).c
    out = -0.5 * float(sigma @ c @ sigma)
    for w, y, _ in _weighted_atoms(model, s, state, k + 1):
        sy = float(sigma @ y)
        out -= w * (np.exp(sy) - 1.0 - sy)
    return out


def spread_drift_under_Tk(model: MarketModel, s: float, i: int, k: int,
                          x_index: int, state: RateState,
                          b_own: float = 0.0) -> float:
    """Drift of log h(., T_i, x) re-expressed under the T_k forward measure:

        b - <gamma, c sum_{j=i+1}^{k-1} alpha_j>
          - int rho(y) (prod_{j=i+1}^{k-1} beta_j(y) - 1) F^{T_k}(dy)

    where b is the drift under the spread's own measure (T_{i+1})."""
    if not 1 <= i < k <= model.tenor.n:
        raise DataError(f"need 1 <= i < k <= n, got i={i}, k={k}")
    gamma = model.gamma_matrix(s)[i - 1, x_index]
    c = model.driver.segment_at(s).c
    sigmas = model.sigma_matrix(s)
    ells = np.array([ell(state.L[j], model.tenor.delta(j + 1))
                     for j in range(len(state.L))])
    alpha_sum = np.zeros(model.d + 1)
    for j in range(i + 1, k):
        alpha_sum += ells[j - 1] * sigmas[j - 1]
    out = b_own - float(gamma @ c @ alpha_sum)
    cont = model.vols.contagion
    for w, y, atom in _weighted_atoms(model, s, state, k):
        rho = float(gamma[:-1] @ y[:-1])
        if atom.has_loss and y[-1] > 0.0:
            rho += float(cont.value(np.asarray(y[-1])))
        inner = beta_product(ells, sigmas, y, i + 1) / beta_product(
            ells, sigmas, y, k)
        out -= w * rho * (inner - 1.0)
    return out


# -- single-path evolution (replay oracles) ----------------------------------


def evolve_path(model: MarketModel, scenario: Scenario, **kwargs) -> ChunkRecord:
    """Evolve all rates, spreads and forward bond prices along one driver
    path, recording the full grid trajectory."""
    return replay_scenario(model, scenario, **kwargs)


def evolve_libor(model: MarketModel, scenario: Scenario) -> np.ndarray:
    """L(t, T_k) along the scenario grid, shape (n_times, n-1)."""
    return evolve_path(model, scenario).L_path[0]


def evolve_spread(model: MarketModel, scenario: Scenario) -> np.ndarray:
    """h(t, T_k, x) along the scenario grid, shape (n_times, n-1, n_levels)."""
    return evolve_path(model, scenario).h_path[0]


def forward_bond_price(model: MarketModel, scenario: Scenario,
                       k: int, x: float) -> np.ndarray:
    """F(t, T_k, x) along the scenario grid for one maturity/level."""
    rec = evolve_path(model, scenario)
    xi = model.levels.index(x)
    return rec.F_path[0, :, k - 1, xi]


# -- pure assembly -----------------------------------------------------------


def assemble_defaultable_libor(L, h, A, x, delta):
    """Defaultable rate from the risk-free rate and the pre-default spread:

        L(t, T_k, x) = 1_{A <= x} * ((1 + delta L)(1 + delta h) - 1)/delta
    """
    L = np.asarray(L, dtype=float)
    h = np.asarray(h, dtype=float)
    alive = np.asarray(A, dtype=float) <= x
    val = ((1.0 + delta * L) * (1.0 + delta * h) - 1.0) / delta
    out = np.where(alive, val, 0.0)
    return float(out) if out.ndim == 0 else out


def credit_spread_H(h, A, x):
    """Credit spread H = 1_{A <= x} h."""
    h = np.asarray(h, dtype=float)
    out = np.where(np.asarray(A, dtype=float) <= x, h, 0.0)
    return float(out) if out.ndim == 0 else out


def telescope_check(record: ChunkRecord, model: MarketModel, k: int, l: int,
                    x: float, t: float, path: int = 0) -> float:
    """Residual of the product identity
    F(t,T_k,x) = prod_{i=l}^{k-1} y(t,T_i,x) * F(t,T_l,x) for t in
    (T_{l-1}, T_l].  Zero whenever the no-arbitrage exponent is shared
    across maturities; a nonzero residual flags maturity-dependent b^P."""
    if not (l < k):
        raise DataError("telescope_check needs l < k")
    dates = model.tenor.dates
    if not (dates[l - 1] < t <= dates[l] + 1e-12):
        raise DataError(f"t={t} outside (T_{l - 1}, T_{l}] = "
                        f"({dates[l - 1]}, {dates[l]}]")
    if record.grid is None:
        raise DataError("telescope_check needs a full-grid record")
    mi = int(np.argmin(np.abs(record.grid - t)))
    if abs(record.grid[mi] - t) > 1e-9:
        raise DataError(f"t={t} is not on the recorded grid")
    xi = model.levels.index(x)
    h = record.h_path[path, mi]
    deltas = model.tenor.deltas
    y = 1.0 / (1.0 + deltas[1:, None] * h)
    prod = float(np.prod(y[l - 1:k - 1, xi]))
    lhs = record.F_path[path, mi, k - 1, xi]
    rhs = prod * record.F_path[path, mi, l - 1, xi]
    return float(abs(lhs - rhs))
