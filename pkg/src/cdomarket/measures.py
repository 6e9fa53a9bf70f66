"""Forward-measure machinery.

All simulation runs under the terminal forward measure; expectations under
the earlier forward measures and under the defaultable forward measures are
obtained by density reweighting.  This module holds the scalar reference
implementations: the engine vectorizes the same formulas across paths.

Conventions: tenor dates are T_0..T_n; Libor rates L(., T_j) exist for
j = 1..n-1 and are passed as arrays indexed by j-1.  ``sigmas[j-1]`` is the
volatility vector of L(., T_j) at the evaluation time (already zero if the
rate has expired).
"""
from __future__ import annotations

import numpy as np

from .driver import JumpAtom
from .errors import DataError, SingularityError

__all__ = [
    "ell", "girsanov_coefficients", "beta_factor", "beta_product",
    "forward_compensator", "density_process", "defaultable_density",
    "forward_loss_intensity",
]


def ell(L, delta: float):
    """Relative-rate weight delta*L/(1 + delta*L) in [0, 1) for L >= 0."""
    L = np.asarray(L, dtype=float)
    denom = 1.0 + delta * L
    if np.any(denom <= 0.0):
        raise SingularityError(f"1 + delta*L = {denom.min()} <= 0")
    out = delta * L / denom
    return float(out) if out.ndim == 0 else out


def girsanov_coefficients(L_left: float, delta: float, sigma: np.ndarray,
                          y: np.ndarray) -> tuple[np.ndarray, float]:
    """Girsanov pair for one backward-induction step: the Brownian shift
    alpha = ell * sigma and the jump reweighting
    beta = ell * (exp<sigma, y> - 1) + 1, both evaluated with the left-limit
    rate L_left."""
    lv = ell(L_left, delta)
    sigma = np.asarray(sigma, dtype=float)
    alpha = lv * sigma
    beta = lv * np.expm1(float(np.dot(sigma, y))) + 1.0
    return alpha, beta


def beta_factor(ell_value: float, sigma: np.ndarray, y: np.ndarray) -> float:
    return ell_value * np.expm1(float(np.dot(np.asarray(sigma), np.asarray(y)))) + 1.0


def beta_product(ells: np.ndarray, sigmas: np.ndarray, y: np.ndarray,
                 start: int) -> float:
    """prod_{j=start}^{n-1} beta(s, T_j, y).  ``start`` is a tenor index;
    an empty range gives 1 (terminal measure)."""
    n_minus_1 = len(ells)
    out = 1.0
    for j in range(start, n_minus_1 + 1):
        out *= beta_factor(float(ells[j - 1]), sigmas[j - 1], y)
    return out


def forward_compensator(atoms: list[JumpAtom], ells: np.ndarray,
                        sigmas: np.ndarray, k: int, a: float = 0.0,
                        ) -> list[tuple[float, JumpAtom]]:
    """Jump kernel under the forward measure attached to T_{k+1}: each atom's
    arrival weight is multiplied by prod_{j=k+1}^{n-1} beta(s, T_j, y).
    Returns (reweighted rate, atom) pairs evaluated at loss state a."""
    out = []
    for atom in atoms:
        q = min(atom.hi, 1.0 - a)
        y = np.append(atom.market, q)
        w = float(atom.weight(a)) * beta_product(ells, sigmas, y, k + 1)
        out.append((w, atom))
    return out


def density_process(riskfree0: np.ndarray, deltas: np.ndarray,
                    L_t: np.ndarray, k: int) -> float:
    """Radon-Nikodym density of the T_{k+1}-forward measure w.r.t. the
    terminal measure, restricted to time t:
    (P(0,T_n)/P(0,T_{k+1})) * prod_{j=k+1}^{n-1} (1 + delta_j L(t,T_j)).
    Equals 1 at t = 0 by construction.

    ``riskfree0[j-1]`` is P(0, T_j); ``L_t[j-1]`` is L(t, T_j).
    """
    n = len(riskfree0)
    if not 0 <= k <= n - 1:
        raise DataError(f"density_process needs 0 <= k <= n-1, got k={k}")
    out = riskfree0[n - 1] / riskfree0[k]
    for j in range(k + 1, n):
        out *= 1.0 + deltas[j] * L_t[j - 1]
    return float(out)


def defaultable_density(F_t: float, F_0: float) -> float:
    """Density of the defaultable forward measure attached to (T_{k+1}, x)
    w.r.t. the T_{k+1}-forward measure at time t: F(t,T_{k+1},x)/F(0,T_{k+1},x).
    Vanishes on paths where the loss has crossed x; equals 1 at t = 0."""
    if F_0 <= 0.0:
        raise DataError("defaultable forward measure undefined: F(0,T,x) = 0")
    return F_t / F_0


def forward_loss_intensity(atoms: list[JumpAtom], ells: np.ndarray,
                           sigmas: np.ndarray, k: int, a: float,
                           x: float) -> float:
    """Loss-crossing intensity under the T_k-forward measure: the tail mass
    of the reweighted loss kernel on (x - a, 1]."""
    if a > x:
        raise DataError(f"forward_loss_intensity needs a <= x, got a={a} > x={x}")
    total = 0.0
    for atom in atoms:
        frac = float(atom.tail_frac(np.asarray(a), x))
        if frac == 0.0:
            continue
        q = min(atom.hi, 1.0 - a)
        y = np.append(atom.market, q)
        total += float(atom.weight(a)) * beta_product(ells, sigmas, y, k) * frac
    return total
