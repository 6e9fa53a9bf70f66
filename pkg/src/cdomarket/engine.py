"""Vectorized path engine.

Everything is simulated under the terminal forward measure.  Per time step
the drift, diffusion and compensator terms are integrated with the
left-limit state frozen at the step start; jump contributions enter exactly
at the event times, after which the drift rates are recomputed for the
affected paths and the already-accumulated step integrals are corrected for
the remaining step fraction.  For models without a Brownian part this makes
every drift integral exact; with diffusion the residual freeze error is
O(dt) in the coefficients and O(dt^2) per step in the martingale means.

Log-space evolution of the rates and spreads preserves positivity exactly.

Per-step log-drift of a live Libor rate under the terminal measure:

    -1/2 <sigma_k, c sigma_k> - <sigma_k, c sum_{j>k} alpha_j>
    - int (e^{<sigma_k, y>} - 1) prod_{j>k} beta_j(y) F(dy)

and of a live pre-default spread (level x, maturity T_i):

    b_i - <gamma_i, c sum_{j>i} alpha_j> - int rho_i(y) prod_{j>i} beta_j(y) F(dy)

with alpha/beta the usual backward-induction reweighting coefficients.  The
no-arbitrage exponent rate b^P is solved pointwise from the drift
restriction  D = lambda^{T_k} - b^P + crossing correction.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .driver import Scenario, build_grid
from .errors import DataError, SingularityError
from .model import MarketModel

__all__ = ["MCConfig", "ChunkRecord", "simulate_chunks", "replay_scenario",
           "collect_records"]


@dataclass(frozen=True)
class MCConfig:
    """Monte Carlo run parameters.  ``bp_offset`` shifts the solved b^P rate
    (the negative-control knob for the martingale tests)."""

    paths: int
    dt: float = 0.01
    seed: int = 0
    chunk_size: int = 8192
    antithetic: bool = False
    record_full: bool = False
    record_indicator_compensator: bool = False
    bp_offset: float = 0.0

    def __post_init__(self):
        if self.paths < 1:
            raise DataError("need at least one path")
        if self.antithetic and self.chunk_size % 2:
            raise DataError("antithetic sampling needs an even chunk size")


@dataclass
class ChunkRecord:
    """State recorded at the tenor dates for one chunk of paths.

    Axis conventions: ``A[p, j]`` is the loss at T_j (j = 0..n);
    ``L[p, j, k-1]`` is L(T_j, T_k) for k = 1..n-1; ``h[p, j, k-1, xi]`` the
    pre-default spread; ``F[p, j, k-1, xi]`` the forward bond price
    F(T_j, T_k, x_i) for maturities k = 1..n (valid for j <= k).
    """

    tenor_dates: np.ndarray
    levels: np.ndarray
    A: np.ndarray
    L: np.ndarray
    h: np.ndarray
    F: np.ndarray
    icomp: np.ndarray | None = None
    antithetic: bool = False
    max_drift_residual: float = 0.0
    # full-grid trajectories (record_full only)
    grid: np.ndarray | None = None
    A_path: np.ndarray | None = None
    L_path: np.ndarray | None = None
    h_path: np.ndarray | None = None
    F_path: np.ndarray | None = None
    bP_path: np.ndarray | None = None

    @property
    def n_paths(self) -> int:
        return self.A.shape[0]


def collect_records(chunks: Iterator[ChunkRecord]) -> ChunkRecord:
    """Concatenate chunk records along the path axis (small runs only)."""
    chunks = list(chunks)
    first = chunks[0]

    def cat(name):
        parts = [getattr(c, name) for c in chunks]
        return None if parts[0] is None else np.concatenate(parts, axis=0)

    return ChunkRecord(
        tenor_dates=first.tenor_dates, levels=first.levels,
        A=cat("A"), L=cat("L"), h=cat("h"), F=cat("F"), icomp=cat("icomp"),
        antithetic=first.antithetic,
        max_drift_residual=max(c.max_drift_residual for c in chunks),
        grid=first.grid, A_path=cat("A_path"), L_path=cat("L_path"),
        h_path=cat("h_path"), F_path=cat("F_path"), bP_path=cat("bP_path"),
    )


# ---------------------------------------------------------------------------
# Static per-step tables
# ---------------------------------------------------------------------------


class _Piece:
    """Frozen coefficients on one grid piece (between adjacent anchors)."""

    def __init__(self, model: MarketModel, t: float):
        n = model.tenor.n
        self.d = model.d
        seg = model.driver.segment_at(t)
        self.c = seg.c
        self.sqrt_c = seg.sqrt_c
        self.sigma = model.sigma_matrix(t)              # (K, D)
        self.gamma = model.gamma_matrix(t)              # (K, m, D)
        self.alive = np.array([t < model.tenor.dates[k] - 1e-12
                               for k in range(1, n)])
        self.sig_c_sig = np.einsum("kd,de,ke->k", self.sigma, self.c, self.sigma)
        self.c_sigma = self.sigma @ self.c              # (K, D)
        self.sqrtc_sigma = self.sigma @ self.sqrt_c     # (K, D)
        self.sqrtc_gamma = self.gamma @ self.sqrt_c     # (K, m, D)
        self.c_gamma = self.gamma @ self.c              # (K, m, D)
        self.gamma_c_gamma = np.einsum("kmd,kmd->km", self.gamma, self.c_gamma)

        atoms = model.kernel_atoms(t)
        self.n_atoms = len(atoms)
        if atoms:
            self.rate = np.array([a.rate for a in atoms])
            self.slope = np.array([a.state_slope for a in atoms])
            self.lo = np.array([a.lo for a in atoms])
            self.hi = np.array([a.hi for a in atoms])
            self.is_cell = np.array([a.is_cell for a in atoms])
            self.has_loss = np.array([a.has_loss for a in atoms])
            market = np.array([a.market for a in atoms])        # (A, d)
            self.sigma_loss = self.sigma[:, -1]                 # (K,)
            self.has_sigma_loss = bool(np.any(self.sigma_loss != 0.0))
            self.exp_mkt = np.exp(market @ self.sigma[:, :-1].T)  # (A, K)
            self.E0 = self.exp_mkt * np.exp(np.outer(self.hi, self.sigma_loss))
            # rho(., T_i, x; y) per atom, static: the contagion part is
            # constant per (split) cell; the pathwise loss cap can only move
            # mass within a cell, where the contagion value is unchanged.
            cont = model.vols.contagion.value(np.where(
                self.is_cell, 0.5 * (self.lo + self.hi), self.hi))
            gmkt = np.einsum("ad,kmd->akm", market, self.gamma[:, :, :-1])
            self.rho0 = gmkt + np.where(self.has_loss, cont, 0.0)[:, None, None]
            self.rho0 *= self.alive[None, :, None]
            self.exp_rho_m1 = np.expm1(self.rho0)
            self.rho_nonzero = bool(np.any(self.rho0 != 0.0))
        else:
            self.has_sigma_loss = False
            self.rho_nonzero = False
        self.gamma_nonzero = bool(np.any(self.gamma != 0.0))

    def atom_E(self, A_state: np.ndarray) -> np.ndarray:
        """exp(<sigma_k, y_a>) with the loss coordinate capped at 1 - A.
        Shape (S, A, K); collapses to the static table when sigma does not
        load on the loss component."""
        if not self.has_sigma_loss:
            return self.E0[None, :, :]
        q_eff = np.minimum(self.hi[None, :], 1.0 - A_state[:, None])
        corr = np.exp((q_eff - self.hi[None, :])[:, :, None]
                      * self.sigma_loss[None, None, :])
        return self.E0[None, :, :] * corr

    def tails(self, A_state: np.ndarray, levels: np.ndarray) -> np.ndarray:
        """Fraction of each atom's mass that would push the loss above each
        level, shape (S, A, m).  Point atoms test (A + capped mark) > x with
        the exact arithmetic the simulation uses for the survival indicator,
        so compensator and crossing law agree even on knife-edge states.
        Levels at 1 never cross (capped marks)."""
        S = len(A_state)
        if self.n_atoms == 0:
            return np.zeros((S, 0, len(levels)))
        q_eff = np.minimum(self.hi[None, :], 1.0 - A_state[:, None])  # (S, A)
        point = ((A_state[:, None, None] + q_eff[:, :, None])
                 > levels[None, None, :]).astype(float)
        thresh = levels[None, None, :] - A_state[:, None, None]
        hi = self.hi[None, :, None]
        lo = self.lo[None, :, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            cell = np.clip((hi - thresh) / np.where(hi > lo, hi - lo, 1.0), 0.0, 1.0)
            cell = np.where(levels[None, None, :] >= 1.0, 0.0, cell)
        out = np.where(self.is_cell[None, :, None], cell, point)
        out *= self.has_loss[None, :, None]
        return out


class _StepTable:
    def __init__(self, model: MarketModel, grid: np.ndarray):
        self.grid = grid
        anchors = sorted(
            set(model.tenor.dates)
            | {b for b in model.driver.boundaries() if 0 <= b <= model.tenor.horizon}
            | {b for b in model.vols.interior_breaks() if 0 <= b <= model.tenor.horizon}
        )
        for b in anchors:
            if grid[0] - 1e-12 <= b <= grid[-1] + 1e-12:
                if not np.any(np.isclose(grid, b, rtol=0.0, atol=1e-12)):
                    raise DataError(
                        f"coefficient break at t={b} falls inside a grid step; "
                        f"rebuild the grid with this time as an anchor")
        pieces = {}
        self.piece_of_step: list[_Piece] = []
        for t in grid[:-1]:
            idx = int(np.searchsorted(anchors, t + 1e-12) - 1)
            if idx not in pieces:
                pieces[idx] = _Piece(model, anchors[idx])
            self.piece_of_step.append(pieces[idx])
        self.tenor_index_at = {}
        for j, tj in enumerate(model.tenor.dates):
            hits = np.nonzero(np.isclose(grid, tj, rtol=0.0, atol=1e-12))[0]
            if len(hits) != 1:
                raise DataError(f"tenor date {tj} is not on the simulation grid")
            self.tenor_index_at[int(hits[0])] = j


# ---------------------------------------------------------------------------
# Noise sources
# ---------------------------------------------------------------------------


class _Round:
    """One batch of jump events, at most one per path, time-ordered within
    each path relative to other rounds of the same step."""

    __slots__ = ("pidx", "tau", "market", "q_raw", "base", "slope", "env", "u")

    def __init__(self, pidx, tau, market, q_raw, base, slope, env, u):
        self.pidx, self.tau, self.market, self.q_raw = pidx, tau, market, q_raw
        self.base, self.slope, self.env, self.u = base, slope, env, u


class _SampledNoise:
    def __init__(self, model: MarketModel, rng: np.random.Generator,
                 n_paths: int, antithetic: bool):
        self.model = model
        self.rng = rng
        self.n_paths = n_paths
        self.antithetic = antithetic

    def brownian(self, dt: float) -> np.ndarray:
        D = self.model.d + 1
        if self.antithetic:
            half = self.rng.normal(0.0, np.sqrt(dt), size=(self.n_paths // 2, D))
            out = np.empty((self.n_paths, D))
            out[0::2] = half
            out[1::2] = -half
            return out
        return self.rng.normal(0.0, np.sqrt(dt), size=(self.n_paths, D))

    def events(self, t0: float, t1: float) -> list[_Round]:
        # jumps are drawn independently for every path; antithetic pairing
        # mirrors the Brownian increments only (shared jump streams would
        # leave the jump variance fully correlated within a pair)
        seg = self.model.driver.segment_at(t0)
        pidx_all, tau_all, mkt_all, q_all = [], [], [], []
        base_all, slope_all, env_all, u_all = [], [], [], []
        for comp in seg.components:
            env = comp.envelope_rate
            if env <= 0.0:
                continue
            counts = self.rng.poisson(env * (t1 - t0), size=self.n_paths)
            total = int(counts.sum())
            if total == 0:
                continue
            pidx = np.repeat(np.arange(self.n_paths), counts)
            tau = self.rng.uniform(t0, t1, size=total)
            mkt, q = comp.sample_marks(self.rng, total)
            u = self.rng.uniform(size=total)
            pidx_all.append(pidx)
            tau_all.append(tau)
            mkt_all.append(mkt)
            q_all.append(q)
            base_all.append(np.full(len(pidx), comp.intensity))
            slope_all.append(np.full(len(pidx), comp.state_slope))
            env_all.append(np.full(len(pidx), env))
            u_all.append(u)
        if not pidx_all:
            return []
        pidx = np.concatenate(pidx_all)
        tau = np.concatenate(tau_all)
        market = np.concatenate(mkt_all)
        q_raw = np.concatenate(q_all)
        base = np.concatenate(base_all)
        slope = np.concatenate(slope_all)
        env = np.concatenate(env_all)
        u = np.concatenate(u_all)
        return _to_rounds(pidx, tau, market, q_raw, base, slope, env, u)


def _to_rounds(pidx, tau, market, q_raw, base, slope, env, u) -> list[_Round]:
    order = np.lexsort((tau, pidx))
    pidx, tau = pidx[order], tau[order]
    market, q_raw = market[order], q_raw[order]
    base, slope, env, u = base[order], slope[order], env[order], u[order]
    # rank of each event within its path (0-based); round r = all rank-r events
    first = np.ones(len(pidx), dtype=bool)
    first[1:] = pidx[1:] != pidx[:-1]
    start = np.maximum.accumulate(np.where(first, np.arange(len(pidx)), 0))
    rank = np.arange(len(pidx)) - start
    rounds = []
    for r in range(int(rank.max()) + 1):
        sel = rank == r
        rounds.append(_Round(pidx[sel], tau[sel], market[sel], q_raw[sel],
                             base[sel], slope[sel], env[sel], u[sel]))
    return rounds


class _ReplayNoise:
    """Noise source backed by a pre-sampled Scenario (single path)."""

    def __init__(self, scenario: Scenario, d: int):
        self.scenario = scenario
        self.d = d
        self.step = 0

    def brownian(self, dt: float) -> np.ndarray:
        out = self.scenario.dW[self.step][None, :]
        self.step += 1
        return out

    def events(self, t0: float, t1: float) -> list[_Round]:
        rounds = []
        for tau, y in self.scenario.jumps:
            if t0 < tau <= t1 or (t0 == 0.0 and tau == 0.0):
                rounds.append(_Round(
                    pidx=np.array([0]), tau=np.array([tau]),
                    market=np.asarray(y[:-1])[None, :],
                    q_raw=np.array([y[-1]]),
                    base=np.array([1.0]), slope=np.array([0.0]),
                    env=np.array([1.0]), u=np.array([0.0])))
        return rounds


# ---------------------------------------------------------------------------
# The evolution core
# ---------------------------------------------------------------------------


def _suffix_prod(beta: np.ndarray) -> np.ndarray:
    """Running suffix products prod_{i >= j} beta_i along the last axis;
    output has one extra slot holding the empty product 1."""
    S, K = beta.shape
    out = np.ones((S, K + 1))
    out[:, :K] = np.cumprod(beta[:, ::-1], axis=1)[:, ::-1]
    return out


class _Rates:
    __slots__ = ("r_L", "r_h", "bP", "icomp", "residual")

    def __init__(self, r_L, r_h, bP, icomp, residual):
        self.r_L, self.r_h, self.bP = r_L, r_h, bP
        self.icomp, self.residual = icomp, residual


class _Evolver:
    def __init__(self, model: MarketModel, cfg: MCConfig, n_paths: int):
        self.model = model
        self.cfg = cfg
        self.n = model.tenor.n
        self.K = self.n - 1
        self.m = model.n_levels
        self.levels = (np.asarray(model.levels.levels) if model.levels is not None
                       else np.zeros(0))
        self.deltas = model.tenor.deltas          # delta_0..delta_{n-1}
        self.dk = self.deltas[1:]                 # delta_k for k = 1..n-1
        self.L0 = model.initial_libors()
        self.h0 = model.initial_spreads()         # (K, m)
        self.y0 = model.y0()                      # (m,)
        self.h0_pos = self.h0 > 0.0
        self.P = n_paths
        self.A = np.zeros(n_paths)
        self.accL = np.zeros((n_paths, self.K))
        self.acch = np.zeros((n_paths, self.K, self.m))
        self.bP = np.zeros((n_paths, self.n, self.m))
        self.icomp = (np.zeros((n_paths, self.m))
                      if cfg.record_indicator_compensator else None)
        self.max_resid = 0.0
        mode = model.spread_drift.kind
        self.b_const = (model.spread_drift.constant_array(self.K, self.m)
                        if mode == "constant" else np.zeros((self.K, self.m)))
        self.triangular = mode == "triangular"

    # -- state views ---------------------------------------------------------

    def current_L(self, idx=slice(None)) -> np.ndarray:
        return self.L0[None, :] * np.exp(self.accL[idx])

    def current_h(self, idx=slice(None)) -> np.ndarray:
        return self.h0[None, :, :] * np.exp(self.acch[idx])

    def current_F(self, idx=slice(None)) -> np.ndarray:
        """F(t, T_k, x) for maturities k = 1..n, shape (S, n, m)."""
        if self.m == 0:
            return np.zeros((self.A[idx].shape[0], self.n, 0))
        h = self.current_h(idx)
        y = 1.0 / (1.0 + self.dk[None, :, None] * h)       # (S, K, m)
        ypre = np.concatenate([np.ones_like(y[:, :1, :]),
                               np.cumprod(y, axis=1)], axis=1)  # (S, n, m)
        alive = (self.A[idx][:, None, None] <= self.levels[None, None, :])
        return self.y0[None, None, :] * ypre * np.exp(self.bP[idx]) * alive

    # -- drift rates ---------------------------------------------------------

    def rates(self, piece: _Piece, t: float, idx) -> _Rates:
        A_s = self.A[idx]
        S = A_s.shape[0]
        K, n, m = self.K, self.n, self.m
        L = self.L0[None, :] * np.exp(self.accL[idx])
        ellv = self.dk[None, :] * L / (1.0 + self.dk[None, :] * L)
        alpha = ellv[:, :, None] * piece.sigma[None, :, :]       # (S, K, D)
        rev = np.cumsum(alpha[:, ::-1, :], axis=1)[:, ::-1, :]
        suffix_alpha = np.zeros_like(alpha)
        suffix_alpha[:, :-1, :] = rev[:, 1:, :]                  # sum_{j>k}

        have_atoms = piece.n_atoms > 0
        if have_atoms:
            w = piece.rate[None, :] * (1.0 + piece.slope[None, :] * A_s[:, None])
            E = piece.atom_E(A_s)                                # (S|1, A, K)
            tails = piece.tails(A_s, self.levels)                # (S, A, m)

        r_L = (-0.5 * piece.sig_c_sig[None, :]
               - (suffix_alpha * piece.c_sigma[None, :, :]).sum(axis=2))
        if m == 0:
            if have_atoms:
                for a in range(piece.n_atoms):
                    beta_a = ellv * (E[:, a, :] - 1.0) + 1.0
                    Pi_a = _suffix_prod(beta_a)
                    r_L -= (w[:, a:a + 1] * (E[:, a, :] - 1.0)) * Pi_a[:, 1:]
            return _Rates(r_L, np.zeros((S, K, 0)), np.zeros((S, n, 0)),
                          None, 0.0)

        h = self.h0[None, :, :] * np.exp(self.acch[idx])
        g = self.dk[None, :, None] * h / (1.0 + self.dk[None, :, None] * h)

        jump_h = np.zeros((S, K, m))
        term5 = np.zeros((S, n, m))
        lamTk = np.zeros((S, n, m))
        corr = np.zeros((S, n, m))
        lam_star = np.zeros((S, m))
        for a in range(piece.n_atoms if have_atoms else 0):
            w_a = w[:, a]
            beta_a = ellv * (E[:, a, :] - 1.0) + 1.0              # (S|1, K)
            Pi_a = _suffix_prod(beta_a)                           # (S|1, n)
            r_L -= (w_a[:, None] * (E[:, a, :] - 1.0)) * Pi_a[:, 1:]
            wPi_a = w_a[:, None] * Pi_a                           # (S, n)
            lamTk += wPi_a[:, :, None] * tails[:, a, None, :]
            lam_star += w_a[:, None] * tails[:, a, :]
            if piece.rho_nonzero:
                rho_a = piece.rho0[a]                             # (K, m)
                jump_h += (w_a[:, None] * Pi_a[:, 1:])[:, :, None] * rho_a
                G_a = 1.0 + g * piece.exp_rho_m1[a][None, :, :]   # (S, K, m)
                if np.any(G_a <= 1e-300):
                    bad = np.argwhere(G_a <= 1e-300)[0]
                    raise SingularityError(
                        "factor 1 + g(e^rho - 1) vanished",
                        t=t, k=int(bad[1]) + 1, x=float(self.levels[bad[2]]))
                PGi_a = np.empty((S, n, m))                       # 1/prod_{i<k} G
                PGi_a[:, 0, :] = 1.0
                np.cumprod(G_a, axis=1, out=G_a)
                PGi_a[:, 1:, :] = 1.0 / G_a
                Q_a = np.zeros((S, n, m))
                for k in range(1, n):
                    Q_a[:, k, :] = (Q_a[:, k - 1, :] * beta_a[:, k - 1, None]
                                    + g[:, k - 1, :] * rho_a[k - 1])
                term5 += wPi_a[:, :, None] * (PGi_a - 1.0 + Q_a)
                corr += (wPi_a[:, :, None] * (PGi_a - 1.0)) * tails[:, a, None, :]

        if piece.gamma_nonzero:
            gam_sa = np.einsum("kmd,skd->skm", piece.c_gamma, suffix_alpha)
            pref_alpha = np.zeros((S, n, alpha.shape[2]))
            pref_alpha[:, 1:, :] = np.cumsum(alpha, axis=1)       # sum_{j<k}
            gg = g[:, :, :, None] * piece.gamma[None, :, :, :]    # (S, K, m, D)
            U = np.zeros((S, n, m, gg.shape[3]))
            U[:, 1:] = np.cumsum(gg, axis=1)
            c_pref = pref_alpha @ piece.c                         # (S, n, D)
            t2a = np.einsum("snmd,snd->snm", U, c_pref)
            v_i = g * np.einsum("kmd,skd->skm", piece.gamma,
                                (pref_alpha[:, 1:, :] @ piece.c))
            t2b = np.zeros((S, n, m))
            t2b[:, 1:] = np.cumsum(v_i, axis=1)
            term2 = t2a - t2b
            t3 = 0.5 * (g - g * g) * piece.gamma_c_gamma[None, :, :]
            term3 = np.zeros((S, n, m))
            term3[:, 1:] = -np.cumsum(t3, axis=1)
            term4 = 0.5 * np.einsum("snmd,snmd->snm", U, U @ piece.c)
            R = term2 + term3 + term4 + term5
        else:
            gam_sa = 0.0
            R = term5

        alive = piece.alive
        if self.triangular:
            b = np.zeros((S, K, m))
            gb_sum = np.zeros((S, m))
            for k in range(2, n + 1):
                i = k - 2  # index of b_{k-1}
                target = R[:, k - 1, :] - corr[:, k - 1, :] - gb_sum
                solvable = alive[i] & self.h0_pos[i]
                with np.errstate(divide="ignore", invalid="ignore"):
                    cand = np.where(solvable[None, :] & (g[:, i, :] > 0.0),
                                    target / np.where(g[:, i, :] > 0.0,
                                                      g[:, i, :], 1.0),
                                    0.0)
                b[:, i, :] = cand
                gb_sum = gb_sum + g[:, i, :] * b[:, i, :]
        else:
            b = np.broadcast_to((self.b_const * alive[:, None])[None, :, :],
                                (S, K, m)).copy()

        gb = g * b
        term1 = np.zeros((S, n, m))
        term1[:, 1:] = -np.cumsum(gb, axis=1)
        D = term1 + R
        bP = lamTk - D + corr + self.cfg.bp_offset
        residual = float(np.max(np.abs(D - corr))) if self.triangular else 0.0

        r_h = b - gam_sa - (jump_h if piece.n_atoms else 0.0)
        icomp = None
        if self.icomp is not None:
            icomp = lam_star * (A_s[:, None] <= self.levels[None, :])
        return _Rates(r_L, r_h, bP, icomp, residual)

    # -- step ---------------------------------------------------------------

    def accumulate(self, rates: _Rates, dt, idx) -> None:
        """Add rate * dt to the integral accumulators; dt may be per-path."""
        dt_arr = np.asarray(dt, dtype=float)
        dL = dt_arr[:, None] if dt_arr.ndim else dt_arr
        self.accL[idx] += rates.r_L * dL
        if self.m:
            dh = dt_arr[:, None, None] if dt_arr.ndim else dt_arr
            self.acch[idx] += rates.r_h * dh
            self.bP[idx] += rates.bP * dh
            if self.icomp is not None:
                di = dt_arr[:, None] if dt_arr.ndim else dt_arr
                self.icomp[idx] += rates.icomp * di
        self.max_resid = max(self.max_resid, rates.residual)

    def apply_jump(self, piece: _Piece, rnd: _Round, accept: np.ndarray) -> None:
        """Apply one event round (already thinned) to the affected paths."""
        pidx = rnd.pidx[accept]
        if len(pidx) == 0:
            return
        market = rnd.market[accept]
        q_eff = np.minimum(rnd.q_raw[accept], 1.0 - self.A[pidx])
        dlogL = market @ piece.sigma[:, :-1].T + np.outer(q_eff, piece.sigma[:, -1])
        self.accL[pidx] += dlogL
        if self.m:
            rho = np.einsum("ed,kmd->ekm", market, piece.gamma[:, :, :-1])
            cont = self.model.vols.contagion.value(q_eff)
            rho += np.where(q_eff > 0.0, cont, 0.0)[:, None, None]
            rho *= piece.alive[None, :, None]
            self.acch[pidx] += rho
        self.A[pidx] = self.A[pidx] + q_eff

    def step(self, piece: _Piece, t0: float, t1: float, noise) -> None:
        dt = t1 - t0
        rates = self.rates(piece, t0, slice(None))
        self.accumulate(rates, dt, slice(None))
        rounds = noise.events(t0, t1)
        if rounds:
            cur = rates
            for rnd in rounds:
                lam = rnd.base * (1.0 + rnd.slope * self.A[rnd.pidx])
                accept = rnd.u * rnd.env <= lam
                pidx = rnd.pidx[accept]
                if len(pidx) == 0:
                    continue
                old = _slice_rates(cur, pidx) if cur is rates else \
                    self.rates(piece, t0, pidx)
                self.apply_jump(piece, rnd, accept)
                new = self.rates(piece, t0, pidx)
                remaining = t1 - rnd.tau[accept]
                self.accumulate(_diff_rates(new, old), remaining, pidx)
                cur = None  # state changed; recompute per-round from now on
        dW = noise.brownian(dt)
        self.accL += dW @ piece.sqrtc_sigma.T
        if self.m:
            self.acch += np.einsum("sd,kmd->skm", dW, piece.sqrtc_gamma)


def _slice_rates(rates: _Rates, pidx) -> _Rates:
    return _Rates(rates.r_L[pidx], rates.r_h[pidx], rates.bP[pidx],
                  None if rates.icomp is None else rates.icomp[pidx],
                  rates.residual)


def _diff_rates(new: _Rates, old: _Rates) -> _Rates:
    return _Rates(new.r_L - old.r_L, new.r_h - old.r_h, new.bP - old.bP,
                  None if new.icomp is None else new.icomp - old.icomp,
                  max(new.residual, old.residual))


# ---------------------------------------------------------------------------
# Public entry points
# ---------------------------------------------------------------------------


def _run_chunk(model: MarketModel, cfg: MCConfig, n_paths: int,
               noise, grid: np.ndarray, table: _StepTable) -> ChunkRecord:
    ev = _Evolver(model, cfg, n_paths)
    n, K, m = ev.n, ev.K, ev.m
    n_dates = n + 1
    recA = np.zeros((n_paths, n_dates))
    recL = np.zeros((n_paths, n_dates, K))
    rech = np.zeros((n_paths, n_dates, K, m))
    recF = np.zeros((n_paths, n_dates, n, m))
    reci = (np.zeros((n_paths, n_dates, m))
            if cfg.record_indicator_compensator else None)
    full = None
    if cfg.record_full:
        M = len(grid)
        full = dict(A=np.zeros((n_paths, M)), L=np.zeros((n_paths, M, K)),
                    h=np.zeros((n_paths, M, K, m)),
                    F=np.zeros((n_paths, M, n, m)),
                    bP=np.zeros((n_paths, M, n, m)))

    def record_tenor(j):
        recA[:, j] = ev.A
        recL[:, j] = ev.current_L()
        rech[:, j] = ev.current_h()
        recF[:, j] = ev.current_F()
        if reci is not None:
            reci[:, j] = ev.icomp

    def record_full(mi):
        full["A"][:, mi] = ev.A
        full["L"][:, mi] = ev.current_L()
        full["h"][:, mi] = ev.current_h()
        full["F"][:, mi] = ev.current_F()
        full["bP"][:, mi] = ev.bP

    record_tenor(0)
    if full is not None:
        record_full(0)
    for mi in range(len(grid) - 1):
        ev.step(table.piece_of_step[mi], grid[mi], grid[mi + 1], noise)
        if full is not None:
            record_full(mi + 1)
        j = table.tenor_index_at.get(mi + 1)
        if j is not None:
            record_tenor(j)
    return ChunkRecord(
        tenor_dates=np.asarray(model.tenor.dates), levels=ev.levels,
        A=recA, L=recL, h=rech, F=recF, icomp=reci,
        antithetic=cfg.antithetic, max_drift_residual=ev.max_resid,
        grid=grid if full is not None else None,
        A_path=None if full is None else full["A"],
        L_path=None if full is None else full["L"],
        h_path=None if full is None else full["h"],
        F_path=None if full is None else full["F"],
        bP_path=None if full is None else full["bP"],
    )


def simulate_chunks(model: MarketModel, cfg: MCConfig) -> Iterator[ChunkRecord]:
    """Simulate cfg.paths paths in independent chunks.  Chunk c draws from
    its own generator seeded by (seed, c), so results are deterministic for a
    fixed configuration regardless of how chunks would be scheduled."""
    problems = model.validate()
    if problems:
        raise DataError("model validation failed:\n  " + "\n  ".join(problems))
    grid = build_grid(model.driver, model.tenor, cfg.dt,
                      extra=model.vols.interior_breaks())
    table = _StepTable(model, grid)
    done = 0
    chunk_idx = 0
    while done < cfg.paths:
        size = min(cfg.chunk_size, cfg.paths - done)
        if cfg.antithetic and size % 2:
            size += 1  # keep pairs whole; the caller sees cfg.paths rounded up
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, chunk_idx]))
        noise = _SampledNoise(model, rng, size, cfg.antithetic)
        yield _run_chunk(model, cfg, size, noise, grid, table)
        done += size
        chunk_idx += 1


def replay_scenario(model: MarketModel, scenario: Scenario,
                    record_indicator_compensator: bool = False,
                    bp_offset: float = 0.0) -> ChunkRecord:
    """Evolve rates and spreads along one pre-sampled driver path, recording
    the full grid trajectory.  Used by the single-path oracles."""
    cfg = MCConfig(paths=1, dt=np.inf, seed=0, chunk_size=1,
                   record_full=True,
                   record_indicator_compensator=record_indicator_compensator,
                   bp_offset=bp_offset)
    table = _StepTable(model, scenario.grid)
    noise = _ReplayNoise(scenario, model.d)
    return _run_chunk(model, cfg, 1, noise, scenario.grid, table)
