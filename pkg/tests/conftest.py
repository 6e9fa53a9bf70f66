"""Shared test models.

Four desk-scale configurations cover the suite:

* ``riskfree_model``   -- 4 accrual periods, one market factor, diffusion
                          plus one market jump; no defaultable layer.
* ``contagion_model``  -- the same market extended with loss jumps, three
                          interior loss levels, spread vol and constant
                          contagion; no-arbitrage exponent solved per
                          maturity/level.
* ``consistent_model`` -- two independent market factors (one drives rates,
                          one drives spreads), pure point-mass loss jumps and
                          an initial surface computed from the exact Poisson
                          loss law; triangular spread drifts make the
                          no-arbitrage exponent maturity-independent, so the
                          pathwise product identities hold to machine
                          precision and the two crossing-value forms agree.
* ``eks_model``        -- degenerate single-name pool (levels {0, 1}).

Simulated records are cached per session; tests share paths.
"""
import math

import numpy as np
import pytest

from cdomarket import (ConstantContagion, DiscreteLoss, DriverSegment,
                       DriverSpec, JumpComponent, LevelGrid, MarketModel,
                       MarketSnapshot, MCConfig, PointLoss, PointMarket,
                       SpreadDrift, TenorStructure, VolStructure, no_market,
                       simulate_chunks)

TENOR = TenorStructure([0.0, 0.5, 1.0, 1.5, 2.0])
RISKFREE = np.array([0.99, 0.975, 0.955, 0.93])


def zstat(values, target):
    """|mean - target| in standard errors of the sample mean."""
    values = np.asarray(values, dtype=float)
    se = values.std() / np.sqrt(len(values))
    if se == 0.0:
        return 0.0 if np.isclose(values.mean(), target, atol=1e-14) else np.inf
    return abs(values.mean() - target) / se


def poisson_survival(x, t, rate, mark):
    """P(A_t <= x) for a compound Poisson loss with a fixed mark size,
    walking the same capped lattice the simulation uses."""
    if x >= 1.0:
        return 1.0
    total, k, a = 0.0, 0, 0.0
    while a <= x:
        total += math.exp(-rate * t) * (rate * t) ** k / math.factorial(k)
        a = a + min(mark, 1.0 - a)
        k += 1
    return total


@pytest.fixture(scope="session")
def riskfree_model():
    seg = DriverSegment(0.0, 2.0, c=np.array([[0.04, 0.0], [0.0, 0.0]]),
                        components=(JumpComponent(intensity=0.4,
                                                  market=PointMarket((0.3,))),))
    driver = DriverSpec(d=1, segments=(seg,))
    snap = MarketSnapshot(TENOR, RISKFREE)
    vols = VolStructure.from_arrays(sigma=[[0.30, 0.0], [0.25, 0.0], [0.20, 0.0]])
    return MarketModel(tenor=TENOR, snapshot=snap, driver=driver, vols=vols)


@pytest.fixture(scope="session")
def contagion_model():
    comps = (
        JumpComponent(intensity=0.4, market=PointMarket((0.3,))),
        JumpComponent(intensity=0.5, market=no_market(1),
                      loss=DiscreteLoss((0.6, 0.4), (0.11, 0.23))),
    )
    driver = DriverSpec(d=1, segments=(
        DriverSegment(0.0, 2.0, np.array([[0.04, 0.0], [0.0, 0.0]]), comps),))
    levels = LevelGrid([0.0, 0.15, 0.35, 0.6, 1.0])
    surv = np.array([
        [0.55, 0.80, 0.93, 0.985, 1.0],
        [0.45, 0.70, 0.88, 0.965, 1.0],
        [0.38, 0.62, 0.83, 0.945, 1.0],
        [0.32, 0.55, 0.78, 0.925, 1.0]])
    snap = MarketSnapshot(TENOR, RISKFREE, levels, RISKFREE[:, None] * surv)
    gamma = np.zeros((3, 5, 2))
    gamma[:, :, 0] = 0.25
    vols = VolStructure.from_arrays(
        sigma=[[0.30, 0.0], [0.25, 0.0], [0.20, 0.0]],
        gamma=gamma, contagion=ConstantContagion(0.1))
    return MarketModel(tenor=TENOR, snapshot=snap, driver=driver, vols=vols,
                       levels=levels)


CONSISTENT_LOSS_RATE = 0.35
CONSISTENT_MARK = 0.22


@pytest.fixture(scope="session")
def consistent_model():
    comps = (
        JumpComponent(intensity=0.3, market=PointMarket((0.25, 0.0))),
        JumpComponent(intensity=CONSISTENT_LOSS_RATE, market=no_market(2),
                      loss=PointLoss(CONSISTENT_MARK)),
    )
    c = np.zeros((3, 3))
    c[0, 0] = 0.04
    c[1, 1] = 0.09
    driver = DriverSpec(d=2, segments=(DriverSegment(0.0, 2.0, c, comps),))
    levels = LevelGrid([0.0, 0.3, 0.6, 1.0])
    surv = np.array([[poisson_survival(x, t, CONSISTENT_LOSS_RATE, CONSISTENT_MARK)
                      for x in levels.levels] for t in TENOR.dates[1:]])
    snap = MarketSnapshot(TENOR, RISKFREE, levels, RISKFREE[:, None] * surv)
    gamma = np.zeros((3, len(levels), 3))
    gamma[:, :, 1] = 0.3
    vols = VolStructure.from_arrays(
        sigma=[[0.3, 0.0, 0.0], [0.25, 0.0, 0.0], [0.2, 0.0, 0.0]],
        gamma=gamma, contagion=ConstantContagion(0.1))
    return MarketModel(tenor=TENOR, snapshot=snap, driver=driver, vols=vols,
                       levels=levels, spread_drift=SpreadDrift(kind="triangular"))


@pytest.fixture(scope="session")
def eks_model():
    comps = (JumpComponent(intensity=0.2, market=no_market(1),
                           loss=PointLoss(1.0)),)
    driver = DriverSpec(d=1, segments=(
        DriverSegment(0.0, 2.0, np.array([[0.04, 0.0], [0.0, 0.0]]), comps),))
    levels = LevelGrid([0.0, 1.0])
    surv = np.array([[0.90, 1.0], [0.82, 1.0], [0.75, 1.0], [0.69, 1.0]])
    snap = MarketSnapshot(TENOR, RISKFREE, levels, RISKFREE[:, None] * surv)
    gamma = np.zeros((3, 2, 2))
    gamma[:, 0, 0] = 0.3
    vols = VolStructure.from_arrays(sigma=[[0.0, 0.0]] * 3, gamma=gamma)
    return MarketModel(tenor=TENOR, snapshot=snap, driver=driver, vols=vols,
                       levels=levels, spread_drift=SpreadDrift(kind="triangular"))


@pytest.fixture(scope="session")
def riskfree_records(riskfree_model):
    cfg = MCConfig(paths=60_000, dt=0.02, seed=101)
    return list(simulate_chunks(riskfree_model, cfg))


@pytest.fixture(scope="session")
def contagion_records(contagion_model):
    cfg = MCConfig(paths=40_000, dt=0.025, seed=202)
    return list(simulate_chunks(contagion_model, cfg))


@pytest.fixture(scope="session")
def consistent_records(consistent_model):
    cfg = MCConfig(paths=60_000, dt=0.025, seed=303)
    return list(simulate_chunks(consistent_model, cfg))
