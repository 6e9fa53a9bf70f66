"""Discrete-tenor market model for CDO tranches.

Joint simulation of a market factor (Brownian plus finite-activity jumps)
and an aggregate loss process; arbitrage-free evolution of risk-free and
defaultable forward Libor rates on a discrete tenor; Monte Carlo pricing of
single-tranche CDOs; deterministic bootstrapping of band-integrated
defaultable bond prices from tranche quotes.
"""

__version__ = "0.1.0"

from .arbitrage import (DriftReport, ExpTransform, drift_D, drift_report,
                        eks_degenerate_check, solve_bP, z_discretization_study)
from .bootstrap import (BondSurface, QuoteSurface, bootstrap_advance,
                        bootstrap_step1, bootstrap_surface,
                        independence_crossing, implied_band_rates,
                        quotes_from_surface)
from .driver import (DiscreteLoss, DiscreteMarket, DriverSegment, DriverSpec,
                     GaussianMarket, JumpComponent, PointLoss, PointMarket,
                     Scenario, UniformLoss, UniformMarket,
                     check_exponential_moments, loss_intensity,
                     marginal_characteristics, no_loss, no_market, sample_path)
from .engine import ChunkRecord, MCConfig, collect_records, replay_scenario, \
    simulate_chunks
from .errors import DataError, InsufficientPathsError, SingularityError
from .measures import (defaultable_density, density_process, ell,
                       forward_compensator, forward_loss_intensity,
                       girsanov_coefficients)
from .model import (ConstantContagion, MarketModel, NoContagion,
                    PiecewiseConst, SpreadDrift, StepContagion, VolStructure)
from .pricing import (CrossingValue, PriceResult, STCDOSpec, crossing_value,
                      fair_spread, mc_estimate, stcdo_value, tranche_payoff)
from .rates import (RateState, assemble_defaultable_libor, credit_spread_H,
                    evolve_libor, evolve_path, evolve_spread,
                    forward_bond_price, libor_drift, spread_drift_under_Tk,
                    telescope_check)
from .tenor import (LevelGrid, MarketSnapshot, TenorStructure,
                    ValidationReport, initial_libor, initial_spread,
                    validate_snapshot)
