import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cdomarket import (BondSurface, DataError, QuoteSurface,
                       bootstrap_advance, bootstrap_step1, bootstrap_surface,
                       implied_band_rates, independence_crossing,
                       quotes_from_surface)

BANDS = ((0.0, 0.03), (0.03, 0.07), (0.07, 0.15), (0.15, 1.0))


def make_quotes(maturities, riskfree, bands, t1_legs, spreads):
    return QuoteSurface(maturities=tuple(maturities),
                        riskfree=np.asarray(riskfree, dtype=float),
                        bands=tuple(bands),
                        t1_legs=np.asarray(t1_legs, dtype=float),
                        spreads=np.asarray(spreads, dtype=float))


class TestStep1:
    def test_lossless_quote(self):
        q = make_quotes([1.0, 2.0], [0.99, 0.97], [(0.0, 0.03), (0.03, 1.0)],
                        [0.0, 0.0], [[0.0, 0.0]])
        vals = bootstrap_step1(q)
        assert vals[0] == pytest.approx(0.03 * 0.99)
        assert vals[1] == pytest.approx(0.97 * 0.99)

    def test_arithmetic(self):
        q = make_quotes([1.0, 2.0], [0.99, 0.97], [(0.0, 0.03), (0.03, 1.0)],
                        [0.0005, 0.0], [[0.0, 0.0]])
        assert bootstrap_step1(q)[0] == pytest.approx(0.03 * 0.99 - 0.0005)

    def test_total_wipeout(self):
        q = make_quotes([1.0, 2.0], [0.99, 0.97], [(0.0, 0.03), (0.03, 1.0)],
                        [0.03 * 0.99, 0.0], [[0.0, 0.0]])
        assert bootstrap_step1(q)[0] == pytest.approx(0.0)

    def test_inconsistent_t1_quote_raises(self):
        q = make_quotes([1.0, 2.0], [0.99, 0.97], [(0.0, 0.03), (0.03, 1.0)],
                        [0.05, 0.0], [[0.0, 0.0]])
        with pytest.raises(DataError, match="inconsistent T_1"):
            bootstrap_surface(q)


class TestIndependenceCrossing:
    def test_flat_ratio_no_crossing(self):
        # surface that decays exactly like the risk-free ratio
        rf = np.array([0.99, 0.97, 0.94])
        values = np.outer(rf, [0.02, 0.05])
        bonds = BondSurface((1.0, 2.0, 3.0), ((0.0, 0.1), (0.1, 1.0)), values)
        assert independence_crossing(bonds, rf, 1, 0) == pytest.approx(0.0)
        assert independence_crossing(bonds, rf, 2, 1) == pytest.approx(0.0)

    def test_zero_rate_arithmetic(self):
        rf = np.array([1.0, 1.0])
        values = np.array([[0.05], [0.04]])
        bonds = BondSurface((1.0, 2.0), ((0.0, 1.0),), values)
        assert independence_crossing(bonds, rf, 1, 0) == pytest.approx(0.01)

    def test_riskfree_pool_full_band(self):
        rf = np.array([0.99, 0.97])
        values = np.array([[0.99], [0.97]])  # P(t,T_k,y) = P(t,T_k) on (0,1]
        bonds = BondSurface((1.0, 2.0), ((0.0, 1.0),), values)
        assert independence_crossing(bonds, rf, 1, 0) == pytest.approx(0.0)


class TestAdvance:
    def test_flat_first_step_without_spread(self):
        q = make_quotes([1.0, 2.0], [0.99, 0.97], [(0.0, 1.0)], [0.01],
                        [[0.0]])
        v1 = bootstrap_step1(q)
        v2 = bootstrap_advance(q, v1[None, :], 1)
        assert v2[0] == pytest.approx((0.97 / 0.99) * v1[0])

    def test_zero_rate_shortcut_matches_general(self):
        maturities = [1.0, 2.0, 3.0, 4.0]
        rf = np.ones(4)
        values = np.array([
            [0.028, 0.038, 0.076, 0.83],
            [0.024, 0.033, 0.070, 0.80],
            [0.020, 0.028, 0.064, 0.77],
            [0.017, 0.024, 0.058, 0.74]])
        q = quotes_from_surface(maturities, rf, BANDS, values)
        general = bootstrap_surface(q, zero_rates=False)
        shortcut = bootstrap_surface(q, zero_rates=True)
        assert np.max(np.abs(general.values - shortcut.values)) <= 1e-12

    def test_zero_rate_shortcut_requires_unit_curve(self):
        q = make_quotes([1.0, 2.0], [0.99, 0.97], [(0.0, 1.0)], [0.01],
                        [[0.001]])
        with pytest.raises(DataError, match="zero-rate"):
            bootstrap_surface(q, zero_rates=True)

    def test_monotonicity_violation_flagged_not_fixed(self):
        """A heavy first-period wipeout followed by a tiny later spread
        makes the recursion produce an increasing column; the surface is
        returned with a flag, not silently repaired."""
        rf = np.array([0.99, 0.97, 0.94])
        v1, v2 = 0.9, 0.1
        s2 = ((0.97 / 0.99) * v1 - v2) / v1
        q = make_quotes([1.0, 2.0, 3.0], rf, [(0.0, 1.0)],
                        [rf[0] - v1], [[s2], [0.01]])
        surface = bootstrap_surface(q)
        assert surface.values[0, 0] == pytest.approx(v1)
        assert surface.values[1, 0] == pytest.approx(v2)
        assert surface.values[2, 0] > surface.values[1, 0]
        assert any("increasing in maturity" in f for f in surface.flags)

    def test_inconsistent_quote_flagged_value_returned(self):
        # spread large enough to drive the next column negative
        q = make_quotes([1.0, 2.0], [0.99, 0.97], [(0.0, 1.0)], [0.2],
                        [[1.2]])
        surface = bootstrap_surface(q)
        assert any("inconsistent quote" in f for f in surface.flags)
        assert np.isfinite(surface.values).all()


@st.composite
def consistent_surfaces(draw):
    """Band-integrated surfaces with nonnegative implied crossing values:
    each column decays at least as fast as the risk-free ratio."""
    m = draw(st.integers(2, 5))
    n_bands = draw(st.integers(1, 4))
    rf_steps = draw(st.lists(st.floats(0.0, 0.05), min_size=m, max_size=m))
    rf = np.cumprod([1.0 - s for s in rf_steps])
    cuts = sorted(draw(st.lists(st.floats(0.02, 0.98), min_size=n_bands - 1,
                                max_size=n_bands - 1, unique=True)))
    bands = []
    lo = 0.0
    for c in cuts + [1.0]:
        bands.append((lo, c))
        lo = c
    base = [draw(st.floats(0.001, 0.9)) * (hi - lo) * rf[0]
            for lo, hi in bands]
    values = np.zeros((m, n_bands))
    values[0] = base
    for k in range(1, m):
        decay = np.array(draw(st.lists(st.floats(0.3, 1.0), min_size=n_bands,
                                       max_size=n_bands)))
        values[k] = values[k - 1] * (rf[k] / rf[k - 1]) * decay
    maturities = [1.0 * (i + 1) for i in range(m)]
    return maturities, rf, tuple(bands), values


class TestRoundTrip:
    @given(consistent_surfaces())
    @settings(max_examples=60, deadline=None)
    def test_quotes_invert_to_surface(self, case):
        maturities, rf, bands, values = case
        quotes = quotes_from_surface(maturities, rf, bands, values)
        recovered = bootstrap_surface(quotes)
        assert np.max(np.abs(recovered.values - values)) <= 1e-10

    def test_implied_rates_flat_surface_match_riskfree(self):
        maturities = [1.0, 2.0, 3.0]
        rf = np.array([0.99, 0.97, 0.94])
        s0 = 0.6
        values = np.outer(rf, [0.1 * s0, 0.9 * s0])
        bonds = BondSurface(tuple(maturities), ((0.0, 0.1), (0.1, 1.0)),
                            values)
        rates, flags = implied_band_rates(bonds, rf)
        assert not flags
        libors = [(rf[k] / rf[k + 1] - 1.0) / 1.0 for k in range(2)]
        for k in range(2):
            assert rates[k, 0] == pytest.approx(libors[k], abs=1e-12)
            assert rates[k, 1] == pytest.approx(libors[k], abs=1e-12)

    def test_wiped_band_flagged(self):
        bonds = BondSurface((1.0, 2.0), ((0.0, 1.0),),
                            np.array([[0.05], [0.0]]))
        rates, flags = implied_band_rates(bonds, np.array([0.99, 0.97]))
        assert flags
        assert np.isnan(rates[0, 0])


class TestQuoteValidation:
    def test_bands_must_partition(self):
        with pytest.raises(DataError, match="partition"):
            make_quotes([1.0, 2.0], [0.99, 0.97],
                        [(0.0, 0.3), (0.4, 1.0)], [0.0, 0.0], [[0.0, 0.0]])

    def test_negative_spread_rejected(self):
        with pytest.raises(DataError):
            make_quotes([1.0, 2.0], [0.99, 0.97], [(0.0, 1.0)], [0.0],
                        [[-0.01]])

    def test_unit_curve_accepted(self):
        q = make_quotes([1.0, 2.0], [1.0, 1.0], [(0.0, 1.0)], [0.01],
                        [[0.01]])
        assert q.widths[0] == 1.0
