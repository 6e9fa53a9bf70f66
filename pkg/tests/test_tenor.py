import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cdomarket import (DataError, LevelGrid, MarketSnapshot, TenorStructure,
                       initial_libor, initial_spread, validate_snapshot)
from cdomarket.tenor import (read_defaultable_csv, read_riskfree_csv,
                             snapshot_from_curves)


def make_snapshot(riskfree, levels=None, surface=None, dates=None):
    dates = dates or [0.0] + [0.5 * (i + 1) for i in range(len(riskfree))]
    tenor = TenorStructure(dates)
    if levels is None:
        return MarketSnapshot(tenor, np.asarray(riskfree, dtype=float))
    return MarketSnapshot(tenor, np.asarray(riskfree, dtype=float),
                          LevelGrid(levels), np.asarray(surface, dtype=float))


class TestTenorStructure:
    def test_accruals_match_date_differences(self):
        tenor = TenorStructure([0.0, 0.25, 1.0, 1.75])
        assert tenor.n == 3
        assert tenor.delta(0) == 0.25
        assert tenor.delta(1) == 0.75
        assert np.allclose(tenor.deltas, [0.25, 0.75, 0.75])

    @pytest.mark.parametrize("dates", [[0.0], [0.5, 1.0], [0.0, 1.0, 1.0],
                                       [0.0, 1.0, 0.5]])
    def test_bad_dates_rejected(self, dates):
        with pytest.raises(DataError):
            TenorStructure(dates)

    def test_level_grid_bounds(self):
        with pytest.raises(DataError):
            LevelGrid([0.0, 0.5])          # missing 1
        with pytest.raises(DataError):
            LevelGrid([0.1, 0.5, 1.0])     # missing 0
        grid = LevelGrid([0.0, 0.5, 1.0])
        assert grid.index(0.5) == 1
        assert grid.refine([0.25]).levels == (0.0, 0.25, 0.5, 1.0)


class TestValidateSnapshot:
    def test_riskfree_degenerate_pool_is_valid(self):
        # x = 1 only: the defaultable surface collapses to the risk-free curve
        snap = make_snapshot([0.99, 0.97, 0.94], [0.0, 1.0],
                             [[0.99, 0.99], [0.97, 0.97], [0.94, 0.94]])
        assert validate_snapshot(snap).ok

    def test_riskfree_monotonicity_violation_located(self):
        snap = make_snapshot([0.97, 0.98])
        report = validate_snapshot(snap)
        assert not report.ok
        assert any("k=1" in v for v in report.violations)

    def test_forward_price_monotonicity_violation(self):
        # F(0,T_1,x) = 0.95 < F(0,T_2,x) = 0.96 must be flagged at k=1
        rf = [0.99, 0.97]
        surface = [[0.95 * 0.99, 0.99], [0.96 * 0.97, 0.97]]
        report = validate_snapshot(make_snapshot(rf, [0.0, 1.0], surface))
        assert any("F(0,T_k" in v and "k=1" in v for v in report.violations)

    def test_missing_point_named(self):
        tenor = TenorStructure([0.0, 0.5, 1.0])
        grid = LevelGrid([0.0, 1.0])
        curves = {(0.5, 0.0): 0.9, (0.5, 1.0): 0.99, (1.0, 1.0): 0.97}
        with pytest.raises(DataError, match=r"\(k=2, x=0.0\)"):
            snapshot_from_curves(tenor, {0.5: 0.99, 1.0: 0.97}, grid, curves)


class TestInitialRates:
    def test_equal_bonds_zero_rate(self):
        snap = make_snapshot([0.95, 0.95], dates=[0.0, 0.5, 1.0])
        assert initial_libor(snap, snap.tenor, 1) == 0.0

    def test_libor_direct_arithmetic(self):
        snap = make_snapshot([1.0, 0.99], dates=[0.0, 1.0, 2.0])
        val = initial_libor(snap, snap.tenor, 1)
        assert val == pytest.approx((1.0 / 0.99 - 1.0) / 1.0, abs=1e-15)
        snap2 = make_snapshot([0.98, 0.97], dates=[0.0, 0.25, 0.5])
        val2 = initial_libor(snap2, snap2.tenor, 1)
        assert val2 == pytest.approx((0.98 / 0.97 - 1.0) / 0.25, abs=1e-12)

    def test_spread_flat_forward_price_zero(self):
        rf = [0.99, 0.97]
        surface = [[0.9 * 0.99, 0.99], [0.9 * 0.97, 0.97]]
        snap = make_snapshot(rf, [0.0, 1.0], surface)
        assert initial_spread(snap, snap.tenor, 1, 0.0) == pytest.approx(0.0)

    def test_spread_direct_arithmetic(self):
        rf = [0.99, 0.97]
        surface = [[0.95 * 0.99, 0.99], [0.90 * 0.97, 0.97]]
        snap = make_snapshot(rf, [0.0, 1.0], surface)
        val = initial_spread(snap, snap.tenor, 1, 0.0)
        assert val == pytest.approx((0.95 / 0.90 - 1.0) / 0.5, abs=1e-12)

    def test_spread_zero_at_level_one(self):
        rf = [0.99, 0.97]
        surface = [[0.9 * 0.99, 0.99], [0.85 * 0.97, 0.97]]
        snap = make_snapshot(rf, [0.0, 1.0], surface)
        assert initial_spread(snap, snap.tenor, 1, 1.0) == pytest.approx(0.0)

    def test_degenerate_curve_rejected(self):
        rf = [0.99, 0.97]
        surface = [[0.5 * 0.99, 0.99], [0.0, 0.97]]
        snap = make_snapshot(rf, [0.0, 1.0], surface)
        with pytest.raises(DataError, match="degenerate"):
            initial_spread(snap, snap.tenor, 1, 0.0)


@st.composite
def survival_surfaces(draw):
    """Snapshots built from genuine survival functions: multiplicative decay
    per period, nondecreasing in x.  These satisfy the initial-data
    conditions by construction."""
    n = draw(st.integers(2, 5))
    m = draw(st.integers(2, 4))
    rf_steps = draw(st.lists(st.floats(0.005, 0.08), min_size=n, max_size=n))
    rf = np.cumprod([1.0 - s for s in rf_steps])
    hazards = np.array(draw(st.lists(
        st.lists(st.floats(0.01, 0.6), min_size=m, max_size=m),
        min_size=n, max_size=n)))
    hazards = np.sort(hazards, axis=1)[:, ::-1]  # higher level -> lower hazard
    surv = np.exp(-np.cumsum(hazards, axis=0))
    levels = [0.0] + sorted(draw(st.lists(
        st.floats(0.05, 0.95), min_size=m - 1, max_size=m - 1,
        unique=True))) + [1.0]
    surface = rf[:, None] * np.concatenate([surv, np.ones((n, 1))], axis=1)
    dates = [0.0] + [0.5 * (i + 1) for i in range(n)]
    return MarketSnapshot(TenorStructure(dates), rf, LevelGrid(levels), surface)


class TestSnapshotProperties:
    @given(survival_surfaces())
    @settings(max_examples=40, deadline=None)
    def test_survival_surfaces_validate_and_have_nonneg_spreads(self, snap):
        assert validate_snapshot(snap).ok
        for k in range(1, snap.tenor.n):
            for x in snap.levels.levels:
                assert initial_spread(snap, snap.tenor, k, x) >= -1e-12

    @given(survival_surfaces())
    @settings(max_examples=20, deadline=None)
    def test_level_one_column_reproduces_riskfree(self, snap):
        for k in range(1, snap.tenor.n + 1):
            assert snap.Px(k, 1.0) == pytest.approx(snap.P(k), abs=1e-14)
            assert snap.F0(k, 1.0) == pytest.approx(1.0, abs=1e-14)

    def test_example_snapshot_spread_monotone_in_level(self):
        """On the shipped law-consistent surface the initial spreads are
        nonincreasing in the level (deeper tranches carry higher spreads)."""
        from pathlib import Path
        from cdomarket.config import load_model
        example = (Path(__file__).resolve().parent.parent / "configs"
                   / "example" / "model.yaml")
        model = load_model(example)
        for k in range(1, model.tenor.n):
            spreads = [initial_spread(model.snapshot, model.tenor, k, x)
                       for x in model.levels.levels]
            assert all(a >= b - 1e-12 for a, b in zip(spreads, spreads[1:]))

    def test_step_interpolation_right_continuous(self):
        rf = [0.99, 0.97]
        surface = [[0.8 * 0.99, 0.9 * 0.99, 0.99],
                   [0.7 * 0.97, 0.85 * 0.97, 0.97]]
        snap = make_snapshot(rf, [0.0, 0.4, 1.0], surface)
        assert snap.Px(1, 0.2) == pytest.approx(surface[0][0])
        assert snap.Px(1, 0.4) == pytest.approx(surface[0][1])
        width_int = snap.band_integral(1, 0.0, 1.0)
        hand = 0.4 * surface[0][0] + 0.6 * surface[0][1]
        assert width_int == pytest.approx(hand, abs=1e-14)


class TestCsvIngestion:
    def test_roundtrip(self, tmp_path):
        rf = tmp_path / "riskfree.csv"
        rf.write_text("T,P\n0.5,0.99\n1.0,0.97\n")
        dflt = tmp_path / "defaultable.csv"
        dflt.write_text("T,x,P\n0.5,0.0,0.9\n0.5,1.0,0.99\n"
                        "1.0,0.0,0.8\n1.0,1.0,0.97\n")
        curves = read_riskfree_csv(rf)
        assert curves == {0.5: 0.99, 1.0: 0.97}
        surf = read_defaultable_csv(dflt)
        assert surf[(1.0, 0.0)] == 0.8
        snap = snapshot_from_curves(TenorStructure([0.0, 0.5, 1.0]), curves,
                                    LevelGrid([0.0, 1.0]), surf)
        assert validate_snapshot(snap).ok

    def test_nan_rejected(self, tmp_path):
        bad = tmp_path / "riskfree.csv"
        bad.write_text("T,P\n0.5,nan\n")
        with pytest.raises(DataError, match="NaN"):
            read_riskfree_csv(bad)

    def test_negative_rejected(self, tmp_path):
        bad = tmp_path / "riskfree.csv"
        bad.write_text("T,P\n0.5,-0.1\n")
        with pytest.raises(DataError, match="negative"):
            read_riskfree_csv(bad)
