import numpy as np
import pytest

from cdomarket import (DataError, DiscreteLoss, DriverSegment, DriverSpec,
                       GaussianMarket, JumpComponent, PointLoss, PointMarket,
                       TenorStructure, UniformLoss, check_exponential_moments,
                       loss_intensity, marginal_characteristics, no_market,
                       sample_path)
from cdomarket.driver import CustomMarket, UniformMarket, build_grid


def spec_with(components, d=1, c=None, horizon=5.0):
    c_mat = np.zeros((d + 1, d + 1)) if c is None else np.asarray(c, dtype=float)
    return DriverSpec(d=d, segments=(DriverSegment(0.0, horizon, c_mat,
                                                   tuple(components)),))


TENOR5 = TenorStructure([0.0, 1.0, 2.0, 3.0, 4.0, 5.0])


class TestSamplePath:
    def test_null_driver_is_identically_zero(self):
        spec = spec_with([])
        sc = sample_path(spec, TENOR5, 1.0, seed=0)
        assert sc.jumps == []
        assert np.all(sc.A == 0.0)

    def test_deterministic_in_seed(self):
        spec = spec_with([JumpComponent(0.5, no_market(1), PointLoss(0.1))],
                         c=[[0.04, 0.0], [0.0, 0.0]])
        a = sample_path(spec, TENOR5, 0.5, seed=42)
        b = sample_path(spec, TENOR5, 0.5, seed=42)
        assert np.array_equal(a.dW, b.dW)
        assert len(a.jumps) == len(b.jumps)
        c_ = sample_path(spec, TENOR5, 0.5, seed=43)
        assert not np.array_equal(a.dW, c_.dW)

    def test_poisson_jump_count_mean(self):
        # intensity 1/yr, horizon 5y: mean loss-jump count 5 within 3 SE
        spec = spec_with([JumpComponent(1.0, no_market(1), PointLoss(0.001))])
        n = 100_000
        counts = np.fromiter(
            (len(sample_path(spec, TENOR5, 2.5, seed=9, path_index=i).jumps)
             for i in range(n)), dtype=float, count=n)
        se = counts.std() / np.sqrt(n)
        assert abs(counts.mean() - 5.0) <= 3.0 * se

    def test_loss_marks_capped_at_pool_size(self):
        spec = spec_with([JumpComponent(50.0, no_market(1), PointLoss(0.6))])
        sc = sample_path(spec, TENOR5, 1.0, seed=3)
        assert sc.A[-1] == pytest.approx(1.0)
        assert np.all(np.diff(sc.A) >= 0.0)
        assert max(y[-1] for _, y in sc.jumps) <= 0.6
        # second loss event was truncated to the remaining pool
        sizes = [y[-1] for _, y in sc.jumps if y[-1] > 0.0]
        assert any(s == pytest.approx(0.4) for s in sizes)

    def test_grid_contains_tenor_and_segment_dates(self):
        spec = DriverSpec(d=0, segments=(
            DriverSegment(0.0, 2.7, np.zeros((1, 1))),
            DriverSegment(2.7, 5.0, np.zeros((1, 1)))))
        grid = build_grid(spec, TENOR5, 0.4)
        for t in list(TENOR5.dates) + [2.7]:
            assert np.any(np.isclose(grid, t))

    def test_time_inhomogeneous_arrivals(self):
        """Two segments with different intensities: the mean jump count is
        lam_1 * len_1 + lam_2 * len_2 within 3 SE."""
        zero = np.zeros((2, 2))
        spec = DriverSpec(d=1, segments=(
            DriverSegment(0.0, 2.0, zero,
                          (JumpComponent(1.5, no_market(1), PointLoss(0.01)),)),
            DriverSegment(2.0, 5.0, zero,
                          (JumpComponent(0.2, no_market(1), PointLoss(0.01)),)),
        ))
        n = 20_000
        counts = np.fromiter(
            (len(sample_path(spec, TENOR5, 2.5, seed=5, path_index=i).jumps)
             for i in range(n)), dtype=float, count=n)
        target = 1.5 * 2.0 + 0.2 * 3.0
        se = counts.std() / np.sqrt(n)
        assert abs(counts.mean() - target) <= 3.0 * se


class TestLossIntensity:
    def test_level_one_never_crossed(self):
        spec = spec_with([JumpComponent(2.0, no_market(1), PointLoss(0.5))])
        assert loss_intensity(spec, 0.0, 0.3, 1.0) == 0.0

    def test_uniform_tail_mass(self):
        # rate 2/yr, marks uniform on (0, 0.5]: tail above 0.2 is 2 * 0.3/0.5
        spec = spec_with([JumpComponent(2.0, no_market(1), UniformLoss(0.0, 0.5))])
        assert loss_intensity(spec, 0.0, 0.0, 0.2) == pytest.approx(1.2)

    def test_point_mass_tail(self):
        spec = spec_with([JumpComponent(1.0, no_market(1), PointLoss(0.1))])
        assert loss_intensity(spec, 0.0, 0.15, 0.2) == pytest.approx(1.0)

    def test_contract_violation(self):
        spec = spec_with([JumpComponent(1.0, no_market(1), PointLoss(0.1))])
        with pytest.raises(DataError):
            loss_intensity(spec, 0.0, 0.5, 0.2)


class TestMarginalCharacteristics:
    def test_block_extraction(self):
        spec = spec_with([], c=[[0.09, 0.0], [0.0, 0.0]])
        ch = marginal_characteristics(spec)
        assert ch.market_diffusion(0.0) == pytest.approx(np.array([[0.09]]))
        assert ch.loss_diffusion(0.0) == 0.0
        assert np.all(ch.market_drift(0.0) == 0.0)

    def test_market_marginal_mass_equals_total_intensity(self):
        comp = JumpComponent(0.7, PointMarket((0.2,)),
                             DiscreteLoss((0.5, 0.5), (0.1, 0.2)))
        spec = spec_with([comp])
        atoms = marginal_characteristics(spec).market_atoms(0.0)
        assert sum(w for w, _ in atoms) == pytest.approx(0.7)

    def test_loss_free_spec_has_null_loss_kernel(self):
        spec = spec_with([JumpComponent(0.7, PointMarket((0.2,)))])
        ch = marginal_characteristics(spec)
        assert ch.loss_total_rate(0.0) == 0.0
        assert ch.loss_tail(0.0, 0.0, 0.5) == 0.0


class TestExponentialMoments:
    def test_bounded_marks_verified(self):
        spec = spec_with([JumpComponent(1.0, PointMarket((0.3,)), PointLoss(0.2))])
        assert check_exponential_moments(spec, C=5.0, eps=0.1) is True

    def test_gaussian_marks_verified(self):
        spec = spec_with([JumpComponent(1.0, GaussianMarket((0.0,), (0.4,)))])
        assert check_exponential_moments(spec, C=5.0, eps=0.1) is True

    def test_sampler_only_family_cannot_verify(self):
        fam = CustomMarket(sampler=lambda rng, n: rng.standard_t(2.0, (n, 1)))
        spec = spec_with([JumpComponent(1.0, fam)])
        assert check_exponential_moments(spec, C=5.0, eps=0.1) is None

    def test_bad_bounds_rejected(self):
        spec = spec_with([])
        with pytest.raises(DataError):
            check_exponential_moments(spec, C=0.0, eps=0.1)


class TestMarkFamilies:
    def test_gaussian_atoms_integrate_exponential(self):
        fam = GaussianMarket((0.1,), (0.3,))
        atoms = fam.atoms(32)
        est = sum(p * np.exp(0.7 * v[0]) for p, v in atoms)
        exact = np.exp(0.7 * 0.1 + 0.5 * (0.7 * 0.3) ** 2)
        assert est == pytest.approx(exact, rel=1e-12)

    def test_uniform_market_atoms_integrate_exponential(self):
        fam = UniformMarket((0.0,), (0.5,))
        atoms = fam.atoms(16)
        est = sum(p * np.exp(1.3 * v[0]) for p, v in atoms)
        exact = (np.exp(1.3 * 0.5) - 1.0) / (1.3 * 0.5)
        assert est == pytest.approx(exact, rel=1e-12)

    def test_uniform_loss_mean_capped(self):
        fam = UniformLoss(0.2, 0.6)
        assert fam.mean_capped(np.array([1.0]))[0] == pytest.approx(0.4)
        assert fam.mean_capped(np.array([0.1]))[0] == pytest.approx(0.1)
        # cap inside the support: E[min(U, 0.5)]
        hand = (0.5 * (0.5 ** 2 - 0.2 ** 2) + (0.6 - 0.5) * 0.5) / 0.4
        assert fam.mean_capped(np.array([0.5]))[0] == pytest.approx(hand)

    def test_paired_coupling_requires_matching_probs(self):
        with pytest.raises(DataError):
            JumpComponent(1.0, PointMarket((0.1,)), PointLoss(0.1),
                          coupling="paired")

    def test_invalid_loss_marks_rejected(self):
        with pytest.raises(DataError):
            PointLoss(0.0)
        with pytest.raises(DataError):
            PointLoss(1.5)
        with pytest.raises(DataError):
            UniformLoss(0.5, 0.4)


class TestCompensatedLoss:
    def test_loss_minus_compensator_centered(self):
        """Mean of A_t - int_0^t (mean loss rate) ds is zero within 3 SE at
        every tenor date; the kernel here is state-independent and the cap
        never binds, so the compensator integral is deterministic."""
        from cdomarket import (LevelGrid, MarketModel, MarketSnapshot,
                               MCConfig, VolStructure, simulate_chunks)
        from cdomarket.driver import mean_loss_rate
        tenor = TenorStructure([0.0, 1.0, 2.0])
        comp = JumpComponent(0.6, no_market(1), UniformLoss(0.0, 0.2))
        spec = spec_with([comp], horizon=2.0)
        snap = MarketSnapshot(tenor, np.array([0.99, 0.97]))
        model = MarketModel(tenor=tenor, snapshot=snap, driver=spec,
                            vols=VolStructure.from_arrays(sigma=[[0.0, 0.0]]))
        rate = float(mean_loss_rate(spec, 0.0, np.zeros(1))[0])
        assert rate == pytest.approx(0.6 * 0.1)
        vals = {1: [], 2: []}
        for rec in simulate_chunks(model, MCConfig(paths=120_000, dt=0.1,
                                                   seed=31)):
            for j in (1, 2):
                vals[j].append(rec.A[:, j] - rate * tenor.dates[j])
        for j in (1, 2):
            v = np.concatenate(vals[j])
            se = v.std() / np.sqrt(len(v))
            assert abs(v.mean()) <= 3.0 * se, j

    def test_market_increments_match_triplet_second_moments(self):
        """Increments of the market block over disjoint intervals are
        empirically uncorrelated, with variance int c dt + int y^2 F(dy) dt."""
        c11, lam, mark = 0.05, 0.8, 0.3
        spec = spec_with([JumpComponent(lam, PointMarket((mark,)))],
                         c=[[c11, 0.0], [0.0, 0.0]], horizon=2.0)
        tenor = TenorStructure([0.0, 1.0, 2.0])
        n = 4000
        inc1 = np.empty(n)
        inc2 = np.empty(n)
        sqrt_c = np.sqrt(c11)
        for i in range(n):
            sc = sample_path(spec, tenor, 0.5, seed=77, path_index=i)
            x = np.concatenate([[0.0], np.cumsum(sqrt_c * sc.dW[:, 0])])
            jumps1 = sum(y[0] for tau, y in sc.jumps if tau <= 1.0)
            jumps2 = sum(y[0] for tau, y in sc.jumps if tau > 1.0)
            # compensate the jump part so increments are martingale terms
            i1 = x[2] - x[0] + jumps1 - lam * mark * 1.0
            i2 = x[4] - x[2] + jumps2 - lam * mark * 1.0
            inc1[i], inc2[i] = i1, i2
        var_expected = c11 * 1.0 + lam * mark ** 2 * 1.0
        for inc in (inc1, inc2):
            se = inc.var() * np.sqrt(2.0 / n)  # SE of a variance estimate
            assert abs(inc.var() - var_expected) <= 3.0 * se
        corr = np.corrcoef(inc1, inc2)[0, 1]
        assert abs(corr) <= 3.0 / np.sqrt(n)


class TestDriverValidation:
    def test_nonzero_loss_diffusion_rejected(self):
        c = np.array([[0.04, 0.0], [0.0, 0.01]])
        with pytest.raises(DataError, match="zero last row"):
            DriverSegment(0.0, 1.0, c)

    def test_asymmetric_c_rejected(self):
        c = np.array([[0.04, 0.01], [0.0, 0.0]])
        with pytest.raises(DataError):
            DriverSegment(0.0, 1.0, c)

    def test_segments_must_tile(self):
        with pytest.raises(DataError, match="tile"):
            DriverSpec(d=0, segments=(
                DriverSegment(0.0, 1.0, np.zeros((1, 1))),
                DriverSegment(1.5, 2.0, np.zeros((1, 1)))))
