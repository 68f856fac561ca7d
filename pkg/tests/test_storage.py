import numpy as np
import pytest

from gridmc.sampling import RngStream, YearState, sample_year_state
from gridmc.storage import (
    StorageFleet,
    StorageStack,
    StorageUnit,
    convolve_level0,
    curtail_trace,
    dispatch_average,
    dispatch_greedy,
    dispatch_none,
    dispatch_optimal,
    measure_outputs_annual,
    mean_daily_profile,
    net_margin,
    peak_shave_profile,
    soc_from_pattern,
)

from oracles import (
    balanced_dispatch_reference,
    enumerate_loss_stats,
    greedy_dispatch_reference,
)


def random_fleet(rng, n_units=5):
    return StorageFleet([
        StorageUnit(p_bar=float(p), e_bar=float(p * h))
        for p, h in zip(rng.uniform(5, 50, n_units), rng.uniform(0.5, 4, n_units))
    ])


def random_margin(rng, T=400, scale=60.0):
    # rough day cycle with excursions below zero
    t = np.arange(T)
    base = scale * np.sin(2 * np.pi * t / 24.0) + 0.3 * scale
    return base + rng.normal(0, scale * 0.7, T)


class TestNetMargin:
    def test_elementwise(self):
        year = YearState(demand=np.array([90.0]), wind=np.array([20.0]),
                         conventional=np.array([100.0]), demand_year=0, wind_year=0)
        assert net_margin(year)[0] == pytest.approx(30.0)

    def test_linearity_of_mean(self, gb_data):
        year = sample_year_state(gb_data["portfolio"], gb_data["demand"],
                                 gb_data["wind"], RngStream(0).generator())
        m = net_margin(year)
        assert m.mean() == pytest.approx(
            year.conventional.mean() + year.wind.mean() - year.demand.mean())

    def test_length_mismatch(self):
        year = YearState(demand=np.zeros(5), wind=np.zeros(4),
                         conventional=np.zeros(5), demand_year=0, wind_year=0)
        with pytest.raises(ValueError):
            net_margin(year)


class TestDispatchTrivials:
    def test_none_is_zero(self):
        assert not dispatch_none(np.array([1.0, -2.0])).any()

    def test_curtail_formula(self):
        m = np.array([10.0, -5.0, -5.0])
        s = np.array([0.0, 0.0, -5.0])
        assert curtail_trace(m, s).tolist() == [0.0, 5.0, 0.0]

    def test_measures(self):
        c = np.array([0.0, 5.0, 0.0, 2.0, 0.0])
        x = measure_outputs_annual(c)
        assert x.tolist() == [2.0, 7.0]

    def test_average_repeats_pattern(self):
        pattern = np.arange(24.0)
        s = dispatch_average(np.zeros(50), pattern)
        assert s[24] == pattern[0]  # hour 25 wraps to the first slot
        assert s[47] == pattern[23]

    def test_two_step_hand_walk(self):
        fleet = StorageFleet([StorageUnit(10.0, 10.0, initial_soc=10.0)])
        s = dispatch_greedy(np.array([-10.0, 20.0]), fleet)
        assert s.tolist() == [-10.0, 10.0]

    def test_positive_margin_only_charges(self):
        fleet = StorageFleet([StorageUnit(2.0, 4.0, initial_soc=0.0)])
        s = dispatch_greedy(np.full(5, 3.0), fleet)
        assert s.tolist() == [2.0, 2.0, 0.0, 0.0, 0.0]

    def test_greedy_order_by_rated_time_to_go(self):
        fleet = StorageFleet([StorageUnit(5.0, 5.0), StorageUnit(5.0, 20.0)])
        assert fleet.greedy_order.tolist() == [1, 0]
        tie = StorageFleet([StorageUnit(5.0, 10.0), StorageUnit(10.0, 20.0)])
        assert tie.greedy_order.tolist() == [0, 1]  # ties by unit index

    def test_single_unit_policies_agree(self):
        rng = np.random.default_rng(0)
        fleet = StorageFleet([StorageUnit(20.0, 30.0)])
        m = random_margin(rng)
        assert dispatch_greedy(m, fleet) == pytest.approx(
            dispatch_optimal(m, fleet), abs=1e-9)

    def test_coverable_shortfall_fully_served(self):
        fleet = StorageFleet([StorageUnit(50.0, 100.0)])
        m = np.array([-30.0, -30.0, 10.0])
        for dispatch in (dispatch_greedy, dispatch_optimal):
            c = curtail_trace(m, dispatch(m, fleet))
            assert measure_outputs_annual(c)[1] == pytest.approx(0.0, abs=1e-9)


class TestKernelsAgainstReferences:
    @pytest.mark.parametrize("seed", range(6))
    def test_greedy_matches_hour_loop(self, seed):
        rng = np.random.default_rng(seed)
        fleet = random_fleet(rng, n_units=int(rng.integers(1, 8)))
        m = random_margin(rng)
        s, units = dispatch_greedy(m, fleet, return_units=True)
        ref_resid, ref_units = greedy_dispatch_reference(
            m, fleet.p_bar, fleet.e_bar, fleet.soc0, fleet.greedy_order)
        assert m - s == pytest.approx(ref_resid, abs=1e-9)
        assert units == pytest.approx(ref_units, abs=1e-9)

    @pytest.mark.parametrize("seed", range(6))
    def test_balanced_matches_bisection_waterfill(self, seed):
        rng = np.random.default_rng(100 + seed)
        fleet = random_fleet(rng, n_units=int(rng.integers(2, 8)))
        m = random_margin(rng)
        s = dispatch_optimal(m, fleet)
        ref_resid, _ = balanced_dispatch_reference(
            m, fleet.p_bar, fleet.e_bar, fleet.soc0)
        assert m - s == pytest.approx(ref_resid, abs=1e-6)

    @pytest.mark.parametrize("kind", ["greedy", "optimal"])
    def test_soc_bounds_and_conservation(self, kind):
        rng = np.random.default_rng(9)
        fleet = random_fleet(rng, n_units=6)
        m = random_margin(rng, T=600)
        fn = dispatch_greedy if kind == "greedy" else dispatch_optimal
        s, units = fn(m, fleet, return_units=True)
        soc = fleet.soc0[:, None] + np.cumsum(units, axis=1)
        assert np.all(soc >= -1e-9)
        assert np.all(soc <= fleet.e_bar[:, None] + 1e-9)
        assert np.all(np.abs(units) <= fleet.p_bar[:, None] + 1e-9)
        assert s == pytest.approx(units.sum(axis=0), abs=1e-9)

    def test_power_feasibility_aggregate(self):
        rng = np.random.default_rng(10)
        fleet = random_fleet(rng, n_units=4)
        m = random_margin(rng)
        for fn in (dispatch_greedy, dispatch_optimal):
            s = fn(m, fleet)
            assert np.all(np.abs(s) <= fleet.total_power + 1e-9)


class TestDominance:
    def test_pathwise_none_vs_greedy(self, gb_data):
        rng = RngStream(55).generator()
        fleet = gb_data["fleet"]
        for _ in range(30):
            year = sample_year_state(gb_data["portfolio"], gb_data["demand"],
                                     gb_data["wind"], rng)
            m = net_margin(year)
            e_none = measure_outputs_annual(curtail_trace(m, dispatch_none(m)))[1]
            e_greedy = measure_outputs_annual(curtail_trace(m, dispatch_greedy(m, fleet)))[1]
            e_opt = measure_outputs_annual(curtail_trace(m, dispatch_optimal(m, fleet)))[1]
            assert e_none >= e_greedy - 1e-6
            assert e_none >= e_opt - 1e-6

    def test_expected_eens_ordering(self, gb_data):
        rng = RngStream(56).generator()
        fleet = gb_data["fleet"]
        diffs = []
        for _ in range(400):
            year = sample_year_state(gb_data["portfolio"], gb_data["demand"],
                                     gb_data["wind"], rng)
            m = net_margin(year)
            e_greedy = measure_outputs_annual(curtail_trace(m, dispatch_greedy(m, fleet)))[1]
            e_opt = measure_outputs_annual(curtail_trace(m, dispatch_optimal(m, fleet)))[1]
            diffs.append(e_opt - e_greedy)
        diffs = np.array(diffs)
        se = diffs.std(ddof=1) / np.sqrt(diffs.size)
        assert diffs.mean() <= 3.0 * max(se, 1e-12)


class TestPeakShave:
    def test_flat_profile_no_action(self):
        s = peak_shave_profile(np.full(24, 150.0), 100.0, 500.0)
        assert np.abs(s).max() < 1e-9

    def test_two_level_flattening(self):
        d = np.array([100.0] * 12 + [200.0] * 12)
        s = peak_shave_profile(d, 100.0, 10000.0)
        assert d + s == pytest.approx(np.full(24, 150.0), abs=1e-8)
        assert np.abs(s).max() == pytest.approx(50.0, abs=1e-8)

    def test_energy_limited_flattening(self):
        d = np.array([100.0] * 12 + [200.0] * 12)
        s = peak_shave_profile(d, 100.0, 120.0)
        flat_obj = np.sum((d + s) ** 2)
        assert flat_obj <= np.sum(d ** 2)
        e = soc_from_pattern(s, 120.0)
        assert e.min() >= -1e-9 and e.max() <= 120.0 + 1e-9

    def test_periodicity_and_window(self):
        rng = np.random.default_rng(3)
        d = 100.0 + 40.0 * np.sin(2 * np.pi * np.arange(24) / 24) + rng.uniform(0, 10, 24)
        p_tot, e_tot = 30.0, 60.0
        s = peak_shave_profile(d, p_tot, e_tot)
        assert abs(s.sum()) < 1e-9  # periodic state of charge
        assert np.all(np.abs(s) <= p_tot + 1e-9)
        e = soc_from_pattern(s, e_tot)
        assert e.max() - e.min() <= e_tot + 1e-9

    def test_matches_projected_gradient_reference(self):
        from oracles import peak_shave_reference
        rng = np.random.default_rng(8)
        d = 120.0 + 50.0 * np.sin(2 * np.pi * (np.arange(24) - 17) / 24) \
            + rng.uniform(-5, 5, 24)
        p_tot, e_tot = 25.0, 70.0
        s = peak_shave_profile(d, p_tot, e_tot)
        # first-order reference on the original dispatch/energy variables
        ref = peak_shave_reference(d, p_tot, e_tot)
        assert s == pytest.approx(ref, abs=1e-6)

    def test_objective_never_worse_than_idle(self):
        rng = np.random.default_rng(12)
        for _ in range(5):
            d = rng.uniform(50, 250, 24)
            s = peak_shave_profile(d, 40.0, 100.0)
            assert np.sum((d + s) ** 2) <= np.sum(d ** 2) + 1e-9


class TestConvolveLevel0:
    def test_deterministic_portfolio_counts_hours(self, gb_data):
        from gridmc.sampling import ThermalPortfolio
        port = ThermalPortfolio(capacity=[40000.0], mttf=[1e12], mttr=[1.0])
        demand = gb_data["demand"][:, :2]
        wind = gb_data["wind"][:, :2]
        r0 = convolve_level0(port, demand, wind, None)
        hours = 0.0
        for di in range(2):
            for wi in range(2):
                hours += np.count_nonzero(demand[:, di] - wind[:, wi] > 40000.0)
        assert r0["LOLE"] == pytest.approx(hours / 4.0, abs=1e-6)

    def test_matches_enumeration_small_portfolio(self):
        from gridmc.sampling import ThermalPortfolio
        rng = np.random.default_rng(5)
        port = ThermalPortfolio(capacity=[30.0, 20.0], mttf=[100.0, 70.0],
                                mttr=[10.0, 12.0])
        demand = rng.uniform(0, 60, (48, 1))
        wind = rng.uniform(0, 10, (48, 1))
        s_tilde = rng.uniform(-3, 3, 24)
        s_tilde -= s_tilde.mean()
        r0 = convolve_level0(port, demand, wind, s_tilde)
        residual = demand[:, 0] - wind[:, 0] + np.tile(s_tilde, 2)
        p_ref, e_ref = enumerate_loss_stats(port.capacity, port.availability,
                                            residual)
        assert r0["LOLE"] == pytest.approx(p_ref.sum(), rel=1e-12)
        assert r0["EENS"] == pytest.approx(e_ref.sum(), rel=1e-12)

    def test_agrees_with_mc_sampling_of_average_model(self, gb_data):
        stack = StorageStack(gb_data["portfolio"], gb_data["demand"],
                             gb_data["wind"], gb_data["fleet"],
                             ("average",))
        r0 = stack.analytic_level0()
        rng = RngStream(91).generator()
        n = 400
        _, x_up = stack.eval_pair_batch(0, n, rng)
        for col, mid in ((0, "LOLE"), (1, "EENS")):
            se = x_up[:, col].std(ddof=1) / np.sqrt(n)
            assert abs(x_up[:, col].mean() - r0[mid]) < 3.0 * se


class TestStorageStack:
    def test_order_validation(self, gb_data):
        with pytest.raises(ValueError):
            StorageStack(gb_data["portfolio"], gb_data["demand"],
                         gb_data["wind"], gb_data["fleet"],
                         ("greedy", "average"))

    def test_pattern2_correlation_ordering(self, gb_data):
        # the nearer model correlates better with the top level
        stack = StorageStack(gb_data["portfolio"], gb_data["demand"],
                             gb_data["wind"], gb_data["fleet"],
                             ("nostore", "greedy", "optimal"))
        rng = RngStream(61).generator()
        n = 1000
        x1 = np.empty(n)
        x2 = np.empty(n)
        x0 = np.empty(n)
        for i in range(n):
            year = sample_year_state(stack.portfolio, stack.demand_years,
                                     stack.wind_years, rng)
            m = net_margin(year)
            x0[i] = stack._eval("nostore", m)[1]
            x1[i] = stack._eval("greedy", m)[1]
            x2[i] = stack._eval("optimal", m)[1]
        corr_21 = np.corrcoef(x2, x1)[0, 1]
        corr_20 = np.corrcoef(x2, x0)[0, 1]
        assert corr_21 > corr_20

    def test_determinism_of_average_model(self, gb_data):
        stack = StorageStack(gb_data["portfolio"], gb_data["demand"],
                             gb_data["wind"], gb_data["fleet"], ("average",))
        s1 = dispatch_average(np.zeros(8760), stack.s_tilde)
        s2 = dispatch_average(np.ones(8760), stack.s_tilde)
        assert np.array_equal(s1, s2)

    def test_mean_daily_profile_shape(self, gb_data):
        prof = mean_daily_profile(gb_data["demand"])
        assert prof.shape == (24,)
        assert prof.min() > 0
