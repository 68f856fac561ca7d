import numpy as np
import pytest
from scipy import stats as sps

from gridmc.copt import outage_distribution
from gridmc.sampling import (
    RngStream,
    ThermalPortfolio,
    YearState,
    pattern2_pair,
    project_pattern1,
    sample_component_state,
    sample_hl2_batch,
    sample_hl2_state,
    sample_year_state,
)
from gridmc.storage import measure_outputs_annual


class TestRngStream:
    def test_replay_is_bit_identical(self):
        a = RngStream(42, (1, 2)).generator().random(1000)
        b = RngStream(42, (1, 2)).generator().random(1000)
        assert np.array_equal(a, b)

    def test_distinct_paths_differ(self):
        a = RngStream(42, (1, 2)).generator().random(100)
        b = RngStream(42, (1, 3)).generator().random(100)
        assert not np.array_equal(a, b)

    def test_child_extends_path(self):
        s = RngStream(7).child(3, 1)
        assert s.path == (3, 1)
        assert s.seed == 7

    def test_philox_variant(self):
        g = RngStream(1, (0,), algorithm="philox").generator()
        assert g.random() != RngStream(2, (0,), algorithm="philox").generator().random()

    def test_unknown_algorithm(self):
        with pytest.raises(ValueError):
            RngStream(1, (), algorithm="mt").generator()


class TestComponentState:
    def test_certain_up(self):
        rng = RngStream(0).generator()
        assert all(sample_component_state(1.0, rng) == 1 for _ in range(20))

    def test_certain_down(self):
        rng = RngStream(0).generator()
        assert all(sample_component_state(0.0, rng) == 0 for _ in range(20))

    def test_binomial_bound(self):
        rng = RngStream(3).generator()
        n = 10 ** 5
        freq = np.mean([sample_component_state(0.9, rng) for _ in range(n)])
        assert abs(freq - 0.9) < 3.0 * np.sqrt(0.09 / n)

    def test_range_validated(self):
        with pytest.raises(ValueError):
            sample_component_state(1.5, RngStream(0).generator())


class TestHl2Sampling:
    def test_replay_identical_state(self, rts_network):
        s1 = sample_hl2_state(rts_network, RngStream(5, (0,)).generator())
        s2 = sample_hl2_state(rts_network, RngStream(5, (0,)).generator())
        assert s1.hour_index == s2.hour_index
        assert np.array_equal(s1.gen_status, s2.gen_status)
        assert np.array_equal(s1.line_status, s2.line_status)
        assert np.array_equal(s1.nodal_demand, s2.nodal_demand)

    def test_all_up_when_certain(self, rts_network):
        import dataclasses
        net = dataclasses.replace(
            rts_network,
            gen_availability=np.ones_like(rts_network.gen_availability),
            line_availability=np.ones_like(rts_network.line_availability))
        st = sample_hl2_state(net, RngStream(1).generator())
        assert st.gen_status.all() and st.line_status.all()
        assert st.nodal_demand.sum() == pytest.approx(
            net.demand_trace[st.hour_index - 1])

    def test_demand_marginal_matches_trace(self, rts_network):
        # chi-square against the trace histogram at the 1% level
        rng = RngStream(11).generator()
        n = 10 ** 5
        _, total, _, _ = sample_hl2_batch(rts_network, rng, n)
        edges = np.quantile(rts_network.demand_trace, np.linspace(0, 1, 21))
        edges[0] -= 1.0
        edges[-1] += 1.0
        expected = np.histogram(rts_network.demand_trace, bins=edges)[0]
        expected = expected / expected.sum() * n
        observed = np.histogram(total, bins=edges)[0]
        chi2 = float(((observed - expected) ** 2 / expected).sum())
        crit = sps.chi2.ppf(0.99, df=len(expected) - 1)
        assert chi2 < crit

    def test_projection_shares_arrays(self, rts_network):
        st = sample_hl2_state(rts_network, RngStream(2).generator())
        lo = project_pattern1(st)
        assert lo.nodal_demand is st.nodal_demand
        assert lo.gen_status is st.gen_status
        assert lo.hour_index == st.hour_index
        assert not hasattr(lo, "line_status")

    def test_projection_ignores_lines(self, rts_network):
        st = sample_hl2_state(rts_network, RngStream(2).generator())
        st2 = type(st)(nodal_demand=st.nodal_demand, gen_status=st.gen_status,
                       line_status=1 - st.line_status, hour_index=st.hour_index)
        a, b = project_pattern1(st), project_pattern1(st2)
        assert np.array_equal(a.gen_status, b.gen_status)
        assert np.array_equal(a.nodal_demand, b.nodal_demand)

    def test_projected_capacity_matches_direct_law(self, rts_network):
        # two-sample KS on total available capacity: projected vs direct
        rng = RngStream(13).generator()
        n = 20000
        _, _, gen_up_full, _ = sample_hl2_batch(rts_network, rng, n)
        _, _, gen_up_direct, _ = sample_hl2_batch(rts_network, rng, n,
                                                  with_lines=False)
        cap_a = gen_up_full @ rts_network.gen_capacity
        cap_b = gen_up_direct @ rts_network.gen_capacity
        assert sps.ks_2samp(cap_a, cap_b).pvalue > 0.01

    def test_pair_correlation_positive(self, rts_system):
        from gridmc.composite import CompositeStack
        stack = CompositeStack(rts_system, ("hl1", "hl2"))
        x_lo, x_up = stack.eval_pair_batch(1, 20000, RngStream(23).generator())
        mask_var = x_lo[:, 1].std() > 0 and x_up[:, 1].std() > 0
        assert mask_var
        corr = np.corrcoef(x_lo[:, 1], x_up[:, 1])[0, 1]
        assert corr > 0.5


class TestYearSampling:
    def test_single_year_always_selected(self, gb_data):
        demand = gb_data["demand"][:, :1]
        wind = gb_data["wind"][:, :1]
        year = sample_year_state(gb_data["portfolio"], demand, wind,
                                 RngStream(1).generator())
        assert year.demand_year == 0 and year.wind_year == 0
        assert np.shares_memory(year.demand, demand)

    def test_replay_identical(self, gb_data):
        y1 = sample_year_state(gb_data["portfolio"], gb_data["demand"],
                               gb_data["wind"], RngStream(9, (4,)).generator())
        y2 = sample_year_state(gb_data["portfolio"], gb_data["demand"],
                               gb_data["wind"], RngStream(9, (4,)).generator())
        assert np.array_equal(y1.conventional, y2.conventional)
        assert (y1.demand_year, y1.wind_year) == (y2.demand_year, y2.wind_year)

    def test_trace_bounds(self, gb_data):
        year = sample_year_state(gb_data["portfolio"], gb_data["demand"],
                                 gb_data["wind"], RngStream(2).generator())
        assert year.conventional.min() >= 0.0
        assert year.conventional.max() <= gb_data["portfolio"].total_capacity + 1e-9

    def test_absorbing_limit(self):
        # effectively infinite repair time: capacity until the first failure
        port = ThermalPortfolio(capacity=[100.0], mttf=[50.0], mttr=[1e15])
        from gridmc.sampling import _two_state_trace
        trace = _two_state_trace(port.capacity, port.p_fail, port.p_repair,
                                 np.array([True]), RngStream(3).generator(), 8760)
        drop = np.nonzero(trace == 0.0)[0]
        assert drop.size > 0
        first = drop[0]
        assert np.all(trace[:first] == 100.0)
        assert np.all(trace[first:] == 0.0)

    def test_hourly_marginal_matches_stationary_copt(self):
        # chi-square of a fixed hour's capacity against the stationary law;
        # hours within one year are correlated, so only one hour per
        # sampled year is an independent draw
        port = ThermalPortfolio(capacity=[60.0, 40.0], mttf=[150.0, 90.0],
                                mttr=[30.0, 20.0])
        rng = RngStream(21).generator()
        n_years = 10 ** 4
        horizon = 48
        probe_hour = 37
        demand = np.zeros((horizon, 1))
        wind = np.zeros((horizon, 1))
        counts = {}
        for _ in range(n_years):
            y = sample_year_state(port, demand, wind, rng)
            v = round(y.conventional[probe_hour])
            counts[v] = counts.get(v, 0) + 1
        table = outage_distribution(port.capacity, port.availability)
        chi2 = 0.0
        for level, pk in enumerate(table.pmf):
            if pk < 1e-12:
                continue
            expected = pk * n_years
            chi2 += (counts.get(level, 0) - expected) ** 2 / expected
        dof = int((table.pmf > 1e-12).sum()) - 1
        assert chi2 < sps.chi2.ppf(0.99, df=dof)


class TestIndependence:
    def test_lag1_autocorrelation_within_level(self, rts_system):
        # pair outcomes drawn sequentially from one stream are uncorrelated
        from gridmc.composite import CompositeStack
        stack = CompositeStack(rts_system, ("hl1", "hl2"))
        n = 40000
        _, x_up = stack.eval_pair_batch(0, n, RngStream(71).generator())
        x = x_up[:, 1]  # unserved-power outcomes
        x = (x - x.mean())
        rho = float((x[:-1] * x[1:]).sum() / (x * x).sum())
        assert abs(rho) < 4.0 / np.sqrt(n)

    def test_disjoint_streams_between_runs_and_levels(self):
        a = RngStream(3).child(1, 0, 0).generator().random(256)
        b = RngStream(3).child(1, 1, 0).generator().random(256)
        c = RngStream(3).child(2, 0, 0).generator().random(256)
        assert not np.array_equal(a, b)
        assert not np.array_equal(a, c)
        assert abs(np.corrcoef(a, b)[0, 1]) < 0.2


class TestPattern2:
    def test_shared_year_and_purity(self, gb_data):
        year = sample_year_state(gb_data["portfolio"], gb_data["demand"],
                                 gb_data["wind"], RngStream(6).generator())
        margin = year.conventional + year.wind - year.demand

        def model_a(y: YearState):
            return measure_outputs_annual(np.maximum(0.0, -(y.conventional + y.wind - y.demand)))

        def model_b(y: YearState):
            return measure_outputs_annual(np.maximum(0.0, 50.0 - (y.conventional + y.wind - y.demand)))

        lo1, up1 = pattern2_pair(year, model_a, model_b)
        up2, lo2 = pattern2_pair(year, model_b, model_a)  # swapped order
        assert np.array_equal(lo1, lo2)
        assert np.array_equal(up1, up2)

    def test_identical_models_give_zero_difference(self, gb_data):
        year = sample_year_state(gb_data["portfolio"], gb_data["demand"],
                                 gb_data["wind"], RngStream(8).generator())

        def model(y):
            return measure_outputs_annual(np.maximum(0.0, -(y.conventional + y.wind - y.demand)))

        lo, up = pattern2_pair(year, model, model)
        assert np.array_equal(lo, up)
