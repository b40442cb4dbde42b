import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ehpolicy import (
    ActionSet,
    BatteryModel,
    ConstantEfficiency,
    DeviceTableConsumption,
    IdentityConsumption,
    LogSnrReward,
    QuadraticCapacitor,
    TabulatedEfficiency,
    attained_reward,
    battery_step,
    efficiency_at,
    integrate_frame,
    make_truncated_geometric,
    make_truncated_poisson,
    sample_arrival,
    sample_arrivals,
    validate_recharge_hypothesis,
)
from ehpolicy.core import arrival_model_from_pmf, check_reward_shape
from ehpolicy.errors import DomainError


def quad_closed_form(e_start, b, e_max, beta_nl):
    """Analytic end-of-frame level for the quadratic profile (separable ODE).

    Substituting u = (y - e_max/2) / ((e_max/2) sqrt(beta)) turns
    dy/dt = b * (1 - (y - e_max/2)^2 / (beta (e_max/2)^2)) into
    du/dt = (b / ((e_max/2) sqrt(beta))) (1 - u^2), solved by tanh.
    """
    half = e_max / 2.0
    scale = half * math.sqrt(beta_nl)
    u0 = (e_start - half) / scale
    u = math.tanh(math.atanh(u0) + b / scale)
    return half + scale * u


BASELINE = BatteryModel(e_max=100, efficiency=QuadraticCapacitor(1.05))


class TestEfficiency:
    def test_quadratic_peak_at_half_charge(self):
        assert efficiency_at(QuadraticCapacitor(1.05), 50.0, 100) == pytest.approx(1.0)

    def test_quadratic_worst_at_empty(self):
        eta = efficiency_at(QuadraticCapacitor(1.05), 0.0, 100)
        assert eta == pytest.approx(1 - 1 / 1.05)
        assert eta == pytest.approx(0.047619, abs=1e-6)

    def test_constant(self):
        for e in (0, 13.7, 100):
            assert efficiency_at(ConstantEfficiency(0.7), e, 100) == 0.7

    def test_symmetry(self):
        prof = QuadraticCapacitor(1.3)
        grid = np.linspace(0, 100, 41)
        assert efficiency_at(prof, grid, 100) == pytest.approx(
            efficiency_at(prof, 100 - grid, 100))

    def test_tabulated_interpolates(self):
        prof = TabulatedEfficiency(values=(0.2, 1.0, 0.2))
        assert efficiency_at(prof, 25.0, 100) == pytest.approx(0.6)

    def test_domain_error(self):
        with pytest.raises(DomainError):
            efficiency_at(QuadraticCapacitor(1.05), -1.0, 100)
        with pytest.raises(DomainError):
            efficiency_at(QuadraticCapacitor(1.05), 101.0, 100)

    def test_beta_must_exceed_one(self):
        with pytest.raises(DomainError):
            QuadraticCapacitor(1.0)


class TestIntegrateFrame:
    def test_no_inflow_is_identity(self):
        for e in (0.0, 3.5, 100.0):
            assert integrate_frame(BASELINE, e, 0) == e

    def test_constant_profile_is_linear(self):
        bat = BatteryModel(e_max=100, efficiency=ConstantEfficiency(0.5))
        assert integrate_frame(bat, 3.0, 10) == pytest.approx(8.0, abs=1e-9)

    def test_constant_profile_saturates(self):
        bat = BatteryModel(e_max=10, efficiency=ConstantEfficiency(1.0))
        assert integrate_frame(bat, 8.0, 50) == pytest.approx(10.0, abs=1e-9)

    def test_matches_quadratic_closed_form(self):
        # independent oracle: exact solution of the separable ODE
        for e_start in np.linspace(0, 99, 10):
            for b in (1, 7, 20, 50):
                got = integrate_frame(BASELINE, float(e_start), b, saturate=False)
                want = quad_closed_form(float(e_start), b, 100, 1.05)
                assert got == pytest.approx(want, abs=1e-6)

    def test_full_charge_from_empty(self):
        # closed form gives ~6.8696 for the baseline battery at maximal arrivals
        got = integrate_frame(BASELINE, 0.0, 50)
        assert got == pytest.approx(quad_closed_form(0.0, 50, 100, 1.05), abs=1e-6)

    @settings(max_examples=30, deadline=None)
    @given(e=st.floats(0, 100), b=st.integers(0, 50))
    def test_output_bounds(self, e, b):
        y = integrate_frame(BASELINE, e, b)
        assert e - 1e-9 <= y <= 100 + 1e-9

    @settings(max_examples=20, deadline=None)
    @given(e=st.floats(0, 99), b=st.integers(0, 49))
    def test_monotone_in_start_and_inflow(self, e, b):
        y = integrate_frame(BASELINE, e, b)
        assert integrate_frame(BASELINE, e + 1.0, b) >= y - 1e-9
        assert integrate_frame(BASELINE, e, b + 1) >= y - 1e-9


class TestBatteryStep:
    def test_charge_from_empty(self):
        assert battery_step(BASELINE, 0, 0, 50) == 6

    def test_overdraw_drains_to_zero(self):
        assert battery_step(BASELINE, 6, 11, 0) == 0

    def test_overflow_clips(self):
        bat = BatteryModel(e_max=100, efficiency=ConstantEfficiency(1.0))
        assert battery_step(bat, 95, 0, 50) == 100

    def test_drain_then_charge_equivalence(self):
        for e in (0, 10, 60, 100):
            for d in (0, 5, 200):
                for b in (0, 10, 50):
                    assert battery_step(BASELINE, e, d, b) == \
                        battery_step(BASELINE, max(0, e - d), 0, b)

    @settings(max_examples=30, deadline=None)
    @given(e=st.integers(0, 100), d=st.integers(0, 120), b=st.integers(0, 50))
    def test_stays_in_state_space(self, e, d, b):
        assert 0 <= battery_step(BASELINE, e, d, b) <= 100


class TestAttainedReward:
    def test_idle_earns_nothing(self):
        assert attained_reward(LogSnrReward(0.01), IdentityConsumption(), 0, 50) == 0.0

    def test_failed_transmission(self):
        assert attained_reward(LogSnrReward(0.01), IdentityConsumption(), 11, 6) == 0.0

    def test_successful_transmission(self):
        got = attained_reward(LogSnrReward(0.01), IdentityConsumption(), 100, 100)
        assert got == pytest.approx(math.log(2.0))

    def test_action_set_membership(self):
        with pytest.raises(DomainError):
            attained_reward(LogSnrReward(0.01), IdentityConsumption(), 3, 50,
                            actions=ActionSet((0, 10)))

    def test_device_table_overhead(self):
        table = DeviceTableConsumption(rows=((1, 22), (5, 38)))
        # enough charge for the tx power but not the circuitry: failure
        assert attained_reward(LogSnrReward(0.01), table, 5, 30) == 0.0
        assert attained_reward(LogSnrReward(0.01), table, 5, 38) > 0.0

    def test_zero_iff_idle_or_infeasible(self):
        reward = LogSnrReward(0.01)
        cons = IdentityConsumption()
        for rho in range(0, 30, 3):
            for e in range(0, 30, 5):
                got = attained_reward(reward, cons, rho, e)
                if rho == 0 or rho > e:
                    assert got == 0.0
                else:
                    assert got > 0.0


class TestArrivalConstructors:
    def test_geometric_mean_and_normalization(self):
        arr = make_truncated_geometric(20.0, 50)
        pmf = arr.pmf_array()
        assert pmf.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.arange(51) @ pmf == pytest.approx(20.0, abs=1e-9)

    def test_geometric_is_nonincreasing(self):
        pmf = make_truncated_geometric(20.0, 50).pmf_array()
        assert np.all(np.diff(pmf) <= 1e-15)

    def test_geometric_small_mean_concentrates_at_zero(self):
        pmf = make_truncated_geometric(1e-4, 50).pmf_array()
        assert pmf[0] > 0.999

    def test_geometric_domain(self):
        with pytest.raises(DomainError):
            make_truncated_geometric(50.0, 50)
        with pytest.raises(DomainError):
            make_truncated_geometric(0.0, 50)

    def test_poisson_mean_and_support(self):
        arr = make_truncated_poisson(30.0, 50)
        pmf = arr.pmf_array()
        assert np.arange(51) @ pmf == pytest.approx(30.0, abs=1e-9)
        assert pmf.shape == (51,)
        assert np.all(pmf >= 0)

    def test_poisson_unimodal_with_mode_near_mean(self):
        pmf = make_truncated_poisson(30.0, 50).pmf_array()
        mode = int(pmf.argmax())
        assert 28 <= mode <= 31
        assert np.all(np.diff(pmf[:mode]) >= -1e-15)
        assert np.all(np.diff(pmf[mode:]) <= 1e-15)

    def test_explicit_pmf(self):
        arr = arrival_model_from_pmf([0.5, 0.25, 0.25])
        assert arr.mean_b == pytest.approx(0.75)
        assert arr.b_max == 2


class TestSampling:
    def test_degenerate_pmf(self):
        arr = arrival_model_from_pmf([0] * 7 + [1.0])
        rng = np.random.default_rng(0)
        assert all(sample_arrival(arr, rng) == 7 for _ in range(20))

    def test_same_seed_same_sequence(self):
        arr = make_truncated_geometric(20.0, 50)
        a = sample_arrivals(arr, np.random.default_rng(42), 1000)
        b = sample_arrivals(arr, np.random.default_rng(42), 1000)
        assert np.array_equal(a, b)

    def test_empirical_mean_matches(self):
        arr = make_truncated_geometric(20.0, 50)
        draws = sample_arrivals(arr, np.random.default_rng(7), 10 ** 6)
        pmf = arr.pmf_array()
        var = float(np.arange(51) ** 2 @ pmf - arr.mean_b ** 2)
        se = math.sqrt(var / len(draws))
        assert abs(draws.mean() - 20.0) < 3 * se


class TestRechargeHypothesis:
    def test_baseline_holds(self):
        arr = make_truncated_geometric(20.0, 50)
        ok, violators = validate_recharge_hypothesis(BASELINE, arr)
        assert ok and violators == []

    def test_no_arrivals_violates_everywhere(self):
        arr = arrival_model_from_pmf([1.0])
        ok, violators = validate_recharge_hypothesis(BASELINE, arr)
        assert not ok
        assert violators == list(range(100))

    def test_single_lossless_quantum(self):
        bat = BatteryModel(e_max=10, efficiency=ConstantEfficiency(1.0))
        arr = arrival_model_from_pmf([0.5, 0.5])
        ok, _ = validate_recharge_hypothesis(bat, arr)
        assert ok


class TestRewardShape:
    def test_log_snr_ok(self):
        check_reward_shape(LogSnrReward(0.01), 100)

    def test_rejects_nonconcave(self):
        class Quadratic:
            def rate(self, rho):
                return np.asarray(rho, dtype=float) ** 2

        with pytest.raises(DomainError):
            check_reward_shape(Quadratic(), 100)
