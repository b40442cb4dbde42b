import itertools

import numpy as np
import pytest

from ehpolicy import (
    ActionSet,
    BatteryModel,
    ConstantEfficiency,
    IdentityConsumption,
    LogSnrReward,
    Partition,
    QuadraticCapacitor,
    beta_star,
    derive_bp,
    derive_lcp,
    evaluate_policy,
    make_truncated_geometric,
    refine_partition_search,
    search_partition_policy,
    solve_perfect_soc,
    upper_bound,
)
from ehpolicy.chain import StatePolicy
from ehpolicy.core import DeviceTableConsumption, arrival_model_from_pmf
from ehpolicy.errors import BudgetExceededError, UnsupportedPartitionError

BASELINE = BatteryModel(e_max=100, efficiency=QuadraticCapacitor(1.05))
GEOM20 = make_truncated_geometric(20.0, 50)
REWARD = LogSnrReward(0.01)
CONS = IdentityConsumption()


def brute_force_best_state_policy(battery, arrivals, cons, reward, actions, e0=0):
    """Enumerate every deterministic per-state policy and return the best gain."""
    n = battery.e_max + 1
    best = -np.inf
    for combo in itertools.product(actions.actions, repeat=n):
        analysis = evaluate_policy(battery, arrivals, cons, reward,
                                   StatePolicy(actions=combo), e0)
        best = max(best, analysis.long_run_reward)
    return best


class TestSolvePerfectSoc:
    def test_single_action_policy_is_idle(self):
        policy = solve_perfect_soc(BASELINE, GEOM20, CONS, REWARD, ActionSet((0,)))
        assert policy.actions == (0,) * 101
        analysis = evaluate_policy(BASELINE, GEOM20, CONS, REWARD, policy)
        assert analysis.long_run_reward == 0.0

    def test_matches_brute_force_on_tiny_model(self):
        # small enough to enumerate all 2^5 deterministic state policies
        bat = BatteryModel(e_max=4, efficiency=ConstantEfficiency(1.0))
        arr = arrival_model_from_pmf([0.3, 0.5, 0.2])
        acts = ActionSet((0, 2))
        want = brute_force_best_state_policy(bat, arr, CONS, REWARD, acts)
        policy = solve_perfect_soc(bat, arr, CONS, REWARD, acts)
        got = evaluate_policy(bat, arr, CONS, REWARD, policy).long_run_reward
        assert got == pytest.approx(want, abs=1e-9)

    def test_matches_brute_force_three_actions(self):
        bat = BatteryModel(e_max=3, efficiency=ConstantEfficiency(0.8))
        arr = arrival_model_from_pmf([0.2, 0.3, 0.3, 0.2])
        acts = ActionSet((0, 1, 3))
        want = brute_force_best_state_policy(bat, arr, CONS, REWARD, acts)
        policy = solve_perfect_soc(bat, arr, CONS, REWARD, acts)
        got = evaluate_policy(bat, arr, CONS, REWARD, policy).long_run_reward
        assert got == pytest.approx(want, abs=1e-9)

    def test_never_transmits_more_than_available(self):
        policy = solve_perfect_soc(BASELINE, GEOM20, CONS, REWARD,
                                   ActionSet(tuple(range(101))))
        for e, a in enumerate(policy.actions):
            assert CONS.consumption(a) <= e

    def test_warns_when_recharge_hypothesis_fails(self):
        arr = arrival_model_from_pmf([1.0])
        with pytest.warns(UserWarning):
            solve_perfect_soc(BASELINE, arr, CONS, REWARD, ActionSet((0, 1)))


class TestSearchPartitionPolicy:
    def test_singleton_matches_perfect_soc(self):
        # full-resolution partition search and value iteration solve the same problem
        bat = BatteryModel(e_max=5, efficiency=ConstantEfficiency(0.9))
        arr = arrival_model_from_pmf([0.4, 0.4, 0.2])
        acts = ActionSet((0, 1, 2))
        policy = solve_perfect_soc(bat, arr, CONS, REWARD, acts)
        g_rvi = evaluate_policy(bat, arr, CONS, REWARD, policy).long_run_reward
        result = search_partition_policy(bat, arr, CONS, REWARD, acts,
                                         Partition.singleton(5))
        assert result.evaluated_count == 3 ** 6
        assert result.best_reward == pytest.approx(g_rvi, abs=1e-8)

    def test_reward_matches_independent_evaluation(self):
        part = Partition.uniform(100, 2)
        acts = ActionSet(tuple(range(0, 51, 5)))
        result = search_partition_policy(BASELINE, GEOM20, CONS, REWARD, acts, part)
        analysis = evaluate_policy(BASELINE, GEOM20, CONS, REWARD, result.best_policy)
        assert result.best_reward == pytest.approx(analysis.long_run_reward, abs=1e-9)

    def test_keep_table_is_exhaustive(self):
        part = Partition.uniform(20, 2)
        acts = ActionSet((0, 3, 7))
        bat = BatteryModel(e_max=20, efficiency=QuadraticCapacitor(1.2))
        arr = make_truncated_geometric(4.0, 10)
        result = search_partition_policy(bat, arr, CONS, REWARD, acts, part,
                                         keep_table=True)
        assert len(result.reward_by_policy) == 9
        best = max(g for _, g in result.reward_by_policy)
        assert result.best_reward == best

    def test_tie_breaks_lexicographically(self):
        # no arrivals: every policy earns zero, so the all-idle vector must win
        arr = arrival_model_from_pmf([1.0])
        part = Partition.uniform(20, 2)
        bat = BatteryModel(e_max=20, efficiency=QuadraticCapacitor(1.2))
        result = search_partition_policy(bat, arr, CONS, REWARD,
                                         ActionSet((0, 2, 5)), part)
        assert result.best_policy.actions == (0, 0)

    def test_budget_guard(self):
        part = Partition.uniform(100, 3)
        acts = ActionSet(tuple(range(101)))
        with pytest.raises(BudgetExceededError):
            search_partition_policy(BASELINE, GEOM20, CONS, REWARD, acts, part,
                                    budget=10 ** 4)

    def test_refinement_cannot_hurt(self):
        # a finer partition contains every coarser policy, so its optimum dominates
        acts = ActionSet(tuple(range(0, 51, 10)))
        g2 = search_partition_policy(BASELINE, GEOM20, CONS, REWARD, acts,
                                     Partition.uniform(100, 2)).best_reward
        g4 = search_partition_policy(BASELINE, GEOM20, CONS, REWARD, acts,
                                     Partition.uniform(100, 4)).best_reward
        assert g4 >= g2 - 1e-10

    def test_two_stage_refine_at_least_as_good_as_coarse(self):
        acts = ActionSet(tuple(range(51)))
        part = Partition.uniform(100, 3)
        coarse = ActionSet(tuple(range(0, 51, 4)))
        g_coarse = search_partition_policy(BASELINE, GEOM20, CONS, REWARD,
                                           coarse, part).best_reward
        refined = refine_partition_search(BASELINE, GEOM20, CONS, REWARD, acts, part)
        assert refined.best_reward >= g_coarse - 1e-12
        analysis = evaluate_policy(BASELINE, GEOM20, CONS, REWARD,
                                   refined.best_policy)
        assert refined.best_reward == pytest.approx(analysis.long_run_reward, abs=1e-9)


class TestBetaStar:
    def test_zero_arrival(self):
        assert beta_star(BASELINE, 0) == (0.0, 0.0)

    def test_constant_efficiency_is_exact(self):
        # linear charging: increment is eta * b at every start level
        bat = BatteryModel(e_max=100, efficiency=ConstantEfficiency(0.7))
        for b in (1, 10, 50):
            _, beta = beta_star(bat, b)
            assert beta == pytest.approx(0.7 * b, abs=1e-9)

    def test_quadratic_optimum_below_midpoint(self):
        # best start lets the trajectory straddle the efficiency peak at e_max/2
        a_star, beta = beta_star(BASELINE, 20)
        assert 0.0 < a_star < 50.0
        assert 0.0 < beta < 20.0

    def test_beta_bounded_by_arrival(self):
        for b in (1, 5, 20, 50):
            _, beta = beta_star(BASELINE, b)
            assert beta <= b + 1e-9

    def test_beta_monotone_in_arrival(self):
        betas = [beta_star(BASELINE, b)[1] for b in range(0, 51, 5)]
        assert all(x < y for x, y in zip(betas, betas[1:]))

    def test_grid_oracle_agreement(self):
        # dense grid search over start levels as an independent check
        grid = np.linspace(0.0, 100.0, 20001)
        from ehpolicy.core import _rk4_charge
        inc = _rk4_charge(BASELINE, grid, 20, saturate=False) - grid
        _, beta = beta_star(BASELINE, 20)
        assert beta == pytest.approx(float(inc.max()), abs=1e-7)


class TestUpperBound:
    def test_lossless_battery_collapses_to_ideal(self):
        bat = BatteryModel(e_max=100, efficiency=ConstantEfficiency(1.0))
        report = upper_bound(bat, GEOM20, REWARD)
        assert report.b_bar_s == pytest.approx(20.0, abs=1e-9)
        assert report.g_ub == pytest.approx(report.g_ideal, abs=1e-12)

    def test_constant_efficiency_scales_mean(self):
        bat = BatteryModel(e_max=100, efficiency=ConstantEfficiency(0.6))
        report = upper_bound(bat, GEOM20, REWARD)
        assert report.b_bar_s == pytest.approx(0.6 * 20.0, abs=1e-9)
        assert report.g_ub == pytest.approx(float(REWARD.rate(12.0)), abs=1e-12)

    def test_lossy_bound_below_ideal(self):
        report = upper_bound(BASELINE, GEOM20, REWARD)
        assert report.b_bar_s < GEOM20.mean_b
        assert report.g_ub < report.g_ideal

    def test_bound_dominates_best_search_policy(self):
        acts = ActionSet(tuple(range(0, 51, 5)))
        result = search_partition_policy(BASELINE, GEOM20, CONS, REWARD, acts,
                                         Partition.uniform(100, 2))
        report = upper_bound(BASELINE, GEOM20, REWARD)
        assert report.g_ub >= result.best_reward - 1e-10

    def test_tables_cover_support(self):
        report = upper_bound(BASELINE, GEOM20, REWARD)
        assert report.beta_star_table.shape == (51,)
        assert report.a_star_table.shape == (51,)
        assert report.beta_star_table[0] == 0.0


class TestHeuristics:
    def test_lcp_averages_consumption(self):
        # perfect policy transmits e//2 quanta; subset means are 1.5 and 4.5
        op = StatePolicy(actions=(0, 1, 1, 2, 2, 3))
        part = Partition(e_max=5, starts=(0, 3))
        acts = ActionSet(tuple(range(6)))
        lcp = derive_lcp(op, CONS, part, acts)
        assert lcp.actions == (1, 2)  # ties at .5 go to the lower action

    def test_lcp_on_constant_policy_is_idempotent(self):
        op = StatePolicy(actions=(3,) * 101)
        part = Partition.uniform(100, 2)
        acts = ActionSet(tuple(range(51)))
        lcp = derive_lcp(op, CONS, part, acts)
        assert lcp.actions == (3, 3)

    def test_lcp_with_device_overhead(self):
        # nearest is measured in consumption, not transmit quanta
        table = DeviceTableConsumption(rows=((1, 22), (5, 38), (7, 40)))
        op = StatePolicy(actions=(0,) * 50 + (5,) * 51)
        part = Partition.uniform(100, 2)
        acts = ActionSet((0, 1, 5, 7))
        lcp = derive_lcp(op, table, part, acts)
        # low subset mean consumption is 0, high subset mean is 38
        assert lcp.actions == (0, 5)

    def test_bp_idles_when_low(self):
        part = Partition.uniform(100, 2)
        report = upper_bound(BASELINE, GEOM20, REWARD)
        bp = derive_bp(part, report, ActionSet(tuple(range(51))), CONS)
        assert bp.actions[0] == 0
        assert bp.actions[1] == round(report.b_bar_s)

    def test_bp_requires_two_subsets(self):
        report = upper_bound(BASELINE, GEOM20, REWARD)
        acts = ActionSet(tuple(range(51)))
        for n in (1, 3):
            with pytest.raises(UnsupportedPartitionError):
                derive_bp(Partition.uniform(100, n), report, acts, CONS)
