import numpy as np
import pytest

from knapelites import (
    BaselineConfig,
    Evaluation,
    Instance,
    TerminationCriteria,
    brute_force_opt,
    evaluate,
    penalized_fitness,
    run_mu_plus_one_ea,
    run_one_plus_one_ea,
)
from knapelites.baselines import _BaselineState
from knapelites.qd import trajectory_stride

from conftest import random_instance


class TestPenalizedFitness:
    def test_feasible_passthrough(self, oracle_instance):
        assert penalized_fitness(Evaluation(7, 5, 2), oracle_instance) == 7

    def test_boundary_weight(self, oracle_instance):
        assert penalized_fitness(Evaluation(9, 6, 3), oracle_instance) == 9

    def test_overflow_negative(self, oracle_instance):
        assert penalized_fitness(Evaluation(9, 9, 4), oracle_instance) == -3

    def test_feasible_beats_infeasible(self):
        rng = np.random.default_rng(50)
        for _ in range(100):
            inst = random_instance(rng, n=8, max_coeff=20)
            worst_feasible = penalized_fitness(Evaluation(1, inst.capacity, 1), inst)
            best_infeasible = penalized_fitness(
                Evaluation(10**6, inst.capacity + 1, 1), inst
            )
            assert worst_feasible > best_infeasible


class TestOnePlusOne:
    def test_single_item_immediate(self):
        inst = Instance((1,), (1,), 1)
        term = TerminationCriteria(max_evaluations=1000, target_profit=1)
        for seed in range(50):
            r = run_one_plus_one_ea(inst, term, seed)
            assert r.hit_target and r.evaluations_used == 1

    def test_target_zero_immediate(self, oracle_instance):
        r = run_one_plus_one_ea(oracle_instance, TerminationCriteria(target_profit=0), 0)
        assert r.evaluations_used == 0 and r.hit_target

    def test_reaches_optimum(self, oracle_instance):
        opt = brute_force_opt(oracle_instance).opt_profit
        term = TerminationCriteria(max_evaluations=200_000, target_profit=opt)
        r = run_one_plus_one_ea(oracle_instance, term, 3)
        assert r.best_profit == opt == 8
        assert r.final_snapshot is None

    def test_current_fitness_non_decreasing(self):
        rng = np.random.default_rng(51)
        inst = random_instance(rng, n=15, max_coeff=30)
        state = _BaselineState(inst, 1, np.random.default_rng(4), stride=10**9)
        prev = state.pop_fit[0]
        for _ in range(50):
            state.advance(state.evals + 200, 0, False, [])
            assert state.pop_fit[0] >= prev
            prev = state.pop_fit[0]


class TestMuPlusOne:
    def test_mu_one_equals_one_plus_one(self, oracle_instance):
        term = TerminationCriteria(max_evaluations=20_000)
        a = run_one_plus_one_ea(oracle_instance, term, 9)
        b = run_mu_plus_one_ea(oracle_instance, BaselineConfig(mu=1), term, 9)
        assert a == b

    def test_reaches_optimum(self, oracle_instance):
        opt = brute_force_opt(oracle_instance).opt_profit
        term = TerminationCriteria(max_evaluations=400_000, target_profit=opt)
        r = run_mu_plus_one_ea(oracle_instance, BaselineConfig(mu=10), term, 1)
        assert r.best_profit == opt

    def test_population_fitness_multiset_non_decreasing(self):
        rng = np.random.default_rng(52)
        inst = random_instance(rng, n=12, max_coeff=25)
        state = _BaselineState(inst, 8, np.random.default_rng(6), stride=10**9)
        prev = sorted(state.population_fitnesses())
        for _ in range(60):
            state.advance(state.evals + 100, 0, False, [])
            now = sorted(state.population_fitnesses())
            assert all(a >= b for a, b in zip(now, prev))
            prev = now

    def test_best_bounded_by_optimum(self):
        rng = np.random.default_rng(53)
        for seed in range(5):
            inst = random_instance(rng, n=14, max_coeff=30)
            opt = brute_force_opt(inst).opt_profit
            term = TerminationCriteria(max_evaluations=30_000)
            r = run_mu_plus_one_ea(inst, BaselineConfig(mu=5), term, seed)
            assert r.best_profit <= opt
            e = evaluate(r.best_solution, inst)
            assert e.profit == r.best_profit and e.weight <= inst.capacity

    def test_config_validation(self):
        with pytest.raises(ValueError):
            BaselineConfig(mu=0)
        with pytest.raises(ValueError):
            BaselineConfig(penalty_rule="repair")

    def test_deterministic(self, oracle_instance):
        term = TerminationCriteria(max_evaluations=15_000)
        a = run_mu_plus_one_ea(oracle_instance, BaselineConfig(mu=7), term, 12)
        b = run_mu_plus_one_ea(oracle_instance, BaselineConfig(mu=7), term, 12)
        assert a == b
