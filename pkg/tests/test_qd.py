import math
from fractions import Fraction

import numpy as np
import pytest

from knapelites import (
    ArchiveGrid,
    BucketSpec,
    Instance,
    Solution,
    TerminationCriteria,
    brute_force_opt,
    evaluate,
    expected_bound_fpras,
    expected_bound_profit,
    expected_bound_weight,
    fpras_gamma,
    run_prefix_monitor,
    run_profit_map_elites,
    run_weight_map_elites,
)
from knapelites import kernels
from knapelites.archive import MODE_LITERAL, MODE_STRICT, PROFIT_SPACE, WEIGHT_SPACE
from knapelites.core import sample_flip_positions

from conftest import random_instance


class TestBounds:
    def test_weight_bound_reported_values(self):
        # published evaluation-budget column: e(C+1)n^3
        assert expected_bound_weight(50, 4029) == pytest.approx(1.37e9, rel=5e-3)
        assert expected_bound_weight(50, 2226) == pytest.approx(7.57e8, rel=5e-3)
        assert expected_bound_weight(1, 0) == pytest.approx(math.e)

    def test_profit_bound_reported_values(self):
        assert expected_bound_profit(50, 53928, 1) == pytest.approx(1.83e10, rel=5e-3)
        assert expected_bound_profit(50, 23825, 1) == pytest.approx(8.10e9, rel=5e-3)
        # the gamma=5 entry recomputes to ~3.67e9 (the printed table value is garbled)
        assert expected_bound_profit(50, 53928, 5) == pytest.approx(3.665e9, rel=5e-3)
        assert expected_bound_profit(7, 10, 11) == pytest.approx(math.e * 343)

    def test_fpras_gamma_construction(self):
        inst = Instance(tuple([1] * 50), tuple([100] + [1] * 49), 50)
        spec = fpras_gamma(Fraction(1, 2), inst)
        assert spec.gamma == 1
        assert spec.axis_max == inst.total_profit
        inst2 = Instance(tuple([1] * 50), tuple([2157] + [1] * 49), 50)
        spec2 = fpras_gamma(Fraction(1, 10), inst2)
        assert spec2.gamma == Fraction(2157, 500)
        assert spec2.gamma.denominator == 500
        with pytest.raises(ValueError):
            fpras_gamma(Fraction(1), inst)

    def test_fpras_budget(self):
        # e(floor(n^2/eps)+1)n^3 at eps=1/4 is e(4n^2+1)n^3
        assert expected_bound_fpras(10, Fraction(1, 4)) == pytest.approx(math.e * 401 * 1000)


class TestTermination:
    def test_needs_a_criterion(self):
        with pytest.raises(ValueError):
            TerminationCriteria()

    def test_target_zero_stops_immediately(self, oracle_instance):
        term = TerminationCriteria(target_profit=0)
        for runner in (run_weight_map_elites, run_profit_map_elites):
            r = runner(oracle_instance, 1, term, 0)
            assert r.evaluations_used == 0
            assert r.hit_target
            assert r.trajectory == ((0, 1, 0),)

    def test_eval_budget_exactly_consumed(self, oracle_instance):
        term = TerminationCriteria(max_evaluations=5000)
        r = run_weight_map_elites(oracle_instance, 1, term, 1)
        assert r.evaluations_used == 5000
        assert not r.hit_target


class TestRuns:
    def test_single_item_found_immediately(self):
        # n=1 flips its only bit with probability 1, so the optimum appears at
        # the very first evaluation -- the hitting-time distribution is exact
        inst = Instance((1,), (1,), 1)
        term = TerminationCriteria(max_evaluations=1000, target_profit=1)
        for seed in range(50):
            r = run_weight_map_elites(inst, 1, term, seed)
            assert r.hit_target and r.evaluations_used == 1
            assert r.best_profit == 1

    def test_oracle_instance_reaches_optimum(self, oracle_instance):
        opt = brute_force_opt(oracle_instance).opt_profit
        term = TerminationCriteria(max_evaluations=100_000, target_profit=opt)
        for runner in (run_weight_map_elites, run_profit_map_elites):
            r = runner(oracle_instance, 1, term, 5)
            assert r.best_profit == opt == 8
            e = evaluate(r.best_solution, oracle_instance)
            assert e.profit == opt and e.weight <= oracle_instance.capacity

    def test_infeasible_solutions_archived_but_not_best(self):
        # both items together exceed the capacity; the profit archive still
        # stores that solution while best-so-far only tracks feasible ones
        inst = Instance((1, 1), (2, 3), 1)
        term = TerminationCriteria(max_evaluations=2000)
        r = run_profit_map_elites(inst, 1, term, 2)
        assert r.best_profit == 3
        snap = r.final_snapshot
        infeasible = [c for c in snap.cells if not c.feasible]
        assert infeasible, "profit space must admit infeasible solutions"
        assert all(c.feasible for c in snap.cells if c.objective <= 1)

    def test_degenerate_single_profit_bucket(self, oracle_instance):
        q = oracle_instance.total_profit
        term = TerminationCriteria(max_evaluations=3000)
        r = run_profit_map_elites(oracle_instance, q + 1, term, 3)
        assert r.final_snapshot.cols == 1
        assert len(r.final_snapshot.cells) <= oracle_instance.n + 1

    def test_best_realizable_and_monotone_trajectory(self):
        rng = np.random.default_rng(40)
        for seed in range(5):
            inst = random_instance(rng, n=12, max_coeff=30)
            term = TerminationCriteria(max_evaluations=20_000)
            r = run_profit_map_elites(inst, Fraction(3, 2), term, seed)
            e = evaluate(r.best_solution, inst)
            assert e.profit == r.best_profit and e.weight <= inst.capacity
            bests = [b for (_, _, b) in r.trajectory]
            assert bests == sorted(bests)
            evals = [ev for (ev, _, _) in r.trajectory]
            assert evals == sorted(evals)
            assert r.trajectory[0] == (0, 1, 0)
            assert r.trajectory[-1][0] == r.evaluations_used

    def test_weight_archive_stays_feasible(self, oracle_instance):
        term = TerminationCriteria(max_evaluations=20_000)
        r = run_weight_map_elites(oracle_instance, 1, term, 11)
        assert all(c.feasible for c in r.final_snapshot.cells)


class TestDeterminismAndParity:
    def test_same_seed_same_result(self, oracle_instance):
        term = TerminationCriteria(max_evaluations=30_000)
        a = run_weight_map_elites(oracle_instance, 1, term, 123)
        b = run_weight_map_elites(oracle_instance, 1, term, 123)
        assert a == b

    @pytest.mark.parametrize("mode", [MODE_STRICT, MODE_LITERAL])
    @pytest.mark.parametrize("gamma", [Fraction(1), Fraction(5), Fraction(7, 3)])
    def test_kernel_matches_reference_engine(self, mode, gamma):
        rng = np.random.default_rng(41)
        for seed in range(3):
            inst = random_instance(rng, n=10, max_coeff=25)
            term = TerminationCriteria(max_evaluations=8000)
            for runner in (run_weight_map_elites, run_profit_map_elites):
                fast = runner(inst, gamma, term, seed, mode=mode, engine="kernel")
                slow = runner(inst, gamma, term, seed, mode=mode, engine="reference")
                assert fast == slow

    def test_flip_position_parity_with_kernel(self):
        for n in (1, 2, 7, 64, 65, 200):
            g1 = np.random.default_rng(17)
            g2 = np.random.default_rng(17)
            buf = np.zeros(n, dtype=np.int64)
            for _ in range(2000):
                k = kernels.sample_positions(g1, n, buf)
                assert list(buf[:k]) == sample_flip_positions(n, g2)

    @pytest.mark.parametrize("space", [WEIGHT_SPACE, PROFIT_SPACE])
    @pytest.mark.parametrize("mode", [MODE_STRICT, MODE_LITERAL])
    def test_replay_matches_archive_grid(self, space, mode):
        rng = np.random.default_rng(42)
        inst = random_instance(rng, n=70, max_coeff=15)
        n = inst.n
        seq = [0] + [
            int.from_bytes(rng.bytes((n + 7) // 8), "little") & ((1 << n) - 1)
            for _ in range(4000)
        ]
        grid = ArchiveGrid(inst, space, Fraction(5, 2), mode)
        best = 0
        for mask in seq:
            e = evaluate(Solution(n, mask), inst)
            grid.insert(Solution(n, mask), e, )
            if e.weight <= inst.capacity and e.profit > best:
                best = e.profit

        nw = (n + 63) // 64
        off_words = np.zeros((len(seq), nw), dtype=np.uint64)
        off_p = np.zeros(len(seq), dtype=np.int64)
        off_w = np.zeros(len(seq), dtype=np.int64)
        off_v = np.zeros(len(seq), dtype=np.int64)
        for t, mask in enumerate(seq):
            off_words[t] = kernels.mask_to_words(mask, n)
            e = evaluate(Solution(n, mask), inst)
            off_p[t], off_w[t], off_v[t] = e.profit, e.weight, e.last_index
        axis_max = inst.capacity if space == WEIGHT_SPACE else inst.total_profit
        cols = BucketSpec(Fraction(5, 2), axis_max).bucket_count
        kgrid = np.zeros((n + 2, cols + 1), dtype=np.int32)
        cap0 = 64
        sw = np.zeros((cap0, nw), dtype=np.uint64)
        sp = np.zeros(cap0, dtype=np.int64)
        swt = np.zeros(cap0, dtype=np.int64)
        sv = np.zeros(cap0, dtype=np.int64)
        scal = np.zeros(4, dtype=np.int64)
        start = 0
        while True:
            start, status = kernels.replay_inserts(
                space == PROFIT_SPACE, mode == MODE_LITERAL, inst.capacity,
                5, 2, n + 1, kgrid, sw, sp, swt, sv, scal,
                off_words, off_p, off_w, off_v, start,
            )
            if status != kernels.STATUS_STORE_FULL:
                break

            def _double(arr):
                grown = np.zeros((arr.shape[0] * 2,) + arr.shape[1:], dtype=arr.dtype)
                grown[: arr.shape[0]] = arr
                return grown

            sw, sp, swt, sv = _double(sw), _double(sp), _double(swt), _double(sv)

        assert scal[0] == grid.population_size()
        assert scal[1] == best
        ref_cells = {(r, c): s for r, c, s in grid.occupied_cells()}
        rows_i, cols_i = np.nonzero(kgrid)
        k_cells = {
            (int(r), int(c)): int(kgrid[r, c]) for r, c in zip(rows_i, cols_i)
        }
        assert k_cells == ref_cells
        for slot in range(1, grid.population_size() + 1):
            assert kernels.words_to_mask(sw[slot]) == grid.slot_solution(slot).mask


class TestPrefixMonitor:
    def test_no_violations_in_strict_mode(self):
        rng = np.random.default_rng(43)
        for seed in range(3):
            inst = random_instance(rng, n=10, max_coeff=15)
            res = run_prefix_monitor(inst, 10_000, seed)
            assert res.violations == 0
            assert res.trace[0] >= 0
            assert res.final_level >= res.trace[0]

    def test_level_reaches_n_when_optimum_found(self):
        # once every optimal prefix is stored the statistic equals n
        inst = Instance((2, 3, 4, 5), (3, 4, 5, 6), 6)
        res = run_prefix_monitor(inst, 30_000, 7)
        assert res.opt_profit == 8
        assert res.final_level == inst.n
        assert res.violations == 0
