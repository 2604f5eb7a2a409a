import numpy as np
import pytest

from knapelites import GeneratorSpec, generate, parse_instance, write_instance
from knapelites.instances import (
    BOUNDED_STRONG,
    SIMILAR_WEIGHTS,
    UNCORRELATED,
    instance_sha256,
)


class TestGenerate:
    def test_deterministic_given_seed(self):
        spec = GeneratorSpec(UNCORRELATED, n=50, coefficient_range=1000,
                             capacity_fraction=0.4, seed=123)
        a, b = generate(spec), generate(spec)
        assert write_instance(a) == write_instance(b)

    def test_similar_weights_limits_selection(self):
        spec = GeneratorSpec(SIMILAR_WEIGHTS, n=50, coefficient_range=1000,
                             capacity=4567, seed=3)
        inst = generate(spec)
        assert all(1000 <= w <= 1010 for w in inst.weights)
        # any five items outweigh the capacity, so feasible picks <= 4 items
        assert sorted(inst.weights)[:5][4] * 5 >= 5 * 1000 > 4567 - 1
        assert sum(sorted(inst.weights)[:5]) > inst.capacity
        assert inst.capacity // 1000 == 4

    def test_strong_correlation(self):
        spec = GeneratorSpec(BOUNDED_STRONG, n=1000, coefficient_range=1000,
                             capacity_fraction=0.5, seed=9)
        inst = generate(spec)
        r = np.corrcoef(inst.weights, inst.profits)[0, 1]
        assert r >= 0.95

    def test_bounded_strong_offsets(self):
        spec = GeneratorSpec(BOUNDED_STRONG, n=300, coefficient_range=1000,
                             capacity_fraction=0.5, seed=10)
        inst = generate(spec)
        for w, p in zip(inst.weights, inst.profits):
            assert abs(p - (w + 100)) <= 2

    def test_impossible_spec_rejected(self):
        with pytest.raises(ValueError):
            generate(GeneratorSpec(SIMILAR_WEIGHTS, n=5, coefficient_range=10,
                                   capacity=500, seed=0))

    def test_weights_respect_capacity(self):
        spec = GeneratorSpec(UNCORRELATED, n=40, coefficient_range=100,
                             capacity=30, seed=5)
        inst = generate(spec)
        assert max(inst.weights) <= 30

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            GeneratorSpec("nonsense", n=5, coefficient_range=10, capacity=5)
        with pytest.raises(ValueError):
            GeneratorSpec(UNCORRELATED, n=5, coefficient_range=10)
        with pytest.raises(ValueError):
            GeneratorSpec(UNCORRELATED, n=5, coefficient_range=10,
                          capacity=5, capacity_fraction=0.5)


class TestFileFormat:
    def test_minimal_file(self):
        inst = parse_instance("1 5\n3 4\n")
        assert inst.n == 1 and inst.capacity == 5
        assert inst.weights == (3,) and inst.profits == (4,)

    def test_round_trip(self):
        rng = np.random.default_rng(31)
        for i in range(100):
            spec = GeneratorSpec(UNCORRELATED, n=int(rng.integers(1, 30)),
                                 coefficient_range=50, capacity_fraction=0.5,
                                 seed=int(rng.integers(0, 10_000)))
            inst = generate(spec)
            assert parse_instance(write_instance(inst)) == inst

    def test_missing_item_line_reports_position(self):
        with pytest.raises(ValueError, match="item 2"):
            parse_instance("2 5\n3 4\n")

    def test_malformed_lines_report_line_number(self):
        with pytest.raises(ValueError, match="line 1"):
            parse_instance("oops\n")
        with pytest.raises(ValueError, match="line 2"):
            parse_instance("1 5\nfoo bar\n")
        with pytest.raises(ValueError, match="line 3"):
            parse_instance("1 5\n3 4\n9 9\n")

    def test_invariant_violations_rejected(self):
        with pytest.raises(ValueError):
            parse_instance("1 5\n6 4\n")  # weight above capacity
        with pytest.raises(ValueError):
            parse_instance("1 5\n3 0\n")  # non-positive profit

    def test_digest_stable(self):
        inst = parse_instance("2 9\n3 4\n5 1\n")
        assert instance_sha256(inst) == instance_sha256(parse_instance(write_instance(inst)))
