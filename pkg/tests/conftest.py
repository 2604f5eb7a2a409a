import numpy as np
import pytest

from knapelites import Instance


@pytest.fixture
def oracle_instance() -> Instance:
    """Four items, capacity 6; small enough to enumerate all 16 subsets."""
    return Instance(weights=(2, 3, 4, 5), profits=(3, 4, 5, 6), capacity=6)


def random_instance(rng: np.random.Generator, n=None, max_coeff=60, capacity=None) -> Instance:
    """Small random instance with weights clamped to the capacity."""
    if n is None:
        n = int(rng.integers(4, 19))
    weights = [int(rng.integers(1, max_coeff + 1)) for _ in range(n)]
    if capacity is None:
        total = sum(weights)
        capacity = max(max(weights), int(total * rng.uniform(0.2, 0.7)))
    weights = [min(w, capacity) for w in weights]
    profits = [int(rng.integers(1, max_coeff + 1)) for _ in range(n)]
    return Instance(tuple(weights), tuple(profits), capacity)
