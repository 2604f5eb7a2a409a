"""Problem and solution representation for the 0/1 knapsack problem.

Solutions are bitstrings over the items; bit i-1 of the integer mask
corresponds to item i (items are 1-indexed, the leftmost character of the
string form is item 1). All arithmetic is exact 64-bit integer arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


@dataclass(frozen=True)
class Instance:
    """A knapsack instance: positive integer weights/profits and a capacity.

    Every weight must lie in (0, capacity]; items heavier than the capacity
    can never be packed and are rejected up front.
    """

    weights: tuple[int, ...]
    profits: tuple[int, ...]
    capacity: int

    def __post_init__(self):
        if len(self.weights) != len(self.profits):
            raise ValueError(
                f"weights/profits length mismatch: {len(self.weights)} != {len(self.profits)}"
            )
        if len(self.weights) == 0:
            raise ValueError("instance must have at least one item")
        if self.capacity < 1:
            raise ValueError(f"capacity must be positive, got {self.capacity}")
        for i, (w, p) in enumerate(zip(self.weights, self.profits), start=1):
            if not (0 < w <= self.capacity):
                raise ValueError(f"item {i}: weight {w} outside (0, {self.capacity}]")
            if p < 1:
                raise ValueError(f"item {i}: profit {p} must be positive")

    @property
    def n(self) -> int:
        return len(self.weights)

    @property
    def total_profit(self) -> int:
        """Sum of all item profits (the upper end of the profit axis)."""
        return sum(self.profits)

    @property
    def total_weight(self) -> int:
        return sum(self.weights)

    @classmethod
    def from_items(cls, items: Iterable[tuple[int, int]], capacity: int) -> "Instance":
        """Build from (weight, profit) pairs."""
        ws, ps = zip(*items)
        return cls(tuple(int(w) for w in ws), tuple(int(p) for p in ps), int(capacity))

    def weights_array(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=np.int64)

    def profits_array(self) -> np.ndarray:
        return np.asarray(self.profits, dtype=np.int64)


@dataclass(frozen=True)
class Solution:
    """A selection of items as a length-n bitstring (characteristic vector)."""

    n: int
    mask: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("solution length must be >= 1")
        if self.mask < 0 or self.mask >> self.n:
            raise ValueError(f"mask {self.mask:#x} does not fit in {self.n} bits")

    @classmethod
    def zeros(cls, n: int) -> "Solution":
        return cls(n, 0)

    @classmethod
    def from_bits(cls, bits: Sequence[int]) -> "Solution":
        mask = 0
        for i, b in enumerate(bits):
            if b:
                mask |= 1 << i
        return cls(len(bits), mask)

    @classmethod
    def from_string(cls, s: str) -> "Solution":
        """Parse e.g. "1010" (leftmost character = item 1)."""
        return cls.from_bits([1 if c == "1" else 0 for c in s])

    @property
    def bits(self) -> tuple[int, ...]:
        return tuple((self.mask >> i) & 1 for i in range(self.n))

    def to_string(self) -> str:
        return "".join("1" if (self.mask >> i) & 1 else "0" for i in range(self.n))

    def item_count(self) -> int:
        return self.mask.bit_count()

    def __str__(self) -> str:
        return self.to_string()


@dataclass(frozen=True)
class Evaluation:
    """Exact profit, weight, and last selected item index of a solution.

    ``last_index`` is the 1-based index of the highest-indexed selected item,
    with 0 for the empty selection.
    """

    profit: int
    weight: int
    last_index: int


def evaluate(solution: Solution, instance: Instance) -> Evaluation:
    """Compute profit, weight and last-item index of a solution.

    Raises ValueError if the solution length does not match the instance.
    """
    if solution.n != instance.n:
        raise ValueError(f"solution length {solution.n} != instance n {instance.n}")
    profit = 0
    weight = 0
    m = solution.mask
    while m:
        low = m & -m
        i = low.bit_length() - 1
        profit += instance.profits[i]
        weight += instance.weights[i]
        m ^= low
    return Evaluation(profit=profit, weight=weight, last_index=solution.mask.bit_length())


def is_feasible(evaluation: Evaluation, instance: Instance) -> bool:
    """True iff the evaluated weight fits the capacity (boundary inclusive)."""
    return evaluation.weight <= instance.capacity


def sample_flip_positions(n: int, rng: np.random.Generator) -> list[int]:
    """Positions (0-based) flipped by standard bit mutation with rate 1/n.

    Each position is flipped independently with probability exactly 1/n.
    Implemented by geometric gap sampling, which draws one uniform per flip
    plus one terminating draw instead of n Bernoulli draws; the gap
    distribution (1-p)^k * p reproduces the independent-flip process exactly.
    For n == 1 the single bit always flips and no randomness is consumed.
    """
    if n == 1:
        return [0]
    p = 1.0 / n
    inv_lq = 1.0 / math.log1p(-p)
    positions = []
    pos = -1
    while True:
        u = rng.random()
        if u <= 0.0:
            break
        gap = math.log(u) * inv_lq
        if pos + 1.0 + gap >= n:
            break
        pos += 1 + int(gap)
        positions.append(pos)
    return positions


def standard_bit_mutation(parent: Solution, rng: np.random.Generator) -> Solution:
    """Flip each bit of the parent independently with probability 1/n.

    The parent is unmodified; the same generator state always yields the
    same offspring.
    """
    mask = parent.mask
    for pos in sample_flip_positions(parent.n, rng):
        mask ^= 1 << pos
    return Solution(parent.n, mask)
