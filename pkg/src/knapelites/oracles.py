"""Ground-truth knapsack solvers used to verify the search algorithms.

All four solvers return an OracleResult whose witness re-evaluates exactly to
the reported profit. The two dynamic programs are the weight-indexed and
profit-indexed classics; the approximation scheme scales profits down by an
exact rational factor and solves the scaled problem with the profit-indexed
program.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .core import Instance, Solution, evaluate

BRUTE_FORCE_MAX_N = 25
DP_CELL_LIMIT = 500_000_000

_NEG = -(1 << 60)
_INF = 1 << 60


@dataclass(frozen=True)
class OracleResult:
    opt_profit: int
    witness: Solution
    table_stats: Optional[tuple[int, int]] = None


def _subset_sums(values: tuple[int, ...]) -> np.ndarray:
    """sums[mask] = sum of values over the set bits of mask, for all masks."""
    sums = np.zeros(1, dtype=np.int64)
    for v in values:
        sums = np.concatenate([sums, sums + v])
    return sums


def _lex_key(mask: int, n: int) -> int:
    """Integer that orders masks like their bitstring form (item 1 first)."""
    key = 0
    for i in range(n):
        if (mask >> i) & 1:
            key |= 1 << (n - 1 - i)
    return key


def brute_force_opt(instance: Instance) -> OracleResult:
    """Exhaustive scan of all 2^n subsets (guarded to n <= 25).

    Ties are broken toward the lexicographically smallest bitstring.
    """
    n = instance.n
    if n > BRUTE_FORCE_MAX_N:
        raise ValueError(f"brute force refused for n={n} > {BRUTE_FORCE_MAX_N}")
    profits = _subset_sums(instance.profits)
    weights = _subset_sums(instance.weights)
    feasible = weights <= instance.capacity
    opt = int(profits[feasible].max())
    candidates = np.nonzero(feasible & (profits == opt))[0]
    best = min(candidates.tolist(), key=lambda m: _lex_key(m, n))
    return OracleResult(opt_profit=opt, witness=Solution(n, int(best)))


def brute_force_optimal_set(instance: Instance) -> tuple[int, list[int]]:
    """All optimal solutions as bit masks, ordered by mask value (n <= 25)."""
    n = instance.n
    if n > BRUTE_FORCE_MAX_N:
        raise ValueError(f"brute force refused for n={n} > {BRUTE_FORCE_MAX_N}")
    profits = _subset_sums(instance.profits)
    weights = _subset_sums(instance.weights)
    feasible = weights <= instance.capacity
    opt = int(profits[feasible].max())
    masks = np.nonzero(feasible & (profits == opt))[0]
    return opt, [int(m) for m in masks]


def dp_by_weight(instance: Instance, cell_limit: int = DP_CELL_LIMIT) -> OracleResult:
    """Weight-indexed DP: best profit per (item prefix, weight <= C), O(nC)."""
    n, cap = instance.n, instance.capacity
    if n * (cap + 1) > cell_limit:
        raise MemoryError(f"dp_by_weight table {n}x{cap + 1} exceeds cell limit {cell_limit}")
    best = np.full(cap + 1, _NEG, dtype=np.int64)
    best[0] = 0
    took = np.zeros((n, cap + 1), dtype=bool)
    for i in range(n):
        w = instance.weights[i]
        p = instance.profits[i]
        cand = best[: cap + 1 - w] + p
        upd = cand > best[w:]
        best[w:][upd] = cand[upd]
        took[i, w:][upd] = True
    state = int(np.argmax(best))
    opt = int(best[state])
    mask = 0
    for i in range(n - 1, -1, -1):
        if took[i, state]:
            mask |= 1 << i
            state -= instance.weights[i]
    return OracleResult(opt_profit=opt, witness=Solution(n, mask), table_stats=(n, cap + 1))


def _min_weight_dp(
    weights: list[int], profits: list[int], cell_limit: int
) -> tuple[np.ndarray, np.ndarray]:
    """Minimal weight per achievable profit sum; returns (minw, decision flags)."""
    n = len(weights)
    q = sum(profits)
    if n * (q + 1) > cell_limit:
        raise MemoryError(f"dp_by_profit table {n}x{q + 1} exceeds cell limit {cell_limit}")
    minw = np.full(q + 1, _INF, dtype=np.int64)
    minw[0] = 0
    took = np.zeros((n, q + 1), dtype=bool)
    for i in range(n):
        w = weights[i]
        p = profits[i]
        cand = minw[: q + 1 - p] + w
        upd = cand < minw[p:]
        minw[p:][upd] = cand[upd]
        took[i, p:][upd] = True
    return minw, took


def dp_by_profit(instance: Instance, cell_limit: int = DP_CELL_LIMIT) -> OracleResult:
    """Profit-indexed DP: minimal weight per profit, OPT = max affordable profit."""
    n = instance.n
    minw, took = _min_weight_dp(list(instance.weights), list(instance.profits), cell_limit)
    affordable = np.nonzero(minw <= instance.capacity)[0]
    state = int(affordable.max())
    opt = state
    mask = 0
    for i in range(n - 1, -1, -1):
        if took[i, state]:
            mask |= 1 << i
            state -= instance.profits[i]
    return OracleResult(opt_profit=opt, witness=Solution(n, mask), table_stats=(n, len(minw)))


def fptas(
    instance: Instance, epsilon: Fraction, cell_limit: int = DP_CELL_LIMIT
) -> OracleResult:
    """(1-epsilon)-approximation by profit scaling.

    Profits are floored by K = epsilon * max(p) / n (an exact rational) and
    the scaled problem is solved with the profit-indexed DP; the witness's
    unscaled profit is at least (1-epsilon) * OPT. A scaling factor K <= 1
    loses nothing, so the exact DP answer is returned in that case.
    """
    epsilon = Fraction(epsilon)
    if not (0 < epsilon < 1):
        raise ValueError(f"epsilon must be in (0,1), got {epsilon}")
    n = instance.n
    scale = epsilon * max(instance.profits) / n
    if scale <= 1:
        result = dp_by_profit(instance, cell_limit)
        return OracleResult(result.opt_profit, result.witness, result.table_stats)
    num, den = scale.numerator, scale.denominator
    # items whose profit scales to zero can never improve the scaled optimum
    kept = [i for i in range(n) if instance.profits[i] * den // num > 0]
    scaled = [instance.profits[i] * den // num for i in kept]
    weights = [instance.weights[i] for i in kept]
    minw, took = _min_weight_dp(weights, scaled, cell_limit)
    affordable = np.nonzero(minw <= instance.capacity)[0]
    state = int(affordable.max())
    mask = 0
    for j in range(len(kept) - 1, -1, -1):
        if took[j, state]:
            mask |= 1 << kept[j]
            state -= scaled[j]
    witness = Solution(n, mask)
    achieved = evaluate(witness, instance).profit
    return OracleResult(opt_profit=achieved, witness=witness, table_stats=(len(kept), len(minw)))
