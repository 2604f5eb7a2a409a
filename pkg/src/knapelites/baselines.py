"""(1+1) and (mu+1) evolutionary baselines with penalty constraint handling.

Infeasible solutions get fitness C - w(x), which is negative and decreasing
in the overflow, so every feasible solution strictly beats every infeasible
one. Acceptance uses >= (plateau drift is allowed), unlike the archive
searches whose per-cell replacement is strict; this difference follows the
usual conventions for these baselines.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from . import kernels
from .core import Evaluation, Instance, Solution
from .qd import (
    DEFAULT_CHUNK,
    WALL_CHECK_EVERY,
    RunResult,
    TerminationCriteria,
    as_generator,
    trajectory_stride,
)

PENALTY_CAPACITY_OVERFLOW = "capacity-overflow"


@dataclass(frozen=True)
class BaselineConfig:
    mu: int = 50
    penalty_rule: str = PENALTY_CAPACITY_OVERFLOW

    def __post_init__(self):
        if self.mu < 1:
            raise ValueError("mu must be >= 1")
        if self.penalty_rule != PENALTY_CAPACITY_OVERFLOW:
            raise ValueError(f"unknown penalty rule {self.penalty_rule!r}")


def penalized_fitness(e: Evaluation, instance: Instance) -> int:
    """p(x) when feasible, else C - w(x) (negative, worse with more overflow)."""
    if e.weight <= instance.capacity:
        return e.profit
    return instance.capacity - e.weight


class _BaselineState:
    """Population arrays for a (mu+1) run; mu=1 is the (1+1) EA."""

    def __init__(self, instance: Instance, mu: int, rng: np.random.Generator, stride: int):
        n = instance.n
        nw = (n + 63) // 64
        self.instance = instance
        self.mu = mu
        self.rng = rng
        self.weights = instance.weights_array()
        self.profits = instance.profits_array()
        self.pop_words = np.zeros((mu, nw), dtype=np.uint64)
        self.pop_p = np.zeros(mu, dtype=np.int64)
        self.pop_w = np.zeros(mu, dtype=np.int64)
        self.pop_fit = np.zeros(mu, dtype=np.int64)
        self.best_words = np.zeros(nw, dtype=np.uint64)
        self.scratch = np.zeros(nw, dtype=np.uint64)
        self.flip_buf = np.zeros(n, dtype=np.int64)
        self.stride = stride
        self.scal = np.array([mu, 0, 0, stride], dtype=np.int64)

    @property
    def evals(self) -> int:
        return int(self.scal[2])

    @property
    def best(self) -> int:
        return int(self.scal[1])

    @property
    def pop_size(self) -> int:
        return self.mu

    def grow(self):
        raise AssertionError("baseline populations have fixed size")

    def advance(self, chunk_end, target, has_target, traj):
        cap = max(1, (chunk_end - self.evals) // self.stride + 2)
        te = np.zeros(cap, dtype=np.int64)
        tp = np.zeros(cap, dtype=np.int64)
        tb = np.zeros(cap, dtype=np.int64)
        ns, status = kernels.baseline_chunk(
            self.rng, self.mu, self.weights, self.profits,
            self.instance.n, self.instance.capacity,
            self.pop_words, self.pop_p, self.pop_w, self.pop_fit,
            self.best_words, self.scal, self.scratch, self.flip_buf,
            chunk_end, target, has_target,
            self.stride, te, tp, tb,
        )
        for i in range(ns):
            traj.append((int(te[i]), int(tp[i]), int(tb[i])))
        return status

    def best_solution(self) -> Solution:
        return Solution(self.instance.n, kernels.words_to_mask(self.best_words))

    def snapshot(self):
        return None

    def population_fitnesses(self) -> list[int]:
        return [int(f) for f in self.pop_fit]


def _drive_baseline(state: _BaselineState, term: TerminationCriteria) -> RunResult:
    traj = [(0, state.pop_size, state.best)]
    target = term.target_profit if term.target_profit is not None else 0
    has_target = term.target_profit is not None
    wall = term.max_wall_clock
    clock = time.process_time
    t0 = clock()
    if not (has_target and state.best >= target):
        chunk = WALL_CHECK_EVERY if wall is not None else DEFAULT_CHUNK
        while True:
            end = state.evals + chunk
            if term.max_evaluations is not None:
                end = min(end, term.max_evaluations)
            if end <= state.evals:
                break
            status = state.advance(end, target, has_target, traj)
            if status == kernels.STATUS_TARGET:
                break
            if wall is not None and clock() - t0 >= wall:
                break
    if traj[-1][0] != state.evals:
        traj.append((state.evals, state.pop_size, state.best))
    return RunResult(
        best_profit=state.best,
        best_solution=state.best_solution(),
        evaluations_used=state.evals,
        hit_target=has_target and state.best >= target,
        trajectory=tuple(traj),
        final_snapshot=None,
    )


def run_one_plus_one_ea(
    instance: Instance,
    term: TerminationCriteria,
    rng: Union[int, np.random.Generator],
) -> RunResult:
    """Single-individual hill climber under the penalty fitness."""
    rng = as_generator(rng)
    state = _BaselineState(instance, 1, rng, trajectory_stride(instance, term))
    return _drive_baseline(state, term)


def run_mu_plus_one_ea(
    instance: Instance,
    config: BaselineConfig,
    term: TerminationCriteria,
    rng: Union[int, np.random.Generator],
) -> RunResult:
    """Population EA: uniform parent, one offspring, replaces a worst member
    on >=. Starts from mu copies of the all-zero string."""
    rng = as_generator(rng)
    state = _BaselineState(instance, config.mu, rng, trajectory_stride(instance, term))
    return _drive_baseline(state, term)
