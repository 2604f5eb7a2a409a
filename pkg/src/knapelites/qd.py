"""Run loops for the two archive-based searches plus bound/γ calculators.

Two interchangeable engines execute the identical search process:

* the compiled engine (default) runs the numba kernels on bit-packed arrays;
* the reference engine is a plain-Python loop over :class:`ArchiveGrid`,
  used for sparse grids, for instrumented runs, and as a cross-check.

Both consume the random stream through the same ``integers()``/``random()``
call pattern, so a given seed produces the same run under either engine;
tests assert this equivalence. Runs are deterministic for a fixed seed and
configuration as long as no wall-clock limit fires (a wall-clock stop is
inherently machine-dependent).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

import numpy as np

from . import kernels
from .archive import (
    DENSE_CELL_LIMIT,
    MODE_LITERAL,
    MODE_STRICT,
    PROFIT_SPACE,
    WEIGHT_SPACE,
    ArchiveGrid,
    BucketSpec,
    CellRecord,
    MapSnapshot,
    bucket_index,
)
from .core import Instance, Solution, evaluate, sample_flip_positions
from .oracles import brute_force_optimal_set

DEFAULT_CHUNK = 1 << 16
WALL_CHECK_EVERY = 1024

GammaLike = Union[BucketSpec, Fraction, int]


@dataclass(frozen=True)
class TerminationCriteria:
    """Stop conditions; at least one must be set.

    ``max_wall_clock`` is in seconds of process CPU time and is checked every
    1024 evaluations, so runs may overshoot it by up to that many.
    """

    max_evaluations: Optional[int] = None
    target_profit: Optional[int] = None
    max_wall_clock: Optional[float] = None

    def __post_init__(self):
        if self.max_evaluations is None and self.target_profit is None and self.max_wall_clock is None:
            raise ValueError("at least one termination criterion must be set")
        if self.max_evaluations is not None and self.max_evaluations < 0:
            raise ValueError("max_evaluations must be >= 0")
        if self.max_wall_clock is not None and self.max_wall_clock <= 0:
            raise ValueError("max_wall_clock must be positive")


@dataclass(frozen=True)
class RunResult:
    """Outcome of one run: best-so-far, usage counters, trace, final map."""

    best_profit: int
    best_solution: Solution
    evaluations_used: int
    hit_target: bool
    trajectory: tuple[tuple[int, int, int], ...]
    final_snapshot: Optional[MapSnapshot]


def gamma_fraction(gamma: GammaLike) -> Fraction:
    if isinstance(gamma, BucketSpec):
        return gamma.gamma
    return Fraction(gamma)


def as_generator(rng: Union[int, np.random.Generator]) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def trajectory_stride(instance: Instance, term: TerminationCriteria) -> int:
    """Sampling cadence: every max(1, cap/1000) evaluations; when no
    evaluation cap is set the paper's map-run budget C*n^2 stands in."""
    cap = term.max_evaluations
    if cap is None:
        cap = instance.capacity * instance.n * instance.n
    return max(1, cap // 1000)


class _KernelEngine:
    """Compiled-run state: bit-packed store, dense grid, scalar block."""

    def __init__(self, instance, space, gamma, mode, rng, stride):
        n = instance.n
        self.instance = instance
        self.space = space
        self.mode = mode
        self.rng = rng
        axis_max = instance.capacity if space == WEIGHT_SPACE else instance.total_profit
        self.bucket_spec = BucketSpec(gamma_fraction(gamma), axis_max)
        self.rows = n + 1
        self.cols = self.bucket_spec.bucket_count
        self.profit_space = space == PROFIT_SPACE
        self.literal = mode == MODE_LITERAL
        nw = (n + 63) // 64
        self.weights = instance.weights_array()
        self.profits = instance.profits_array()
        self.grid = np.zeros((n + 2, self.cols + 1), dtype=np.int32)
        cap0 = 1024
        self.store_words = np.zeros((cap0, nw), dtype=np.uint64)
        self.store_p = np.zeros(cap0, dtype=np.int64)
        self.store_w = np.zeros(cap0, dtype=np.int64)
        self.store_v = np.zeros(cap0, dtype=np.int64)
        self.best_words = np.zeros(nw, dtype=np.uint64)
        self.scratch = np.zeros(nw, dtype=np.uint64)
        self.flip_buf = np.zeros(n, dtype=np.int64)
        # the all-zero string starts in slot 1 and, per the insertion rule,
        # occupies every row of bucket 1
        self.grid[1 : n + 2, 1] = 1
        self.stride = stride
        self.scal = np.array([1, 0, 0, stride], dtype=np.int64)

    @property
    def evals(self) -> int:
        return int(self.scal[2])

    @property
    def best(self) -> int:
        return int(self.scal[1])

    @property
    def pop_size(self) -> int:
        return int(self.scal[0])

    def grow(self):
        cap = self.store_words.shape[0]
        for name in ("store_words", "store_p", "store_w", "store_v"):
            old = getattr(self, name)
            shape = (cap * 2,) + old.shape[1:]
            new = np.zeros(shape, dtype=old.dtype)
            new[:cap] = old
            setattr(self, name, new)

    def advance(self, chunk_end, target, has_target, traj):
        cap = max(1, (chunk_end - self.evals) // self.stride + 2)
        te = np.zeros(cap, dtype=np.int64)
        tp = np.zeros(cap, dtype=np.int64)
        tb = np.zeros(cap, dtype=np.int64)
        ns, status = kernels.qd_chunk(
            self.rng, self.profit_space, self.literal,
            self.weights, self.profits, self.instance.n, self.instance.capacity,
            self.bucket_spec.gamma.numerator, self.bucket_spec.gamma.denominator,
            self.rows, self.grid,
            self.store_words, self.store_p, self.store_w, self.store_v,
            self.best_words, self.scal, self.scratch, self.flip_buf,
            chunk_end, target, has_target,
            self.stride, te, tp, tb,
        )
        for i in range(ns):
            traj.append((int(te[i]), int(tp[i]), int(tb[i])))
        return status

    def best_solution(self) -> Solution:
        return Solution(self.instance.n, kernels.words_to_mask(self.best_words))

    def snapshot(self) -> MapSnapshot:
        rows_i, cols_i = np.nonzero(self.grid)
        slots = self.grid[rows_i, cols_i]
        cap = self.instance.capacity
        objective = self.store_p[slots] if self.space == WEIGHT_SPACE else self.store_w[slots]
        feasible = self.store_w[slots] <= cap
        cells = tuple(
            CellRecord(int(r), int(c), int(o), bool(f), int(s))
            for r, c, o, f, s in zip(
                rows_i.tolist(), cols_i.tolist(), objective.tolist(), feasible.tolist(), slots.tolist()
            )
        )
        return MapSnapshot(
            n=self.instance.n,
            space=self.space,
            axis_max=self.bucket_spec.axis_max,
            gamma=self.bucket_spec.gamma,
            mode=self.mode,
            capacity=cap,
            rows=self.rows,
            cols=self.cols,
            store_size=self.pop_size,
            referenced_slots=int(np.unique(slots).size),
            cells=cells,
        )


class _ReferenceEngine:
    """Pure-Python mirror of the kernel loop over an ArchiveGrid."""

    def __init__(self, instance, space, gamma, mode, rng, stride, dense_cell_limit=DENSE_CELL_LIMIT):
        self.instance = instance
        self.rng = rng
        self.grid = ArchiveGrid(
            instance, space, gamma_fraction(gamma), mode, dense_cell_limit=dense_cell_limit
        )
        x0 = Solution.zeros(instance.n)
        self.grid.insert(x0, evaluate(x0, instance))
        self.stride = stride
        self.evals = 0
        self.best = 0
        self._best_solution = x0
        self._next_at = stride
        self._weight_space = space == WEIGHT_SPACE

    @property
    def pop_size(self) -> int:
        return self.grid.population_size()

    def grow(self):
        raise AssertionError("reference engine store never fills")

    def advance(self, chunk_end, target, has_target, traj):
        inst = self.instance
        n = inst.n
        cap = inst.capacity
        rng = self.rng
        grid = self.grid
        while self.evals < chunk_end:
            parent = grid.select_parent(rng)
            mask = parent.mask
            for pos in sample_flip_positions(n, rng):
                mask ^= 1 << pos
            x = Solution(n, mask)
            e = evaluate(x, inst)
            self.evals += 1
            if self._weight_space:
                grid.insert_weight_based(x, e, validate=False)
            else:
                grid.insert_profit_based(x, e, validate=False)
            if e.weight <= cap and e.profit > self.best:
                self.best = e.profit
                self._best_solution = x
            if has_target and self.best >= target:
                return kernels.STATUS_TARGET
            if self.evals >= self._next_at:
                traj.append((self.evals, grid.population_size(), self.best))
                self._next_at += self.stride
        return kernels.STATUS_CHUNK_DONE

    def best_solution(self) -> Solution:
        return self._best_solution

    def snapshot(self) -> MapSnapshot:
        return self.grid.snapshot()


def _drive(engine, term: TerminationCriteria) -> RunResult:
    traj = [(0, engine.pop_size, engine.best)]
    target = term.target_profit if term.target_profit is not None else 0
    has_target = term.target_profit is not None
    wall = term.max_wall_clock
    clock = time.process_time
    t0 = clock()
    if not (has_target and engine.best >= target):
        chunk = WALL_CHECK_EVERY if wall is not None else DEFAULT_CHUNK
        while True:
            end = engine.evals + chunk
            if term.max_evaluations is not None:
                end = min(end, term.max_evaluations)
            if end <= engine.evals:
                break
            status = engine.advance(end, target, has_target, traj)
            if status == kernels.STATUS_TARGET:
                break
            if status == kernels.STATUS_STORE_FULL:
                engine.grow()
                continue
            if wall is not None and clock() - t0 >= wall:
                break
    if traj[-1][0] != engine.evals:
        traj.append((engine.evals, engine.pop_size, engine.best))
    return RunResult(
        best_profit=engine.best,
        best_solution=engine.best_solution(),
        evaluations_used=engine.evals,
        hit_target=has_target and engine.best >= target,
        trajectory=tuple(traj),
        final_snapshot=engine.snapshot(),
    )


def _run_map_elites(instance, space, gamma, term, rng, mode, engine, dense_cell_limit):
    if mode not in (MODE_STRICT, MODE_LITERAL):
        raise ValueError(f"unknown mode {mode!r}")
    rng = as_generator(rng)
    stride = trajectory_stride(instance, term)
    axis_max = instance.capacity if space == WEIGHT_SPACE else instance.total_profit
    cells = (instance.n + 1) * (BucketSpec(gamma_fraction(gamma), axis_max).bucket_count)
    if engine == "auto":
        engine = "kernel" if cells <= dense_cell_limit else "reference"
    if engine == "kernel":
        if cells > dense_cell_limit:
            raise ValueError(
                f"grid of {cells} cells exceeds the dense limit {dense_cell_limit}; "
                "use engine='reference'"
            )
        eng = _KernelEngine(instance, space, gamma, mode, rng, stride)
    elif engine == "reference":
        eng = _ReferenceEngine(instance, space, gamma, mode, rng, stride, dense_cell_limit)
    else:
        raise ValueError(f"unknown engine {engine!r}")
    return _drive(eng, term)


def run_weight_map_elites(
    instance: Instance,
    gamma: GammaLike,
    term: TerminationCriteria,
    rng: Union[int, np.random.Generator],
    mode: str = MODE_STRICT,
    engine: str = "auto",
    dense_cell_limit: int = DENSE_CELL_LIMIT,
) -> RunResult:
    """Archive search over (last-item, weight bucket) cells, maximizing profit
    per cell; only feasible offspring enter the archive."""
    return _run_map_elites(instance, WEIGHT_SPACE, gamma, term, rng, mode, engine, dense_cell_limit)


def run_profit_map_elites(
    instance: Instance,
    gamma: GammaLike,
    term: TerminationCriteria,
    rng: Union[int, np.random.Generator],
    mode: str = MODE_STRICT,
    engine: str = "auto",
    dense_cell_limit: int = DENSE_CELL_LIMIT,
) -> RunResult:
    """Archive search over (last-item, profit bucket) cells, minimizing weight
    per cell; infeasible offspring are archived too, but the best-so-far
    tracker only accepts feasible ones."""
    return _run_map_elites(instance, PROFIT_SPACE, gamma, term, rng, mode, engine, dense_cell_limit)


def expected_bound_weight(n: int, capacity: int) -> float:
    """Expected-evaluations upper bound e*(C+1)*n^3 for the weight-based
    search at unit niche width."""
    if n < 1 or capacity < 0:
        raise ValueError("need n >= 1 and capacity >= 0")
    return math.e * (capacity + 1) * n**3

def expected_bound_profit(n: int, total_profit: int, gamma: GammaLike) -> float:
    """Expected-evaluations upper bound e*(floor(Q/gamma)+1)*n^3 for the
    profit-based search."""
    if n < 1 or total_profit < 1:
        raise ValueError("need n >= 1 and total_profit >= 1")
    g = gamma_fraction(gamma)
    cols = total_profit * g.denominator // g.numerator + 1
    return math.e * cols * n**3


def expected_bound_fpras(n: int, epsilon: Fraction) -> float:
    """Expected-evaluations upper bound e*(floor(n^2/eps)+1)*n^3 for the
    (1-eps)-approximation configuration."""
    epsilon = Fraction(epsilon)
    if not (0 < epsilon < 1):
        raise ValueError(f"epsilon must be in (0,1), got {epsilon}")
    cols = n * n * epsilon.denominator // epsilon.numerator + 1
    return math.e * cols * n**3


def fpras_gamma(epsilon: Fraction, instance: Instance) -> BucketSpec:
    """Niche width eps * max(p) / n (exact rational): with this setting the
    profit-based search is a (1-eps)-approximation scheme."""
    epsilon = Fraction(epsilon)
    if not (0 < epsilon < 1):
        raise ValueError(f"epsilon must be in (0,1), got {epsilon}")
    gamma = epsilon * max(instance.profits) / instance.n
    return BucketSpec(gamma, instance.total_profit)


@dataclass(frozen=True)
class PrefixMonitorResult:
    """Trace of the optimal-prefix statistic over an instrumented run.

    The statistic is the largest h such that for every j <= h some stored
    solution equals a j-prefix of an optimal solution; with unit niche width
    and strict mode it never decreases, and ``violations`` counts observed
    decreases (expected to stay 0).
    """

    opt_profit: int
    iterations: int
    violations: int
    final_level: int
    trace: tuple[int, ...]


def run_prefix_monitor(
    instance: Instance,
    iterations: int,
    rng: Union[int, np.random.Generator],
    gamma: GammaLike = 1,
    mode: str = MODE_STRICT,
    trace_every: int = 1000,
) -> PrefixMonitorResult:
    """Instrumented weight-based run tracking optimal-prefix retention.

    Enumerates the full optimal set by brute force (so the instance must be
    small), then maintains per-level membership counts via the archive's
    slot-change observer.
    """
    opt, opt_masks = brute_force_optimal_set(instance)
    n = instance.n
    prefix_sets = [set() for _ in range(n + 1)]
    for s in opt_masks:
        for j in range(n + 1):
            prefix_sets[j].add(s & ((1 << j) - 1))
    counts = [0] * (n + 1)

    def levels(mask):
        return [j for j in range(n + 1) if (mask >> j) == 0 and mask in prefix_sets[j]]

    def observer(_slot, old, new):
        if old is not None:
            for j in levels(old):
                counts[j] -= 1
        for j in levels(new):
            counts[j] += 1

    grid = ArchiveGrid(instance, WEIGHT_SPACE, gamma_fraction(gamma), mode)
    grid.observer = observer
    x0 = Solution.zeros(n)
    grid.insert_weight_based(x0, evaluate(x0, instance), validate=False)

    def current_level():
        if counts[0] == 0:
            return -1
        h = 0
        while h < n and counts[h + 1] > 0:
            h += 1
        return h

    rng = as_generator(rng)
    level = current_level()
    violations = 0
    trace = [level]
    for t in range(iterations):
        parent = grid.select_parent(rng)
        mask = parent.mask
        for pos in sample_flip_positions(n, rng):
            mask ^= 1 << pos
        x = Solution(n, mask)
        grid.insert_weight_based(x, evaluate(x, instance), validate=False)
        now = current_level()
        if now < level:
            violations += 1
        level = now
        if (t + 1) % trace_every == 0:
            trace.append(level)
    return PrefixMonitorResult(
        opt_profit=opt,
        iterations=iterations,
        violations=violations,
        final_level=level,
        trace=tuple(trace),
    )
