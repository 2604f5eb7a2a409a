"""Behavioural-space grids for the two MAP-Elites variants.

A grid has n+1 rows (row = last-item index + 1) and ``floor(axis_max/gamma)+1``
columns (bucket index along the weight or profit axis). Each cell references a
slot in an append-only store of (solution, evaluation) pairs; several cells may
reference the same slot, which is what makes the dominance-filtering loop
cheap. The store never shrinks: parent selection draws over every slot ever
created, including slots no longer referenced by any cell.

Bucketing uses exact rational arithmetic: gamma is a Fraction and the bucket
of a value v is ``v * den // num + 1``. Floating-point division must never be
used here, because e.g. 10 / (10/3) evaluates to 2.999... and would silently
move boundary values into the wrong niche.

Replacement modes (the per-cell winner rule is profit-max in the weight grid
and weight-min in the profit grid, always with strict inequality):

* ``literal`` reproduces the published pseudocode exactly: a better offspring
  overwrites the incumbent's store slot in place, even when the offspring has
  a larger last-item index. Because slots are shared across rows, this can
  leave a low row referencing a solution whose last-item index exceeds what
  the row admits.
* ``strict`` (default) preserves the row invariant the runtime analysis relies
  on: the occupant of row r always has last_index <= r-1. An in-place
  overwrite only happens when incumbent and offspring have the same
  last_index (then every referencing row stays valid, since rows referencing
  a slot are never below last_index+1); otherwise the offspring is appended
  as a fresh slot and only the base row and the filtering rows above it are
  re-pointed.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .core import Evaluation, Instance, Solution, evaluate

WEIGHT_SPACE = "weight"
PROFIT_SPACE = "profit"
MODE_STRICT = "strict"
MODE_LITERAL = "literal"

DENSE_CELL_LIMIT = 10**8


@dataclass(frozen=True)
class BucketSpec:
    """Niche width gamma (exact rational) and the axis it discretizes."""

    gamma: Fraction
    axis_max: int

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.axis_max < 0:
            raise ValueError(f"axis_max must be >= 0, got {self.axis_max}")

    @property
    def bucket_count(self) -> int:
        """floor(axis_max / gamma) + 1 buckets, covering [0, axis_max]."""
        return self.axis_max * self.gamma.denominator // self.gamma.numerator + 1


def bucket_index(value: int, spec: BucketSpec) -> int:
    """1-based bucket of a value: floor(value/gamma) + 1, exact arithmetic."""
    if value < 0:
        raise ValueError(f"bucket values must be >= 0, got {value}")
    return value * spec.gamma.denominator // spec.gamma.numerator + 1


@dataclass(frozen=True)
class InsertOutcome:
    accepted: bool
    appended: bool
    replaced_slots: int
    cells_touched: int


@dataclass(frozen=True)
class CellRecord:
    """One occupied cell: grid position, occupant objective, slot reference."""

    row: int
    col: int
    objective: int
    feasible: bool
    slot: int


@dataclass(frozen=True)
class MapSnapshot:
    """Immutable view of an archive: occupied cells plus grid metadata."""

    n: int
    space: str
    axis_max: int
    gamma: Fraction
    mode: str
    capacity: int
    rows: int
    cols: int
    store_size: int
    referenced_slots: int
    cells: tuple[CellRecord, ...]

    def to_csv(self) -> str:
        buf = io.StringIO()
        g = self.gamma
        buf.write(
            f"# knapelites-map n={self.n} space={self.space} axis_max={self.axis_max}"
            f" gamma={g.numerator}/{g.denominator} mode={self.mode}"
            f" capacity={self.capacity} rows={self.rows} cols={self.cols}"
            f" store={self.store_size} referenced={self.referenced_slots}\n"
        )
        buf.write("row_v,col_bucket,objective,feasible,slot\n")
        for c in self.cells:
            buf.write(f"{c.row},{c.col},{c.objective},{1 if c.feasible else 0},{c.slot}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "MapSnapshot":
        lines = text.splitlines()
        if not lines or not lines[0].startswith("# knapelites-map "):
            raise ValueError("not a knapelites map CSV (missing metadata header)")
        meta = {}
        for tok in lines[0].removeprefix("# knapelites-map ").split():
            k, v = tok.split("=", 1)
            meta[k] = v
        if lines[1] != "row_v,col_bucket,objective,feasible,slot":
            raise ValueError(f"unexpected column header: {lines[1]!r}")
        gn, gd = meta["gamma"].split("/")
        cells = []
        for ln in lines[2:]:
            if not ln:
                continue
            r, c, o, f, s = ln.split(",")
            cells.append(CellRecord(int(r), int(c), int(o), f == "1", int(s)))
        return cls(
            n=int(meta["n"]),
            space=meta["space"],
            axis_max=int(meta["axis_max"]),
            gamma=Fraction(int(gn), int(gd)),
            mode=meta["mode"],
            capacity=int(meta["capacity"]),
            rows=int(meta["rows"]),
            cols=int(meta["cols"]),
            store_size=int(meta["store"]),
            referenced_slots=int(meta["referenced"]),
            cells=tuple(cells),
        )


class ArchiveGrid:
    """MAP-Elites archive for one behavioural space (weight- or profit-based).

    The store is kept as parallel lists indexed by 1-based slot id; cells hold
    slot ids (0 = empty). Cell storage is a dense matrix up to
    ``dense_cell_limit`` cells and a dict keyed by (row, col) beyond that.
    """

    def __init__(
        self,
        instance: Instance,
        space: str,
        gamma: Fraction | int,
        mode: str = MODE_STRICT,
        dense_cell_limit: int = DENSE_CELL_LIMIT,
    ):
        if space not in (WEIGHT_SPACE, PROFIT_SPACE):
            raise ValueError(f"unknown space {space!r}")
        if mode not in (MODE_STRICT, MODE_LITERAL):
            raise ValueError(f"unknown mode {mode!r}")
        self.instance = instance
        self.space = space
        self.mode = mode
        axis_max = instance.capacity if space == WEIGHT_SPACE else instance.total_profit
        self.bucket_spec = BucketSpec(Fraction(gamma), axis_max)
        self.rows = instance.n + 1
        self.cols = self.bucket_spec.bucket_count
        # store slot 0 is an unused sentinel so slot ids match the 1-based
        # population indexing of the insertion rules
        self._masks: list[int] = [0]
        self._profits: list[int] = [0]
        self._weights: list[int] = [0]
        self._last: list[int] = [0]
        self._dense = self.rows * self.cols <= dense_cell_limit
        if self._dense:
            self._cells = np.zeros((self.rows + 1, self.cols + 1), dtype=np.int64)
        else:
            self._cells = {}
        self._store_len = 0
        # optional hook called as observer(slot, old_mask, new_mask) whenever
        # slot contents change (old_mask is None for appends); used by the
        # prefix-preservation monitor
        self.observer = None

    @property
    def objective(self) -> str:
        return "maximize-profit" if self.space == WEIGHT_SPACE else "minimize-weight"

    def _get_cell(self, row: int, col: int) -> int:
        if self._dense:
            return int(self._cells[row, col])
        return self._cells.get((row, col), 0)

    def _set_cell(self, row: int, col: int, slot: int) -> None:
        if self._dense:
            self._cells[row, col] = slot
        else:
            self._cells[(row, col)] = slot

    def _append(self, mask: int, profit: int, weight: int, last: int) -> int:
        self._masks.append(mask)
        self._profits.append(profit)
        self._weights.append(weight)
        self._last.append(last)
        self._store_len += 1
        if self.observer is not None:
            self.observer(self._store_len, None, mask)
        return self._store_len

    def _insert(self, x: Solution, e: Evaluation, col: int, better) -> InsertOutcome:
        row = e.last_index + 1
        base = self._get_cell(row, col)
        accepted = False
        appended = False
        replaced = 0
        touched = 0
        if base == 0:
            base = self._append(x.mask, e.profit, e.weight, e.last_index)
            self._set_cell(row, col, base)
            accepted = appended = True
            touched += 1
        elif better(e, base):
            accepted = True
            if self.mode == MODE_LITERAL or self._last[base] == e.last_index:
                if self.observer is not None:
                    self.observer(base, self._masks[base], x.mask)
                self._masks[base] = x.mask
                self._profits[base] = e.profit
                self._weights[base] = e.weight
                self._last[base] = e.last_index
                replaced = 1
            else:
                base = self._append(x.mask, e.profit, e.weight, e.last_index)
                self._set_cell(row, col, base)
                appended = True
            touched += 1
        # DP-style filtering: the offspring's descriptor is acceptable for
        # every row above its own, so those cells compete against it and, on
        # a win, reference whatever slot now sits in the base cell.
        for j in range(row + 1, self.rows + 1):
            cur = self._get_cell(j, col)
            if cur == base:
                continue
            if cur == 0 or better(e, cur):
                self._set_cell(j, col, base)
                touched += 1
        return InsertOutcome(accepted, appended, replaced, touched)

    def insert(self, x: Solution, e: Evaluation) -> InsertOutcome:
        if self.space == WEIGHT_SPACE:
            return self.insert_weight_based(x, e)
        return self.insert_profit_based(x, e)

    def insert_weight_based(self, x: Solution, e: Evaluation, validate: bool = True) -> InsertOutcome:
        """Profit-maximizing insert keyed on the weight bucket.

        Infeasible solutions are rejected outright (the weight axis only
        covers [0, C]).
        """
        if self.space != WEIGHT_SPACE:
            raise ValueError("grid objective is not maximize-profit")
        if validate:
            self._check_pair(x, e)
        if e.weight > self.instance.capacity:
            return InsertOutcome(False, False, 0, 0)
        col = bucket_index(e.weight, self.bucket_spec)
        return self._insert(x, e, col, lambda ev, slot: ev.profit > self._profits[slot])

    def insert_profit_based(self, x: Solution, e: Evaluation, validate: bool = True) -> InsertOutcome:
        """Weight-minimizing insert keyed on the profit bucket.

        No feasibility gate: the profit space admits infeasible solutions.
        """
        if self.space != PROFIT_SPACE:
            raise ValueError("grid objective is not minimize-weight")
        if validate:
            self._check_pair(x, e)
        col = bucket_index(e.profit, self.bucket_spec)
        return self._insert(x, e, col, lambda ev, slot: ev.weight < self._weights[slot])

    def _check_pair(self, x: Solution, e: Evaluation) -> None:
        if x.n != self.instance.n:
            raise ValueError(f"solution length {x.n} != instance n {self.instance.n}")
        ref = evaluate(x, self.instance)
        if ref != e:
            raise ValueError(f"evaluation {e} does not match solution (expected {ref})")

    def select_parent(self, rng: np.random.Generator) -> Solution:
        """Uniform draw over all store slots (referenced or not)."""
        if self._store_len == 0:
            raise ValueError("cannot select a parent from an empty store")
        slot = 1 + int(rng.integers(0, self._store_len))
        return Solution(self.instance.n, self._masks[slot])

    def population_size(self) -> int:
        return self._store_len

    def slot_solution(self, slot: int) -> Solution:
        if not (1 <= slot <= self._store_len):
            raise ValueError(f"slot {slot} out of range")
        return Solution(self.instance.n, self._masks[slot])

    def occupied_cells(self) -> list[tuple[int, int, int]]:
        """Sorted (row, col, slot) triples of non-empty cells."""
        out = []
        if self._dense:
            rows, cols = np.nonzero(self._cells)
            for r, c in zip(rows.tolist(), cols.tolist()):
                out.append((r, c, int(self._cells[r, c])))
        else:
            for (r, c), slot in self._cells.items():
                if slot:
                    out.append((r, c, slot))
        out.sort()
        return out

    def snapshot(self) -> MapSnapshot:
        cells = []
        referenced = set()
        cap = self.instance.capacity
        for r, c, slot in self.occupied_cells():
            referenced.add(slot)
            objective = self._profits[slot] if self.space == WEIGHT_SPACE else self._weights[slot]
            cells.append(
                CellRecord(
                    row=r,
                    col=c,
                    objective=objective,
                    feasible=self._weights[slot] <= cap,
                    slot=slot,
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
            store_size=self._store_len,
            referenced_slots=len(referenced),
            cells=tuple(cells),
        )


def insert_weight_based(grid: ArchiveGrid, x: Solution, e: Evaluation) -> InsertOutcome:
    return grid.insert_weight_based(x, e)


def insert_profit_based(grid: ArchiveGrid, x: Solution, e: Evaluation) -> InsertOutcome:
    return grid.insert_profit_based(x, e)


def select_parent(grid: ArchiveGrid, rng: np.random.Generator) -> Solution:
    return grid.select_parent(rng)


def population_size(grid: ArchiveGrid) -> int:
    return grid.population_size()


def snapshot(grid: ArchiveGrid) -> MapSnapshot:
    return grid.snapshot()
