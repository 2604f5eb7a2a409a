"""Benchmark instance generation and the plain-text instance file format.

Three generator classes mirror the common knapsack benchmark families:

* ``uncorrelated``: weights and profits drawn independently from {1..R}.
* ``bounded-strongly-correlated``: profit = weight + R/10 plus small bounded
  noise, which produces the flat fitness plateaus that trap hill climbers.
* ``similar-weights``: weights confined to {1000..1010} with uncorrelated
  profits, so only a handful of items ever fit together.

File format: line 1 is "n C", followed by n lines "w_i p_i" (ASCII decimal).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .core import Instance

UNCORRELATED = "uncorrelated"
BOUNDED_STRONG = "bounded-strongly-correlated"
SIMILAR_WEIGHTS = "similar-weights"

GENERATOR_CLASSES = (UNCORRELATED, BOUNDED_STRONG, SIMILAR_WEIGHTS)

_SIMILAR_W_LO = 1000
_SIMILAR_W_HI = 1010

_MAX_RESAMPLES = 10_000


@dataclass(frozen=True)
class GeneratorSpec:
    """Parameters of one generated instance.

    ``capacity`` is either an explicit integer C or, when None, derived as
    ``floor(capacity_fraction * sum(weights))``.
    """

    klass: str
    n: int
    coefficient_range: int
    capacity: Optional[int] = None
    capacity_fraction: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if self.klass not in GENERATOR_CLASSES:
            raise ValueError(f"unknown instance class {self.klass!r}")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.coefficient_range < 1:
            raise ValueError("coefficient range R must be >= 1")
        if (self.capacity is None) == (self.capacity_fraction is None):
            raise ValueError("exactly one of capacity / capacity_fraction must be set")
        if self.capacity_fraction is not None and not (0 < self.capacity_fraction < 1):
            raise ValueError("capacity_fraction must be in (0,1)")
        if self.capacity is not None and self.capacity < 1:
            raise ValueError("capacity must be positive")


def _draw_item(klass: str, r: int, rng: np.random.Generator) -> tuple[int, int]:
    if klass == UNCORRELATED:
        return int(rng.integers(1, r + 1)), int(rng.integers(1, r + 1))
    if klass == BOUNDED_STRONG:
        w = int(rng.integers(1, r + 1))
        spread = r // 500
        noise = int(rng.integers(-spread, spread + 1)) if spread > 0 else 0
        return w, max(1, w + r // 10 + noise)
    w = int(rng.integers(_SIMILAR_W_LO, _SIMILAR_W_HI + 1))
    return w, int(rng.integers(1, r + 1))


def generate(spec: GeneratorSpec, rng: Optional[np.random.Generator] = None) -> Instance:
    """Draw an instance for the spec; same (spec, seed) gives identical items.

    Items heavier than the capacity are redrawn; impossible combinations
    (e.g. similar-weights with C < 1000) are rejected with an error.
    """
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    if spec.klass == SIMILAR_WEIGHTS:
        min_possible_w = _SIMILAR_W_LO
    else:
        min_possible_w = 1
    if spec.capacity is not None and spec.capacity < min_possible_w:
        raise ValueError(
            f"capacity {spec.capacity} below the minimum possible weight "
            f"{min_possible_w} of class {spec.klass}"
        )
    items = [_draw_item(spec.klass, spec.coefficient_range, rng) for _ in range(spec.n)]
    if spec.capacity is not None:
        cap = spec.capacity
    else:
        cap = int(spec.capacity_fraction * sum(w for w, _ in items))
        cap = max(cap, max(w for w, _ in items))
    for i in range(spec.n):
        tries = 0
        while items[i][0] > cap:
            items[i] = _draw_item(spec.klass, spec.coefficient_range, rng)
            tries += 1
            if tries > _MAX_RESAMPLES:
                raise ValueError(f"cannot draw items with weight <= {cap} for {spec}")
    return Instance.from_items(items, cap)


def parse_instance(text: str) -> Instance:
    """Parse the "n C" / "w p" format; errors carry the offending line number."""
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise ValueError("line 1: missing instance header 'n C'")
    head = lines[0].split()
    if len(head) != 2:
        raise ValueError(f"line 1: expected 'n C', got {lines[0]!r}")
    try:
        n, cap = int(head[0]), int(head[1])
    except ValueError:
        raise ValueError(f"line 1: expected integers, got {lines[0]!r}") from None
    items = []
    for ln in range(1, n + 1):
        if ln >= len(lines) or not lines[ln].strip():
            raise ValueError(f"line {ln + 1}: expected item {ln} of {n}, found end of data")
        parts = lines[ln].split()
        if len(parts) != 2:
            raise ValueError(f"line {ln + 1}: expected 'w p', got {lines[ln]!r}")
        try:
            items.append((int(parts[0]), int(parts[1])))
        except ValueError:
            raise ValueError(f"line {ln + 1}: expected integers, got {lines[ln]!r}") from None
    for ln in range(n + 1, len(lines)):
        if lines[ln].strip():
            raise ValueError(f"line {ln + 1}: trailing data after {n} items")
    try:
        return Instance.from_items(items, cap)
    except ValueError as err:
        raise ValueError(f"invalid instance: {err}") from None


def write_instance(instance: Instance) -> str:
    out = [f"{instance.n} {instance.capacity}"]
    for w, p in zip(instance.weights, instance.profits):
        out.append(f"{w} {p}")
    return "\n".join(out) + "\n"


def instance_sha256(instance: Instance) -> str:
    return hashlib.sha256(write_instance(instance).encode()).hexdigest()


def manifest_entry(
    path: str,
    instance: Instance,
    klass: Optional[str] = None,
    opt: Optional[int] = None,
) -> dict:
    """One manifest record; generator constants are approximations of the
    published benchmark set, so the class field is advisory."""
    return {
        "file": path,
        "class": klass,
        "n": instance.n,
        "capacity": instance.capacity,
        "total_profit": instance.total_profit,
        "opt": opt,
        "sha256": instance_sha256(instance),
    }


def write_manifest(entries: list[dict]) -> str:
    return json.dumps({"instances": entries}, indent=2, sort_keys=True) + "\n"


InstanceSource = Union[str, GeneratorSpec]
