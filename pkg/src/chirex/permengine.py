"""Orbits, cycle structure and small group orders for implicit permutations.

Permutations of the big domains are given by vectorised evaluators
(:class:`PointMap`).  Full tables are built only when a sweep needs them.
"""

from __future__ import annotations

import math
import os
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import reduce as _fold
from typing import Callable, Iterable, Sequence

import numpy as np

Evaluator = Callable[[np.ndarray], np.ndarray]

_CHUNK = 1 << 20


class PermEngineError(ValueError):
    pass


def default_threads() -> int:
    raw = os.environ.get("CHIREX_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def chunk_ranges(size: int, chunk: int = _CHUNK) -> list[tuple[int, int]]:
    return [(lo, min(lo + chunk, size)) for lo in range(0, size, chunk)]


def parallel_map(fn: Callable[[int, int], object], size: int, threads: int = 1, chunk: int = _CHUNK) -> list:
    """Run ``fn(lo, hi)`` over fixed chunks of ``range(size)``.

    Results come back in chunk order whatever the thread count, so callers
    that merge them in order get partition-independent answers.
    """
    ranges = chunk_ranges(size, chunk)
    if threads <= 1 or len(ranges) <= 1:
        return [fn(lo, hi) for lo, hi in ranges]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda r: fn(*r), ranges))


def first_violation(pred: Callable[[np.ndarray], np.ndarray], size: int, threads: int = 1, chunk: int = _CHUNK) -> int | None:
    """Smallest index in ``range(size)`` where the vectorised ``pred`` is false."""

    def run(lo: int, hi: int) -> int | None:
        ok = pred(np.arange(lo, hi, dtype=np.int64))
        bad = np.flatnonzero(~ok)
        return lo + int(bad[0]) if bad.size else None

    hits = [h for h in parallel_map(run, size, threads, chunk) if h is not None]
    return min(hits) if hits else None


class PointMap:
    """A permutation of ``range(size)`` given by vectorised evaluators."""

    def __init__(self, size: int, forward: Evaluator, inverse: Evaluator | None = None, name: str = "") -> None:
        self.size = size
        self._forward = forward
        self._inverse = inverse
        self.name = name
        self._table: np.ndarray | None = None
        self._inv_table: np.ndarray | None = None

    def __repr__(self) -> str:
        return f"PointMap({self.name or '?'}, size={self.size})"

    def __call__(self, idx) -> np.ndarray:
        return self._forward(np.asarray(idx, dtype=np.int64))

    def inverse(self, idx) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.int64)
        if self._inverse is not None:
            return self._inverse(idx)
        return self.inverse_table()[idx]

    def table(self, threads: int = 1) -> np.ndarray:
        if self._table is None:
            parts = parallel_map(lambda lo, hi: self(np.arange(lo, hi, dtype=np.int64)), self.size, threads)
            self._table = np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)
        return self._table

    def inverse_table(self, threads: int = 1) -> np.ndarray:
        if self._inv_table is None:
            if self._inverse is not None:
                parts = parallel_map(lambda lo, hi: self._inverse(np.arange(lo, hi, dtype=np.int64)), self.size, threads)
                self._inv_table = np.concatenate(parts)
            else:
                self._inv_table = invert_table(self.table(threads))
        return self._inv_table

    def inv(self) -> "PointMap":
        return PointMap(self.size, self.inverse, self._forward, name=f"({self.name})^-1")

    @classmethod
    def from_table(cls, table: np.ndarray, name: str = "") -> "PointMap":
        table = np.asarray(table, dtype=np.int64)
        pm = cls(table.size, lambda idx: table[idx], None, name)
        pm._table = table
        return pm


def invert_table(table: np.ndarray) -> np.ndarray:
    table = np.asarray(table, dtype=np.int64)
    if not is_permutation(table):
        raise PermEngineError("table is not a bijection of its domain")
    inv = np.empty_like(table)
    inv[table] = np.arange(table.size, dtype=np.int64)
    return inv


def is_permutation(table: np.ndarray) -> bool:
    table = np.asarray(table)
    if table.size == 0:
        return True
    if table.min() < 0 or table.max() >= table.size:
        return False
    return bool((np.bincount(table, minlength=table.size) == 1).all())


def compose(*maps: PointMap, name: str = "") -> PointMap:
    """``compose(f, g, h)`` is ``f o g o h``: the rightmost map acts first."""
    if not maps:
        raise PermEngineError("compose needs at least one map")
    size = maps[0].size

    def fwd(idx):
        for m in reversed(maps):
            idx = m(idx)
        return idx

    def bwd(idx):
        for m in maps:
            idx = m.inverse(idx)
        return idx

    return PointMap(size, fwd, bwd, name or "*".join(m.name for m in maps))


# ------------------------------------------------------------------- orbits


@dataclass
class Orbit:
    points: np.ndarray | None
    overflow: bool = False

    @property
    def size(self) -> int:
        return -1 if self.points is None else int(self.points.size)


def orbit(gens: Sequence[PointMap], start: int, cap: int | None = None, size: int | None = None) -> Orbit:
    """Closure of ``start`` under ``gens`` and their inverses (sorted indices)."""
    if not gens:
        return Orbit(np.array([start], dtype=np.int64))
    size = size if size is not None else gens[0].size
    seen = np.zeros(size, dtype=bool)
    seen[start] = True
    frontier = np.array([start], dtype=np.int64)
    count = 1
    while frontier.size:
        images = [g(frontier) for g in gens] + [g.inverse(frontier) for g in gens]
        cand = np.unique(np.concatenate(images))
        new = cand[~seen[cand]]
        seen[new] = True
        count += new.size
        if cap is not None and count > cap:
            return Orbit(None, overflow=True)
        frontier = new
    return Orbit(np.flatnonzero(seen))


# -------------------------------------------------------- cycle decomposition


def cycle_labels(table: np.ndarray) -> np.ndarray:
    """Label every point by the smallest index on its cycle.

    Pointer doubling: after round ``r`` each label is the minimum over the
    next ``2^r`` points of the cycle, so it stabilises after about
    ``log2(longest cycle)`` rounds.
    """
    table = np.asarray(table, dtype=np.int64)
    labels = np.arange(table.size, dtype=np.int64)
    jump = table.copy()
    while True:
        new = np.minimum(labels, labels[jump])
        if np.array_equal(new, labels):
            return labels
        labels = new
        jump = jump[jump]


def cycle_lengths(table: np.ndarray) -> Counter:
    """Histogram ``{cycle length: number of cycles}``."""
    table = np.asarray(table, dtype=np.int64)
    if not is_permutation(table):
        raise PermEngineError("table is not a bijection of its domain")
    labels = cycle_labels(table)
    counts = np.bincount(labels, minlength=table.size)
    lengths = counts[labels == np.arange(table.size)]
    values, mult = np.unique(lengths, return_counts=True)
    return Counter({int(v): int(m) for v, m in zip(values, mult)})


def lcm_of(values: Iterable[int]) -> int:
    return _fold(math.lcm, (int(v) for v in values), 1)


@dataclass
class OrbitReport:
    sizes: Counter
    total: int
    lcm: int
    labels: np.ndarray | None = field(default=None, repr=False)

    @property
    def max_size(self) -> int:
        return max(self.sizes) if self.sizes else 0

    def to_json(self) -> dict:
        return {
            "sizes": {str(k): v for k, v in sorted(self.sizes.items())},
            "total": self.total,
            "lcm": str(self.lcm),
        }


def cycle_decomposition(g: PointMap, size: int | None = None, keep_labels: bool = False, threads: int = 1) -> OrbitReport:
    size = g.size if size is None else size
    table = g.table(threads)
    if table.size != size:
        raise PermEngineError("map size does not match the domain size")
    if not is_permutation(table):
        raise PermEngineError(f"{g.name or 'map'} is not a bijection of its domain")
    labels = cycle_labels(table)
    counts = np.bincount(labels, minlength=size)
    lengths = counts[labels == np.arange(size)]
    values, mult = np.unique(lengths, return_counts=True)
    sizes = Counter({int(v): int(m) for v, m in zip(values, mult)})
    total = sum(k * v for k, v in sizes.items())
    return OrbitReport(sizes, total, lcm_of(sizes), labels if keep_labels else None)


# ---------------------------------------------------------------- group order


def _check_closed(gens: Sequence[np.ndarray]) -> list[np.ndarray]:
    if not gens:
        return []
    degree = len(gens[0])
    out = []
    for g in gens:
        g = np.asarray(g, dtype=np.int64)
        if g.size != degree or not is_permutation(g):
            raise PermEngineError("generators are not permutations of a common closed domain")
        out.append(g)
    return out


def sympy_group(gens: Sequence[np.ndarray]):
    from sympy.combinatorics import Permutation, PermutationGroup

    gens = _check_closed(gens)
    return PermutationGroup([Permutation(g.tolist()) for g in gens])


def group_order_small(gens: Sequence[np.ndarray], limit: int = 100_000) -> int:
    """Exact order of the group generated by permutation tables (Schreier-Sims)."""
    gens = _check_closed(gens)
    if not gens:
        return 1
    if len(gens[0]) > limit:
        raise PermEngineError(f"domain of {len(gens[0])} points exceeds the limit {limit}")
    return int(sympy_group(gens).order())


# ------------------------------------------------------- automorphism extension


def extends_to_automorphism(tables: Sequence[np.ndarray], a: int, b: int) -> bool:
    """Whether ``w(a) -> w(b)`` over all words ``w`` is a well-defined injection.

    Synchronised BFS from the pair ``(a, b)``; a conflict between an existing
    and a newly forced image (or two sources forced onto one target) means no
    automorphism maps ``a`` to ``b``.
    """
    size = len(tables[0])
    image = np.full(size, -1, dtype=np.int64)
    preimage = np.full(size, -1, dtype=np.int64)
    image[a], preimage[b] = b, a
    fx = np.array([a], dtype=np.int64)
    fy = np.array([b], dtype=np.int64)
    while fx.size:
        xs = np.concatenate([t[fx] for t in tables])
        ys = np.concatenate([t[fy] for t in tables])
        known = image[xs]
        hit = known >= 0
        if (known[hit] != ys[hit]).any():
            return False
        xs, ys = xs[~hit], ys[~hit]
        if not xs.size:
            break
        order = np.lexsort((ys, xs))
        xs, ys = xs[order], ys[order]
        first = np.ones(xs.size, dtype=bool)
        first[1:] = xs[1:] != xs[:-1]
        # one source forced to two different targets
        if (ys[~first] != ys[np.flatnonzero(first)[np.cumsum(first) - 1][~first]]).any():
            return False
        xs, ys = xs[first], ys[first]
        if (preimage[ys] >= 0).any() or np.unique(ys).size != ys.size:
            return False
        image[xs], preimage[ys] = ys, xs
        fx, fy = xs, ys
    return True


def exists_flag_automorphism(ctx, A, B) -> bool:
    return extends_to_automorphism(ctx.mono_tables, ctx.index(A), ctx.index(B))
