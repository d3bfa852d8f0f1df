"""The permutation group on white flags x Z_{3p} and its generators.

Points are ``(w, l)`` with ``w`` a white-flag index and ``l`` a level in
``Z_{3p}``; the dense index is ``w * 3p + l``.

Each facet ``F`` at level ``l`` has a root flag.  Which root is used
depends on ``F`` and on the class of ``l`` (exactly 1, 1 mod 3 otherwise,
or 0/2 mod 3).  The root fixes a facet automorphism ``rho^l`` (the image
of the root under ``r_0``, or under ``r_1`` for the hole facets around
``X_H`` at level 1) and the last generator is ``rho^l r_0`` on flags
together with a level shift near the facets ``F_0``, ``F_1`` and ``F_3``.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from enum import IntEnum
from typing import NamedTuple, Sequence

import numpy as np
import sympy

from . import cubegroup, lattice
from .cubegroup import CubeElem
from .lattice import LatticeSpec, TransClass
from .permengine import PointMap, compose, invert_table
from .toroid import (
    Flag,
    ToroidContext,
    base_flag,
    h_apply,
    hbar_apply,
    is_white,
    monodromy_apply,
    right_multiply_arrays,
    vertex_of,
)

DISTINGUISHED = (0, 1, -1, 2, -2, 3, -3)
CASE2_POWERS = (-3, -2, -1, 1, 2, 3)


class ExtensionError(ValueError):
    pass


class LevelClass(IntEnum):
    EXACTLY_ONE = 0
    ONE_MOD3 = 1
    OTHER = 2


def level_class(level: int) -> LevelClass:
    if level == 1:
        return LevelClass.EXACTLY_ONE
    return LevelClass.ONE_MOD3 if level % 3 == 1 else LevelClass.OTHER


@dataclass(frozen=True)
class ExtensionSpec:
    toroid: LatticeSpec
    p: int

    def __post_init__(self) -> None:
        if not isinstance(self.p, int) or self.p < 1:
            raise ExtensionError(f"p must be a positive integer, got {self.p!r}")

    @property
    def levels(self) -> int:
        return 3 * self.p

    def chirality_conforming(self, white_count: int) -> bool:
        return bool(sympy.isprime(self.p)) and self.p > 3 * white_count

    def to_json(self) -> dict:
        return {"toroid": self.toroid.to_json(), "p": self.p}


class ExtPoint(NamedTuple):
    flag: int
    level: int


class RootEntry(NamedTuple):
    root: Flag
    rho_index: int
    case: int


@dataclass
class RootTable:
    ctx: ToroidContext
    distinguished: dict[int, TransClass]
    phis: dict[int, Flag]
    x_h: TransClass
    holes: tuple[TransClass, ...]
    entries: dict[tuple[TransClass, LevelClass], RootEntry]
    case2_candidates: dict[TransClass, list[tuple[int, Flag, Flag]]] = field(repr=False)
    coincidences: list[dict] = field(default_factory=list, repr=False)

    def root(self, facet: TransClass, cls: LevelClass) -> RootEntry:
        hit = self.entries.get((tuple(facet), LevelClass(cls)))
        if hit is not None:
            return hit
        n = self.ctx.n
        return RootEntry(Flag(tuple(range(1, n + 1)), (1,) * n, tuple(facet)), 0, 4)

    def multiplier(self, facet: TransClass, cls: LevelClass) -> CubeElem:
        entry = self.root(facet, cls)
        return cubegroup.facet_automorphism(entry.root, entry.rho_index)

    def with_override(self, facet: TransClass, cls: LevelClass, root: Flag, rho_index: int) -> "RootTable":
        """A copy with one root replaced; used to build deliberately broken tables."""
        entries = dict(self.entries)
        entries[(tuple(facet), LevelClass(cls))] = RootEntry(root, rho_index, 0)
        return RootTable(
            self.ctx, self.distinguished, self.phis, self.x_h, self.holes,
            entries, self.case2_candidates, list(self.coincidences),
        )

    def to_json(self) -> dict:
        rows = []
        for (facet, cls), entry in sorted(self.entries.items(), key=lambda kv: (kv[0][1], kv[0][0])):
            rows.append(
                {
                    "facet": list(facet),
                    "class": cls.name,
                    "root": {"perm": list(entry.root.perm), "signs": list(entry.root.signs), "trans": list(entry.root.trans)},
                    "rho_index": entry.rho_index,
                    "case": entry.case,
                }
            )
        return {
            "default": "translate of the base flag containing the facet, rho index 0",
            "x_h": list(self.x_h),
            "holes": [list(f) for f in self.holes],
            "entries": rows,
        }


def _hole_root(ctx: ToroidContext, facet: TransClass, x_h: TransClass) -> Flag:
    best = None
    for perm in itertools.permutations(range(1, ctx.n + 1)):
        for signs in itertools.product((1, -1), repeat=ctx.n):
            f = Flag(perm, signs, facet)
            if is_white(ctx, f) and vertex_of(ctx, f) == x_h:
                idx = ctx.index(f)
                if best is None or idx < best[0]:
                    best = (idx, f)
    if best is None:
        raise ExtensionError(f"no white flag of facet {facet} contains X_H")
    return best[1]


def build_roots(ctx: ToroidContext, spec: ExtensionSpec) -> RootTable:
    if spec.toroid != ctx.spec:
        raise ExtensionError("extension spec and toroid context disagree")
    n = ctx.n
    base = base_flag(ctx)
    phis = {i: h_apply(ctx, base, i) for i in DISTINGUISHED}
    dist = {i: phis[i].trans for i in DISTINGUISHED}
    if len(set(dist.values())) != len(dist):
        raise ExtensionError("the facets F_0, F_+-1, F_+-2, F_+-3 are not pairwise distinct")

    raw_h = [0] * n
    raw_h[1] = -3
    x_h = lattice.reduce(ctx.spec, raw_h)
    holes: list[TransClass] = []
    for eps in itertools.product((0, -1), repeat=n):
        facet = lattice.reduce(ctx.spec, [raw_h[i] + eps[i] for i in range(n)])
        if facet not in holes:
            holes.append(facet)
    if len(holes) != 2**n:
        raise ExtensionError("the facets around X_H are not pairwise distinct")

    entries: dict[tuple[TransClass, LevelClass], RootEntry] = {}
    for i in DISTINGUISHED:
        for cls in LevelClass:
            entries[(dist[i], cls)] = RootEntry(phis[i], 0, 1)
    case1 = {facet: i for i, facet in dist.items()}

    for facet in holes:
        if facet in case1:
            raise ExtensionError(f"hole facet {facet} is also a distinguished facet")
        entries[(facet, LevelClass.EXACTLY_ONE)] = RootEntry(_hole_root(ctx, facet, x_h), 1, 3)

    base_facet_white = sorted(
        (
            Flag(perm, signs, ctx.zero)
            for perm in itertools.permutations(range(1, n + 1))
            for signs in itertools.product((1, -1), repeat=n)
        ),
        key=ctx.index,
    )
    base_facet_white = [f for f in base_facet_white if is_white(ctx, f)]
    candidates: dict[TransClass, list[tuple[int, Flag, Flag]]] = {}
    for j in CASE2_POWERS:
        for phi in base_facet_white:
            root = hbar_apply(ctx, phi, j)
            candidates.setdefault(root.trans, []).append((j, phi, root))

    coincidences = []
    for facet, cands in candidates.items():
        if facet in holes:
            raise ExtensionError(f"case-2 facet {facet} lies around X_H")
        roots = [c[2] for c in cands]
        if facet in case1:
            roots = [phis[case1[facet]]] + roots
        else:
            entries[(facet, LevelClass.OTHER)] = RootEntry(cands[0][2], 0, 2)
        if len(roots) > 1:
            mults = {cubegroup.facet_automorphism(r, 0) for r in roots}
            coincidences.append(
                {
                    "facet": list(facet),
                    "distinguished": case1.get(facet),
                    "candidates": len(roots),
                    "coincide": len(mults) == 1,
                }
            )
    return RootTable(ctx, dist, phis, x_h, tuple(holes), entries, candidates, coincidences)


def rho_apply(ctx: ToroidContext, table: RootTable, level: int, f: Flag) -> Flag:
    return cubegroup.apply_facet_automorphism(f, table.multiplier(f.trans, level_class(level)))


def level_shift(table: RootTable, facet: TransClass, level: int) -> int:
    d = table.distinguished
    m = level % 3
    if (facet, m) in ((d[1], 0), (d[3], 1), (d[0], 2)):
        return 1
    if (facet, m) in ((d[0], 0), (d[1], 1), (d[3], 2)):
        return -1
    return 0


# ------------------------------------------------------------------- words
#
# A word is a sequence of (generator, exponent) letters written as a
# product: the rightmost letter acts first.  Generators are 1..n+1 for
# xi_1..xi_{n+1}.

Word = tuple[tuple[int, int], ...]


def invert_word(word: Sequence[tuple[int, int]]) -> Word:
    return tuple((g, -e) for g, e in reversed(word))


def s_word_to_xi(s_word: Sequence[int]) -> Word:
    out: list[tuple[int, int]] = []
    for i in s_word:
        out.extend([(1, 1)] if i == 1 else [(i - 1, -1), (i, 1)])
    return tuple(out)


def word_for_monodromy_element(ctx: ToroidContext, target: Flag) -> list[int]:
    """Indices ``[i_1, ..., i_k]`` with ``s_{i_1} ... s_{i_k}`` mapping the base flag to ``target``."""
    if not is_white(ctx, target):
        raise ExtensionError(f"target flag is not white: {target}")
    goal = ctx.white_pos(target)
    start = ctx.white_pos(base_flag(ctx))
    tables = {i: ctx.s_white_table(i) for i in range(1, ctx.n + 1)}
    parent = np.full(ctx.W, -1, dtype=np.int64)
    via = np.zeros(ctx.W, dtype=np.int64)
    parent[start] = start
    queue = deque([start])
    while queue and parent[goal] < 0:
        x = queue.popleft()
        for i, tab in tables.items():
            y = int(tab[x])
            if parent[y] < 0:
                parent[y], via[y] = x, i
                queue.append(y)
    if parent[goal] < 0:
        raise ExtensionError("target not reachable from the base flag")
    word = []
    x = goal
    while x != start:
        word.append(int(via[x]))
        x = int(parent[x])
    return word


# --------------------------------------------------------------- extension


class Extension:
    def __init__(self, ctx: ToroidContext, spec: ExtensionSpec, roots: RootTable | None = None) -> None:
        self.ctx = ctx
        self.spec = spec
        self.n = ctx.n
        self.W = ctx.W
        self.L = spec.levels
        self.size = self.W * self.L
        self.roots = roots if roots is not None else build_roots(ctx, spec)
        self.level_classes = np.array([level_class(l) for l in range(self.L)], dtype=np.int64)
        self._build_last_tables()
        self._maps: dict = {}

    # -- point encoding -------------------------------------------------

    def encode(self, pt: ExtPoint) -> int:
        if not (0 <= pt.flag < self.W and 0 <= pt.level < self.L):
            raise ExtensionError(f"point out of range: {pt}")
        return pt.flag * self.L + pt.level

    def decode(self, idx: int) -> ExtPoint:
        return ExtPoint(int(idx) // self.L, int(idx) % self.L)

    def point(self, f: Flag, level: int) -> int:
        return self.encode(ExtPoint(self.ctx.white_pos(f), level % self.L))

    # -- last generator tables ------------------------------------------

    def _build_last_tables(self) -> None:
        ctx, n, Q = self.ctx, self.n, self.ctx.Q
        multipliers = np.zeros((len(LevelClass), Q, 2, n), dtype=np.int64)
        multipliers[:, :, 0, :] = np.arange(n)
        multipliers[:, :, 1, :] = 1
        multipliers[:, :, 1, 0] = -1
        for (facet, cls), entry in self.roots.entries.items():
            m = cubegroup.facet_automorphism(entry.root, entry.rho_index)
            r = lattice.rank(ctx.spec, facet)
            multipliers[cls, r, 0] = np.array(m.perm) - 1
            multipliers[cls, r, 1] = m.signs

        black = ctx.mono_tables[0][ctx.white_full]
        facet_rank = black % Q
        P, X, T = ctx.decode(black)
        self.last_flag = np.empty((len(LevelClass), self.W), dtype=np.int64)
        for cls in LevelClass:
            mult = multipliers[cls][facet_rank]
            nP, nX = right_multiply_arrays(P, X, mult[:, 0], mult[:, 1])
            w = ctx.white_index[ctx.encode(nP, nX, T)]
            if (w < 0).any():
                bad = int(np.flatnonzero(w < 0)[0])
                raise ExtensionError(f"rho r_0 does not return white flag {ctx.white_flag(bad)} to a white flag ({cls.name})")
            self.last_flag[cls] = w

        self.white_facet_rank = ctx.white_full % Q
        self.level_delta = np.zeros((3, self.W), dtype=np.int64)
        d = self.roots.distinguished
        for facet, m, shift in ((d[1], 0, 1), (d[3], 1, 1), (d[0], 2, 1), (d[0], 0, -1), (d[1], 1, -1), (d[3], 2, -1)):
            self.level_delta[m, self.white_facet_rank == lattice.rank(ctx.spec, facet)] = shift

    # -- generators as point maps ---------------------------------------

    def flag_map(self, table: np.ndarray, name: str) -> PointMap:
        """Lift a permutation of the white flags to the domain (levels fixed)."""
        L = self.L
        inv = invert_table(table)
        return PointMap(
            self.size,
            lambda idx: table[idx // L] * L + idx % L,
            lambda idx: inv[idx // L] * L + idx % L,
            name,
        )

    def xi_table(self, i: int) -> np.ndarray:
        if not 1 <= i <= self.n:
            raise ExtensionError(f"xi_i is a flag map only for 1 <= i <= n, got {i}")
        key = ("xi_table", i)
        if key not in self._maps:
            r = self.ctx.mono_tables
            self._maps[key] = self.ctx.white_index[r[0][r[i][self.ctx.white_full]]]
        return self._maps[key]

    def _last_forward(self, idx: np.ndarray) -> np.ndarray:
        L = self.L
        w, l = idx // L, idx % L
        nw = self.last_flag[self.level_classes[l], w]
        nl = (l + self.level_delta[l % 3, w]) % L
        return nw * L + nl

    def xi(self, i: int) -> PointMap:
        key = ("xi", i)
        if key not in self._maps:
            if i == self.n + 1:
                self._maps[key] = PointMap(self.size, self._last_forward, None, f"xi{i}")
            else:
                self._maps[key] = self.flag_map(self.xi_table(i), f"xi{i}")
        return self._maps[key]

    def varsigma_table(self, i: int) -> np.ndarray:
        """``varsigma_i`` on white flags for ``i <= n`` (built as xi_{i-1}^-1 xi_i)."""
        if i == 1:
            return self.xi_table(1)
        return invert_table(self.xi_table(i - 1))[self.xi_table(i)]

    def varsigma(self, i: int) -> PointMap:
        key = ("varsigma", i)
        if key not in self._maps:
            if not 1 <= i <= self.n + 1:
                raise ExtensionError(f"varsigma index must be in 1..{self.n + 1}, got {i}")
            if i <= self.n:
                self._maps[key] = self.flag_map(self.varsigma_table(i), f"varsigma{i}")
            else:
                self._maps[key] = compose(self.xi(self.n).inv(), self.xi(i), name=f"varsigma{i}")
        return self._maps[key]

    def h(self, j: int, bar: bool = False) -> PointMap:
        key = ("h", j, bar)
        if key not in self._maps:
            name = f"{'hbar' if bar else 'h'}^{j}"
            self._maps[key] = self.flag_map(self.ctx.h_white_table(j, bar), name)
        return self._maps[key]

    def mu(self, bar: bool = False, as_printed: bool = False) -> PointMap:
        """``xi h^-3 xi h^2 xi h`` (with ``hbar`` when ``bar``).

        ``as_printed`` drops the leading ``xi_{n+1}``; it only exists so the
        two readings can be reported side by side.
        """
        key = ("mu", bar, as_printed)
        if key not in self._maps:
            x = self.xi(self.n + 1)
            parts = [self.h(-3, bar), x, self.h(2, bar), x, self.h(1, bar)]
            if not as_printed:
                parts.insert(0, x)
            name = ("mubar" if bar else "mu") + ("_printed" if as_printed else "")
            self._maps[key] = compose(*parts, name=name)
        return self._maps[key]

    # -- words ----------------------------------------------------------

    def h_word(self) -> Word:
        phi1 = self.roots.phis[1]
        return s_word_to_xi(word_for_monodromy_element(self.ctx, phi1))

    def mu_word(self) -> Word:
        hw = self.h_word()
        last = ((self.n + 1, 1),)
        return last + invert_word(hw) * 3 + last + hw * 2 + last + hw

    def word_map(self, word: Sequence[tuple[int, int]], alpha: bool = False, name: str = "word") -> PointMap:
        """Evaluate a xi-word; ``alpha`` substitutes ``xi_1 -> xi_1^-1``.

        Runs of flag-only letters are folded into one white-flag table.
        """
        parts: list[PointMap] = []
        run: np.ndarray | None = None
        ident = np.arange(self.W, dtype=np.int64)
        inverse_tables: dict[int, np.ndarray] = {}

        def letter_table(g: int, e: int) -> np.ndarray:
            if alpha and g == 1:
                e = -e
            if e == 1:
                return self.xi_table(g)
            if g not in inverse_tables:
                inverse_tables[g] = invert_table(self.xi_table(g))
            return inverse_tables[g]

        for g, e in reversed(tuple(word)):
            if e not in (1, -1) or not 1 <= g <= self.n + 1:
                raise ExtensionError(f"bad letter {(g, e)}")
            if g == self.n + 1:
                if run is not None:
                    parts.append(self.flag_map(run, "run"))
                    run = None
                parts.append(self.xi(g) if e == 1 else self.xi(g).inv())
            else:
                tab = letter_table(g, e)
                run = tab[ident if run is None else run]
        if run is not None:
            parts.append(self.flag_map(run, "run"))
        if not parts:
            return self.flag_map(ident, name)
        return compose(*reversed(parts), name=name)

    def alpha_image(self, word: Sequence[tuple[int, int]]) -> PointMap:
        return self.word_map(word, alpha=True, name="alpha")

    # -- misc -----------------------------------------------------------

    def white_facet(self, w: int) -> TransClass:
        return self.ctx.white_flag(w).trans


# ------------------------------------------------------- scalar evaluators


def xi_apply(ext: Extension, i: int, pt: ExtPoint) -> ExtPoint:
    ctx = ext.ctx
    if not 1 <= i <= ext.n:
        raise ExtensionError(f"xi_apply takes 1 <= i <= n, got {i}")
    f = ctx.white_flag(pt.flag)
    g = monodromy_apply(ctx, 0, monodromy_apply(ctx, i, f))
    return ExtPoint(ctx.white_pos(g), pt.level)


def xi_last_apply(ext: Extension, table: RootTable, pt: ExtPoint) -> ExtPoint:
    ctx = ext.ctx
    f = ctx.white_flag(pt.flag)
    g = rho_apply(ctx, table, pt.level, monodromy_apply(ctx, 0, f))
    shift = level_shift(table, f.trans, pt.level)
    return ExtPoint(ctx.white_pos(g), (pt.level + shift) % ext.L)


def varsigma_apply(ext: Extension, i: int, pt: ExtPoint) -> ExtPoint:
    return ext.decode(int(ext.varsigma(i)(np.array([ext.encode(pt)]))[0]))


def mu_apply(ext: Extension, pt: ExtPoint) -> ExtPoint:
    return ext.decode(int(ext.mu()(np.array([ext.encode(pt)]))[0]))


def mubar_apply(ext: Extension, pt: ExtPoint) -> ExtPoint:
    return ext.decode(int(ext.mu(bar=True)(np.array([ext.encode(pt)]))[0]))
