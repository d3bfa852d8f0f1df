"""The cubic toroid {4,3^(n-2),4} as a labelled flag system.

A flag is a triple ``(perm, signs, trans)``.  ``perm`` is a permutation of
``1..n`` in one-line notation (``perm[j-1]`` is the image of ``j``),
``signs`` a vector of +-1 and ``trans`` a canonical translation class.

Composition convention: the left factor acts first on points, so
``(i i+1) sigma`` is ``sigma`` with one-line positions ``i`` and ``i+1``
swapped, and ``sigma tau`` has one-line ``tau[sigma[j]]``.

Two routes are provided for everything that matters: scalar functions on
:class:`Flag` values, and numpy array kernels used to build dense tables.
The tests compare the two.
"""

from __future__ import annotations

import itertools
import math
from functools import cached_property
from typing import Callable, NamedTuple, Sequence

import numpy as np

from . import lattice
from .lattice import LatticeSpec, TransClass
from .permengine import cycle_lengths, lcm_of


class ToroidError(ValueError):
    pass


class Flag(NamedTuple):
    perm: tuple[int, ...]
    signs: tuple[int, ...]
    trans: TransClass


# ---------------------------------------------------------------- scalar route


def _v(perm: Sequence[int], signs: Sequence[int]) -> list[int]:
    v = [0] * len(perm)
    for j, img in enumerate(perm):
        v[img - 1] = signs[img - 1] * (j + 1)
    return v


def base_flag(ctx: "ToroidContext") -> Flag:
    n = ctx.n
    return Flag(tuple(range(1, n + 1)), (1,) * n, ctx.zero)


def monodromy_apply(ctx: "ToroidContext", i: int, f: Flag) -> Flag:
    n = ctx.n
    if not 0 <= i <= n:
        raise ToroidError(f"monodromy index must be in 0..{n}, got {i}")
    perm, signs, trans = list(f.perm), list(f.signs), f.trans
    if i == 0:
        c = perm[0] - 1
        signs[c] = -signs[c]
    elif i < n:
        perm[i - 1], perm[i] = perm[i], perm[i - 1]
    else:
        c = perm[n - 1] - 1
        xc = signs[c]
        signs[c] = -xc
        t = list(trans)
        t[c] -= xc
        trans = lattice.reduce(ctx.spec, t)
    return Flag(tuple(perm), tuple(signs), trans)


def aut_apply(
    ctx: "ToroidContext",
    f: Flag,
    tau: Sequence[int],
    y: Sequence[int],
    u: Sequence[int],
) -> Flag:
    """Right action of the automorphism ``(tau, y, u)``."""
    n = ctx.n
    if not (len(tau) == len(y) == len(u) == n):
        raise ToroidError("automorphism components must all have length n")
    perm = tuple(tau[p - 1] for p in f.perm)
    moved_x = [0] * n
    moved_t = [0] * n
    for j in range(n):
        moved_x[tau[j] - 1] = f.signs[j]
        moved_t[tau[j] - 1] = f.trans[j]
    signs = tuple(y[j] * moved_x[j] for j in range(n))
    trans = lattice.reduce(ctx.spec, [y[j] * moved_t[j] + u[j] for j in range(n)])
    return Flag(perm, signs, trans)


def perm_sign(perm: Sequence[int]) -> int:
    seen = [False] * len(perm)
    sign = 1
    for start in range(len(perm)):
        if seen[start]:
            continue
        length = 0
        j = start
        while not seen[j]:
            seen[j] = True
            j = perm[j] - 1
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def is_white(ctx: "ToroidContext | None", f: Flag) -> bool:
    negatives = sum(1 for s in f.signs if s < 0)
    return perm_sign(f.perm) * (-1) ** negatives == 1


def hat(f: Flag) -> Flag:
    return Flag(f.perm, tuple(-s for s in f.signs), f.trans)


def h_apply(ctx: "ToroidContext", f: Flag, j: int) -> Flag:
    v = _v(f.perm, f.signs)
    t = [f.trans[i] + j * v[i] for i in range(ctx.n)]
    return Flag(f.perm, f.signs, lattice.reduce(ctx.spec, t))


def hbar_apply(ctx: "ToroidContext", f: Flag, j: int) -> Flag:
    signs = list(f.signs)
    c = f.perm[0] - 1
    signs[c] = -signs[c]
    v = _v(f.perm, signs)
    t = [f.trans[i] + j * v[i] for i in range(ctx.n)]
    return Flag(f.perm, f.signs, lattice.reduce(ctx.spec, t))


def facet_of(f: Flag) -> TransClass:
    return f.trans


def vertex_of(ctx: "ToroidContext", f: Flag) -> TransClass:
    u = [t + (1 if x < 0 else 0) for t, x in zip(f.trans, f.signs)]
    return lattice.reduce(ctx.spec, u)


def is_perpendicular(ctx: "ToroidContext | None", f: Flag) -> bool:
    return f.perm[-1] == 1


def enumerate_white(ctx: "ToroidContext") -> list[Flag]:
    return ctx.white_flags


def schlafli(ctx: "ToroidContext") -> tuple[int, ...]:
    return ctx.schlafli


# ----------------------------------------------------------------- array route
#
# Arrays hold flags row-wise: P has 0-based one-line permutations, X signs,
# T translation vectors (canonical after ``reduce_array``).


def mono_arrays(spec: LatticeSpec, i: int, P, X, T):
    n = spec.n
    rows = np.arange(P.shape[0])
    P, X, T = P.copy(), X.copy(), T.copy()
    if i == 0:
        X[rows, P[:, 0]] *= -1
    elif i < n:
        P[:, [i - 1, i]] = P[:, [i, i - 1]]
    elif i == n:
        c = P[:, n - 1]
        xc = X[rows, c]
        X[rows, c] = -xc
        T[rows, c] -= xc
        T = lattice.reduce_array(spec, T)
    else:
        raise ToroidError(f"monodromy index must be in 0..{n}, got {i}")
    return P, X, T


def v_arrays(P, X, bar: bool = False):
    rows = np.arange(P.shape[0])[:, None]
    if bar:
        X = X.copy()
        X[rows[:, 0], P[:, 0]] *= -1
    V = np.empty_like(X)
    V[rows, P] = X[rows, P] * (np.arange(P.shape[1]) + 1)
    return V


def h_arrays(spec: LatticeSpec, j: int, P, X, T, bar: bool = False):
    return P, X, lattice.reduce_array(spec, T + j * v_arrays(P, X, bar))


def right_multiply_arrays(P, X, tau, y):
    """Right multiplication of the ``(perm, signs)`` part by ``(tau, y)``.

    ``tau`` (0-based) and ``y`` may be single vectors or one row per flag.
    """
    tau = np.broadcast_to(np.asarray(tau), P.shape)
    y = np.broadcast_to(np.asarray(y), X.shape)
    newP = np.take_along_axis(tau, P, axis=1)
    tau_inv = np.argsort(tau, axis=1)
    newX = np.take_along_axis(X, tau_inv, axis=1) * y
    return newP, newX


def aut_arrays(spec: LatticeSpec, P, X, T, tau, y, u):
    newP, newX = right_multiply_arrays(P, X, tau, y)
    tau_inv = np.argsort(np.broadcast_to(np.asarray(tau), P.shape), axis=1)
    yb = np.broadcast_to(np.asarray(y), X.shape)
    newT = np.take_along_axis(T, tau_inv, axis=1) * yb + np.asarray(u)
    return newP, newX, lattice.reduce_array(spec, newT)


def vertex_arrays(spec: LatticeSpec, X, T):
    return lattice.reduce_array(spec, T + (X < 0))


# ------------------------------------------------------------------- context


class ToroidContext:
    """Dense indexing of all flags of the toroid plus cached tables.

    Full flag index: ``(perm_rank * 2^n + sign_code) * Q + trans_rank`` where
    ``perm_rank`` is the lexicographic rank of the one-line permutation,
    ``sign_code`` reads the signs as binary digits (most significant first,
    digit 1 for -1) and ``trans_rank`` is the mixed-radix rank of the
    representative.  This order is lexicographic on (perm, signs, trans).
    """

    def __init__(self, spec: LatticeSpec) -> None:
        self.spec = spec
        n = self.n = spec.n
        self.Q = lattice.quotient_order(spec)
        self.n_perms = math.factorial(n)
        self.n_signs = 2**n
        self.N = self.n_perms * self.n_signs * self.Q
        self.W = self.N // 2
        self.zero: TransClass = lattice.reduce(spec, (0,) * n)
        self.v0 = tuple(range(1, n + 1))

        self.perms = np.array(list(itertools.permutations(range(n))), dtype=np.int64)
        self._weights = n ** np.arange(n - 1, -1, -1, dtype=np.int64)
        self._perm_lookup = np.full(n**n, -1, dtype=np.int64)
        self._perm_lookup[self.perms @ self._weights] = np.arange(self.n_perms)
        self.perm_signs = np.array([perm_sign(list(p + 1)) for p in self.perms], dtype=np.int64)

        codes = np.arange(self.n_signs)
        bits = (codes[:, None] >> np.arange(n - 1, -1, -1)) & 1
        self.sign_rows = np.where(bits == 1, -1, 1).astype(np.int64)
        self.sign_parity = np.where(bits.sum(axis=1) % 2 == 1, -1, 1)

        colour = (self.perm_signs[:, None] * self.sign_parity[None, :]).reshape(-1)
        white_ps = np.flatnonzero(colour == 1)
        self.white_full = (white_ps[:, None] * self.Q + np.arange(self.Q)[None, :]).reshape(-1)
        self.white_index = np.full(self.N, -1, dtype=np.int64)
        self.white_index[self.white_full] = np.arange(self.W)
        if self.white_full.size != self.W:
            raise ToroidError("white flags are not exactly half of all flags")

    # -- encoding ---------------------------------------------------------

    def decode(self, idx):
        idx = np.asarray(idx, dtype=np.int64)
        t_rank = idx % self.Q
        ps = idx // self.Q
        P = self.perms[ps // self.n_signs]
        X = self.sign_rows[ps % self.n_signs]
        T = lattice.unrank_array(self.spec, t_rank)
        return P, X, T

    def encode(self, P, X, T):
        T = lattice.reduce_array(self.spec, T)
        p_rank = self._perm_lookup[P @ self._weights]
        s = ((X < 0).astype(np.int64) << np.arange(self.n - 1, -1, -1)).sum(axis=1)
        return (p_rank * self.n_signs + s) * self.Q + lattice.rank_array(self.spec, T)

    def flag(self, idx: int) -> Flag:
        P, X, T = self.decode(np.array([idx]))
        return Flag(
            tuple(int(v) + 1 for v in P[0]),
            tuple(int(v) for v in X[0]),
            tuple(int(v) for v in T[0]),
        )

    def index(self, f: Flag) -> int:
        if len(f.perm) != self.n or sorted(f.perm) != list(range(1, self.n + 1)):
            raise ToroidError(f"not a permutation of 1..{self.n}: {f.perm}")
        P = np.array([[p - 1 for p in f.perm]])
        return int(self.encode(P, np.array([f.signs]), np.array([f.trans]))[0])

    def white_pos(self, f: Flag) -> int:
        w = int(self.white_index[self.index(f)])
        if w < 0:
            raise ToroidError(f"flag is not white: {f}")
        return w

    def white_flag(self, w: int) -> Flag:
        return self.flag(int(self.white_full[w]))

    @cached_property
    def white_flags(self) -> list[Flag]:
        P, X, T = self.decode(self.white_full)
        return [
            Flag(tuple(p), tuple(x), tuple(t))
            for p, x, t in zip((P + 1).tolist(), X.tolist(), T.tolist())
        ]

    # -- tables -----------------------------------------------------------

    def full_table(self, op: Callable) -> np.ndarray:
        """Dense table of ``op`` (acting on P, X, T arrays) over all flags."""
        P, X, T = self.decode(np.arange(self.N))
        return self.encode(*op(P, X, T))

    def white_table(self, op: Callable) -> np.ndarray:
        """Dense table of a colour-preserving ``op`` over the white flags."""
        P, X, T = self.decode(self.white_full)
        out = self.white_index[self.encode(*op(P, X, T))]
        if (out < 0).any():
            bad = int(np.flatnonzero(out < 0)[0])
            raise ToroidError(f"operation maps white flag {self.white_flag(bad)} to a black flag")
        return out

    @cached_property
    def mono_tables(self) -> list[np.ndarray]:
        return [self.full_table(lambda P, X, T, i=i: mono_arrays(self.spec, i, P, X, T)) for i in range(self.n + 1)]

    def s_white_table(self, i: int) -> np.ndarray:
        """``s_i = r_(i-1) r_i`` restricted to white flags."""
        r = self.mono_tables
        return self.white_index[r[i - 1][r[i][self.white_full]]]

    def h_white_table(self, j: int, bar: bool = False) -> np.ndarray:
        return self.white_table(lambda P, X, T: h_arrays(self.spec, j, P, X, T, bar))

    @cached_property
    def vertex_ranks(self) -> np.ndarray:
        """Rank of the vertex class of every flag."""
        _, X, T = self.decode(np.arange(self.N))
        return lattice.rank_array(self.spec, vertex_arrays(self.spec, X, T))

    @cached_property
    def schlafli(self) -> tuple[int, ...]:
        r = self.mono_tables
        return tuple(lcm_of(cycle_lengths(r[i - 1][r[i]]).keys()) for i in range(1, self.n + 1))

    def describe(self) -> dict:
        return {
            "spec": self.spec.to_json(),
            "white_count": self.W,
            "schlafli": list(self.schlafli),
        }
