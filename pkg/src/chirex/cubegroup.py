"""The hyperoctahedral group S_n x| C_2^n acting on the flags of one facet.

Elements are pairs ``(perm, signs)``.  Multiplication follows from
composing two automorphisms of the toroid and forgetting translations:

    (t1, y1) * (t2, y2) = (t1 t2, y2 * (t2 . y1))

where ``t1 t2`` applies ``t1`` first and ``(t . y)`` moves entry ``j`` of
``y`` to position ``t(j)``.  A flag ``(sigma, x, t)`` of a facet is the
element ``(sigma, x)``; monodromy inside the facet is left multiplication,
automorphisms of the facet are right multiplication.
"""

from __future__ import annotations

from typing import NamedTuple, Sequence

from .toroid import Flag


class CubeElem(NamedTuple):
    perm: tuple[int, ...]
    signs: tuple[int, ...]


def identity(n: int) -> CubeElem:
    return CubeElem(tuple(range(1, n + 1)), (1,) * n)


def _act(perm: Sequence[int], y: Sequence[int]) -> list[int]:
    out = [0] * len(perm)
    for j, img in enumerate(perm):
        out[img - 1] = y[j]
    return out


def mul(e1: CubeElem, e2: CubeElem) -> CubeElem:
    if len(e1.perm) != len(e2.perm):
        raise ValueError("cube elements of different rank")
    perm = tuple(e2.perm[p - 1] for p in e1.perm)
    moved = _act(e2.perm, e1.signs)
    return CubeElem(perm, tuple(a * b for a, b in zip(e2.signs, moved)))


def inv(e: CubeElem) -> CubeElem:
    n = len(e.perm)
    perm_inv = [0] * n
    for j, img in enumerate(e.perm):
        perm_inv[img - 1] = j + 1
    return CubeElem(tuple(perm_inv), tuple(_act(perm_inv, e.signs)))


def flag_to_elem(f: Flag) -> CubeElem:
    return CubeElem(f.perm, f.signs)


def elem_to_flag(e: CubeElem, t) -> Flag:
    return Flag(e.perm, e.signs, tuple(t))


def reflection(n: int, i: int) -> CubeElem:
    """The element whose left multiplication is ``r_i`` (0 <= i <= n-1)."""
    if not 0 <= i < n:
        raise ValueError(f"facet reflections are r_0..r_{n - 1}, got r_{i}")
    perm = list(range(1, n + 1))
    signs = [1] * n
    if i == 0:
        signs[0] = -1
    else:
        perm[i - 1], perm[i] = perm[i], perm[i - 1]
    return CubeElem(tuple(perm), tuple(signs))


def colour(e: CubeElem) -> int:
    """+1 if right multiplication by ``e`` preserves flag colours, else -1."""
    from .toroid import perm_sign

    negatives = sum(1 for s in e.signs if s < 0)
    return perm_sign(e.perm) * (-1) ** negatives


def facet_automorphism(root: Flag, i: int) -> CubeElem:
    """Right multiplier of the facet automorphism sending ``root`` to ``r_i root``."""
    if i not in (0, 1):
        raise ValueError(f"only r_0 and r_1 roots are used, got {i}")
    g = flag_to_elem(root)
    return mul(inv(g), mul(reflection(len(g.perm), i), g))


def apply_facet_automorphism(f: Flag, g: CubeElem) -> Flag:
    return elem_to_flag(mul(flag_to_elem(f), g), f.trans)
