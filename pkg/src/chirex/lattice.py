"""Translation quotients Z^n / L for the three cubic lattice families.

``k = 1`` is the scaled cubic lattice ``a Z^n``, ``k = 2`` the scaled
face-centred lattice (even coordinate sum) and ``k = n`` the scaled
body-centred lattice (all coordinates of equal parity).

Every coset has one canonical representative.  The representatives of a
spec fill a box ``offset + [0, R_1) x ... x [0, R_n)`` whose radices are
listed by :meth:`LatticeSpec.radices`; the lexicographic rank of a
representative is its mixed-radix value inside that box.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

Vector = tuple[int, ...]
# A translation class is stored as its canonical representative.
TransClass = Vector


class LatticeError(ValueError):
    """Invalid lattice parameters or a vector of the wrong length."""


@dataclass(frozen=True)
class LatticeSpec:
    n: int
    a: int
    k: int
    allow_small_a: bool = False
    # Shifts every canonical representative by (offset, ..., offset).
    # Only used to check that verdicts do not depend on the choice.
    rep_offset: int = 0

    def __post_init__(self) -> None:
        if not isinstance(self.n, int) or self.n < 2:
            raise LatticeError(f"n must be an integer >= 2, got {self.n!r}")
        if not isinstance(self.a, int) or self.a < 1:
            raise LatticeError(f"a must be a positive integer, got {self.a!r}")
        if self.k not in (1, 2, self.n):
            raise LatticeError(f"k must be one of 1, 2 or n={self.n}, got {self.k!r}")
        if self.n == 2 and self.k == self.n:
            object.__setattr__(self, "k", 2)
        if not self.conforming and not self.allow_small_a:
            raise LatticeError(
                f"a={self.a} is below the size bound 6n+1={6 * self.n + 1}; "
                "pass allow_small_a=True to build it anyway"
            )

    @property
    def conforming(self) -> bool:
        return self.a >= 6 * self.n + 1

    @property
    def family(self) -> str:
        if self.k == 1:
            return "cubic"
        return "fcc" if self.k == 2 else "bcc"

    def radices(self) -> Vector:
        n, a = self.n, self.a
        if self.k == 1:
            return (a,) * n
        if self.k == 2:
            return (2 * a,) + (a,) * (n - 1)
        return (2 * a,) * (n - 1) + (a,)

    def offset_vector(self) -> Vector:
        return (self.rep_offset,) * self.n

    def to_json(self) -> dict:
        out = {"n": self.n, "a": self.a, "k": self.k}
        if self.rep_offset:
            out["rep_offset"] = self.rep_offset
        return out

    @classmethod
    def from_json(cls, data: dict, allow_small_a: bool = False) -> "LatticeSpec":
        try:
            return cls(
                n=int(data["n"]),
                a=int(data["a"]),
                k=int(data["k"]),
                allow_small_a=allow_small_a,
                rep_offset=int(data.get("rep_offset", 0)),
            )
        except KeyError as exc:
            raise LatticeError(f"missing lattice field {exc}") from None


def _check_len(spec: LatticeSpec, t: Sequence[int]) -> None:
    if len(t) != spec.n:
        raise LatticeError(f"expected a vector of length {spec.n}, got {len(t)}")


def reduce_array(spec: LatticeSpec, t: np.ndarray) -> np.ndarray:
    """Canonical representatives of the rows of ``t`` (shape ``(..., n)``)."""
    t = np.asarray(t, dtype=np.int64)
    if t.shape[-1] != spec.n:
        raise LatticeError(f"expected trailing dimension {spec.n}, got {t.shape[-1]}")
    a = spec.a
    if spec.rep_offset:
        t = t - spec.rep_offset
    r = np.mod(t, a)
    if spec.k == 1:
        rep = r
    else:
        q = (t - r) // a
        if spec.k == 2:
            odd = np.mod(q.sum(axis=-1), 2)
            rep = r.copy()
            rep[..., 0] += a * odd
        else:
            qbar = np.mod(q[..., :-1] - q[..., -1:], 2)
            rep = r.copy()
            rep[..., :-1] += a * qbar
    if spec.rep_offset:
        rep = rep + spec.rep_offset
    return rep


def reduce(spec: LatticeSpec, t: Sequence[int]) -> TransClass:
    _check_len(spec, t)
    row = reduce_array(spec, np.array([list(t)], dtype=np.int64))[0]
    return tuple(int(v) for v in row)


def contains(spec: LatticeSpec, t: Sequence[int]) -> bool:
    _check_len(spec, t)
    return reduce(spec, t) == reduce(spec, (0,) * spec.n)


def quotient_order(spec: LatticeSpec) -> int:
    base = spec.a**spec.n
    if spec.k == 1:
        return base
    if spec.k == 2:
        return 2 * base
    return 2 ** (spec.n - 1) * base


def lattice_basis(spec: LatticeSpec) -> list[Vector]:
    """A basis of the lattice itself (already scaled by ``a``)."""
    n, a = spec.n, spec.a
    eye = [[1 if i == j else 0 for j in range(n)] for i in range(n)]
    if spec.k == 1:
        rows = eye
    elif spec.k == 2:
        rows = [[1, 1] + [0] * (n - 2)] + [
            [1 if j == i else -1 if j == i - 1 else 0 for j in range(n)] for i in range(1, n)
        ]
    else:
        rows = [[2 if j == i else 0 for j in range(n)] for i in range(n - 1)] + [[1] * n]
    return [tuple(a * v for v in row) for row in rows]


def e1_order(spec: LatticeSpec) -> int:
    """Order of the class of the unit vector e_1 in the quotient."""
    return spec.a if spec.k == 1 else 2 * spec.a


def rank_array(spec: LatticeSpec, reps: np.ndarray) -> np.ndarray:
    """Mixed-radix index of canonical representatives (rows of ``reps``)."""
    reps = np.asarray(reps, dtype=np.int64)
    if spec.rep_offset:
        reps = reps - spec.rep_offset
    idx = np.zeros(reps.shape[:-1], dtype=np.int64)
    for j, radix in enumerate(spec.radices()):
        idx = idx * radix + reps[..., j]
    return idx


def unrank_array(spec: LatticeSpec, idx: np.ndarray) -> np.ndarray:
    idx = np.asarray(idx, dtype=np.int64)
    radices = spec.radices()
    out = np.empty(idx.shape + (spec.n,), dtype=np.int64)
    rest = idx.copy()
    for j in range(spec.n - 1, -1, -1):
        out[..., j] = rest % radices[j]
        rest //= radices[j]
    if spec.rep_offset:
        out += spec.rep_offset
    return out


def rank(spec: LatticeSpec, rep: Sequence[int]) -> int:
    _check_len(spec, rep)
    return int(rank_array(spec, np.array([list(rep)]))[0])


def unrank(spec: LatticeSpec, idx: int) -> TransClass:
    return tuple(int(v) for v in unrank_array(spec, np.array([idx]))[0])
