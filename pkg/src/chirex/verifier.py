"""Checks behind a chirality certificate, and the certificate itself."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import lattice
from .cubegroup import mul, identity
from .extension import (
    Extension,
    ExtPoint,
    LevelClass,
    invert_word,
    level_shift,
    s_word_to_xi,
    word_for_monodromy_element,
    xi_last_apply,
)
from .permengine import (
    PermEngineError,
    PointMap,
    compose,
    cycle_decomposition,
    cycle_labels,
    cycle_lengths,
    extends_to_automorphism,
    first_violation,
    group_order_small,
    is_permutation,
    lcm_of,
    orbit,
)
from .toroid import Flag, ToroidContext, aut_arrays, base_flag, h_arrays, hat, monodromy_apply, mono_arrays

PASS, FAIL, INCONCLUSIVE, OVERFLOW = "PASS", "FAIL", "INCONCLUSIVE", "OVERFLOW"

CERTIFIED = "CHIRAL_POLYTOPE_CERTIFIED"
ROTARY_ONLY = "ROTARY_GROUP_ONLY"
NOT_VERIFIED = "NOT_VERIFIED"

CITATIONS = [
    "Rotation groups of rotary polytopes: a group generated by elements satisfying the "
    "string relations and the intersection property is the rotation group of a rotary "
    "polytope; the polytope is chiral iff no involutory group automorphism inverts the "
    "first generator and fixes the others (Schulte and Weiss, Chiral polytopes, 1991).",
    "Intersection property for extensions: it suffices to check the intersection of the "
    "facet subgroup with each subgroup generated by a terminal run of generators when "
    "the facet subgroup already has the intersection property (Schulte and Weiss, 1991).",
    "Regular cubic toroids {4,3^(n-2),4} with lattice vectors (a^k,0^(n-k)), k in {1,2,n} "
    "(McMullen and Schulte, Abstract Regular Polytopes, 2002).",
]


@dataclass
class CheckResult:
    name: str
    status: str
    details: dict = field(default_factory=dict)
    witness: object = None
    notes: list[str] = field(default_factory=list)
    runtime_ms: float = 0.0

    def to_json(self) -> dict:
        details = dict(self.details)
        if self.witness is not None:
            details["witness"] = self.witness
        if self.notes:
            details["notes"] = list(self.notes)
        return {"name": self.name, "status": self.status, "details": details, "runtime_ms": round(self.runtime_ms, 3)}


def _timed(fn: Callable[..., CheckResult]) -> Callable[..., CheckResult]:
    def wrapper(*args, **kwargs) -> CheckResult:
        start = time.perf_counter()
        result = fn(*args, **kwargs)
        result.runtime_ms = (time.perf_counter() - start) * 1000.0
        return result

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _flag_json(f: Flag) -> dict:
    return {"perm": list(f.perm), "signs": list(f.signs), "trans": list(f.trans)}


def _point_json(ext: Extension, idx: int) -> dict:
    pt = ext.decode(int(idx))
    return {"index": int(idx), "flag": _flag_json(ext.ctx.white_flag(pt.flag)), "level": pt.level}


def _fail_first(checks: list[tuple[str, Callable[[], dict | None]]]) -> tuple[dict, dict | None]:
    """Run named sub-checks in order; return per-check outcome and the first witness."""
    outcome = {}
    witness = None
    for name, run in checks:
        w = run()
        outcome[name] = w is None
        if w is not None and witness is None:
            witness = {"subcheck": name, **w}
    return outcome, witness


# ------------------------------------------------------------------- toroid


def expected_schlafli(n: int) -> tuple[int, ...]:
    return (4,) + (3,) * (n - 2) + (4,)


def _power(table: np.ndarray, k: int) -> np.ndarray:
    out = np.arange(table.size)
    for _ in range(k):
        out = table[out]
    return out


@_timed
def check_toroid(ctx: ToroidContext, tables: Sequence[np.ndarray] | None = None, seed: int = 0, words: int = 100) -> CheckResult:
    """Coxeter relations, colouring, counts and regularity of the flag action."""
    r = list(tables) if tables is not None else ctx.mono_tables
    n, N = ctx.n, ctx.N
    ident = np.arange(N)
    white = ctx.white_index >= 0

    def first_bad(ok: np.ndarray) -> int | None:
        bad = np.flatnonzero(~ok)
        return int(bad[0]) if bad.size else None

    def flag_witness(x: int | None, **extra) -> dict | None:
        return None if x is None else {"flag": _flag_json(ctx.flag(x)), **extra}

    subs: list[tuple[str, Callable[[], dict | None]]] = []
    for i in range(n + 1):
        subs.append((f"r{i} bijective", lambda i=i: None if is_permutation(r[i]) else {"generator": i}))
        subs.append((f"r{i}^2", lambda i=i: flag_witness(first_bad(r[i][r[i]] == ident))))
        subs.append((f"r{i} swaps colours", lambda i=i: flag_witness(first_bad(white[r[i]] != white))))
    for i in range(n + 1):
        for j in range(i + 2, n + 1):
            subs.append((f"r{i}r{j} commute", lambda i=i, j=j: flag_witness(first_bad(r[i][r[j]] == r[j][r[i]]))))
    target = expected_schlafli(n)
    for i in range(1, n + 1):
        subs.append(
            (f"(r{i - 1}r{i})^{target[i - 1]}", lambda i=i: flag_witness(first_bad(_power(r[i - 1][r[i]], target[i - 1]) == ident)))
        )

    measured: list[int] = []

    def schlafli_ok() -> dict | None:
        try:
            measured.extend(lcm_of(cycle_lengths(r[i - 1][r[i]]).keys()) for i in range(1, n + 1))
        except PermEngineError as exc:
            return {"error": str(exc)}
        return None if tuple(measured) == target else {"measured": measured, "expected": list(target)}

    subs.append(("schlafli", schlafli_ok))
    expected_white = ctx.n_perms * 2 ** (n - 1) * ctx.Q
    subs.append(("white count", lambda: None if int(white.sum()) == expected_white else {"count": int(white.sum())}))

    base = ctx.index(base_flag(ctx))
    subs.append(
        (
            "regularity",
            lambda: next(
                ({"adjacency": i} for i in range(n + 1) if not extends_to_automorphism(r, base, int(r[i][base]))),
                None,
            ),
        )
    )
    if tables is None:
        subs.append(("word stabiliser", lambda: _word_stabiliser(ctx, seed, words)))

    outcome, witness = _fail_first(subs)
    details = {
        "spec": ctx.spec.to_json(),
        "flags": N,
        "white_count": int(white.sum()),
        "schlafli": measured,
        "subchecks": outcome,
    }
    return CheckResult("toroid", FAIL if witness else PASS, details, witness)


def _word_stabiliser(ctx: ToroidContext, seed: int, count: int) -> dict | None:
    """Random s-words fixing the base flag must fix every white flag."""
    rng = np.random.default_rng(seed)
    s = {i: ctx.s_white_table(i) for i in range(1, ctx.n + 1)}
    start = ctx.white_pos(base_flag(ctx))

    def evaluate(word: Sequence[int]) -> np.ndarray:
        out = np.arange(ctx.W)
        for i in reversed(word):
            out = s[i][out]
        return out

    for trial in range(count):
        word = [int(v) for v in rng.integers(1, ctx.n + 1, size=int(rng.integers(1, 40)))]
        target = ctx.white_flag(int(evaluate(word)[start]))
        back = word_for_monodromy_element(ctx, target)
        if not np.array_equal(evaluate(word), evaluate(back)):
            return {"trial": trial, "word": word, "reconstructed": back}
    return None


# ---------------------------------------------------------------------- eta


def _facet_images(ctx: ToroidContext, facet: Sequence[int]):
    """Facet ranks of h^i and hbar^i images for every flag of one facet."""
    M = ctx.n_perms * ctx.n_signs
    local = np.arange(M)
    P = ctx.perms[local // ctx.n_signs]
    X = ctx.sign_rows[local % ctx.n_signs]
    T = np.broadcast_to(np.asarray(facet, dtype=np.int64), X.shape).copy()
    fh, fb, flag_h, flag_b = {}, {}, {}, {}
    for i in (-3, -2, -1, 1, 2, 3):
        flag_h[i] = ctx.encode(*h_arrays(ctx.spec, i, P, X, T))
        flag_b[i] = ctx.encode(*h_arrays(ctx.spec, i, P, X, T, bar=True))
        fh[i], fb[i] = flag_h[i] % ctx.Q, flag_b[i] % ctx.Q
    hat_local = (local // ctx.n_signs) * ctx.n_signs + (ctx.n_signs - 1 - local % ctx.n_signs)
    r0_local = ctx.encode(*mono_arrays(ctx.spec, 0, P, X, T)) // ctx.Q
    r0_flags = ctx.encode(*mono_arrays(ctx.spec, 0, P, X, T))
    return fh, fb, flag_h, flag_b, hat_local, r0_local, r0_flags, (P, X, T)


def _eta_items(ctx: ToroidContext, facet: Sequence[int], items: Sequence[int]) -> dict | None:
    fh, fb, flag_h, flag_b, hat_l, r0_l, r0_flags, (P, X, T) = _facet_images(ctx, facet)
    M = hat_l.size
    powers = (-3, -2, -1, 1, 2, 3)
    eye = np.eye(M, dtype=bool)

    def flag(k: int) -> dict:
        return _flag_json(Flag(tuple(int(v) + 1 for v in P[k]), tuple(int(v) for v in X[k]), tuple(int(v) for v in T[k])))

    def pair(item, i, j, k1, k2):
        return {"item": item, "i": i, "j": j, "psi1": flag(int(k1)), "psi2": flag(int(k2)), "facet": list(facet)}

    for i in powers:
        if 1 in items or 2 in items:
            for name, f in (("h", fh), ("hbar", fb)):
                if np.unique(f[i]).size != M:
                    k1, k2 = np.argwhere((f[i][:, None] == f[i][None, :]) & ~eye)[0]
                    return {**pair(1 if 1 in items else 2, i, i, k1, k2), "map": name}
        if 4 in items:
            for name, f in (("h", fh), ("hbar", fb)):
                bad = np.flatnonzero(f[i] != f[-i][hat_l])
                if bad.size:
                    return {**pair(4, i, -i, bad[0], hat_l[bad[0]]), "map": name}
    if 3 in items:
        # h Psi and hbar r_0 Psi are 0-adjacent, hence share a facet
        r = ctx.mono_tables[0]
        bad = np.flatnonzero(r[flag_h[1]] != flag_b[1][r0_l])
        if bad.size:
            return pair(3, 1, 1, bad[0], r0_l[bad[0]])
    for i in powers:
        for j in powers:
            if 5 in items and abs(i) != abs(j):
                left = np.concatenate([fh[i], fb[i]])
                right = np.concatenate([fh[j], fb[j]])
                common = np.intersect1d(left, right)
                if common.size:
                    k1 = int(np.flatnonzero(left == common[0])[0]) % M
                    k2 = int(np.flatnonzero(right == common[0])[0]) % M
                    return pair(5, i, j, k1, k2)
            if 6 in items:
                for name, f in (("h", fh), ("hbar", fb)):
                    eq = (f[i][:, None] == f[j][None, :]) & ~eye
                    allowed = np.zeros_like(eq)
                    if i == -j:
                        allowed[np.arange(M), hat_l] = True
                    bad = np.argwhere(eq & ~allowed)
                    if bad.size:
                        return {**pair(6, i, j, *bad[0]), "map": name}
            if 7 in items:
                eq = (fh[i][:, None] == fb[j][None, :]) & ~eye
                allowed = np.zeros_like(eq)
                if i == j:
                    allowed[r0_l, np.arange(M)] = True
                if i == -j:
                    allowed[r0_l[hat_l], np.arange(M)] = True
                bad = np.argwhere(eq & ~allowed)
                if bad.size:
                    return pair(7, i, j, *bad[0])
    return None


@_timed
def check_eta(ctx: ToroidContext, seed: int = 0, facets: int = 10) -> CheckResult:
    """Separation properties of the facets reached by h^i and hbar^i, i in +-1..3."""
    subs: list[tuple[str, Callable[[], dict | None]]] = [
        ("base facet items 1-7", lambda: _eta_items(ctx, ctx.zero, (1, 2, 3, 4, 5, 6, 7)))
    ]
    rng = np.random.default_rng(seed)
    chosen = sorted(int(v) for v in rng.choice(ctx.Q, size=min(facets, ctx.Q), replace=False))
    for rank in chosen:
        facet = lattice.unrank(ctx.spec, rank)
        subs.append((f"facet {list(facet)} items 2,4-7", lambda facet=facet: _eta_items(ctx, facet, (2, 4, 5, 6, 7))))
    outcome, witness = _fail_first(subs)
    details = {"powers": [-3, -2, -1, 1, 2, 3], "random_facets": len(chosen), "subchecks": outcome}
    if witness:
        return CheckResult("eta", FAIL, details, witness)
    if not ctx.spec.conforming:
        return CheckResult("eta", INCONCLUSIVE, details, None, ["a is below 6n+1; the properties are only promised above that bound"])
    return CheckResult("eta", PASS, details)


# -------------------------------------------------------------------- roots


def _level_for(ext: Extension, cls: LevelClass) -> list[int]:
    if cls == LevelClass.EXACTLY_ONE:
        return [1]
    if cls == LevelClass.ONE_MOD3:
        return [4] if ext.L > 4 else []
    return [0, 2]


@_timed
def check_roots(ext: Extension, seed: int = 0, samples: int = 2000) -> CheckResult:
    """Roots contain their facet and are fixed by the last generator as predicted."""
    ctx, roots = ext.ctx, ext.roots
    n, Q = ctx.n, ctx.Q
    holes = set(roots.holes)

    def entries_ok() -> dict | None:
        for (facet, cls), entry in sorted(roots.entries.items()):
            if entry.root.trans != facet:
                return {"facet": list(facet), "class": cls.name, "root": _flag_json(entry.root)}
            if ctx.white_index[ctx.index(entry.root)] < 0:
                return {"facet": list(facet), "class": cls.name, "root": _flag_json(entry.root), "reason": "root is black"}
            m = roots.multiplier(facet, cls)
            if mul(m, m) != identity(n):
                return {"facet": list(facet), "class": cls.name, "reason": "facet automorphism is not an involution"}
        return None

    def disjoint() -> dict | None:
        dist = set(roots.distinguished.values())
        case2 = set(roots.case2_candidates)
        bad = sorted((holes & dist) | (holes & case2))
        return {"facets": [list(f) for f in bad]} if bad else None

    checked = [0]

    def fixed_points() -> dict | None:
        # root, hat(root) and r_0 hat(root) for every facet and level class
        ranks = np.arange(Q)
        facets = lattice.unrank_array(ctx.spec, ranks)
        for cls in LevelClass:
            levels = _level_for(ext, cls)
            if not levels:
                continue
            idP = np.tile(np.arange(n), (Q, 1))
            P, X, T = idP, np.ones((Q, n), dtype=np.int64), facets
            P, X = P.copy(), X.copy()
            for (facet, c), entry in roots.entries.items():
                if c == cls:
                    r = lattice.rank(ctx.spec, facet)
                    P[r] = np.array(entry.root.perm) - 1
                    X[r] = entry.root.signs
            variants = [(P, X, T), (P, -X, T), mono_arrays(ctx.spec, 0, P, -X, T)]
            hole_row = np.array([tuple(f) in holes for f in facets.tolist()])
            for vP, vX, vT in variants:
                w = ctx.white_index[ctx.encode(vP, vX, vT)]
                for level in levels:
                    keep = w >= 0
                    if cls == LevelClass.EXACTLY_ONE:
                        keep &= ~hole_row
                    pts = w[keep] * ext.L + level
                    img = ext.xi(n + 1)(pts)
                    expect_shift = np.array([level_shift(roots, tuple(f), level) for f in facets[keep].tolist()])
                    expect = w[keep] * ext.L + (level + expect_shift) % ext.L
                    checked[0] += int(pts.size)
                    bad = np.flatnonzero(img != expect)
                    if bad.size:
                        return {"point": _point_json(ext, int(pts[bad[0]])), "image": _point_json(ext, int(img[bad[0]])), "class": cls.name}
        return None

    def hole_roots() -> dict | None:
        for facet in roots.holes:
            entry = roots.root(facet, LevelClass.EXACTLY_ONE)
            if ctx.white_index[ctx.index(entry.root)] < 0:
                return {"facet": list(facet), "root": _flag_json(entry.root), "reason": "root is black"}
            pt = ext.point(entry.root, 1)
            img = ext.decode(int(ext.xi(n + 1)(np.array([pt]))[0]))
            want = monodromy_apply(ctx, 0, monodromy_apply(ctx, 1, entry.root))
            if img != ExtPoint(ctx.white_pos(want), 1):
                return {"facet": list(facet), "image": _point_json(ext, ext.encode(img))}
        return None

    def scalar_agreement() -> dict | None:
        rng = np.random.default_rng(seed)
        pts = rng.choice(ext.size, size=min(samples, ext.size), replace=False)
        fast = ext.xi(n + 1)(pts)
        for p, q in zip(pts.tolist(), fast.tolist()):
            slow = ext.encode(xi_last_apply(ext, roots, ext.decode(p)))
            if slow != q:
                return {"point": _point_json(ext, p), "table": _point_json(ext, q), "scalar": _point_json(ext, slow)}
        return None

    outcome, witness = _fail_first(
        [
            ("roots contain facet", entries_ok),
            ("holes avoid cases 1-2", disjoint),
            ("roots fixed by last generator", fixed_points),
            ("hole roots", hole_roots),
            ("table agrees with scalar route", scalar_agreement),
        ]
    )
    details = {
        "special_entries": len(roots.entries),
        "holes": [list(f) for f in roots.holes],
        "x_h": list(roots.x_h),
        "points_checked": checked[0],
        "multi_root_facets": len(roots.coincidences),
        "multi_roots_coincide": all(c["coincide"] for c in roots.coincidences),
        "subchecks": outcome,
    }
    return CheckResult("roots", FAIL if witness else PASS, details, witness)


# ---------------------------------------------------------------- relations


def relation_words(ext: Extension) -> list[tuple[str, list[PointMap]]]:
    """Each relation as a list of maps applied left to right (must give identity)."""
    n = ext.n
    last = ext.xi(n + 1)
    rels = [("xi_last^2", [last, last])]
    for i in range(1, n):
        inv = ext.xi(i).inv()
        rels.append((f"(xi{i}^-1 xi_last)^2", [last, inv, last, inv]))
    for i in range(1, n + 1):
        block = [ext.varsigma(k) for k in range(n + 1, i - 1, -1)]
        rels.append((f"(varsigma{i}..varsigma{n + 1})^2", block + block))
    return rels


def sample_indices(size: int, seed: int, count: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(size, size=min(count, size), replace=False))


@_timed
def check_relations(ext: Extension, mode: str = "full", seed: int = 0, samples: int = 100_000, threads: int = 1) -> CheckResult:
    """String relations of the generators over the whole domain (or a seeded sample)."""
    n = ext.n
    if mode not in ("full", "sampled"):
        raise ValueError(f"unknown mode {mode!r}")
    points = None if mode == "full" else sample_indices(ext.size, seed, samples)
    swept = ext.size if points is None else int(points.size)

    def run(maps: list[PointMap]) -> int | None:
        def pred(idx: np.ndarray) -> np.ndarray:
            pts = idx if points is None else points[idx]
            cur = pts
            for m in maps:
                cur = m(cur)
            return cur == pts

        hit = first_violation(pred, swept, threads)
        if hit is None:
            return None
        return int(hit if points is None else points[hit])

    outcome = {}
    witness = None
    for name, maps in relation_words(ext):
        hit = run(maps)
        outcome[name] = hit is None
        if hit is not None and witness is None:
            witness = {"relation": name, "point": _point_json(ext, hit)}

    orders = {}
    schlafli = []
    for i in range(1, n + 1):
        orders[f"varsigma{i}"] = lcm_of(cycle_lengths(ext.varsigma_table(i)).keys())
        schlafli.append(orders[f"varsigma{i}"])
    q = None
    if mode == "full":
        last = ext.xi(n + 1)
        if not is_permutation(last.table(threads)):
            outcome["xi_last bijective"] = False
            witness = witness or {"relation": "xi_last bijective"}
        else:
            outcome["xi_last bijective"] = True
            report = cycle_decomposition(ext.varsigma(n + 1), threads=threads)
            q = report.lcm
            orders[f"varsigma{n + 1}"] = q
    ok_orders = tuple(schlafli) == ext.ctx.schlafli
    outcome["facet orders match toroid"] = ok_orders
    if not ok_orders and witness is None:
        witness = {"orders": schlafli, "toroid": list(ext.ctx.schlafli)}
    details = {
        "mode": mode,
        "points": swept,
        "relations": outcome,
        "orders": {k: str(v) for k, v in orders.items()},
        "q": None if q is None else str(q),
    }
    if mode == "sampled":
        details["seed"] = seed
    return CheckResult("relations", FAIL if witness else PASS, details, witness)


# ------------------------------------------------------------- intersection


def witness_flag(ctx: ToroidContext) -> Flag:
    """Smallest white flag perpendicular to the e_1 line with vertex at the origin."""
    best = None
    n = ctx.n
    for k in range(ctx.n_perms):
        perm = ctx.perms[k]
        if perm[n - 1] != 0:
            continue
        for s in range(ctx.n_signs):
            x = ctx.sign_rows[s]
            if ctx.perm_signs[k] * ctx.sign_parity[s] != 1:
                continue
            t = lattice.reduce(ctx.spec, [-1 if v < 0 else 0 for v in x])
            f = Flag(tuple(int(v) + 1 for v in perm), tuple(int(v) for v in x), t)
            idx = ctx.index(f)
            if best is None or idx < best[0]:
                best = (idx, f)
    assert best is not None
    return best[1]


def _aut_generators(ctx: ToroidContext) -> list[tuple[str, tuple, tuple, tuple]]:
    n = ctx.n
    ident = tuple(range(n))
    ones = (1,) * n
    zero = (0,) * n
    gens = []
    for k in range(n):
        u = tuple(1 if j == k else 0 for j in range(n))
        gens.append((f"translate e{k + 1}", ident, ones, u))
    flip1 = (-1,) + (1,) * (n - 1)
    for i in range(n - 1):
        tau = list(ident)
        tau[i], tau[i + 1] = tau[i + 1], tau[i]
        gens.append((f"swap {i + 1},{i + 2} with flip 1", tuple(tau), flip1, zero))
    flip12 = (-1, -1) + (1,) * (n - 2)
    gens.append(("flip 1,2", ident, flip12, zero))
    return gens


def _freeness_by_centraliser(ctx: ToroidContext) -> dict | None:
    """A transitive group commuting with a transitive group acts regularly.

    Checks that every colour-preserving automorphism generator commutes with
    all monodromy generators and that together they move the base flag to
    every white flag.
    """
    r = ctx.mono_tables
    P, X, T = ctx.decode(np.arange(ctx.N))
    tables = []
    for name, tau, y, u in _aut_generators(ctx):
        g = ctx.encode(*aut_arrays(ctx.spec, P, X, T, np.array(tau), np.array(y), np.array(u)))
        for i, ri in enumerate(r):
            bad = np.flatnonzero(ri[g] != g[ri])
            if bad.size:
                return {"automorphism": name, "generator": i, "flag": _flag_json(ctx.flag(int(bad[0])))}
        if (ctx.white_index[g[ctx.white_full]] < 0).any():
            return {"automorphism": name, "reason": "does not preserve colours"}
        tables.append(ctx.white_index[g[ctx.white_full]])
    start = ctx.white_pos(base_flag(ctx))
    reach = orbit([PointMap.from_table(t) for t in tables], start)
    if reach.size != ctx.W:
        return {"reason": "colour-preserving automorphisms are not transitive", "orbit": reach.size}
    return None


@_timed
def check_intersection(ext: Extension, threads: int = 1, cap: int | None = None, toroid_result: CheckResult | None = None) -> CheckResult:
    """Proof-schema premises for the intersection condition, for every j in 2..n+1."""
    ctx, n, L = ext.ctx, ext.n, ext.L
    cap = cap if cap is not None else ext.size
    phi = witness_flag(ctx)
    start = ext.point(phi, 1)
    vs = {i: ext.varsigma(i) for i in range(1, n + 1)}
    vs[n + 1] = ext.varsigma(n + 1)
    details: dict = {"witness_flag": _flag_json(phi), "e1_order": lattice.e1_order(ctx.spec)}
    subs: list[tuple[str, Callable[[], dict | None]]] = []

    # (i) the facet subgroup acts freely and transitively on level 1
    vtables = [ext.varsigma_table(i) for i in range(1, n + 1)]

    def transitive() -> dict | None:
        got = orbit([PointMap.from_table(t) for t in vtables], ctx.white_pos(phi))
        details["level1_orbit"] = got.size
        return None if got.size == ctx.W else {"orbit": got.size, "white": ctx.W}

    def free() -> dict | None:
        w = _freeness_by_centraliser(ctx)
        details["freeness"] = "commuting transitive automorphism group"
        if w is not None:
            return w
        if ctx.W <= 100_000:
            order = group_order_small(vtables)
            details["restricted_order"] = order
            details["freeness"] += " and exact group order"
            if order != ctx.W:
                return {"order": order, "white": ctx.W}
        else:
            details["restricted_order"] = ctx.W
        return None

    subs += [("(i) transitive", transitive), ("(i) free", free)]

    # (ii) s_2..s_n fix the vertex of every flag
    def vertex_fixed() -> dict | None:
        r, vr = ctx.mono_tables, ctx.vertex_ranks
        for i in range(2, n + 1):
            bad = np.flatnonzero(vr[r[i - 1][r[i]]] != vr)
            if bad.size:
                return {"s": i, "flag": _flag_json(ctx.flag(int(bad[0])))}
        return None

    subs.append(("(ii) s_i fix vertices", vertex_fixed))

    # (iii) the last varsigma keeps level-1 points at X_H at level 1 and at X_H
    xh_rank = lattice.rank(ctx.spec, ext.roots.x_h)

    def hole_vertex() -> dict | None:
        wv = ctx.vertex_ranks[ctx.white_full]
        around = np.flatnonzero(wv == xh_rank)
        img = vs[n + 1](around * L + 1)
        bad = np.flatnonzero((img % L != 1) | (wv[img // L] != xh_rank))
        details["x_h_points"] = int(around.size)
        return None if not bad.size else {"point": _point_json(ext, int(around[bad[0]] * L + 1))}

    subs.append(("(iii) X_H preserved", hole_vertex))

    # (iv) regularity of the toroid
    def regular() -> dict | None:
        if toroid_result is not None:
            return None if toroid_result.details.get("subchecks", {}).get("regularity") else {"reason": "toroid check failed"}
        r = ctx.mono_tables
        base = ctx.index(base_flag(ctx))
        for i in range(n + 1):
            if not extends_to_automorphism(r, base, int(r[i][base])):
                return {"adjacency": i}
        return None

    subs.append(("(iv) toroid regular", regular))

    per_j: dict[str, dict] = {}
    overflow = [False]
    phi_vertex = ctx.vertex_ranks[ctx.index(phi)]
    e1 = np.zeros(n, dtype=np.int64)
    e1[0] = 1

    def orbit_schema(j: int) -> dict | None:
        small = orbit([vs[i] for i in range(j, n + 1)], start)
        big = orbit([vs[i] for i in range(j, n + 2)], start, cap=cap)
        info = {"O_C": small.size}
        per_j[str(j)] = info
        if big.overflow:
            overflow[0] = True
            info["O_B"] = "overflow"
            return {"j": j, "reason": "orbit overflow", "cap": cap}
        info["O_B"] = big.size
        levels = big.points % L
        if (levels != 1).any():
            return {"j": j, "premise": "v", "point": _point_json(ext, int(big.points[np.flatnonzero(levels != 1)[0]]))}
        P, X, T = ctx.decode(ctx.white_full[small.points // L])
        shifted = []
        for i in range(lattice.e1_order(ctx.spec)):
            w = ctx.white_index[ctx.encode(P, X, T + i * e1)]
            shifted.append(w * L + 1)
        translates = np.unique(np.concatenate(shifted))
        info["translates"] = int(translates.size)
        outside = big.points[~np.isin(big.points, translates)]
        if outside.size:
            return {"j": j, "premise": "v", "point": _point_json(ext, int(outside[0]))}
        same_vertex = big.points[ctx.vertex_ranks[ctx.white_full[big.points // L]] == phi_vertex]
        if not np.array_equal(np.sort(same_vertex), small.points):
            extra = np.setdiff1d(same_vertex, small.points)
            pt = int(extra[0]) if extra.size else int(np.setdiff1d(small.points, same_vertex)[0])
            return {"j": j, "premise": "vi", "point": _point_json(ext, pt)}
        return None

    for j in range(2, n + 2):
        subs.append((f"j={j} (v)-(vi)", lambda j=j: orbit_schema(j)))

    outcome, witness = _fail_first(subs)
    details["subchecks"] = outcome
    details["per_j"] = per_j
    if overflow[0]:
        return CheckResult("intersection", OVERFLOW, details, witness)
    return CheckResult("intersection", FAIL if witness else PASS, details, witness)


def direct_intersection_check(ext: Extension, limit: int = 100_000) -> dict:
    """Compare both sides of the subgroup equation directly on a small domain.

    The facet subgroup is enumerated element by element as full permutations.
    For each ``j`` an element either lies in the closure of
    varsigma_j..varsigma_n (a word in the generators of the big group, so a
    member), or must be shown to lie outside the big group generated by
    varsigma_j..varsigma_{n+1}.  Exact certificates of non-membership are
    tried cheapest first: moving a point to another orbit of the big group,
    then an odd sign vector on its orbits outside the span of the generators'
    sign vectors.  Anything left is decided by Schreier-Sims membership.
    """
    from sympy.combinatorics import Permutation

    from .permengine import sympy_group

    if ext.size > limit:
        raise PermEngineError(f"domain of {ext.size} points exceeds {limit}")
    n, size = ext.n, ext.size
    tables = {i: ext.varsigma(i).table() for i in range(1, n + 2)}

    def closure(gens: list[np.ndarray]) -> dict[bytes, np.ndarray]:
        ident = np.arange(size, dtype=np.int64)
        seen = {ident.tobytes(): ident}
        frontier = [ident]
        while frontier:
            nxt = []
            for g in frontier:
                for s in gens:
                    h = s[g]
                    key = h.tobytes()
                    if key not in seen:
                        seen[key] = h
                        nxt.append(h)
            frontier = nxt
        return seen

    facet_group = closure([tables[i] for i in range(1, n + 1)])
    result: dict = {"facet_group_order": len(facet_group), "per_j": {}}
    holds = True
    for j in range(2, n + 2):
        gens = [tables[i] for i in range(j, n + 2)]
        maps = [PointMap.from_table(g) for g in gens]
        labels = np.full(size, -1, dtype=np.int64)
        count = 0
        for s in range(size):
            if labels[s] < 0:
                labels[orbit(maps, s, size=size).points] = count
                count += 1
        span = _F2Span()
        for g in gens:
            span.add(_orbit_signs(g, labels, count))
        expected = closure([tables[i] for i in range(j, n + 1)])
        methods = {"word": 0, "orbit": 0, "sign": 0, "bsgs_in": 0, "bsgs_out": 0}
        big = None
        inter = 0
        for key, g in facet_group.items():
            if key in expected:
                methods["word"] += 1
                inter += 1
            elif (labels[g] != labels).any():
                methods["orbit"] += 1
            elif not span.contains(_orbit_signs(g, labels, count)):
                methods["sign"] += 1
            else:
                big = big or sympy_group(gens)
                if big.contains(Permutation(g.tolist())):
                    methods["bsgs_in"] += 1
                    inter += 1
                else:
                    methods["bsgs_out"] += 1
        ok = inter == len(expected)
        holds &= ok
        result["per_j"][str(j)] = {
            "intersection": inter,
            "expected": len(expected),
            "equal": ok,
            "big_group_orbits": count,
            "decided_by": methods,
        }
    result["holds"] = holds
    return result


def _orbit_signs(g: np.ndarray, labels: np.ndarray, count: int) -> int:
    """Bitmask of the orbits on which ``g`` (preserving each) acts oddly."""
    cyc = cycle_labels(g)
    heads = cyc == np.arange(g.size)
    points = np.bincount(labels, minlength=count)
    cycles = np.bincount(labels[heads], minlength=count)
    odd = (points - cycles) % 2
    return int(sum(1 << int(i) for i in np.flatnonzero(odd)))


class _F2Span:
    """Row-reduced span of bitmask vectors over GF(2)."""

    def __init__(self) -> None:
        self.rows: dict[int, int] = {}

    def reduce(self, v: int) -> int:
        while v:
            top = v.bit_length() - 1
            if top not in self.rows:
                return v
            v ^= self.rows[top]
        return 0

    def add(self, v: int) -> None:
        v = self.reduce(v)
        if v:
            self.rows[v.bit_length() - 1] = v

    def contains(self, v: int) -> bool:
        return self.reduce(v) == 0


# ---------------------------------------------------------------- chirality


@_timed
def check_chirality(ext: Extension, threads: int = 1) -> CheckResult:
    """Orbit data of mu and mubar that rule out the inverting automorphism."""
    ctx, n, L, p = ext.ctx, ext.n, ext.L, ext.spec.p
    W = ctx.W
    details: dict = {"p": p, "3W": 3 * W}
    subs: list[tuple[str, Callable[[], dict | None]]] = []
    mu, mubar = ext.mu(), ext.mu(bar=True)
    start = ext.point(ext.roots.phis[0], 0)

    def mu_orbit() -> dict | None:
        got = orbit([mu], start, cap=ext.size)
        details["mu_orbit_of_base"] = got.size
        return None if got.size == p else {"orbit": got.size, "expected": p}

    def mubar_cycles() -> dict | None:
        report = cycle_decomposition(mubar, keep_labels=True, threads=threads)
        labels = report.labels
        triple = np.arange(ext.size) % L // 3
        lo = np.full(ext.size, np.iinfo(np.int64).max)
        hi = np.full(ext.size, -1)
        np.minimum.at(lo, labels, triple)
        np.maximum.at(hi, labels, triple)
        sizes = np.bincount(labels, minlength=ext.size)
        reps = np.flatnonzero(labels == np.arange(ext.size))
        bad = reps[(sizes[reps] > 3) & (lo[reps] != hi[reps])]
        details["mubar_cycles"] = report.to_json()
        details["mubar_max_orbit"] = report.max_size
        details["mubar_order"] = str(report.lcm)
        if bad.size:
            return {"premise": "b", "point": _point_json(ext, int(bad[0])), "orbit": int(sizes[bad[0]])}
        if report.max_size > 3 * W:
            rep = int(reps[np.argmax(sizes[reps])])
            return {"premise": "c", "point": _point_json(ext, rep), "orbit": report.max_size}
        return None

    def mu_order() -> dict | None:
        report = cycle_decomposition(mu, threads=threads)
        details["mu_order"] = str(report.lcm)
        details["mu_max_orbit"] = report.max_size
        return None

    def alpha_consistency() -> dict | None:
        word = ext.mu_word()
        details["mu_word_length"] = len(word)
        image = ext.alpha_image(word)
        hit = first_violation(lambda idx: image(idx) == mubar(idx), ext.size, threads)
        if hit is not None:
            return {"premise": "e", "point": _point_json(ext, hit)}
        h_image = ext.alpha_image(ext.h_word())
        hbar = ext.h(1, bar=True)
        pts = np.arange(W) * L
        bad = np.flatnonzero(h_image(pts) != hbar(pts))
        if bad.size:
            return {"premise": "e", "map": "h", "point": _point_json(ext, int(pts[bad[0]]))}
        return None

    def printed_variant() -> dict | None:
        report = cycle_decomposition(ext.mu(bar=True, as_printed=True), threads=threads)
        details["mubar_as_printed"] = {"max_orbit": report.max_size, "order": str(report.lcm)}
        return None

    def odd_rank_orbit() -> dict | None:
        if n % 2 == 0:
            return None
        f = monodromy_apply(ctx, 0, hat(ext.roots.phis[1]))
        got = orbit([mubar], ext.point(f, 0))
        details["odd_rank_orbit"] = got.size
        return None if got.size == 3 else {"point": _point_json(ext, ext.point(f, 0)), "orbit": got.size}

    subs += [
        ("(a) mu orbit", mu_orbit),
        ("(b)-(c) mubar cycles", mubar_cycles),
        ("mu order", mu_order),
        ("(e) alpha image", alpha_consistency),
        ("mubar as printed", printed_variant),
        ("odd rank orbit", odd_rank_orbit),
    ]
    outcome, witness = _fail_first(subs)
    details["subchecks"] = outcome
    if witness:
        return CheckResult("chirality", FAIL, details, witness)
    conforming = ext.spec.chirality_conforming(W)
    details["p_prime_above_3W"] = conforming
    if not conforming:
        return CheckResult("chirality", INCONCLUSIVE, details, None, ["p must be a prime larger than 3W to conclude"])
    mu_ord, mubar_ord = int(details["mu_order"]), int(details["mubar_order"])
    if mu_ord % p != 0 or mubar_ord % p == 0:
        return CheckResult("chirality", FAIL, details, {"premise": "d", "mu_order": str(mu_ord), "mubar_order": str(mubar_ord)})
    details["conclusion"] = "p divides ord(mu) but not ord(mubar)"
    return CheckResult("chirality", PASS, details)


# -------------------------------------------------------------- certificate


ALL_CHECKS = ("toroid", "eta", "roots", "relations", "intersection", "chirality")


@dataclass
class Certificate:
    spec: dict
    conforming: bool
    conformance: dict
    checks: list[CheckResult]
    conclusion: str
    schlafli: list
    facets: str

    def to_json(self, timing: bool = True) -> dict:
        checks = [c.to_json() for c in self.checks]
        if not timing:
            for c in checks:
                c.pop("runtime_ms", None)
        return {
            "spec": self.spec,
            "conforming": self.conforming,
            "conformance": self.conformance,
            "checks": checks,
            "conclusion": self.conclusion,
            "schlafli": self.schlafli,
            "facets": self.facets,
            "citations": CITATIONS,
        }


def facet_symbol(ctx: ToroidContext) -> str:
    spec = ctx.spec
    vec = [spec.a] * spec.k + [0] * (spec.n - spec.k)
    return "{" + ",".join(map(str, ctx.schlafli)) + "}_(" + ",".join(map(str, vec)) + ")"


def conclude(results: dict[str, CheckResult], conforming: bool) -> str:
    if any(r.status == FAIL for r in results.values()):
        return NOT_VERIFIED
    core = [results.get(k) for k in ("relations", "intersection")]
    if not all(r is not None and r.status == PASS for r in core):
        return NOT_VERIFIED
    chir = results.get("chirality")
    if chir is not None and chir.status == PASS and conforming:
        return CERTIFIED
    return ROTARY_ONLY


def certify(
    ext: Extension,
    checks: Sequence[str] = ALL_CHECKS,
    mode: str = "full",
    seed: int = 0,
    samples: int = 100_000,
    threads: int = 1,
) -> Certificate:
    unknown = set(checks) - set(ALL_CHECKS)
    if unknown:
        raise ValueError(f"unknown checks: {sorted(unknown)}")
    ctx = ext.ctx
    results: dict[str, CheckResult] = {}
    for name in ALL_CHECKS:
        if name not in checks:
            continue
        if name == "toroid":
            results[name] = check_toroid(ctx, seed=seed)
        elif name == "eta":
            results[name] = check_eta(ctx, seed=seed)
        elif name == "roots":
            results[name] = check_roots(ext, seed=seed)
        elif name == "relations":
            results[name] = check_relations(ext, mode=mode, seed=seed, samples=samples, threads=threads)
        elif name == "intersection":
            results[name] = check_intersection(ext, threads=threads, toroid_result=results.get("toroid"))
        else:
            results[name] = check_chirality(ext, threads=threads)
    size_ok = ctx.spec.conforming
    prime_ok = ext.spec.chirality_conforming(ctx.W)
    conforming = size_ok and prime_ok
    q = results["relations"].details.get("q") if "relations" in results else None
    schlafli = list(ctx.schlafli) + [int(q) if q is not None else None]
    spec = ext.spec.to_json()
    spec["run"] = {"mode": mode, "seed": seed}
    if mode == "sampled":
        spec["run"]["samples"] = samples
    return Certificate(
        spec=spec,
        conforming=conforming,
        conformance={"a_at_least_6n_plus_1": size_ok, "p_prime_above_3W": prime_ok},
        checks=[results[k] for k in ALL_CHECKS if k in results],
        conclusion=conclude(results, conforming),
        schlafli=schlafli,
        facets=facet_symbol(ctx),
    )
