import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chirex.permengine import (
    PermEngineError,
    PointMap,
    chunk_ranges,
    compose,
    cycle_decomposition,
    cycle_labels,
    cycle_lengths,
    default_threads,
    extends_to_automorphism,
    first_violation,
    group_order_small,
    invert_table,
    is_permutation,
    lcm_of,
    orbit,
    parallel_map,
)


def naive_cycles(perm):
    seen, out = set(), Counter()
    for s in range(len(perm)):
        if s in seen:
            continue
        length, j = 0, s
        while j not in seen:
            seen.add(j)
            j = perm[j]
            length += 1
        out[length] += 1
    return out


perms = st.integers(1, 300).flatmap(lambda n: st.permutations(range(n)))


@settings(max_examples=200, deadline=None)
@given(perm=perms)
def test_cycle_lengths_match_naive_walk(perm):
    table = np.array(perm)
    assert cycle_lengths(table) == naive_cycles(perm)
    labels = cycle_labels(table)
    assert (labels[table] == labels).all()
    assert (labels <= np.arange(len(perm))).all()
    report = cycle_decomposition(PointMap.from_table(table))
    assert report.lcm == lcm_of(naive_cycles(perm))
    assert report.total == len(perm)


def test_long_single_cycle():
    size = 1 << 18
    table = np.roll(np.arange(size), 1)
    assert cycle_lengths(table) == Counter({size: 1})


@settings(max_examples=100, deadline=None)
@given(perm=perms, data=st.data())
def test_inverse_and_compose(perm, data):
    other = data.draw(st.permutations(range(len(perm))))
    f, g = PointMap.from_table(np.array(perm)), PointMap.from_table(np.array(other))
    idx = np.arange(len(perm))
    fg = compose(f, g)
    assert np.array_equal(fg(idx), np.array(perm)[np.array(other)])
    assert np.array_equal(fg.inverse(fg(idx)), idx)
    assert np.array_equal(f.inv()(f(idx)), idx)
    assert np.array_equal(invert_table(np.array(perm))[np.array(perm)], idx)


def test_non_permutations_are_rejected():
    assert not is_permutation(np.array([0, 0, 1]))
    assert not is_permutation(np.array([0, 3]))
    with pytest.raises(PermEngineError):
        cycle_lengths(np.array([1, 1]))
    with pytest.raises(PermEngineError):
        invert_table(np.array([2, 0]))
    with pytest.raises(PermEngineError):
        compose()


def test_orbits_of_a_product_of_cycles():
    a = PointMap.from_table(np.array([1, 2, 0, 4, 3, 5]))
    assert orbit([a], 0).points.tolist() == [0, 1, 2]
    assert orbit([a], 5).points.tolist() == [5]
    assert orbit([a], 0, cap=2).overflow


@pytest.mark.parametrize("threads", [1, 2, 5])
def test_chunked_helpers_do_not_depend_on_threads(threads):
    size = 10_000
    assert chunk_ranges(size, 4096) == [(0, 4096), (4096, 8192), (8192, 10000)]
    parts = parallel_map(lambda lo, hi: hi - lo, size, threads, chunk=999)
    assert sum(parts) == size
    pred = lambda idx: (idx % 3001 != 3000) | (idx < 5000)
    assert first_violation(pred, size, threads, chunk=777) == 6001
    assert first_violation(lambda idx: idx >= 0, size, threads, chunk=777) is None


def test_threads_env(monkeypatch):
    monkeypatch.setenv("CHIREX_THREADS", "4")
    assert default_threads() == 4
    monkeypatch.setenv("CHIREX_THREADS", "junk")
    assert default_threads() == 1


def test_group_orders_of_known_groups():
    n = 7
    cycle = np.roll(np.arange(n), 1)
    swap = np.arange(n)
    swap[[0, 1]] = [1, 0]
    assert group_order_small([cycle, swap]) == math.factorial(n)
    assert group_order_small([cycle]) == n
    assert group_order_small([]) == 1
    with pytest.raises(PermEngineError):
        group_order_small([cycle], limit=3)


def polygon_flag_tables(m):
    """Flags (vertex i, edge i or i-1) of an m-gon: flag 2i+e, e in {0, 1}."""
    r0 = np.empty(2 * m, dtype=np.int64)
    r1 = np.empty(2 * m, dtype=np.int64)
    for i in range(m):
        # r0 keeps the edge and changes the vertex
        r0[2 * i] = 2 * ((i + 1) % m) + 1
        r0[2 * ((i + 1) % m) + 1] = 2 * i
        # r1 keeps the vertex and changes the edge
        r1[2 * i], r1[2 * i + 1] = 2 * i + 1, 2 * i
    return [r0, r1]


def brute_automorphism(tables, a, b):
    """Candidate map along a spanning tree, then a full commutation check."""
    size = len(tables[0])
    image = {a: b}
    queue = [a]
    while queue:
        x = queue.pop()
        for t in tables:
            y = int(t[x])
            if y not in image:
                image[y] = int(t[image[x]])
                queue.append(y)
    if len(set(image.values())) != len(image):
        return False
    return all(image[int(t[x])] == int(t[image[x]]) for x in image for t in tables) and len(image) <= size


@pytest.mark.parametrize("seed", range(5))
def test_automorphism_extension_against_brute_force(seed):
    tables = polygon_flag_tables(8)
    assert all(extends_to_automorphism(tables, 0, b) for b in range(16))
    rng = np.random.default_rng(seed)
    broken = [t.copy() for t in tables]
    i, j = rng.choice(16, size=2, replace=False)
    # swap the partners of two flags under r1, keeping it an involution
    pi, pj = broken[1][i], broken[1][j]
    if pi != j:
        broken[1][[i, j, pi, pj]] = [pj, pi, j, i]
    assert all(is_permutation(t) for t in broken)
    for b in range(16):
        assert extends_to_automorphism(broken, 0, b) == brute_automorphism(broken, 0, b)
    # two colours cannot be swapped
    c = np.array([1, 0, 2, 3])
    assert not extends_to_automorphism([c], 0, 2)
