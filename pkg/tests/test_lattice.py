import itertools

import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from chirex.lattice import (
    LatticeError,
    LatticeSpec,
    contains,
    e1_order,
    lattice_basis,
    quotient_order,
    rank,
    rank_array,
    reduce,
    reduce_array,
    unrank,
    unrank_array,
)

SPECS = [
    LatticeSpec(2, 13, 1),
    LatticeSpec(2, 13, 2),
    LatticeSpec(3, 19, 1),
    LatticeSpec(3, 19, 2),
    LatticeSpec(3, 19, 3),
    LatticeSpec(2, 3, 2, allow_small_a=True),
    LatticeSpec(3, 2, 3, allow_small_a=True),
    LatticeSpec(4, 2, 2, allow_small_a=True),
    LatticeSpec(4, 2, 4, allow_small_a=True),
    LatticeSpec(3, 3, 1, allow_small_a=True, rep_offset=-1),
]


def in_lattice_oracle(spec, t):
    """Integral coordinates with respect to the basis, by exact rational solve."""
    B = sympy.Matrix(lattice_basis(spec)).T
    coords = B.LUsolve(sympy.Matrix(t))
    return all(c.is_integer for c in coords)


def brute_membership(spec, t):
    n, a = spec.n, spec.a
    if any(v % a for v in t):
        return False
    q = [v // a for v in t]
    if spec.k == 1:
        return True
    if spec.k == 2:
        return sum(q) % 2 == 0
    return len({v % 2 for v in q}) == 1


vectors = st.integers(min_value=-60, max_value=60)


@pytest.mark.parametrize("spec", SPECS, ids=str)
def test_basis_spans_the_described_lattice(spec):
    det = abs(sympy.Matrix(lattice_basis(spec)).det())
    assert det == quotient_order(spec)
    rng = np.random.default_rng(3)
    for t in rng.integers(-3 * spec.a, 3 * spec.a, size=(200, spec.n)):
        t = [int(v) for v in t]
        assert in_lattice_oracle(spec, t) == brute_membership(spec, t)


@pytest.mark.parametrize("spec", SPECS, ids=str)
def test_representatives_fill_the_box_once(spec):
    box = [range(r) for r in spec.radices()]
    reps = [tuple(v + spec.rep_offset for v in c) for c in itertools.product(*box)]
    assert len(reps) == quotient_order(spec)
    for i, rep in enumerate(reps):
        assert reduce(spec, rep) == rep
        assert rank(spec, rep) == i
        assert unrank(spec, i) == rep


@settings(max_examples=200, deadline=None)
@given(data=st.data())
def test_reduce_is_the_canonical_coset_representative(data):
    spec = data.draw(st.sampled_from(SPECS))
    t = data.draw(st.lists(vectors, min_size=spec.n, max_size=spec.n))
    s = data.draw(st.lists(vectors, min_size=spec.n, max_size=spec.n))
    r = reduce(spec, t)
    assert reduce(spec, r) == r
    assert in_lattice_oracle(spec, [x - y for x, y in zip(t, r)])
    same_coset = in_lattice_oracle(spec, [x - y for x, y in zip(t, s)])
    assert (reduce(spec, s) == r) == same_coset
    assert contains(spec, [x - y for x, y in zip(t, s)]) == same_coset


@settings(max_examples=50, deadline=None)
@given(data=st.data())
def test_vectorised_reduce_matches_scalar(data):
    spec = data.draw(st.sampled_from(SPECS))
    rows = data.draw(st.lists(st.lists(vectors, min_size=spec.n, max_size=spec.n), min_size=1, max_size=20))
    arr = reduce_array(spec, np.array(rows))
    assert [tuple(map(int, r)) for r in arr] == [reduce(spec, r) for r in rows]
    idx = rank_array(spec, arr)
    assert np.array_equal(unrank_array(spec, idx), arr)


@pytest.mark.parametrize("spec", SPECS, ids=str)
def test_e1_order_by_iteration(spec):
    e1 = [1] + [0] * (spec.n - 1)
    m = 1
    while not contains(spec, [m * v for v in e1]):
        m += 1
    assert e1_order(spec) == m


def test_quotient_orders_of_named_instances():
    assert quotient_order(LatticeSpec(2, 13, 1)) == 169
    assert quotient_order(LatticeSpec(2, 13, 2)) == 338
    assert quotient_order(LatticeSpec(3, 19, 1)) == 6859
    assert quotient_order(LatticeSpec(3, 19, 2)) == 13718
    assert quotient_order(LatticeSpec(3, 19, 3)) == 27436


def test_rank_two_body_centred_is_face_centred():
    assert LatticeSpec(2, 13, 2).k == 2


@pytest.mark.parametrize(
    "kwargs",
    [dict(n=1, a=13, k=1), dict(n=2, a=0, k=1), dict(n=3, a=19, k=4), dict(n=2, a=12, k=1), dict(n=2, a=2.5, k=1)],
)
def test_invalid_specs_are_rejected(kwargs):
    with pytest.raises(LatticeError):
        LatticeSpec(**kwargs)


def test_small_a_needs_override():
    assert not LatticeSpec(2, 4, 1, allow_small_a=True).conforming
    assert LatticeSpec(2, 13, 1).conforming


def test_wrong_length_vector():
    with pytest.raises(LatticeError):
        reduce(LatticeSpec(2, 13, 1), (1, 2, 3))


def test_json_round_trip():
    for spec in SPECS:
        data = spec.to_json()
        assert set(data) >= {"n", "a", "k"}
        back = LatticeSpec.from_json(data, allow_small_a=True)
        assert (back.n, back.a, back.k, back.rep_offset) == (spec.n, spec.a, spec.k, spec.rep_offset)
    assert LatticeSpec(2, 13, 1).to_json() == {"n": 2, "a": 13, "k": 1}
    with pytest.raises(LatticeError):
        LatticeSpec.from_json({"n": 2, "a": 13})
