import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chirex import cubegroup
from chirex.extension import (
    CASE2_POWERS,
    DISTINGUISHED,
    ExtensionError,
    ExtensionSpec,
    ExtPoint,
    Extension,
    LevelClass,
    build_roots,
    invert_word,
    level_class,
    s_word_to_xi,
    word_for_monodromy_element,
    xi_apply,
    xi_last_apply,
)
from chirex.lattice import LatticeSpec
from chirex.toroid import base_flag, h_apply, hbar_apply, is_white, monodromy_apply, vertex_of
from conftest import context


def test_level_classes():
    assert level_class(1) == LevelClass.EXACTLY_ONE
    assert [level_class(l) for l in (4, 7, 3010)] == [LevelClass.ONE_MOD3] * 3
    assert [level_class(l) for l in (0, 2, 3, 5, 6)] == [LevelClass.OTHER] * 5


def test_domain_size_of_the_flagship(flagship):
    assert flagship.size == 676 * 3 * 2029 == 4_114_812


def test_spec_validation_and_conformance():
    spec = LatticeSpec(2, 13, 1)
    with pytest.raises(ExtensionError):
        ExtensionSpec(spec, 0)
    assert ExtensionSpec(spec, 2029).chirality_conforming(676)
    assert not ExtensionSpec(spec, 2027).chirality_conforming(676)
    assert not ExtensionSpec(spec, 2030).chirality_conforming(676)
    assert not ExtensionSpec(spec, 5).chirality_conforming(676)
    assert ExtensionSpec(spec, 7).to_json() == {"toroid": {"n": 2, "a": 13, "k": 1}, "p": 7}


def test_point_encoding_round_trip(flagship):
    rng = np.random.default_rng(0)
    for idx in rng.integers(0, flagship.size, size=500):
        assert flagship.encode(flagship.decode(idx)) == idx
    with pytest.raises(ExtensionError):
        flagship.encode(ExtPoint(flagship.W, 0))


def test_roots_follow_their_rules(small_ext):
    ctx, roots = small_ext.ctx, small_ext.roots
    base = base_flag(ctx)
    assert set(roots.distinguished) == set(DISTINGUISHED)
    for i, f in roots.phis.items():
        assert f == h_apply(ctx, base, i)
    assert len(set(roots.distinguished.values())) == len(DISTINGUISHED)
    for (facet, cls), entry in roots.entries.items():
        assert entry.root.trans == facet
        assert is_white(ctx, entry.root)
        g = roots.multiplier(facet, cls)
        assert cubegroup.mul(g, g) == cubegroup.identity(ctx.n)
        if entry.case == 1:
            assert entry.root in roots.phis.values() and entry.rho_index == 0
        elif entry.case == 3:
            assert cls == LevelClass.EXACTLY_ONE and facet in roots.holes
            assert vertex_of(ctx, entry.root) == roots.x_h and entry.rho_index == 1
        elif entry.case == 2:
            assert cls == LevelClass.OTHER and facet not in roots.distinguished.values()
            assert entry.root == roots.case2_candidates[facet][0][2]
    # every case-2 candidate is a translate of a white base-facet flag by hbar^j
    for facet, cands in roots.case2_candidates.items():
        for j, phi, root in cands:
            assert j in CASE2_POWERS and phi.trans == ctx.zero and hbar_apply(ctx, phi, j) == root
    assert len(roots.holes) == 2**ctx.n
    assert all(vertex_of(ctx, f) == roots.x_h for f in [roots.root(h, LevelClass.EXACTLY_ONE).root for h in roots.holes])


def test_uncovered_facets_use_the_default_root(small_ext):
    roots = small_ext.roots
    facet = (6, 6)
    assert all((facet, c) not in roots.entries for c in LevelClass)
    entry = roots.root(facet, LevelClass.OTHER)
    assert entry.case == 4 and entry.root == base_flag(small_ext.ctx)._replace(trans=facet)


def test_multi_root_facets_coincide(small_ext):
    # regression: 12 facets carry more than one candidate root and all agree
    co = small_ext.roots.coincidences
    assert len(co) == 12 and all(c["coincide"] for c in co)


def test_root_table_json(small_ext):
    data = small_ext.roots.to_json()
    assert data["x_h"] == list(small_ext.roots.x_h)
    assert len(data["entries"]) == len(small_ext.roots.entries)


def test_tiny_lattices_cannot_host_the_construction():
    for a in (4, 5, 6, 7):
        ctx = context(2, a, 1, allow_small_a=True)
        with pytest.raises(ExtensionError):
            build_roots(ctx, ExtensionSpec(ctx.spec, 1))


def test_flag_generators_match_scalar_route(small_ext):
    rng = np.random.default_rng(1)
    for idx in rng.integers(0, small_ext.size, size=300):
        pt = small_ext.decode(idx)
        for i in range(1, small_ext.n + 1):
            got = small_ext.xi(i)(np.array([idx]))[0]
            assert small_ext.decode(got) == xi_apply(small_ext, i, pt)


@pytest.mark.parametrize("p", [1, 2, 5])
def test_last_generator_matches_scalar_route(p):
    ctx = context(2, 13, 1)
    ext = Extension(ctx, ExtensionSpec(ctx.spec, p))
    table = ext.xi(ext.n + 1).table()
    for idx in range(0, ext.size, 7):
        assert ext.decode(table[idx]) == xi_last_apply(ext, ext.roots, ext.decode(idx))


def test_last_generator_on_rank_five():
    ctx = context(3, 19, 1)
    ext = Extension(ctx, ExtensionSpec(ctx.spec, 1))
    rng = np.random.default_rng(5)
    idx = rng.integers(0, ext.size, size=2000)
    got = ext.xi(4)(idx)
    for i, g in zip(idx, got):
        assert ext.decode(g) == xi_last_apply(ext, ext.roots, ext.decode(i))


def test_generators_are_involutions_where_required(small_ext):
    idx = np.arange(small_ext.size)
    x = small_ext.xi(small_ext.n + 1)
    assert np.array_equal(x(x(idx)), idx)
    s = small_ext.varsigma(small_ext.n + 1)
    assert np.array_equal(s.inverse(s(idx)), idx)


def test_words_evaluate_to_the_maps_they_name(small_ext):
    ext = small_ext
    idx = np.arange(ext.size)
    phi1 = ext.roots.phis[1]
    word = word_for_monodromy_element(ext.ctx, phi1)
    f = base_flag(ext.ctx)
    for i in reversed(word):
        f = monodromy_apply(ext.ctx, i - 1, monodromy_apply(ext.ctx, i, f))
    assert f == phi1
    assert np.array_equal(ext.word_map(ext.h_word())(idx), ext.h(1)(idx))
    assert np.array_equal(ext.word_map(ext.mu_word())(idx), ext.mu()(idx))
    mu = ext.mu()
    assert np.array_equal(ext.word_map(invert_word(ext.mu_word()))(mu(idx)), idx)


def test_s_words_translate_to_xi_words():
    assert s_word_to_xi([1, 2, 3]) == ((1, 1), (1, -1), (2, 1), (2, -1), (3, 1))
    assert invert_word(((1, 1), (2, -1))) == ((2, 1), (1, -1))


def test_bad_arguments(small_ext):
    with pytest.raises(ExtensionError):
        small_ext.xi_table(3)
    with pytest.raises(ExtensionError):
        small_ext.varsigma(4)
    with pytest.raises(ExtensionError):
        small_ext.word_map(((5, 1),))
    with pytest.raises(ExtensionError):
        word_for_monodromy_element(small_ext.ctx, monodromy_apply(small_ext.ctx, 0, base_flag(small_ext.ctx)))


@settings(max_examples=40, deadline=None)
@given(data=st.data())
def test_varsigma_is_a_flag_map_below_the_top(data):
    ext = context_ext()
    i = data.draw(st.integers(1, ext.n))
    idx = data.draw(st.integers(0, ext.size - 1))
    pt = ext.decode(idx)
    img = ext.decode(ext.varsigma(i)(np.array([idx]))[0])
    assert img.level == pt.level


_EXT = {}


def context_ext():
    if "e" not in _EXT:
        ctx = context(2, 13, 2)
        _EXT["e"] = Extension(ctx, ExtensionSpec(ctx.spec, 3))
    return _EXT["e"]
