import pytest

from chirex.extension import Extension, ExtensionSpec
from chirex.lattice import LatticeSpec
from chirex.toroid import ToroidContext

_CTX: dict = {}


def context(n, a, k, allow_small_a=False, rep_offset=0):
    key = (n, a, k, allow_small_a, rep_offset)
    if key not in _CTX:
        _CTX[key] = ToroidContext(LatticeSpec(n, a, k, allow_small_a=allow_small_a, rep_offset=rep_offset))
    return _CTX[key]


@pytest.fixture(scope="session")
def ctx2():
    return context(2, 13, 1)


@pytest.fixture(scope="session")
def ctx2k2():
    return context(2, 13, 2)


@pytest.fixture(scope="session")
def ctx3():
    return context(3, 19, 1)


@pytest.fixture(scope="session")
def flagship(ctx2):
    return Extension(ctx2, ExtensionSpec(ctx2.spec, 2029))


@pytest.fixture(scope="session")
def small_ext(ctx2):
    """The flagship facets with a single level triple: quick but conforming in a."""
    return Extension(ctx2, ExtensionSpec(ctx2.spec, 1))


@pytest.fixture(scope="session")
def toy_ext():
    ctx = context(2, 8, 1, allow_small_a=True)
    return Extension(ctx, ExtensionSpec(ctx.spec, 1))
