import pytest

from nogrowth.canopy import Truncation
from nogrowth.overlay import W_I, W_STAR_J, OverlayGraph
from nogrowth.partition import level_cuts, select_J


@pytest.fixture(scope="session")
def wi_small():
    """W_I on a depth-12 truncation, fully materialized."""
    t = Truncation(12)
    g = OverlayGraph(level_cuts((3, 7, 11), t), 3, seed=1)
    g.materialize_all()
    return g


@pytest.fixture(scope="session")
def wj_small():
    t = Truncation(14)
    J = select_J((3, 8, 13), "1/24", 25, 0, 3, t, strict=False)
    g = OverlayGraph(J, 3, seed=3, variant=W_STAR_J, eps="1/24")
    g.materialize_all()
    return g


@pytest.fixture(scope="session")
def U_default():
    from nogrowth.product import ProductConfig, build_U
    return build_U(ProductConfig())
