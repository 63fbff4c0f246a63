"""Unimodular random graphs without a growth rate: canopy-tree partitions,
girth-graph overlays, the product construction and a measurement lab."""

from .canopy import RootLaw, Truncation, VertexAddr, sample_root
from .errors import NoGrowthError
from .girthgraph import GirthGraph, GWOracle, generate, generate_constrained, girth
from .overlay import W_I, W_STAR_J, OverlayGraph, witness_lower, witness_upper
from .partition import level_cuts, select_J
from .product import UT3, ProductConfig, UGraph, build_U

__all__ = [
    "RootLaw", "Truncation", "VertexAddr", "sample_root", "NoGrowthError", "GirthGraph",
    "GWOracle", "generate", "generate_constrained", "girth", "W_I", "W_STAR_J",
    "OverlayGraph", "witness_lower", "witness_upper", "level_cuts", "select_J", "UT3",
    "ProductConfig", "UGraph", "build_U",
]
__version__ = "0.1.0"
