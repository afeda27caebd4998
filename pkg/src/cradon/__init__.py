"""Complex Radon transform in C^2: forward, dual and inversion, its
distributional extension, and the geometry behind the support theorem."""

from .distributions import Mollifier, PointMass, TestDistribution, apply, mollified, mollify, radon_pair
from .geometry import (
    Ball,
    CompactSet,
    EmbeddedAnnulus,
    FinitePointSet,
    Hyperplane,
    NoEscapePath,
    NoSeparatingHyperplane,
    Polydisc,
    Union,
    canonicalize,
    complement_connected,
    count_components,
    dilate,
    escape_path,
    find_separating_hyperplane,
    hat_contains,
    hat_dilate_contains,
    is_linearly_convex,
    pairing,
    project,
)
from .numerics import SGrid, Sinogram, SphereGrid, gauss_legendre, integrate_sphere, sphere_grid, tree_sum
from .transform import (
    ANALYTIC_CN,
    Bump,
    Combination,
    DerivativeOf,
    Gaussian,
    GaussianPoly,
    QuadParams,
    TestFunction,
    VolumeGrid,
    calibrate_cn,
    dual,
    forward,
    forward_sinogram,
    invert,
    real_radon_direct,
    real_radon_from_complex,
)
from .xfunctions import Indicator, XFunction, bump_s, gaussian_s

__version__ = "0.1.0"

__all__ = [
    "ANALYTIC_CN",
    "apply",
    "Ball",
    "Bump",
    "bump_s",
    "calibrate_cn",
    "canonicalize",
    "Combination",
    "CompactSet",
    "complement_connected",
    "count_components",
    "DerivativeOf",
    "dilate",
    "dual",
    "EmbeddedAnnulus",
    "escape_path",
    "find_separating_hyperplane",
    "FinitePointSet",
    "forward",
    "forward_sinogram",
    "gauss_legendre",
    "Gaussian",
    "gaussian_s",
    "GaussianPoly",
    "hat_contains",
    "hat_dilate_contains",
    "Hyperplane",
    "Indicator",
    "integrate_sphere",
    "invert",
    "is_linearly_convex",
    "mollified",
    "Mollifier",
    "mollify",
    "NoEscapePath",
    "NoSeparatingHyperplane",
    "pairing",
    "PointMass",
    "Polydisc",
    "project",
    "QuadParams",
    "radon_pair",
    "real_radon_direct",
    "real_radon_from_complex",
    "SGrid",
    "Sinogram",
    "sphere_grid",
    "SphereGrid",
    "TestDistribution",
    "TestFunction",
    "tree_sum",
    "Union",
    "VolumeGrid",
    "XFunction",
    "__version__",
]
