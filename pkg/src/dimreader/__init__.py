"""Generalised axes for non-linear dimensionality reduction plots.

Each projection (PCA, Isomap, LLE, t-SNE) is written once over dual
numbers, so a single run returns both the projected points and their
derivative along an input perturbation.
"""

from .datasets import Dataset, generate, load_csv, load_dataset, load_idx
from .discovery import (
    DiscoveryResult,
    TangentMap,
    build_tangent_map,
    discover_global,
    discover_per_point,
    perturbation_report,
)
from .dual import Dual, DualArray
from .estimator import DimReader, PerturbationDiscovery
from .exceptions import (
    ConfigError,
    DegenerateCovariance,
    DimReaderError,
    DisconnectedGraph,
    DomainError,
    EmptyDataset,
    FixedPointMismatch,
    NoConvergence,
    NonNumericCell,
    ParseError,
    SingularSystem,
)
from .extraction import (
    PerturbationField,
    PerturbationVectors,
    extract_one_at_a_time,
    extract_randomized_halves,
    measure_off_point_effects,
)
from .field import IsolineSet, ScalarGrid, fit_scalar_field, marching_squares
from .projections import LLE, PCA, TSNE, Isomap, ProjectionConfig, make_projection
from .render import render_axes, render_svg

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "Dataset",
    "DegenerateCovariance",
    "DimReader",
    "DimReaderError",
    "DisconnectedGraph",
    "DiscoveryResult",
    "DomainError",
    "Dual",
    "DualArray",
    "EmptyDataset",
    "FixedPointMismatch",
    "Isomap",
    "IsolineSet",
    "LLE",
    "NoConvergence",
    "NonNumericCell",
    "PCA",
    "ParseError",
    "PerturbationDiscovery",
    "PerturbationField",
    "PerturbationVectors",
    "ProjectionConfig",
    "ScalarGrid",
    "SingularSystem",
    "TSNE",
    "TangentMap",
    "build_tangent_map",
    "discover_global",
    "discover_per_point",
    "extract_one_at_a_time",
    "extract_randomized_halves",
    "fit_scalar_field",
    "generate",
    "load_csv",
    "load_dataset",
    "load_idx",
    "make_projection",
    "marching_squares",
    "measure_off_point_effects",
    "perturbation_report",
    "render_axes",
    "render_svg",
]
