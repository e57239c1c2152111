"""Statistical inference for samples of phylogenetic trees in BHV tree space."""

__version__ = "0.1.0"

from .core import CoordinateFrame, PhyloTree, Split, TaxonSet, TreeError, splits_compatible, tree_from_splits
from .newick import NewickError, normalize_newick, parse_newick, read_newick_file, write_newick
from .geodesic import Geodesic, cone_distance, distance, geodesic, point_on_geodesic
from .logmap import LogMapVector, batch_log_map, log_map, log_map_matrix
from .frechet import MeanConfig, MeanResult, frechet_function, frechet_mean
from .inference import (
    ConfidenceReport,
    InferenceError,
    InferenceSummary,
    confidence_member,
    confidence_statistic,
    confidence_threshold,
    coordinate_intervals,
    levene_test,
    pca,
    split_support_test,
    summarize,
    summarize_vectors,
)
from .simulate import (
    CoverageResult,
    GeneratorError,
    GeneratorSpec,
    TreeSampler,
    coverage_experiment,
    nni_alternative,
    random_tree,
    sample_tree,
    sample_trees,
)

__all__ = [
    "CoordinateFrame",
    "PhyloTree",
    "Split",
    "TaxonSet",
    "TreeError",
    "splits_compatible",
    "tree_from_splits",
    "NewickError",
    "normalize_newick",
    "parse_newick",
    "read_newick_file",
    "write_newick",
    "Geodesic",
    "cone_distance",
    "distance",
    "geodesic",
    "point_on_geodesic",
    "LogMapVector",
    "batch_log_map",
    "log_map",
    "log_map_matrix",
    "MeanConfig",
    "MeanResult",
    "frechet_function",
    "frechet_mean",
    "ConfidenceReport",
    "InferenceError",
    "InferenceSummary",
    "confidence_member",
    "confidence_statistic",
    "confidence_threshold",
    "coordinate_intervals",
    "levene_test",
    "pca",
    "split_support_test",
    "summarize",
    "summarize_vectors",
    "CoverageResult",
    "GeneratorError",
    "GeneratorSpec",
    "TreeSampler",
    "coverage_experiment",
    "nni_alternative",
    "random_tree",
    "sample_tree",
    "sample_trees",
]
