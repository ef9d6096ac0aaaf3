"""Adaptive hierarchical decomposition for range queries under local
differential privacy, with HIO, DHT and uniform baselines."""

from .errors import AheadError, ConfigurationError, IngestionError, InputError
from .fo import FrequencyEstimate, Mechanism, OracleConfig
from .regions import Box, Interval
from .tree import (AheadParams, TreeNode, answer_range, build_tree, compute_params,
                   norm_sub, optimal_fanout, post_process)
from .grid2d import answer_range_2d, build_tree_2d, compute_params_2d
from .highdim import (TreeForest, answer_md_query, build_de_tree, build_lle_forest,
                      enforce_attribute_consistency)
from .data import Dataset, SyntheticSpec, gen_synthetic, ingest_csv, partition_users
from .bench import ExperimentConfig, Method, MseReport, run_experiment

__version__ = "0.1.0"

__all__ = [
    "AheadError", "ConfigurationError", "IngestionError", "InputError",
    "FrequencyEstimate", "Mechanism", "OracleConfig", "Box", "Interval",
    "AheadParams", "TreeNode", "answer_range", "build_tree", "compute_params",
    "norm_sub", "optimal_fanout", "post_process",
    "answer_range_2d", "build_tree_2d", "compute_params_2d",
    "TreeForest", "answer_md_query", "build_de_tree", "build_lle_forest",
    "enforce_attribute_consistency",
    "Dataset", "SyntheticSpec", "gen_synthetic", "ingest_csv", "partition_users",
    "ExperimentConfig", "Method", "MseReport", "run_experiment",
]
