"""Complement and substitute product relations from transaction data."""

from importlib import metadata

try:
    __version__ = metadata.version("artifact")
except metadata.PackageNotFoundError:  # running from a source tree
    __version__ = "0.0.0"

from .network import BipartiteNetwork, FrequencyFilter, TransactionRecord, build_network, co_purchase_counts
from .nullmodels import NullModel, NullModelSpec, RelationMatrices, relation_matrices
from .measures import Measure, ScoreMatrix, build_weighted_networks, complement_measure
from .pipeline import PipelineConfig, detect_roles, score_network

__all__ = [
    "__version__",
    "BipartiteNetwork", "FrequencyFilter", "TransactionRecord", "build_network", "co_purchase_counts",
    "NullModel", "NullModelSpec", "RelationMatrices", "relation_matrices",
    "Measure", "ScoreMatrix", "build_weighted_networks", "complement_measure",
    "PipelineConfig", "detect_roles", "score_network",
]
