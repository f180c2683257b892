"""Role extraction: map-equation communities, partition metrics, role
adjacency, and parameter calibration."""

from .calibrate import Baseline, CalibrationGrid, CalibrationResult, calibrate, partition_of, write_trace_tsv
from .mapequation import Partition, codelength, detect_communities, map_equation_codelength, symmetrize
from .metrics import ami, contingency, expected_mutual_information, mutual_information, nmi
from .roles import RoleAdjacency, RoleType, classify_roles, role_adjacency, write_role_adjacency_tsv

__all__ = [
    "Baseline", "CalibrationGrid", "CalibrationResult", "calibrate", "partition_of", "write_trace_tsv",
    "Partition", "codelength", "detect_communities", "map_equation_codelength", "symmetrize",
    "ami", "contingency", "expected_mutual_information", "mutual_information", "nmi",
    "RoleAdjacency", "RoleType", "classify_roles", "role_adjacency", "write_role_adjacency_tsv",
]
