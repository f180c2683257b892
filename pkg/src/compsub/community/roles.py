"""Role adjacency and assortative / disassortative role classification."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .mapequation import Partition

__all__ = ["RoleType", "RoleAdjacency", "role_adjacency", "classify_roles", "write_role_adjacency_tsv"]


class RoleType(str, enum.Enum):
    ASSORTATIVE = "assortative"
    DISASSORTATIVE = "disassortative"
    MIXED = "mixed"


@dataclass
class RoleAdjacency:
    b: np.ndarray
    sizes: np.ndarray
    roles: np.ndarray  # role index of each row/column of b

    @property
    def n_roles(self) -> int:
        return self.b.shape[0]


def role_adjacency(weights, partition: Partition, drop_isolated: bool = False) -> RoleAdjacency:
    """Mean weight between roles: B[r, s] = sum of W over r x s / (n_r n_s).

    The diagonal block includes W's diagonal (normally zero), so a singleton
    role has B[r, r] = W_ii.
    """
    w = np.asarray(weights, dtype=float)
    a = partition.assignment
    if w.shape != (len(a), len(a)):
        raise ValueError("partition does not cover the graph's nodes")
    roles = np.arange(partition.n_roles)
    if drop_isolated:
        iso_roles = np.unique(a[partition.isolated])
        roles = np.setdiff1d(roles, iso_roles)
    onehot = (a[:, None] == roles[None, :]).astype(float)
    sizes = onehot.sum(axis=0)
    sums = onehot.T @ w @ onehot
    b = sums / np.outer(sizes, sizes)
    return RoleAdjacency(b, sizes.astype(np.int64), roles)


def classify_roles(adj, dominance_ratio: float = 3.0) -> list:
    b = np.asarray(adj.b if isinstance(adj, RoleAdjacency) else adj, dtype=float)
    if dominance_ratio <= 0:
        raise ValueError("dominance_ratio must be positive")
    out = []
    for r in range(b.shape[0]):
        diag = b[r, r]
        off = np.delete(b[r], r)
        top = float(off.max()) if off.size else 0.0
        if diag > 0 and diag >= dominance_ratio * top:
            out.append(RoleType.ASSORTATIVE)
        elif top > 0 and top >= dominance_ratio * diag:
            out.append(RoleType.DISASSORTATIVE)
        else:
            out.append(RoleType.MIXED)
    return out


def write_role_adjacency_tsv(adj: RoleAdjacency, path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write("role\t" + "\t".join(str(r) for r in adj.roles) + "\n")
        for r, row in zip(adj.roles, adj.b):
            fh.write(f"{r}\t" + "\t".join(f"{v:.12g}" for v in row) + "\n")
