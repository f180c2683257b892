"""Partition comparison: normalised and adjusted mutual information.

NMI divides by the arithmetic mean of the two entropies. AMI subtracts the
expected mutual information under random label permutation with fixed
cluster sizes (hypergeometric model). Degenerate cases follow the usual
conventions: two one-cluster labelings, or two all-singleton labelings,
score 1.
"""

from __future__ import annotations

import numpy as np
from scipy.special import gammaln

__all__ = ["contingency", "mutual_information", "entropy", "expected_mutual_information", "nmi", "ami"]


def _labels(p) -> np.ndarray:
    return np.asarray(getattr(p, "assignment", p))


def contingency(p1, p2) -> np.ndarray:
    a, b = _labels(p1), _labels(p2)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("partitions must cover the same node set")
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    table = np.zeros((ia.max() + 1 if ia.size else 0, ib.max() + 1 if ib.size else 0), dtype=np.int64)
    np.add.at(table, (ia, ib), 1)
    return table


def entropy(counts) -> float:
    c = np.asarray(counts, dtype=float)
    c = c[c > 0]
    if c.size == 0:
        return 0.0
    p = c / c.sum()
    return float(-(p * np.log(p)).sum())


def mutual_information(table: np.ndarray) -> float:
    t = np.asarray(table, dtype=float)
    n = t.sum()
    rows, cols = t.sum(axis=1), t.sum(axis=0)
    i, j = np.nonzero(t)
    nij = t[i, j]
    mi = (nij / n) * (np.log(nij * n) - np.log(rows[i] * cols[j]))
    return max(float(mi.sum()), 0.0)


def expected_mutual_information(table: np.ndarray) -> float:
    """E[MI] over all tables with the given margins (nats)."""
    t = np.asarray(table, dtype=np.int64)
    n = int(t.sum())
    a = t.sum(axis=1)
    b = t.sum(axis=0)
    emi = 0.0
    lg_n = gammaln(n + 1)
    for ai in a:
        for bj in b:
            lo = max(1, ai + bj - n)
            hi = min(ai, bj)
            if lo > hi:
                continue
            nij = np.arange(lo, hi + 1, dtype=float)
            term = (nij / n) * (np.log(n * nij) - np.log(float(ai) * bj))
            log_p = (
                gammaln(ai + 1) + gammaln(bj + 1) + gammaln(n - ai + 1) + gammaln(n - bj + 1)
                - lg_n - gammaln(nij + 1) - gammaln(ai - nij + 1) - gammaln(bj - nij + 1)
                - gammaln(n - ai - bj + nij + 1)
            )
            emi += float((term * np.exp(log_p)).sum())
    return emi


def _trivial(table: np.ndarray) -> bool:
    """Degenerate or identical-up-to-relabelling partitions, scored exactly 1."""
    r, c = table.shape
    return r == c == np.count_nonzero(table)


def nmi(p1, p2) -> float:
    table = contingency(p1, p2)
    if _trivial(table):
        return 1.0
    mi = mutual_information(table)
    h = 0.5 * (entropy(table.sum(axis=1)) + entropy(table.sum(axis=0)))
    if h <= 0:
        return 1.0
    return float(min(1.0, mi / h))


def ami(p1, p2) -> float:
    table = contingency(p1, p2)
    if _trivial(table):
        return 1.0
    mi = mutual_information(table)
    emi = expected_mutual_information(table)
    h = 0.5 * (entropy(table.sum(axis=1)) + entropy(table.sum(axis=0)))
    denom = h - emi
    eps = np.finfo(float).eps
    if abs(denom) < eps:
        denom = eps if denom >= 0 else -eps
    return float((mi - emi) / denom)
