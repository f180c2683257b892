"""Bipartite product-purchase network built from transaction records."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
import scipy.sparse as sp

logger = logging.getLogger(__name__)

__all__ = [
    "TransactionRecord",
    "FrequencyFilter",
    "BipartiteNetwork",
    "EmptyNetworkError",
    "build_network",
    "network_from_biadjacency",
    "co_purchase_counts",
    "read_transactions_csv",
    "write_transactions_csv",
    "write_edge_list",
]


class EmptyNetworkError(ValueError):
    """Raised when filtering leaves no transactions or no products."""


@dataclass(frozen=True)
class TransactionRecord:
    transaction_id: str
    product_id: str
    quantity: int = 1
    date: Optional[str] = None

    def __post_init__(self):
        if self.quantity < 1:
            raise ValueError(f"quantity must be >= 1, got {self.quantity}")


@dataclass(frozen=True)
class FrequencyFilter:
    """Drop products bought in fewer than ``min_count`` transactions or in
    more than ``max_fraction`` of all transactions."""

    min_count: int = 1
    max_fraction: float = 1.0

    def __post_init__(self):
        if self.min_count < 1:
            raise ValueError("min_count must be >= 1")
        if not 0 < self.max_fraction <= 1:
            raise ValueError("max_fraction must lie in (0, 1]")


@dataclass(frozen=True, eq=False)
class BipartiteNetwork:
    """Transactions x products incidence structure.

    ``biadjacency`` is stored CSC so product columns are cheap to walk.
    The object is treated as immutable once built.
    """

    biadjacency: sp.csc_matrix
    transaction_labels: tuple
    product_labels: tuple
    d_t: np.ndarray = field(init=False)
    d_p: np.ndarray = field(init=False)

    def __post_init__(self):
        a = sp.csc_matrix(self.biadjacency, dtype=np.int64)
        a.sum_duplicates()
        a.eliminate_zeros()
        if a.nnz and (a.data != 1).any():
            raise ValueError("biadjacency entries must be 0 or 1")
        if a.shape != (len(self.transaction_labels), len(self.product_labels)):
            raise ValueError("label tables do not match the biadjacency shape")
        object.__setattr__(self, "biadjacency", a)
        d_t = np.asarray(a.sum(axis=1)).ravel().astype(np.int64)
        d_p = np.asarray(a.sum(axis=0)).ravel().astype(np.int64)
        d_t.setflags(write=False)
        d_p.setflags(write=False)
        object.__setattr__(self, "d_t", d_t)
        object.__setattr__(self, "d_p", d_p)

    @property
    def n_t(self) -> int:
        return self.biadjacency.shape[0]

    @property
    def n_p(self) -> int:
        return self.biadjacency.shape[1]

    @property
    def m(self) -> int:
        return int(self.biadjacency.nnz)

    def product_index(self, product_id: str) -> int:
        return self._product_lookup[product_id]

    @property
    def _product_lookup(self) -> dict:
        lookup = self.__dict__.get("_lookup_cache")
        if lookup is None:
            lookup = {p: i for i, p in enumerate(self.product_labels)}
            object.__setattr__(self, "_lookup_cache", lookup)
        return lookup

    def dense(self) -> np.ndarray:
        return self.biadjacency.toarray()

    def __eq__(self, other):
        if not isinstance(other, BipartiteNetwork):
            return NotImplemented
        return (
            self.transaction_labels == other.transaction_labels
            and self.product_labels == other.product_labels
            and self.biadjacency.shape == other.biadjacency.shape
            and (self.biadjacency != other.biadjacency).nnz == 0
        )

    __hash__ = None

    def summary(self) -> dict:
        return {
            "n_transactions": self.n_t,
            "n_products": self.n_p,
            "n_edges": self.m,
            "mean_basket_size": float(self.d_t.mean()) if self.n_t else 0.0,
            "max_basket_size": int(self.d_t.max()) if self.n_t else 0,
            "mean_product_degree": float(self.d_p.mean()) if self.n_p else 0.0,
            "max_product_degree": int(self.d_p.max()) if self.n_p else 0,
        }


def network_from_biadjacency(matrix, transaction_labels=None, product_labels=None) -> BipartiteNetwork:
    """Wrap a 0/1 matrix (dense or sparse) as a network; labels default to indices."""
    a = sp.csc_matrix(matrix)
    n_t, n_p = a.shape
    if transaction_labels is None:
        transaction_labels = tuple(f"t{k}" for k in range(n_t))
    if product_labels is None:
        product_labels = tuple(f"p{k}" for k in range(n_p))
    return BipartiteNetwork(a, tuple(transaction_labels), tuple(product_labels))


def build_network(
    records: Iterable[TransactionRecord], filter: Optional[FrequencyFilter] = None
) -> BipartiteNetwork:
    """Build the product-purchase network.

    Quantities are ignored: an edge means "bought at least once". Products
    failing the frequency filter are removed first, then any transaction
    left empty. Row and column order follow a lexicographic sort of ids.
    """
    filter = filter or FrequencyFilter()
    pairs = {(r.transaction_id, r.product_id) for r in records}
    if not pairs:
        raise ValueError("no transaction records given")

    n_t_raw = len({t for t, _ in pairs})
    counts: dict = {}
    for _, p in pairs:
        counts[p] = counts.get(p, 0) + 1
    max_count = filter.max_fraction * n_t_raw
    keep = {p for p, c in counts.items() if c >= filter.min_count and c <= max_count}
    dropped = len(counts) - len(keep)
    pairs = {(t, p) for t, p in pairs if p in keep}

    t_labels = tuple(sorted({t for t, _ in pairs}))
    p_labels = tuple(sorted({p for _, p in pairs}))
    if not t_labels or not p_labels:
        raise EmptyNetworkError(
            f"network empty after filtering: {len(t_labels)} transactions and "
            f"{len(p_labels)} products survive (from {n_t_raw} transactions, {len(counts)} products)"
        )
    if dropped:
        logger.info("frequency filter removed %d of %d products", dropped, len(counts))

    t_index = {t: k for k, t in enumerate(t_labels)}
    p_index = {p: k for k, p in enumerate(p_labels)}
    ordered = sorted(pairs)
    rows = np.fromiter((t_index[t] for t, _ in ordered), dtype=np.int64, count=len(ordered))
    cols = np.fromiter((p_index[p] for _, p in ordered), dtype=np.int64, count=len(ordered))
    a = sp.csc_matrix(
        (np.ones(len(ordered), dtype=np.int64), (rows, cols)), shape=(len(t_labels), len(p_labels))
    )
    return BipartiteNetwork(a, t_labels, p_labels)


def co_purchase_counts(net: BipartiteNetwork) -> np.ndarray:
    """Common-neighbour counts ``cn = A^T A`` as a dense symmetric array.

    The diagonal holds each product's purchase frequency.
    """
    a = net.biadjacency
    return np.asarray((a.T @ a).toarray(), dtype=np.int64)


def read_transactions_csv(path) -> list[TransactionRecord]:
    """Read ``transaction_id,date,product_id,quantity`` (quantity optional)."""
    path = Path(path)
    records = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"transaction_id", "product_id"} - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for lineno, row in enumerate(reader, start=2):
            qty = (row.get("quantity") or "").strip()
            try:
                quantity = int(qty) if qty else 1
                records.append(
                    TransactionRecord(
                        row["transaction_id"].strip(),
                        row["product_id"].strip(),
                        quantity,
                        (row.get("date") or "").strip() or None,
                    )
                )
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    return records


def write_transactions_csv(records: Sequence[TransactionRecord], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["transaction_id", "date", "product_id", "quantity"])
        for r in records:
            writer.writerow([r.transaction_id, r.date or "", r.product_id, r.quantity])


def write_edge_list(net: BipartiteNetwork, path) -> None:
    """TSV ``transaction_id<TAB>product_id``, one row per edge."""
    coo = net.biadjacency.tocoo()
    order = np.lexsort((coo.col, coo.row))
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write("transaction_id\tproduct_id\n")
        for k in order:
            fh.write(f"{net.transaction_labels[coo.row[k]]}\t{net.product_labels[coo.col[k]]}\n")
