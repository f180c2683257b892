"""Significance tests on co-purchase counts and the four relation matrices.

Each test flags product pairs whose number of common transactions is
significantly more (``a_more``) or significantly less (``a_less``) than a
null model predicts. Complements and substitutes are then derived from
those two matrices.
"""

from __future__ import annotations

import enum
import logging
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import stats

from .network import BipartiteNetwork, co_purchase_counts
from .pbstats import (
    PoissonBinomial,
    chernoff_lower_exponent,
    chernoff_upper_exponent,
    poisson_cdf,
    poisson_sf,
)

logger = logging.getLogger(__name__)

__all__ = [
    "NullModel",
    "NullModelSpec",
    "RelationMatrices",
    "er_variant_test",
    "bicm_pair_mean",
    "bicm_pair_means",
    "bicm_pair_distribution",
    "bicm_edge_prob",
    "bicm_multiedge_expectation",
    "bicm_poisson_test",
    "bicm_chernoff_test",
    "derive_relations",
    "relation_matrices",
    "poisson_diagnostics",
    "write_relations_tsv",
]


class NullModel(str, enum.Enum):
    ER_VARIANT = "er"
    BICM_POISSON = "bicm-poisson"
    BICM_CHERNOFF = "bicm-chernoff"


@dataclass(frozen=True)
class NullModelSpec:
    kind: NullModel = NullModel.ER_VARIANT
    alpha_m: float = 0.05
    alpha_l: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "kind", NullModel(self.kind))
        for name in ("alpha_m", "alpha_l"):
            val = getattr(self, name)
            if not 0 < val < 1:
                raise ValueError(f"{name} must lie in (0, 1), got {val}")


@dataclass(frozen=True)
class RelationMatrices:
    """Boolean product-pair matrices; all symmetric with zero diagonal.

    ``a_comp`` and ``a_subs`` stay ``None`` until :func:`derive_relations`.
    """

    a_more: np.ndarray
    a_less: np.ndarray
    a_comp: Optional[np.ndarray] = None
    a_subs: Optional[np.ndarray] = None

    def pairs(self, name: str) -> set:
        mat = getattr(self, name)
        i, j = np.nonzero(np.triu(mat, 1))
        return set(zip(i.tolist(), j.tolist()))

    def same_as(self, other: "RelationMatrices") -> bool:
        for name in ("a_more", "a_less", "a_comp", "a_subs"):
            x, y = getattr(self, name), getattr(other, name)
            if (x is None) != (y is None):
                return False
            if x is not None and not np.array_equal(x, y):
                return False
        return True


def _finish(more: np.ndarray, less: np.ndarray, cn: np.ndarray, mean: np.ndarray) -> RelationMatrices:
    # Both flags can fire only when alpha_m + alpha_l > 1; keep the side of the mean the count lies on.
    both = more & less
    if both.any():
        more = more & ~(both & (cn < mean))
        less = less & ~(both & (cn >= mean))
    np.fill_diagonal(more, False)
    np.fill_diagonal(less, False)
    return RelationMatrices(more, less)


def _check_cn(net: BipartiteNetwork, cn: Optional[np.ndarray]) -> np.ndarray:
    if cn is None:
        return co_purchase_counts(net)
    cn = np.asarray(cn)
    if cn.shape != (net.n_p, net.n_p):
        raise ValueError("co-purchase matrix does not match the network")
    return cn


def er_variant_test(
    net: BipartiteNetwork,
    cn: Optional[np.ndarray],
    alpha_m: float,
    alpha_l: float,
    min_transactions: int = 30,
) -> RelationMatrices:
    """Bipartite ER variant with per-product connection probabilities.

    cn_ij ~ Binomial(n_t, p_i p_j) with p_i = d_i / n_t, tested through its
    normal approximation. Inequalities are strict.
    """
    if net.n_t < min_transactions:
        raise ValueError(
            f"normal approximation needs at least {min_transactions} transactions, got {net.n_t}"
        )
    cn = _check_cn(net, cn)
    p = net.d_p / net.n_t
    pp = np.outer(p, p)
    mean = net.n_t * pp
    sd = np.sqrt(net.n_t * pp * (1.0 - pp))
    degenerate = (p <= 0) | (p >= 1)
    skip = degenerate[:, None] | degenerate[None, :]
    if skip.any():
        n_skip = int(np.triu(skip, 1).sum())
        warnings.warn(f"{n_skip} pairs involve a product with p in {{0, 1}} and were skipped", RuntimeWarning)
    z_m = stats.norm.ppf(1.0 - alpha_m)
    z_l = stats.norm.ppf(1.0 - alpha_l)
    more = (cn > mean + z_m * sd) & ~skip
    less = (cn < mean - z_l * sd) & ~skip
    return _finish(more, less, cn, mean)


def _kappa(d_t: np.ndarray) -> float:
    """(<d^2> - <d>) / <d> for a degree sequence."""
    d = d_t.astype(float)
    return float((d * (d - 1)).sum() / d.sum())


def bicm_pair_mean(net: BipartiteNetwork, i: int, j: int) -> float:
    """Expected common neighbours of products i != j under the BiCM."""
    if i == j:
        raise ValueError("pair mean is defined for i != j")
    return float(net.d_p[i]) * float(net.d_p[j]) / net.m * _kappa(net.d_t)


def bicm_pair_means(net: BipartiteNetwork) -> np.ndarray:
    """All pairwise BiCM means; the diagonal is left at the formula value."""
    d = net.d_p.astype(float)
    return np.outer(d, d) / net.m * _kappa(net.d_t)


def bicm_edge_prob(net: BipartiteNetwork, l: int, i: int) -> float:
    """d_t[l] d_p[i] / m, the sparse-limit probability of edge (l, i)."""
    return float(net.d_t[l]) * float(net.d_p[i]) / net.m


def bicm_multiedge_expectation(net: BipartiteNetwork) -> float:
    """Sum over (l, i) of d_l d_i (d_l - 1)(d_i - 1) / m^2."""
    return _kappa(net.d_t) * _kappa(net.d_p)


def _degree_histogram(d_t: np.ndarray):
    values, counts = np.unique(d_t, return_counts=True)
    return values.astype(float), counts.astype(np.int64)


def bicm_pair_distribution(net: BipartiteNetwork, i: int, j: int, clip: bool = True) -> PoissonBinomial:
    """Poisson-binomial law of cn_ij, one term per distinct transaction degree.

    p_ilj = d_i d_l d_j (d_l - 1) / m^2 can exceed 1 for hub pairs; with
    ``clip`` those terms are capped at 1.
    """
    values, counts = _degree_histogram(net.d_t)
    probs = float(net.d_p[i]) * float(net.d_p[j]) * values * (values - 1) / float(net.m) ** 2
    if clip:
        probs = np.minimum(probs, 1.0)
    return PoissonBinomial(probs, counts)


def bicm_poisson_test(
    net: BipartiteNetwork, cn: Optional[np.ndarray], alpha_m: float, alpha_l: float
) -> RelationMatrices:
    """BiCM test with cn_ij approximated by Poisson(mu_ij).

    MORE iff 1 - F(cn) < alpha_m, LESS iff F(cn) < alpha_l. A positive count
    with zero expected mean is MORE.
    """
    cn = _check_cn(net, cn)
    mean = bicm_pair_means(net)
    zero = mean <= 0
    lam = np.where(zero, 0.0, mean)
    more = np.where(zero, cn > 0, poisson_sf(lam, cn) < alpha_m)
    less = np.where(zero, False, poisson_cdf(lam, cn) < alpha_l)
    return _finish(more.astype(bool), less.astype(bool), cn, mean)


def bicm_chernoff_test(
    net: BipartiteNetwork, cn: Optional[np.ndarray], alpha_m: float, alpha_l: float
) -> RelationMatrices:
    """BiCM test using the Chernoff tail bounds of the Poisson-binomial law.

    Counts outside a bound's domain (cn < mu for the upper tail, cn = 0 or
    cn >= mu for the lower tail) are never flagged by that bound.
    """
    cn = _check_cn(net, cn)
    values, counts = _degree_histogram(net.d_t)
    base = values * (values - 1) / float(net.m) ** 2
    d = net.d_p.astype(float)
    dd = np.outer(d, d)
    # mu of the clipped law, evaluated per distinct degree
    mean = np.zeros_like(dd)
    for v, c in zip(base, counts):
        mean += c * np.minimum(dd * v, 1.0)
    n_clipped = int(np.triu((dd * base.max()) > 1.0, 1).sum()) if len(base) else 0
    if n_clipped:
        logger.info("%d pairs had p_ilj > 1 clipped to 1", n_clipped)
    x = cn.astype(float)
    pos = mean > 0
    safe_mu = np.where(pos, mean, 1.0)
    upper_dom = pos & (x >= mean)
    lower_dom = pos & (x > 0) & (x < mean)
    with np.errstate(divide="ignore", invalid="ignore"):
        up = np.where(upper_dom, np.exp(chernoff_upper_exponent(np.where(upper_dom, x, 1.0), safe_mu)), 1.0)
        lo = np.where(lower_dom, np.exp(chernoff_lower_exponent(np.where(lower_dom, x, 1.0), safe_mu)), 1.0)
    more = upper_dom & (np.minimum(up, 1.0) < alpha_m)
    less = lower_dom & (np.minimum(lo, 1.0) < alpha_l)
    return _finish(more, less, cn, mean)


def derive_relations(a_more: np.ndarray, a_less: np.ndarray) -> RelationMatrices:
    """Complements are the MORE pairs; substitutes are LESS pairs that share
    at least one complement."""
    a_more = np.asarray(a_more, dtype=bool)
    a_less = np.asarray(a_less, dtype=bool)
    if a_more.shape != a_less.shape:
        raise ValueError("a_more and a_less differ in shape")
    if (a_more & a_less).any():
        raise ValueError("a_more and a_less must have disjoint supports")
    m = a_more.astype(np.int64)
    shared = (m.T @ m) > 0
    a_subs = shared & a_less
    return RelationMatrices(a_more, a_less, a_more.copy(), a_subs)


def relation_matrices(
    net: BipartiteNetwork, spec: NullModelSpec, cn: Optional[np.ndarray] = None
) -> RelationMatrices:
    """Run the configured test and complete all four relation matrices."""
    cn = _check_cn(net, cn)
    test = {
        NullModel.ER_VARIANT: er_variant_test,
        NullModel.BICM_POISSON: bicm_poisson_test,
        NullModel.BICM_CHERNOFF: bicm_chernoff_test,
    }[spec.kind]
    rel = test(net, cn, spec.alpha_m, spec.alpha_l)
    return derive_relations(rel.a_more, rel.a_less)


def poisson_diagnostics(net: BipartiteNetwork) -> dict:
    """Per-pair Le Cam quantities for the BiCM Poisson approximation.

    Returns dense matrices ``lam``, ``omega``, ``p_max`` and ``bound`` (the
    tightest applicable Le Cam bound). Decisions are not altered by these.
    """
    values, counts = _degree_histogram(net.d_t)
    w = values * (values - 1)
    d = net.d_p.astype(float)
    dd = np.outer(d, d) / float(net.m) ** 2
    lam = dd * float((counts * w).sum())
    sum_sq = dd**2 * float((counts * w**2).sum())
    with np.errstate(divide="ignore", invalid="ignore"):
        omega = np.where(lam > 0, sum_sq / lam, 0.0)
    p_max = dd * float(w.max()) if len(w) else np.zeros_like(dd)
    bound = np.minimum(2 * lam * omega, 9.0 * p_max)
    bound = np.where(4 * p_max <= 1, np.minimum(bound, 16.0 * omega), bound)
    return {"lam": lam, "omega": omega, "p_max": p_max, "bound": bound}


def write_relations_tsv(rel: RelationMatrices, labels, path) -> None:
    """TSV ``product_a, product_b, relation`` over the upper triangle."""
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write("product_a\tproduct_b\trelation\n")
        for name, tag in (("a_more", "more"), ("a_less", "less"), ("a_comp", "comp"), ("a_subs", "subs")):
            mat = getattr(rel, name)
            if mat is None:
                continue
            for i, j in sorted(rel.pairs(name)):
                fh.write(f"{labels[i]}\t{labels[j]}\t{tag}\n")
