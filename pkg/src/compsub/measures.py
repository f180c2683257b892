"""Complementarity and substitutability scores.

Complementarity measures come from the weighted cosine similarity of
one-step random walks started on two products, each transaction weighted
by the inverse of its basket size. Substitutability compares products'
complementarity profiles.

Directed matrices use the convention ``values[i, j]`` = score *of i to j*,
normalised by j's own mass.
"""

from __future__ import annotations

import enum
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .network import BipartiteNetwork, co_purchase_counts

logger = logging.getLogger(__name__)

__all__ = [
    "Kind",
    "Measure",
    "ScoreMatrix",
    "ThresholdResult",
    "sim_original",
    "sim_original_directed",
    "sim_randomised_config",
    "sim_randomised_config_directed",
    "sim_substitutability",
    "sim_substitutability_directed",
    "complement_measure",
    "apply_threshold",
    "nearest_rank_quantile",
    "build_weighted_networks",
    "top_k",
    "write_scores_tsv",
]


class Kind(str, enum.Enum):
    COMP = "comp"
    SUBS = "subs"


class Measure(str, enum.Enum):
    ORIGINAL = "original"
    ORIGINAL_DIRECTED = "original_directed"
    RANDOMISED_CONFIG = "randomised_config"
    RANDOMISED_CONFIG_DIRECTED = "randomised_config_directed"
    SUBSTITUTABILITY = "substitutability"
    SUBSTITUTABILITY_DIRECTED = "substitutability_directed"

    @property
    def directed(self) -> bool:
        return self.value.endswith("_directed")


@dataclass
class ScoreMatrix:
    values: np.ndarray
    kind: Kind
    measure: Measure
    symmetric: bool
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.kind = Kind(self.kind)
        self.measure = Measure(self.measure)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def positive_pairs(self) -> set:
        """Unordered pairs with a positive score in either direction."""
        v = self.values
        pos = (v > 0) | (v.T > 0)
        i, j = np.nonzero(np.triu(pos, 1))
        return set(zip(i.tolist(), j.tolist()))

    def with_values(self, values: np.ndarray, **diag) -> "ScoreMatrix":
        return ScoreMatrix(values, self.kind, self.measure, self.symmetric, {**self.diagnostics, **diag})


def _walk_terms(net: BipartiteNetwork):
    """N = A^T D_t^{-1} A and S = diag(N) (inverse-basket-size co-occurrence)."""
    a = net.biadjacency.astype(float)
    inv_dt = sp.diags(1.0 / net.d_t.astype(float))
    n = np.asarray((a.T @ inv_dt @ a).toarray())
    s = np.diag(n).copy()
    return n, s


def sim_original(net: BipartiteNetwork) -> ScoreMatrix:
    """sum_l A_li A_lj / d_l, normalised by sqrt(S_i S_j)."""
    n, s = _walk_terms(net)
    vals = n / np.sqrt(np.outer(s, s))
    np.clip(vals, 0.0, 1.0, out=vals)
    np.fill_diagonal(vals, 1.0)
    return ScoreMatrix(vals, Kind.COMP, Measure.ORIGINAL, True)


def sim_original_directed(net: BipartiteNetwork) -> ScoreMatrix:
    """Entry (i, j): complementarity of i to j, sum_l A_li A_lj / d_l over S_j."""
    n, s = _walk_terms(net)
    vals = n / s[None, :]
    np.clip(vals, 0.0, 1.0, out=vals)
    np.fill_diagonal(vals, 1.0)
    return ScoreMatrix(vals, Kind.COMP, Measure.ORIGINAL_DIRECTED, False)


def _randomised_factors(net: BipartiteNetwork):
    """F[i, j]: share of i's walk mass on transactions shared with j, after
    subtracting the BiCM expectation d_i / m from every term."""
    n, s = _walk_terms(net)
    cn = co_purchase_counts(net).astype(float)
    e = net.d_p.astype(float) / net.m
    num = n - cn * e[:, None]
    den = s - net.d_p * e
    bad_den = den <= 0
    with np.errstate(divide="ignore", invalid="ignore"):
        f = np.where(bad_den[:, None], 0.0, num / np.where(bad_den, 1.0, den)[:, None])
    n_negative = int((f < 0).sum())
    n_above = int((f > 1).sum())
    f = np.clip(f, 0.0, 1.0)
    diag = {
        "nonpositive_denominators": int(bad_den.sum()),
        "negative_factors_clamped": n_negative,
        "factors_above_one_clamped": n_above,
    }
    return f, bad_den, diag


def sim_randomised_config(net: BipartiteNetwork) -> ScoreMatrix:
    """Randomised configuration measure; each factor is clamped to [0, 1]
    before the geometric mean, so a negative factor scores the pair 0."""
    f, bad, diag = _randomised_factors(net)
    vals = np.sqrt(f * f.T)
    ok = ~bad
    vals[np.diag_indices_from(vals)] = np.where(ok, 1.0, 0.0)
    return ScoreMatrix(vals, Kind.COMP, Measure.RANDOMISED_CONFIG, True, diag)


def sim_randomised_config_directed(net: BipartiteNetwork) -> ScoreMatrix:
    f, bad, diag = _randomised_factors(net)
    vals = f.T.copy()  # (i, j) normalised by j
    vals[np.diag_indices_from(vals)] = np.where(~bad, 1.0, 0.0)
    return ScoreMatrix(vals, Kind.COMP, Measure.RANDOMISED_CONFIG_DIRECTED, False, diag)


def complement_measure(net: BipartiteNetwork, measure: Measure) -> ScoreMatrix:
    fn = {
        Measure.ORIGINAL: sim_original,
        Measure.ORIGINAL_DIRECTED: sim_original_directed,
        Measure.RANDOMISED_CONFIG: sim_randomised_config,
        Measure.RANDOMISED_CONFIG_DIRECTED: sim_randomised_config_directed,
    }.get(Measure(measure))
    if fn is None:
        raise ValueError(f"{measure} is not a complementarity measure")
    return fn(net)


def _wc_values(wc) -> np.ndarray:
    return np.asarray(wc.values if isinstance(wc, ScoreMatrix) else wc, dtype=float)


def sim_substitutability(wc) -> ScoreMatrix:
    """Cosine similarity between rows of the complementarity matrix."""
    w = _wc_values(wc)
    norms = np.sqrt((w**2).sum(axis=1))
    if not norms.any():
        warnings.warn("complementarity matrix is all zero; substitutability is empty", RuntimeWarning)
        return ScoreMatrix(np.zeros_like(w), Kind.SUBS, Measure.SUBSTITUTABILITY, True)
    safe = np.where(norms > 0, norms, 1.0)
    vals = (w @ w.T) / np.outer(safe, safe)
    zero = norms == 0
    vals[zero, :] = 0.0
    vals[:, zero] = 0.0
    np.clip(vals, 0.0, 1.0, out=vals)
    return ScoreMatrix(vals, Kind.SUBS, Measure.SUBSTITUTABILITY, True)


def sim_substitutability_directed(wc) -> ScoreMatrix:
    """Entry (i, j): sum_k min(W_ik, W_jk) W_jk / sum_p W_jp^2.

    Reaches 1 when row i dominates row j entrywise.
    """
    w = _wc_values(wc)
    sq = (w**2).sum(axis=1)
    if not sq.any():
        warnings.warn("complementarity matrix is all zero; substitutability is empty", RuntimeWarning)
        return ScoreMatrix(np.zeros_like(w), Kind.SUBS, Measure.SUBSTITUTABILITY_DIRECTED, False)
    # sum_k min(W_ik, W_jk) W_jk, row by row to bound memory
    num = np.empty_like(w)
    for i in range(w.shape[0]):
        num[i] = (np.minimum(w[i][None, :], w) * w).sum(axis=1)
    safe = np.where(sq > 0, sq, 1.0)
    vals = num / safe[None, :]
    vals[:, sq == 0] = 0.0
    np.clip(vals, 0.0, 1.0, out=vals)
    return ScoreMatrix(vals, Kind.SUBS, Measure.SUBSTITUTABILITY_DIRECTED, False)


def nearest_rank_quantile(values: np.ndarray, q: float) -> float:
    """Element at index floor(q * n) of the ascending sort."""
    if not 0 <= q < 1:
        raise ValueError("quantile must lie in [0, 1)")
    v = np.sort(np.asarray(values, dtype=float))
    return float(v[int(np.floor(q * len(v)))])


@dataclass
class ThresholdResult:
    scores: ScoreMatrix
    theta: float
    quantile: float


def apply_threshold(scores: ScoreMatrix, mask, q: float) -> ThresholdResult:
    """Zero entries outside ``mask``, then entries below the q-quantile of
    the surviving nonzero values."""
    if not 0 <= q < 1:
        raise ValueError("quantile must lie in [0, 1)")
    mask = np.asarray(mask, dtype=bool)
    vals = np.where(mask, scores.values, 0.0)
    np.fill_diagonal(vals, 0.0)
    if scores.symmetric:
        nz = vals[np.triu_indices_from(vals, 1)]
    else:
        nz = vals[~np.eye(vals.shape[0], dtype=bool)]
    nz = nz[nz > 0]
    if nz.size == 0:
        if mask.any():
            warnings.warn("no nonzero scores survive the mask", RuntimeWarning)
        return ThresholdResult(scores.with_values(vals, theta=0.0, quantile=q), 0.0, q)
    theta = nearest_rank_quantile(nz, q)
    vals = np.where(vals >= theta, vals, 0.0)
    return ThresholdResult(scores.with_values(vals, theta=theta, quantile=q), theta, q)


def build_weighted_networks(net: BipartiteNetwork, relations, measure=Measure.ORIGINAL, q_c=0.0, q_s=0.0,
                            comp_scores: Optional[ScoreMatrix] = None) -> dict:
    """Masked and thresholded complement (``wc``) and substitute (``ws``) networks.

    ``comp_scores`` lets callers reuse a precomputed complementarity
    measure across calibration sweeps.
    """
    measure = Measure(measure)
    if relations.a_comp is None or relations.a_subs is None:
        raise ValueError("relations must be completed with derive_relations first")
    sims = comp_scores if comp_scores is not None else complement_measure(net, measure)
    wc = apply_threshold(sims, relations.a_comp, q_c)
    subs_fn = sim_substitutability_directed if measure.directed else sim_substitutability
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        ss = subs_fn(wc.scores)
        ws = apply_threshold(ss, relations.a_subs, q_s)
    return {"wc": wc.scores, "ws": ws.scores, "theta_c": wc.theta, "theta_s": ws.theta}


def top_k(scores: ScoreMatrix, k: int = 3) -> list:
    """For each product j, the k products i with the highest positive score (i, j)."""
    v = scores.values
    out = []
    for j in range(v.shape[0]):
        col = v[:, j].copy()
        col[j] = 0.0
        order = np.lexsort((np.arange(len(col)), -col))
        out.append([(int(i), float(col[i])) for i in order[:k] if col[i] > 0])
    return out


def write_scores_tsv(scores: ScoreMatrix, labels, path) -> None:
    """Nonzero off-diagonal entries as ``product_a, product_b, score, kind, measure``."""
    v = scores.values
    if scores.symmetric:
        i, j = np.nonzero(np.triu(v, 1))
    else:
        off = v.copy()
        np.fill_diagonal(off, 0.0)
        i, j = np.nonzero(off)
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write("product_a\tproduct_b\tscore\tkind\tmeasure\n")
        for a, b in zip(i.tolist(), j.tolist()):
            fh.write(f"{labels[a]}\t{labels[b]}\t{v[a, b]:.12g}\t{scores.kind.value}\t{scores.measure.value}\n")
