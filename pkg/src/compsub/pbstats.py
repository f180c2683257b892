"""Poisson-binomial utilities.

Exact evaluation by convolution, the Poisson approximation with Le Cam's
error bounds, and closed-form Chernoff tail bounds.

Distances between distributions are reported in the unhalved convention
``sum_k |P(k) - Q(k)|`` used by Le Cam's theorem.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import special

__all__ = [
    "PoissonBinomial",
    "LeCamBounds",
    "exact_pmf",
    "poisson_cdf",
    "poisson_sf",
    "poisson_pmf",
    "lecam_bounds",
    "poisson_distance",
    "chernoff_upper",
    "chernoff_lower",
    "chernoff_upper_exponent",
    "chernoff_lower_exponent",
    "EXACT_PMF_LIMIT",
]

EXACT_PMF_LIMIT = 10_000

# Le Cam's constants, used as stated in the theorem.
D1 = 9.0
D2 = 16.0


@dataclass(frozen=True)
class PoissonBinomial:
    """Sum of independent Bernoulli(p_j) variables.

    ``counts`` lets identical probabilities share one entry (e.g. one term
    per distinct transaction degree); a count of ``c`` stands for ``c``
    independent trials with that probability.
    """

    probs: np.ndarray
    counts: Optional[np.ndarray] = None
    mu: float = field(init=False)
    sigma2: float = field(init=False)

    def __post_init__(self):
        probs = np.atleast_1d(np.asarray(self.probs, dtype=float))
        if probs.ndim != 1:
            raise ValueError("probs must be one-dimensional")
        if np.any(probs < 0) or np.any(probs > 1) or np.any(~np.isfinite(probs)):
            raise ValueError("probabilities must lie in [0, 1]")
        if self.counts is None:
            counts = np.ones(probs.shape, dtype=np.int64)
        else:
            counts = np.atleast_1d(np.asarray(self.counts, dtype=np.int64))
            if counts.shape != probs.shape:
                raise ValueError("counts must match probs in shape")
            if np.any(counts < 0):
                raise ValueError("counts must be nonnegative")
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "mu", float(np.dot(counts, probs)))
        object.__setattr__(self, "sigma2", float(np.dot(counts, probs * (1.0 - probs))))

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @property
    def alpha(self) -> float:
        """Largest single success probability."""
        present = self.counts > 0
        return float(self.probs[present].max()) if present.any() else 0.0

    @property
    def sum_sq(self) -> float:
        return float(np.dot(self.counts, self.probs**2))

    def expanded(self) -> np.ndarray:
        return np.repeat(self.probs, self.counts)


def exact_pmf(pb: PoissonBinomial, limit: int = EXACT_PMF_LIMIT) -> np.ndarray:
    """Exact pmf over ``0..n`` by iterative convolution, O(n^2)."""
    n = pb.n
    if n > limit:
        raise ValueError(f"exact pmf requested for n={n} trials, above the limit of {limit}")
    pmf = np.zeros(n + 1)
    pmf[0] = 1.0
    k = 0
    for p in pb.expanded():
        # shift-and-mix in place, highest index first
        pmf[1 : k + 2] = pmf[1 : k + 2] * (1.0 - p) + pmf[0 : k + 1] * p
        pmf[0] *= 1.0 - p
        k += 1
    return pmf


def poisson_cdf(lam, y):
    """P(Y <= y) for Y ~ Poisson(lam), using floor(y) for non-integer y."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0):
        raise ValueError("lambda must be nonnegative")
    k = np.floor(np.asarray(y, dtype=float))
    out = np.where(k < 0, 0.0, special.pdtr(np.maximum(k, 0), lam))
    return out if out.ndim else float(out)


def poisson_sf(lam, y):
    """1 - poisson_cdf(lam, y), computed without cancellation."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0):
        raise ValueError("lambda must be nonnegative")
    k = np.floor(np.asarray(y, dtype=float))
    out = np.where(k < 0, 1.0, special.pdtrc(np.maximum(k, 0), lam))
    return out if out.ndim else float(out)


def poisson_pmf(lam: float, kmax: int) -> np.ndarray:
    ks = np.arange(kmax + 1)
    if lam == 0:
        out = np.zeros(kmax + 1)
        out[0] = 1.0
        return out
    return np.exp(ks * math.log(lam) - lam - special.gammaln(ks + 1))


@dataclass(frozen=True)
class LeCamBounds:
    tv_bound_2lw: float
    tv_bound_d1a: float
    tv_bound_d2w: Optional[float]
    omega: float
    alpha: float
    lam: float

    @property
    def tightest(self) -> float:
        cands = [self.tv_bound_2lw, self.tv_bound_d1a]
        if self.tv_bound_d2w is not None:
            cands.append(self.tv_bound_d2w)
        return min(cands)


def lecam_bounds(pb: PoissonBinomial) -> LeCamBounds:
    """Le Cam's bounds on the distance between ``pb`` and Poisson(mu).

    The ``D2 * omega`` bound is only available when ``4 * alpha <= 1``.
    """
    lam = pb.mu
    if lam <= 0:
        raise ValueError("Le Cam bounds need a positive mean")
    omega = pb.sum_sq / lam
    alpha = pb.alpha
    return LeCamBounds(
        tv_bound_2lw=2.0 * lam * omega,
        tv_bound_d1a=D1 * alpha,
        tv_bound_d2w=D2 * omega if 4.0 * alpha <= 1.0 else None,
        omega=omega,
        alpha=alpha,
        lam=lam,
    )


def poisson_distance(pb: PoissonBinomial) -> float:
    """sum_k |P_pb(k) - Poisson(mu)(k)| over all k >= 0, including the Poisson tail."""
    pmf = exact_pmf(pb)
    n = len(pmf) - 1
    pois = poisson_pmf(pb.mu, n)
    tail = poisson_sf(pb.mu, n)
    return float(np.abs(pmf - pois).sum() + tail)


def chernoff_upper_exponent(x, mu):
    """x - mu - x log(x/mu); valid for x >= mu > 0."""
    x = np.asarray(x, dtype=float)
    mu = np.asarray(mu, dtype=float)
    return x - mu - special.xlogy(x, x / mu)


def chernoff_lower_exponent(x, mu):
    """x - mu + x log(mu/x); valid for 0 < x < mu."""
    x = np.asarray(x, dtype=float)
    mu = np.asarray(mu, dtype=float)
    return x - mu + special.xlogy(x, mu / x)


def chernoff_upper(pb: PoissonBinomial, x: float) -> float:
    """Upper-tail bound P(X >= x) <= exp(x - mu - x log(x/mu))."""
    mu = pb.mu
    if mu <= 0:
        raise ValueError("Chernoff upper bound needs a positive mean")
    if x < mu:
        raise ValueError(f"upper-tail bound needs x >= mu (x={x}, mu={mu})")
    return float(min(1.0, np.exp(chernoff_upper_exponent(x, mu))))


def chernoff_lower(pb: PoissonBinomial, x: float) -> float:
    """Lower-tail bound P(X <= x) <= exp(x - mu + x log(mu/x))."""
    mu = pb.mu
    if not 0 < x < mu:
        raise ValueError(f"lower-tail bound needs 0 < x < mu (x={x}, mu={mu})")
    return float(min(1.0, np.exp(chernoff_lower_exponent(x, mu))))
