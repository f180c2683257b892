"""Two-level map equation for undirected weighted networks and a greedy
optimiser for it.

With total edge weight W, node visit rates are pi_i = s_i / 2W and the exit
rate of module r is q_r = (weight leaving r) / 2W. The codelength in bits is

    L = plogp(q) - 2 sum_r plogp(q_r) - sum_i plogp(pi_i)
        + sum_r plogp(q_r + sum_{i in r} pi_i)

with q = sum_r q_r and plogp(x) = x log2 x.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

logger = logging.getLogger(__name__)

__all__ = ["Partition", "codelength", "map_equation_codelength", "detect_communities", "symmetrize"]


def _plogp(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = x[pos] * np.log2(x[pos])
    return out


def _plogp1(x: float) -> float:
    return x * np.log2(x) if x > 0 else 0.0


@dataclass
class Partition:
    """Node -> role assignment with dense role indices.

    Roles are numbered in order of their lowest member node. ``isolated``
    marks nodes without any incident weight; each sits in its own role.
    """

    assignment: np.ndarray
    isolated: Optional[np.ndarray] = None
    codelength: Optional[float] = None
    labels: Optional[tuple] = field(default=None, repr=False)

    def __post_init__(self):
        a = np.asarray(self.assignment, dtype=np.int64)
        _, first = np.unique(a, return_index=True)
        order = np.argsort(first)
        remap = np.empty(a.max() + 1 if a.size else 0, dtype=np.int64)
        remap[np.unique(a)[order]] = np.arange(len(order))
        self.assignment = remap[a] if a.size else a
        if self.isolated is None:
            self.isolated = np.zeros(len(self.assignment), dtype=bool)

    @property
    def n_roles(self) -> int:
        return int(self.assignment.max()) + 1 if self.assignment.size else 0

    @property
    def n(self) -> int:
        return len(self.assignment)

    def members(self) -> list:
        return [np.flatnonzero(self.assignment == r) for r in range(self.n_roles)]

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.n_roles)

    def to_dict(self, labels=None) -> dict:
        labels = labels if labels is not None else self.labels
        if labels is None:
            labels = range(self.n)
        return {str(lab): int(r) for lab, r in zip(labels, self.assignment)}

    def restrict(self, idx) -> "Partition":
        idx = np.asarray(idx, dtype=np.int64)
        labels = tuple(self.labels[k] for k in idx) if self.labels is not None else None
        return Partition(self.assignment[idx], self.isolated[idx], None, labels)


def symmetrize(weights) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValueError("weights must be a square matrix")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    if not np.allclose(w, w.T):
        w = w + w.T
    w = w.copy()
    np.fill_diagonal(w, 0.0)
    return w


def codelength(weights, assignment) -> float:
    """Two-level map equation codelength (bits) of ``assignment``."""
    w = symmetrize(weights)
    a = np.asarray(assignment.assignment if isinstance(assignment, Partition) else assignment)
    if a.shape != (w.shape[0],):
        raise ValueError("assignment does not cover the graph's nodes")
    total = w.sum()
    if total <= 0:
        raise ValueError("codelength of an empty graph is undefined")
    pi = w.sum(axis=1) / total
    labels, a = np.unique(a, return_inverse=True)
    k = len(labels)
    onehot = np.zeros((len(a), k))
    onehot[np.arange(len(a)), a] = 1.0
    within = onehot.T @ w @ onehot
    exit_ = (within.sum(axis=1) - np.diag(within)) / total
    flow = onehot.T @ pi
    q = exit_.sum()
    return float(
        _plogp1(q) - 2 * _plogp(exit_).sum() - _plogp(pi).sum() + _plogp(exit_ + flow).sum()
    )


map_equation_codelength = codelength


class _Level:
    """One aggregation level: supernodes with volumes and an adjacency
    between distinct supernodes."""

    def __init__(self, adj: np.ndarray, vol: np.ndarray, total2: float):
        self.adj = adj
        self.vol = vol
        self.total2 = total2
        self.n = len(vol)
        self.nbrs = [np.flatnonzero(adj[i]) for i in range(self.n)]
        self.k = adj.sum(axis=1)


def _optimise_level(level: _Level, rng: np.random.Generator, node_plogp: float):
    """Greedy node moves until no move shortens the code. Returns module ids."""
    n = level.n
    mod = np.arange(n)
    t2 = level.total2
    out = level.k.copy()  # weight leaving each module, in weight units
    vol = level.vol.copy()
    sum_exit = out.sum() / t2
    sum_plogp_exit = float(_plogp(out / t2).sum())
    sum_plogp_exit_flow = float(_plogp((out + vol) / t2).sum())

    def total_len(se, spe, spef):
        return _plogp1(se) - 2 * spe - node_plogp + spef

    current = total_len(sum_exit, sum_plogp_exit, sum_plogp_exit_flow)
    moved_any = True
    sweeps = 0
    while moved_any and sweeps < 100:
        moved_any = False
        sweeps += 1
        for i in rng.permutation(n):
            a = mod[i]
            nb = level.nbrs[i]
            if nb.size == 0:
                continue
            w_i = level.adj[i, nb]
            mods = mod[nb]
            to_mod: dict = {}
            for mm, ww in zip(mods.tolist(), w_i.tolist()):
                to_mod[mm] = to_mod.get(mm, 0.0) + ww
            k_i = level.k[i]
            vol_i = level.vol[i]
            k_ia = to_mod.get(a, 0.0)
            # remove i from a
            out_a_new = out[a] - k_i + 2 * k_ia
            vol_a_new = vol[a] - vol_i
            base_se = sum_exit - out[a] / t2 + out_a_new / t2
            base_spe = sum_plogp_exit - _plogp1(out[a] / t2) + _plogp1(out_a_new / t2)
            base_spef = (
                sum_plogp_exit_flow - _plogp1((out[a] + vol[a]) / t2) + _plogp1((out_a_new + vol_a_new) / t2)
            )
            best_len = current
            best_mod = a
            best_state = None
            for b in sorted(to_mod):
                if b == a:
                    continue
                k_ib = to_mod[b]
                out_b_new = out[b] + k_i - 2 * k_ib
                vol_b_new = vol[b] + vol_i
                se = base_se - out[b] / t2 + out_b_new / t2
                spe = base_spe - _plogp1(out[b] / t2) + _plogp1(out_b_new / t2)
                spef = base_spef - _plogp1((out[b] + vol[b]) / t2) + _plogp1((out_b_new + vol_b_new) / t2)
                cand = total_len(se, spe, spef)
                if cand < best_len - 1e-12:
                    best_len, best_mod = cand, b
                    best_state = (out_a_new, vol_a_new, out_b_new, vol_b_new, se, spe, spef)
            if best_mod != a:
                out_a_new, vol_a_new, out_b_new, vol_b_new, se, spe, spef = best_state
                out[a], vol[a] = out_a_new, vol_a_new
                out[best_mod], vol[best_mod] = out_b_new, vol_b_new
                sum_exit, sum_plogp_exit, sum_plogp_exit_flow = se, spe, spef
                mod[i] = best_mod
                current = best_len
                moved_any = True
    return mod, current


def _run_trial(w: np.ndarray, active: np.ndarray, rng: np.random.Generator):
    sub = w[np.ix_(active, active)]
    total2 = sub.sum()
    strength = sub.sum(axis=1)
    node_plogp = float(_plogp(strength / total2).sum())
    member = np.arange(len(active))  # original active node -> current supernode
    level = _Level(sub.copy(), strength.copy(), total2)
    for _ in range(50):
        mod, _ = _optimise_level(level, rng, node_plogp)
        uniq, mod = np.unique(mod, return_inverse=True)
        if len(uniq) == level.n:
            break
        member = mod[member]
        onehot = np.zeros((level.n, len(uniq)))
        onehot[np.arange(level.n), mod] = 1.0
        agg = onehot.T @ level.adj @ onehot
        vol = onehot.T @ level.vol
        np.fill_diagonal(agg, 0.0)
        level = _Level(agg, vol, total2)
    return member


def detect_communities(weights, seed: int = 0, n_trials: int = 10, labels=None) -> Partition:
    """Greedy map-equation optimisation with node moves and aggregation.

    Best of ``n_trials`` seeded restarts; the one-module-per-component
    partition is always a candidate, so the result never codes longer than
    that. Nodes with no incident weight get singleton roles and are flagged.
    Directed weights are symmetrised as ``W + W^T``.
    """
    w = symmetrize(weights)
    n = w.shape[0]
    strength = w.sum(axis=1)
    isolated = strength <= 0
    active = np.flatnonzero(~isolated)
    assignment = np.arange(n)
    if active.size == 0:
        return Partition(assignment, isolated, None, labels)

    rng = np.random.default_rng(seed)
    best = None
    best_len = np.inf
    candidates = [np.zeros(active.size, dtype=np.int64)]
    for _ in range(max(1, n_trials)):
        candidates.append(_run_trial(w, active, np.random.default_rng(rng.integers(2**63))))
    sub = w[np.ix_(active, active)]
    for cand in candidates:
        length = codelength(sub, cand)
        if length < best_len - 1e-12:
            best, best_len = cand, length
    assignment[active] = best + n  # keep isolated ids distinct
    return Partition(assignment, isolated, best_len, labels)
