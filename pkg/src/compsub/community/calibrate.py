"""Significance-level and threshold calibration by partition stability.

Four one-dimensional sweeps run in order, each with the earlier choices
fixed:

1. alpha_m: smallest value whose complement partition stays close to the
   baseline-alpha partition.
2. q_c: largest complement quantile that stays close.
3. alpha_l: largest value whose substitute partition stays close.
4. q_s: smallest substitute quantile that stays close.

"Close" means NMI strictly above ``nmi_floor``. Each sweep's reference is
the partition at that parameter's baseline value.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..measures import Measure, build_weighted_networks, complement_measure
from ..network import BipartiteNetwork, co_purchase_counts
from ..nullmodels import NullModel, NullModelSpec, relation_matrices
from .mapequation import Partition, detect_communities
from .metrics import nmi

logger = logging.getLogger(__name__)

__all__ = ["CalibrationGrid", "Baseline", "CalibrationResult", "calibrate", "partition_of", "write_trace_tsv"]

DEFAULT_ALPHAS = (1e-4, 1e-3, 0.01, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9)
DEFAULT_QUANTILES = tuple(round(0.05 * k, 2) for k in range(20))


@dataclass(frozen=True)
class Baseline:
    alpha: float = 0.05
    q_c: float = 0.0
    q_s: float = 0.7


@dataclass(frozen=True)
class CalibrationGrid:
    alpha_m: tuple = DEFAULT_ALPHAS
    alpha_l: tuple = DEFAULT_ALPHAS
    q_c: tuple = DEFAULT_QUANTILES
    q_s: tuple = DEFAULT_QUANTILES

    def __post_init__(self):
        for name in ("alpha_m", "alpha_l", "q_c", "q_s"):
            vals = tuple(float(v) for v in getattr(self, name))
            if not vals:
                raise ValueError(f"grid {name} is empty")
            if list(vals) != sorted(vals):
                raise ValueError(f"grid {name} must be sorted ascending")
            object.__setattr__(self, name, vals)


@dataclass
class CalibrationResult:
    alpha_m: float
    alpha_l: float
    q_c: float
    q_s: float
    theta_c: float
    theta_s: float
    # parameter -> list of (grid value, NMI against the sweep reference)
    nmi_traces: dict = field(default_factory=dict)
    fell_back: list = field(default_factory=list)


def partition_of(weights, seed: int, n_trials: int) -> Partition:
    w = np.asarray(weights, dtype=float)
    if not (w > 0).any():
        return Partition(np.arange(w.shape[0]), np.ones(w.shape[0], dtype=bool))
    return detect_communities(w, seed=seed, n_trials=n_trials)


class _Evaluator:
    """Caches relations per (alpha_m, alpha_l) and the complement scores."""

    def __init__(self, net, cn, kind, measure, seed, n_trials):
        self.net, self.cn, self.kind = net, cn, NullModel(kind)
        self.measure = Measure(measure)
        self.seed, self.n_trials = seed, n_trials
        self.scores = complement_measure(net, self.measure)
        self._rel: dict = {}

    def relations(self, alpha_m, alpha_l):
        key = (alpha_m, alpha_l)
        if key not in self._rel:
            self._rel[key] = relation_matrices(self.net, NullModelSpec(self.kind, alpha_m, alpha_l), self.cn)
        return self._rel[key]

    def weighted(self, alpha_m, alpha_l, q_c, q_s):
        rel = self.relations(alpha_m, alpha_l)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return build_weighted_networks(self.net, rel, self.measure, q_c, q_s, comp_scores=self.scores)

    def partition(self, which, alpha_m, alpha_l, q_c, q_s):
        nets = self.weighted(alpha_m, alpha_l, q_c, q_s)
        return partition_of(nets[which].values, self.seed, self.n_trials)


def _sweep(name, grid, reference, make, prefer_smallest, floor, fallback, fell_back):
    trace = [(v, nmi(reference, make(v))) for v in grid]
    passing = [v for v, s in trace if s > floor]
    if not passing:
        warnings.warn(f"no {name} grid value keeps NMI above {floor}; keeping the baseline", RuntimeWarning)
        fell_back.append(name)
        return fallback, trace
    return (min(passing) if prefer_smallest else max(passing)), trace


def calibrate(
    net: BipartiteNetwork,
    cn: Optional[np.ndarray] = None,
    grid: Optional[CalibrationGrid] = None,
    baseline: Baseline = Baseline(),
    nmi_floor: float = 0.8,
    null_model=NullModel.ER_VARIANT,
    measure=Measure.ORIGINAL,
    seed: int = 0,
    n_trials: int = 10,
) -> CalibrationResult:
    if not 0 < nmi_floor < 1:
        raise ValueError("nmi_floor must lie in (0, 1)")
    grid = grid or CalibrationGrid()
    cn = co_purchase_counts(net) if cn is None else cn
    ev = _Evaluator(net, cn, null_model, measure, seed, n_trials)
    a0, qc0, qs0 = baseline.alpha, baseline.q_c, baseline.q_s
    traces, fell_back = {}, []

    ref = ev.partition("wc", a0, a0, qc0, qs0)
    alpha_m, traces["alpha_m"] = _sweep(
        "alpha_m", grid.alpha_m, ref, lambda v: ev.partition("wc", v, a0, qc0, qs0), True, nmi_floor, a0, fell_back
    )
    ref = ev.partition("wc", alpha_m, a0, qc0, qs0)
    q_c, traces["q_c"] = _sweep(
        "q_c", grid.q_c, ref, lambda v: ev.partition("wc", alpha_m, a0, v, qs0), False, nmi_floor, qc0, fell_back
    )
    ref = ev.partition("ws", alpha_m, a0, q_c, qs0)
    alpha_l, traces["alpha_l"] = _sweep(
        "alpha_l", grid.alpha_l, ref, lambda v: ev.partition("ws", alpha_m, v, q_c, qs0), False, nmi_floor, a0,
        fell_back,
    )
    ref = ev.partition("ws", alpha_m, alpha_l, q_c, qs0)
    q_s, traces["q_s"] = _sweep(
        "q_s", grid.q_s, ref, lambda v: ev.partition("ws", alpha_m, alpha_l, q_c, v), True, nmi_floor, qs0,
        fell_back,
    )
    final = ev.weighted(alpha_m, alpha_l, q_c, q_s)
    return CalibrationResult(alpha_m, alpha_l, q_c, q_s, final["theta_c"], final["theta_s"], traces, fell_back)


def write_trace_tsv(result: CalibrationResult, path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write("parameter\tvalue\tnmi\tselected\n")
        for name, trace in result.nmi_traces.items():
            chosen = getattr(result, name)
            for v, s in trace:
                fh.write(f"{name}\t{v:.12g}\t{s:.12g}\t{int(v == chosen)}\n")
