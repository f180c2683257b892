"""Configuration and the shared scoring engine.

Sales transactions and recipes (as pseudo-transactions) both go through
:func:`score_network`, so the two paths cannot drift apart.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .community import Baseline, CalibrationGrid, Partition, detect_communities
from .measures import Measure, build_weighted_networks, complement_measure
from .network import BipartiteNetwork, FrequencyFilter, co_purchase_counts
from .nullmodels import NullModel, NullModelSpec, RelationMatrices, relation_matrices

__all__ = ["PipelineConfig", "ScoredNetwork", "score_network", "detect_roles", "load_config", "config_hash"]


@dataclass
class PipelineConfig:
    null_model: str = NullModel.ER_VARIANT.value
    alpha_m: float = 0.05
    alpha_l: float = 0.05
    measure: str = Measure.ORIGINAL.value
    q_c: float = 0.0
    q_s: float = 0.7
    min_count: int = 1
    max_fraction: float = 1.0
    baseline: dict = field(default_factory=lambda: {"alpha": 0.05, "q_c": 0.0, "q_s": 0.7})
    grids: dict = field(default_factory=dict)
    nmi_floor: float = 0.8
    calibrate: bool = False
    seed: int = 0
    n_trials: int = 10
    dominance_ratio: float = 3.0
    top_k: int = 3
    threads: int = 1
    # io
    transactions: Optional[str] = None
    split_date: Optional[str] = None
    flavour: Optional[str] = None
    recipes: Optional[str] = None
    matches: Optional[str] = None
    hierarchy: Optional[str] = None
    hierarchy_level: str = "L3"
    world: dict = field(default_factory=dict)

    def __post_init__(self):
        self.null_model = NullModel(self.null_model).value
        self.measure = Measure(self.measure).value
        if Measure(self.measure) in (Measure.SUBSTITUTABILITY, Measure.SUBSTITUTABILITY_DIRECTED):
            raise ValueError("measure must be a complementarity measure")
        NullModelSpec(self.null_model, self.alpha_m, self.alpha_l)
        for name in ("q_c", "q_s"):
            if not 0 <= getattr(self, name) < 1:
                raise ValueError(f"{name} must lie in [0, 1)")
        if not 0 < self.nmi_floor < 1:
            raise ValueError("nmi_floor must lie in (0, 1)")
        if self.threads < 1 or self.n_trials < 1 or self.top_k < 1:
            raise ValueError("threads, n_trials and top_k must be positive")
        self.calibration_grid()  # validates sort order

    @property
    def null_spec(self) -> NullModelSpec:
        return NullModelSpec(self.null_model, self.alpha_m, self.alpha_l)

    @property
    def frequency_filter(self) -> FrequencyFilter:
        return FrequencyFilter(self.min_count, self.max_fraction)

    def calibration_grid(self) -> CalibrationGrid:
        return CalibrationGrid(**{k: tuple(v) for k, v in self.grids.items()})

    def baseline_values(self) -> Baseline:
        return Baseline(**self.baseline)

    def replace(self, **changes) -> "PipelineConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def load_config(path) -> PipelineConfig:
    """Read a YAML mapping of :class:`PipelineConfig` fields."""
    data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    if not isinstance(data, dict):
        raise ValueError(f"{path}: config must be a mapping")
    known = {f.name for f in dataclasses.fields(PipelineConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ValueError(f"{path}: unknown config keys {unknown}")
    return PipelineConfig(**data)


def config_hash(config: PipelineConfig) -> str:
    blob = json.dumps(config.to_dict(), sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()


@dataclass
class ScoredNetwork:
    net: BipartiteNetwork
    relations: RelationMatrices
    wc: object
    ws: object
    theta_c: float
    theta_s: float

    @property
    def labels(self) -> tuple:
        return self.net.product_labels


def score_network(net: BipartiteNetwork, config: PipelineConfig, cn: Optional[np.ndarray] = None) -> ScoredNetwork:
    cn = co_purchase_counts(net) if cn is None else cn
    rel = relation_matrices(net, config.null_spec, cn)
    sims = complement_measure(net, config.measure)
    nets = build_weighted_networks(net, rel, config.measure, config.q_c, config.q_s, comp_scores=sims)
    return ScoredNetwork(net, rel, nets["wc"], nets["ws"], nets["theta_c"], nets["theta_s"])


def detect_roles(scored: ScoredNetwork, config: PipelineConfig) -> dict:
    """Complement and substitute partitions; empty score graphs give all-singleton roles."""
    out = {}
    for name, w in (("comp", scored.wc.values), ("subs", scored.ws.values)):
        if (w > 0).any():
            p = detect_communities(w, seed=config.seed, n_trials=config.n_trials, labels=scored.labels)
        else:
            p = Partition(np.arange(len(w)), np.ones(len(w), dtype=bool), None, scored.labels)
        out[name] = p
    return out
