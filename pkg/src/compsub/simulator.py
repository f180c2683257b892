"""Synthetic shopper population with known complements and substitutes.

Thirteen products: four independent "popular" items and four substitute
groups whose cross products form ten complementary pairs. Prices are
latent; only the resulting baskets are emitted.
"""

from __future__ import annotations

import datetime as dt
import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .network import TransactionRecord

__all__ = ["WorldSpec", "SimulationResult", "generate", "simulate", "ground_truth", "write_ground_truth"]

INDEPENDENTS = ("coffee", "wipes", "ramen", "candy")
SUBSTITUTE_GROUPS = (
    ("hot dog1", "hot dog2", "hot dog3"),
    ("hot dog bun1", "hot dog bun2"),
    ("taco shell1", "taco shell2"),
    ("taco seasoning1", "taco seasoning2"),
)


@dataclass(frozen=True)
class WorldSpec:
    seed: int = 0
    n_transactions: int = 1000
    independents: tuple = INDEPENDENTS
    substitute_groups: tuple = SUBSTITUTE_GROUPS
    # each complement block is a pair of substitute-group indices
    complement_blocks: tuple = ((0, 1), (2, 3))
    independent_high: float = 0.8
    buy_low: float = 0.8
    buy_high: float = 0.2
    pairs_all_low: float = 0.5
    pairs_all_high: float = 0.1
    pairs_some_marked: float = 0.4
    cheapest_pair: float = 0.85
    all_high_skip: float = 0.5
    start_date: str = "2021-01-04"
    n_days: int = 90

    def __post_init__(self):
        probs = (self.independent_high, self.buy_low, self.buy_high, self.pairs_all_low,
                 self.pairs_all_high, self.pairs_some_marked, self.cheapest_pair, self.all_high_skip)
        if any(not 0 <= p <= 1 for p in probs):
            raise ValueError("probabilities must lie in [0, 1]")
        if abs(self.pairs_all_low + self.pairs_all_high + self.pairs_some_marked - 1) > 1e-12:
            raise ValueError("price regime probabilities must sum to 1")
        if self.n_transactions < 1:
            raise ValueError("n_transactions must be positive")

    @property
    def products(self) -> tuple:
        return tuple(self.independents) + tuple(itertools.chain.from_iterable(self.substitute_groups))

    @property
    def complement_pairs(self) -> tuple:
        pairs = []
        for a, b in self.complement_blocks:
            pairs.extend(itertools.product(self.substitute_groups[a], self.substitute_groups[b]))
        return tuple(pairs)

    @property
    def others_total(self) -> float:
        return 1.0 - self.cheapest_pair


def ground_truth(spec: WorldSpec) -> dict:
    subs = []
    for group in spec.substitute_groups:
        subs.extend(itertools.combinations(group, 2))
    return {
        "complement_pairs": [tuple(p) for p in spec.complement_pairs],
        "substitute_groups": [tuple(g) for g in spec.substitute_groups],
        "substitute_pairs": subs,
        "independents": list(spec.independents),
    }


@dataclass
class SimulationResult:
    records: list
    n_empty: int
    regimes: dict = field(default_factory=dict)


def _choose_pair(rng: np.random.Generator, spec: WorldSpec, n_pairs: int):
    """Index of the complementary pair bought, or None."""
    u = rng.random()
    if u < spec.pairs_all_low:
        return "all_low", int(rng.integers(n_pairs))
    if u < spec.pairs_all_low + spec.pairs_all_high:
        if rng.random() < spec.all_high_skip:
            return "all_high", None
        return "all_high", int(rng.integers(n_pairs))
    cheapest = int(rng.integers(n_pairs))
    if rng.random() < spec.cheapest_pair:
        return "some_marked", cheapest
    other = int(rng.integers(n_pairs - 1))
    return "some_marked", other + (other >= cheapest)


def simulate(spec: WorldSpec) -> SimulationResult:
    """Draw ``spec.n_transactions`` baskets; empty ones are dropped and counted."""
    rng = np.random.default_rng(spec.seed)
    pairs = spec.complement_pairs
    start = dt.date.fromisoformat(spec.start_date)
    width = len(str(spec.n_transactions))
    records = []
    n_empty = 0
    regimes = {"all_low": 0, "all_high": 0, "some_marked": 0}
    for t in range(spec.n_transactions):
        basket = []
        high = rng.random(len(spec.independents)) < spec.independent_high
        buy_p = np.where(high, spec.buy_high, spec.buy_low)
        bought = rng.random(len(spec.independents)) < buy_p
        basket.extend(p for p, b in zip(spec.independents, bought) if b)
        regime, k = _choose_pair(rng, spec, len(pairs))
        regimes[regime] += 1
        if k is not None:
            basket.extend(pairs[k])
        if not basket:
            n_empty += 1
            continue
        tid = f"T{t:0{width}d}"
        day = (start + dt.timedelta(days=t * spec.n_days // spec.n_transactions)).isoformat()
        records.extend(TransactionRecord(tid, p, 1, day) for p in basket)
    return SimulationResult(records, n_empty, regimes)


def generate(spec: WorldSpec) -> list:
    return simulate(spec).records


def write_ground_truth(spec: WorldSpec, path, n_empty=None) -> None:
    gt = ground_truth(spec)
    payload = {
        "seed": spec.seed,
        "n_transactions": spec.n_transactions,
        "complement_pairs": [list(p) for p in gt["complement_pairs"]],
        "substitute_groups": [list(g) for g in gt["substitute_groups"]],
        "substitute_pairs": [list(p) for p in gt["substitute_pairs"]],
        "independents": gt["independents"],
    }
    if n_empty is not None:
        payload["n_empty_transactions"] = n_empty
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
