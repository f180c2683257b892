"""External validation of the scores and roles.

Flavour-compound and recipe co-occurrence statistics, rank tests and
correlations, the recipe-as-transactions rerun of the scoring engine,
role comparisons, and robustness across a temporal split.
"""

from __future__ import annotations

import csv
import datetime as dt
import itertools
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import stats

from .community import Partition, ami, nmi
from .measures import Kind, Measure, ScoreMatrix
from .network import EmptyNetworkError, TransactionRecord, build_network
from .pipeline import PipelineConfig, detect_roles, score_network

logger = logging.getLogger(__name__)

__all__ = [
    "ProductMatch",
    "read_flavour_csv",
    "read_recipes",
    "read_matches_csv",
    "read_hierarchy_csv",
    "jaccard_flavour",
    "jaccard_recipe",
    "MWWResult",
    "mww_test",
    "correlations",
    "pair_values",
    "recipe_pipeline",
    "same_ingredient_partition",
    "role_category_profile",
    "compare_roles",
    "relative_distance",
    "split_records",
    "split_robustness",
    "write_tsv",
    "write_histogram",
]

EXACT_MWW_LIMIT = 20


@dataclass(frozen=True)
class ProductMatch:
    product_id: str
    flavour_ingredients: frozenset = frozenset()
    recipe_ingredient: Optional[str] = None


# --- readers -----------------------------------------------------------------


def read_flavour_csv(path) -> dict:
    """``ingredient,compound`` rows -> ingredient -> set of compounds."""
    out: dict = {}
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            out.setdefault(row["ingredient"].strip(), set()).add(row["compound"].strip())
    return out


def read_recipes(path) -> list:
    """``cuisine<TAB>ing;ing;...`` per line -> list of ingredient sets."""
    recipes = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        if "\t" not in line:
            raise ValueError(f"{path}:{lineno}: expected cuisine<TAB>ingredients")
        _, ings = line.split("\t", 1)
        recipes.append(frozenset(s.strip() for s in ings.split(";") if s.strip()))
    return recipes


def read_matches_csv(path) -> dict:
    out = {}
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            pid = row["product_id"].strip()
            flav = frozenset(s.strip() for s in (row.get("flavour_ingredients") or "").split(";") if s.strip())
            rec = (row.get("recipe_ingredient") or "").strip() or None
            if rec is not None and ";" in rec:
                raise ValueError(f"{path}: product {pid} maps to more than one recipe ingredient")
            out[pid] = ProductMatch(pid, flav, rec)
    return out


def read_hierarchy_csv(path) -> dict:
    """``product_id,L1,L2,L3,L4`` -> product -> {level: label}."""
    out = {}
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            pid = row.pop("product_id").strip()
            out[pid] = {k: (v or "").strip() for k, v in row.items()}
    return out


# --- pairwise statistics ------------------------------------------------------


def _jaccard(a: set, b: set) -> float:
    union = a | b
    return len(a & b) / len(union) if union else 0.0


def _match(matches: dict, pid: str) -> ProductMatch:
    try:
        return matches[pid]
    except KeyError:
        raise KeyError(f"product {pid!r} is not matched") from None


def jaccard_flavour(matches: dict, compounds: dict, i: str, j: str) -> float:
    """Jaccard index of the compound sets pooled over each product's ingredients."""
    ci = set().union(*(compounds.get(x, set()) for x in _match(matches, i).flavour_ingredients))
    cj = set().union(*(compounds.get(x, set()) for x in _match(matches, j).flavour_ingredients))
    return _jaccard(ci, cj)


def jaccard_recipe(matches: dict, recipes, i: str, j: str) -> float:
    """Jaccard index of the recipe sets using each product's ingredient;
    0 when both map to the same ingredient."""
    a, b = _match(matches, i).recipe_ingredient, _match(matches, j).recipe_ingredient
    if a is None or b is None:
        raise KeyError("both products need a recipe ingredient")
    if a == b:
        return 0.0
    ri = {k for k, r in enumerate(recipes) if a in r}
    rj = {k for k, r in enumerate(recipes) if b in r}
    return _jaccard(ri, rj)


@dataclass(frozen=True)
class MWWResult:
    u_statistic: float
    p_value: float
    method: str


def _exact_u_counts(ranks2: np.ndarray, n1: int) -> dict:
    """Number of size-n1 subsets per doubled rank sum."""
    # dp[k] maps doubled rank sum -> count of k-subsets
    dp = [dict() for _ in range(n1 + 1)]
    dp[0][0] = 1
    for r in ranks2.tolist():
        for k in range(min(n1, len(ranks2)) - 1, -1, -1):
            for s, c in dp[k].items():
                dp[k + 1][s + r] = dp[k + 1].get(s + r, 0) + c
    return dp[n1]


def mww_test(x, y, alternative: str = "two_sided") -> MWWResult:
    """Mann-Whitney U test of x against y.

    U counts pairs with x > y (ties count 1/2). Combined sizes up to 20 use
    the exact permutation law of the mid-ranks, so ties are handled exactly;
    larger samples use the tie-corrected normal approximation with
    continuity correction.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size == 0 or y.size == 0:
        raise ValueError("both samples must be nonempty")
    alt = {"two_sided": "two-sided", "two-sided": "two-sided", "greater": "greater", "less": "less"}.get(alternative)
    if alt is None:
        raise ValueError(f"unknown alternative {alternative!r}")
    n1, n2 = x.size, y.size
    ranks = stats.rankdata(np.concatenate([x, y]))
    u = float(ranks[:n1].sum() - n1 * (n1 + 1) / 2)
    if n1 + n2 > EXACT_MWW_LIMIT:
        res = stats.mannwhitneyu(x, y, alternative=alt, method="asymptotic", use_continuity=True)
        return MWWResult(u, float(res.pvalue), "normal")
    ranks2 = np.rint(2 * ranks).astype(np.int64)
    counts = _exact_u_counts(ranks2, n1)
    total = sum(counts.values())
    obs = int(ranks2[:n1].sum())
    p_le = sum(c for s, c in counts.items() if s <= obs) / total
    p_ge = sum(c for s, c in counts.items() if s >= obs) / total
    if alt == "less":
        p = p_le
    elif alt == "greater":
        p = p_ge
    else:
        p = min(1.0, 2 * min(p_le, p_ge))
    return MWWResult(u, float(p), "exact")


def correlations(x, y) -> dict:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be paired 1-d samples")
    if x.size < 3:
        raise ValueError("need at least 3 pairs")
    pr = stats.pearsonr(x, y)
    sr = stats.spearmanr(x, y)
    return {
        "pearson": float(pr.statistic),
        "pearson_p": float(pr.pvalue),
        "spearman": float(sr.statistic),
        "spearman_p": float(sr.pvalue),
    }


def pair_values(scores: ScoreMatrix, labels, external, positive_only: bool = True):
    """Paired (score, external) samples over product pairs.

    ``external(a, b)`` returns a number or None (pair skipped). Symmetric
    scores use unordered pairs; directed ones use ordered pairs.
    """
    v = scores.values
    n = v.shape[0]
    pairs = itertools.combinations(range(n), 2) if scores.symmetric else itertools.permutations(range(n), 2)
    xs, ys = [], []
    for i, j in pairs:
        if positive_only and v[i, j] <= 0:
            continue
        e = external(labels[i], labels[j])
        if e is None:
            continue
        xs.append(v[i, j])
        ys.append(e)
    return np.asarray(xs), np.asarray(ys)


# --- recipe path --------------------------------------------------------------


def recipe_pipeline(recipes, matches: dict, config: PipelineConfig, products=None) -> dict:
    """Score ingredients with recipes as transactions, then lift to products.

    Product pairs sharing one ingredient get complement 0 and substitute 1.
    Products without a recipe ingredient, or whose ingredient never occurs
    in a recipe, are excluded and listed under ``excluded``.
    """
    products = sorted(matches) if products is None else list(products)
    recipes = [r for r in recipes if r]
    empty = {
        "wcr": ScoreMatrix(np.zeros((0, 0)), Kind.COMP, config.measure, not Measure(config.measure).directed),
        "wsr": ScoreMatrix(np.zeros((0, 0)), Kind.SUBS, config.measure, not Measure(config.measure).directed),
        "products": (),
        "excluded": tuple(products),
        "scored": None,
    }
    if not recipes:
        return empty
    # zero-padded ids keep recipe order under the network's lexicographic sort
    width = len(str(len(recipes)))
    records = [TransactionRecord(f"R{k:0{width}d}", ing) for k, r in enumerate(recipes) for ing in sorted(r)]
    try:
        net = build_network(records, config.frequency_filter)
    except EmptyNetworkError:
        return empty
    scored = score_network(net, config)
    ing_index = {ing: k for k, ing in enumerate(net.product_labels)}
    kept, excluded, idx = [], [], []
    for p in products:
        ing = matches[p].recipe_ingredient if p in matches else None
        if ing is None or ing not in ing_index:
            excluded.append(p)
            continue
        kept.append(p)
        idx.append(ing_index[ing])
    if excluded:
        logger.info("recipe path excluded %d unmatched products", len(excluded))
    idx = np.asarray(idx, dtype=np.int64)
    wc = scored.wc.values[np.ix_(idx, idx)].copy()
    ws = scored.ws.values[np.ix_(idx, idx)].copy()
    same = idx[:, None] == idx[None, :]
    off = ~np.eye(len(idx), dtype=bool)
    wc[same & off] = 0.0
    ws[same & off] = 1.0
    np.fill_diagonal(wc, 0.0)
    np.fill_diagonal(ws, 0.0)
    return {
        "wcr": scored.wc.with_values(wc),
        "wsr": scored.ws.with_values(ws),
        "products": tuple(kept),
        "excluded": tuple(excluded),
        "scored": scored,
    }


def same_ingredient_partition(matches: dict, products) -> Partition:
    """Roles grouping products matched to the same recipe ingredient."""
    products = [p for p in products if p in matches and matches[p].recipe_ingredient is not None]
    ings = [matches[p].recipe_ingredient for p in products]
    _, assign = np.unique(ings, return_inverse=True) if ings else ([], np.zeros(0, dtype=np.int64))
    return Partition(np.asarray(assign), None, None, tuple(products))


# --- roles --------------------------------------------------------------------


def role_category_profile(partition: Partition, hierarchy: dict, level: str = "L3", labels=None) -> dict:
    """role -> {category: proportion}, proportions within a role summing to 1."""
    labels = labels if labels is not None else partition.labels
    if labels is None:
        raise ValueError("partition needs product labels")
    out: dict = {}
    for role, members in enumerate(partition.members()):
        cats = []
        for k in members:
            pid = labels[k]
            try:
                cats.append(hierarchy[pid][level])
            except KeyError:
                raise KeyError(f"product {pid!r} has no {level} label") from None
        vals, counts = np.unique(cats, return_counts=True)
        out[role] = {str(v): float(c) / len(cats) for v, c in zip(vals, counts)}
    return out


def _aligned(p1: Partition, p2: Partition):
    if p1.labels is None or p2.labels is None:
        if p1.n != p2.n:
            raise ValueError("unlabelled partitions must have equal size")
        return p1.assignment, p2.assignment
    pos2 = {lab: k for k, lab in enumerate(p2.labels)}
    shared = [(k, pos2[lab]) for k, lab in enumerate(p1.labels) if lab in pos2]
    if not shared:
        raise ValueError("partitions share no products")
    i1, i2 = map(np.asarray, zip(*shared))
    return p1.assignment[i1], p2.assignment[i2]


def compare_roles(partitions: dict) -> list:
    """Pairwise NMI/AMI rows over the shared products of each pair."""
    rows = []
    for (na, pa), (nb, pb) in itertools.combinations(partitions.items(), 2):
        a, b = _aligned(pa, pb)
        rows.append({"a": na, "b": nb, "n_shared": int(len(a)), "nmi": nmi(a, b), "ami": ami(a, b)})
    return rows


# --- robustness ---------------------------------------------------------------


def relative_distance(x1, x2, labels1=None, labels2=None) -> float:
    """Mean over ordered pairs i != j of |x1 - x2| / mean(x1, x2); pairs
    scoring 0 in both count as 0. With labels, compares shared products."""
    a = np.asarray(x1, dtype=float)
    b = np.asarray(x2, dtype=float)
    if labels1 is not None and labels2 is not None:
        pos2 = {lab: k for k, lab in enumerate(labels2)}
        shared = [(k, pos2[lab]) for k, lab in enumerate(labels1) if lab in pos2]
        if len(shared) < 2:
            raise ValueError("fewer than two shared products")
        i1, i2 = map(np.asarray, zip(*shared))
        a, b = a[np.ix_(i1, i1)], b[np.ix_(i2, i2)]
    if a.shape != b.shape:
        raise ValueError("score matrices differ in shape")
    mean = 0.5 * (a + b)
    with np.errstate(divide="ignore", invalid="ignore"):
        d = np.where(mean > 0, np.abs(a - b) / np.where(mean > 0, mean, 1.0), 0.0)
    off = ~np.eye(a.shape[0], dtype=bool)
    return float(d[off].mean())


def split_records(records, split_date: str):
    """Records dated before ``split_date`` and on/after it."""
    cut = dt.date.fromisoformat(split_date)
    first, second = [], []
    for r in records:
        if r.date is None:
            raise ValueError(f"record in transaction {r.transaction_id} has no date")
        (first if dt.date.fromisoformat(r.date) < cut else second).append(r)
    if not first or not second:
        raise ValueError(f"split date {split_date} lies outside the data range")
    return first, second


def split_robustness(records, split_date: str, config: PipelineConfig) -> dict:
    first, second = split_records(records, split_date)
    halves = []
    for part in (first, second):
        net = build_network(part, config.frequency_filter)
        scored = score_network(net, config)
        halves.append((scored, detect_roles(scored, config)))
    (s1, r1), (s2, r2) = halves
    out = {
        "relative_distance_c": relative_distance(s1.wc.values, s2.wc.values, s1.labels, s2.labels),
        "relative_distance_s": relative_distance(s1.ws.values, s2.ws.values, s1.labels, s2.labels),
        "n_shared_products": len(set(s1.labels) & set(s2.labels)),
    }
    for kind in ("comp", "subs"):
        a, b = _aligned(r1[kind], r2[kind])
        out[f"role_nmi_{kind}"] = nmi(a, b)
        out[f"role_ami_{kind}"] = ami(a, b)
    return out


# --- reports ------------------------------------------------------------------


def write_tsv(rows: list, path, columns=None) -> None:
    columns = columns or (list(rows[0]) if rows else [])
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write("\t".join(columns) + "\n")
        for row in rows:
            fh.write("\t".join(_fmt(row.get(c, "")) for c in columns) + "\n")


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.12g}"
    return str(v)


def write_histogram(values, path, bins: int = 20, value_range=(0.0, 1.0)) -> None:
    counts, edges = np.histogram(np.asarray(values, dtype=float), bins=bins, range=value_range)
    rows = [{"bin_lo": edges[k], "bin_hi": edges[k + 1], "count": int(c)} for k, c in enumerate(counts)]
    write_tsv(rows, path, ["bin_lo", "bin_hi", "count"])


# --- report driver --------------------------------------------------------------


def _pair_rows(name, x, y) -> dict:
    row = {"comparison": name, "n_pairs": int(len(x))}
    if len(x) >= 3 and np.ptp(x) > 0 and np.ptp(y) > 0:
        row.update(correlations(x, y))
    return row


def run_validation(records, net, config: PipelineConfig, out_dir) -> dict:
    """Write every report the given external data allows.

    Returns ``{"notices": [...], "files": [...]}``.
    """
    out_dir = Path(out_dir)
    notices, files = [], []
    have = {k: getattr(config, k) for k in ("flavour", "recipes", "matches", "hierarchy", "split_date")}
    if not any(have.values()):
        notices.append("no external data given; validation skipped")
        return {"notices": notices, "files": files}

    def out(name):
        files.append(name)
        return out_dir / name

    scored = score_network(net, config)
    roles = detect_roles(scored, config)
    labels = scored.labels
    matches = read_matches_csv(config.matches) if config.matches else None

    corr_rows, mww_rows = [], []
    externals = {}
    if config.flavour:
        if matches is None:
            raise ValueError("flavour validation needs a match file")
        compounds = read_flavour_csv(config.flavour)
        externals["flavour"] = lambda a, b: (
            jaccard_flavour(matches, compounds, a, b) if a in matches and b in matches
            and matches[a].flavour_ingredients and matches[b].flavour_ingredients else None
        )
    recipes = None
    if config.recipes:
        if matches is None:
            raise ValueError("recipe validation needs a match file")
        recipes = read_recipes(config.recipes)
        externals["recipe"] = lambda a, b: (
            jaccard_recipe(matches, recipes, a, b) if a in matches and b in matches
            and matches[a].recipe_ingredient and matches[b].recipe_ingredient else None
        )

    for ext_name, fn in externals.items():
        _, everything = pair_values(scored.wc.with_values(np.ones_like(scored.wc.values)), labels, fn)
        for kind, sm in (("comp", scored.wc), ("subs", scored.ws)):
            x, y = pair_values(sm, labels, fn)
            corr_rows.append(_pair_rows(f"{kind}_score_vs_{ext_name}_jaccard", x, y))
            write_histogram(y, out(f"hist_{ext_name}_{kind}.tsv"))
            if len(y) and len(everything):
                for alt in ("greater", "less"):
                    r = mww_test(y, everything, alt)
                    mww_rows.append({"sample": f"{ext_name}_{kind}_pairs", "versus": "all_pairs",
                                     "alternative": alt, "n_x": len(y), "n_y": len(everything),
                                     "u_statistic": r.u_statistic, "p_value": r.p_value, "method": r.method})
        write_histogram(everything, out(f"hist_{ext_name}_all.tsv"))

    if recipes is not None:
        rp = recipe_pipeline(recipes, matches, config, products=labels)
        rlabels = rp["products"]
        if rlabels:
            pos = {lab: k for k, lab in enumerate(rlabels)}
            for kind, sales, rec in (("comp", scored.wc, rp["wcr"]), ("subs", scored.ws, rp["wsr"])):
                rv = rec.values
                fn = lambda a, b, rv=rv: float(rv[pos[a], pos[b]]) if a in pos and b in pos else None
                x, y = pair_values(sales, labels, fn)
                corr_rows.append(_pair_rows(f"{kind}_score_vs_recipe_{kind}_score", x, y))
            recipe_roles = detect_roles(
                type(scored)(rp["scored"].net, rp["scored"].relations, rp["wcr"], rp["wsr"], 0.0, 0.0), config
            ) if rp["scored"] is not None else None
            parts = {"sales_com": roles["comp"], "sales_sub": roles["subs"],
                     "l0_sub": same_ingredient_partition(matches, labels)}
            if recipe_roles is not None:
                parts["l1_sub"] = Partition(recipe_roles["subs"].assignment, None, None, rlabels)
                parts["l_com"] = Partition(recipe_roles["comp"].assignment, None, None, rlabels)
            write_tsv(compare_roles(parts), out("role_agreement.tsv"), ["a", "b", "n_shared", "nmi", "ami"])
        else:
            notices.append("no product matched a recipe ingredient; recipe comparison skipped")

    if corr_rows:
        write_tsv(corr_rows, out("correlations.tsv"),
                  ["comparison", "n_pairs", "pearson", "pearson_p", "spearman", "spearman_p"])
    if mww_rows:
        write_tsv(mww_rows, out("mww.tsv"),
                  ["sample", "versus", "alternative", "n_x", "n_y", "u_statistic", "p_value", "method"])

    if config.hierarchy:
        hierarchy = read_hierarchy_csv(config.hierarchy)
        rows = []
        for kind, part in roles.items():
            keep = [k for k in range(part.n) if not part.isolated[k]]
            prof = role_category_profile(part.restrict(keep), hierarchy, config.hierarchy_level)
            for role, props in prof.items():
                rows.extend({"network": kind, "role": role, "category": c, "proportion": v}
                            for c, v in sorted(props.items()))
        write_tsv(rows, out("role_categories.tsv"), ["network", "role", "category", "proportion"])

    if config.split_date:
        res = split_robustness(records, config.split_date, config)
        write_tsv([res], out("split_robustness.tsv"), list(res))
    return {"notices": notices, "files": files}
