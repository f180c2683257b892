import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from compsub.community import Partition, ami, nmi
from compsub.network import build_network, network_from_biadjacency
from compsub.pipeline import PipelineConfig, score_network
from compsub.simulator import WorldSpec, generate
from compsub.validation import (
    ProductMatch,
    compare_roles,
    correlations,
    jaccard_flavour,
    jaccard_recipe,
    mww_test,
    pair_values,
    read_flavour_csv,
    read_hierarchy_csv,
    read_matches_csv,
    read_recipes,
    recipe_pipeline,
    relative_distance,
    role_category_profile,
    run_validation,
    same_ingredient_partition,
    split_records,
    split_robustness,
    write_histogram,
)
from oracles import contingency_nmi_ami, exact_mww_p

RECIPES = [
    frozenset({"tomato", "basil", "garlic"}),
    frozenset({"tomato", "garlic"}),
    frozenset({"basil", "oil"}),
    frozenset({"tomato", "oil", "garlic"}),
    frozenset({"basil", "tomato"}),
]
MATCHES = {
    "a": ProductMatch("a", frozenset({"tomato"}), "tomato"),
    "b": ProductMatch("b", frozenset({"tomato", "basil"}), "tomato"),
    "c": ProductMatch("c", frozenset({"basil"}), "basil"),
    "d": ProductMatch("d", frozenset({"garlic"}), "garlic"),
    "e": ProductMatch("e", frozenset(), None),
    "f": ProductMatch("f", frozenset(), "saffron"),
}


def test_jaccard_flavour_examples():
    compounds = {"x": {"a", "b", "c"}, "y": {"b", "c", "d"}, "z": {"q"}}
    m = {"i": ProductMatch("i", frozenset({"x"})), "j": ProductMatch("j", frozenset({"y"})),
         "k": ProductMatch("k", frozenset({"z"}))}
    assert jaccard_flavour(m, compounds, "i", "j") == 0.5
    assert jaccard_flavour(m, compounds, "i", "i") == 1.0
    assert jaccard_flavour(m, compounds, "i", "k") == 0.0
    with pytest.raises(KeyError):
        jaccard_flavour(m, compounds, "i", "missing")


def test_jaccard_recipe_examples():
    # tomato in recipes {0,1,3,4}, garlic in {0,1,3}: 3 shared of 4
    assert jaccard_recipe(MATCHES, RECIPES, "a", "d") == 0.75
    assert jaccard_recipe(MATCHES, RECIPES, "a", "b") == 0.0
    recipes = [{"u"}, {"u", "v"}, {"v", "u"}, {"u"}, {"v"}, {"v"}]
    m = {"i": ProductMatch("i", recipe_ingredient="u"), "j": ProductMatch("j", recipe_ingredient="v"),
         "k": ProductMatch("k", recipe_ingredient="w")}
    assert jaccard_recipe(m, recipes, "i", "j") == pytest.approx(2 / 6)
    assert jaccard_recipe(m, recipes, "i", "k") == 0.0


def test_mww_exact_small():
    res = mww_test([1, 2], [3, 4], "less")
    assert res.u_statistic == 0 and res.p_value == pytest.approx(1 / 6) and res.method == "exact"
    assert mww_test([1, 2, 3], [1, 2, 3]).p_value > 0.5
    with pytest.raises(ValueError):
        mww_test([], [1])
    with pytest.raises(ValueError):
        mww_test([1], [2], "sideways")


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 4), min_size=1, max_size=6), st.lists(st.integers(0, 4), min_size=1, max_size=6),
       st.sampled_from(["less", "greater", "two_sided"]))
def test_mww_exact_matches_enumeration_with_ties(x, y, alt):
    assert mww_test(x, y, alt).p_value == pytest.approx(exact_mww_p(x, y, alt), abs=1e-12)


def test_mww_exact_close_to_normal_on_continuous_samples():
    rng = np.random.default_rng(0)
    for _ in range(100):
        x, y = rng.normal(size=10), rng.normal(rng.uniform(0, 1.5), size=10)
        for alt in ("less", "greater", "two_sided"):
            exact = mww_test(x, y, alt).p_value
            normal = stats.mannwhitneyu(x, y, alternative=alt.replace("_", "-"), method="asymptotic").pvalue
            assert abs(exact - normal) <= 0.02


def test_mww_large_uses_normal():
    rng = np.random.default_rng(1)
    res = mww_test(rng.normal(size=30), rng.normal(size=30), "greater")
    assert res.method == "normal" and 0 <= res.p_value <= 1


def test_correlations():
    x = np.arange(1.0, 9.0)
    c = correlations(x, 2 * x + 1)
    assert c["pearson"] == pytest.approx(1.0) and c["spearman"] == pytest.approx(1.0)
    c = correlations(x, x**2)
    assert c["spearman"] == pytest.approx(1.0) and c["pearson"] < 1
    with pytest.raises(ValueError):
        correlations([1, 2], [1, 2])


def test_spearman_eight_point_hand_ranks():
    x = [3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0]
    y = [2.0, 7.0, 1.0, 8.0, 2.0, 8.0, 1.0, 8.0]
    rx = [4, 1.5, 5, 1.5, 6, 8, 3, 7]
    ry = [3.5, 5, 1.5, 7, 3.5, 7, 1.5, 7]
    assert correlations(x, y)["spearman"] == pytest.approx(np.corrcoef(rx, ry)[0, 1], abs=1e-12)


def test_pair_values_skips_nonpositive_and_missing():
    from compsub.measures import Kind, Measure, ScoreMatrix
    v = np.array([[0, 0.5, 0], [0.5, 0, 0.2], [0, 0.2, 0]])
    s = ScoreMatrix(v, Kind.COMP, Measure.ORIGINAL, True)
    ext = lambda a, b: None if "z" in (a, b) else 1.0
    x, y = pair_values(s, ["p", "q", "r"], ext)
    assert x.tolist() == [0.5, 0.2] and y.tolist() == [1.0, 1.0]
    x, _ = pair_values(s, ["p", "q", "r"], ext, positive_only=False)
    assert len(x) == 3


def test_recipe_pipeline_matches_hand_run():
    # five recipes are too few for the ER normal approximation
    config = PipelineConfig(null_model="bicm-poisson", alpha_m=0.5, alpha_l=0.5, q_s=0.0)
    res = recipe_pipeline(RECIPES, MATCHES, config)
    assert res["products"] == ("a", "b", "c", "d")
    assert res["excluded"] == ("e", "f")
    ings = ["basil", "garlic", "oil", "tomato"]
    a = np.array([[int(i in r) for i in ings] for r in RECIPES])
    hand = score_network(network_from_biadjacency(a, product_labels=ings), config)
    k = {"a": 3, "b": 3, "c": 0, "d": 1}
    prods = res["products"]
    for x, p in enumerate(prods):
        for y, q in enumerate(prods):
            if x == y:
                continue
            if k[p] == k[q]:
                assert res["wcr"].values[x, y] == 0.0 and res["wsr"].values[x, y] == 1.0
            else:
                assert res["wcr"].values[x, y] == hand.wc.values[k[p], k[q]]
                assert res["wsr"].values[x, y] == hand.ws.values[k[p], k[q]]


def test_recipe_pipeline_empty():
    res = recipe_pipeline([], MATCHES, PipelineConfig())
    assert res["wcr"].values.shape == (0, 0) and res["products"] == ()


def test_recipe_path_reproduces_sales_path():
    records = generate(WorldSpec(seed=3))
    config = PipelineConfig(q_s=0.0)
    net = build_network(records)
    sales = score_network(net, config)
    baskets = {}
    for r in records:
        baskets.setdefault(r.transaction_id, set()).add(r.product_id)
    recipes = [frozenset(baskets[t]) for t in sorted(baskets)]
    matches = {p: ProductMatch(p, recipe_ingredient=p) for p in net.product_labels}
    res = recipe_pipeline(recipes, matches, config)
    assert res["products"] == net.product_labels
    off = ~np.eye(net.n_p, dtype=bool)
    np.testing.assert_array_equal(res["wcr"].values[off], sales.wc.values[off])
    np.testing.assert_array_equal(res["wsr"].values[off], sales.ws.values[off])


def test_same_ingredient_partition():
    p = same_ingredient_partition(MATCHES, sorted(MATCHES))
    assert p.labels == ("a", "b", "c", "d", "f")
    assert p.assignment[0] == p.assignment[1]
    assert len(set(p.assignment.tolist())) == 4


def test_role_category_profile():
    hierarchy = {p: {"L3": cat} for p, cat in
                 zip("abcdefg", ["x", "x", "y", "x", "y", "z", "z"])}
    part = Partition(np.array([0, 0, 1, 1, 1, 1, 2]), labels=tuple("abcdefg"))
    prof = role_category_profile(part, hierarchy)
    assert prof == {0: {"x": 1.0}, 1: {"x": 0.25, "y": 0.5, "z": 0.25}, 2: {"z": 1.0}}
    even = role_category_profile(Partition(np.zeros(4, int), labels=tuple("abce")), hierarchy)
    assert even == {0: {"x": 0.5, "y": 0.5}}
    with pytest.raises(KeyError):
        role_category_profile(part, {"a": {"L3": "x"}})


def test_compare_roles_aligns_on_shared_products():
    p1 = Partition(np.array([0, 0, 1, 1, 2]), labels=("a", "b", "c", "d", "e"))
    p2 = Partition(np.array([1, 0, 0, 2]), labels=("d", "c", "b", "z"))
    rows = compare_roles({"s": p1, "r": p2, "self": p1})
    assert rows[0]["n_shared"] == 3
    want_nmi, want_ami = contingency_nmi_ami([0, 1, 1], [1, 1, 0])
    assert rows[0]["nmi"] == pytest.approx(want_nmi) and rows[0]["ami"] == pytest.approx(want_ami)
    assert rows[1]["nmi"] == 1.0 and rows[1]["ami"] == 1.0


def test_relative_distance_example():
    a = np.full((3, 3), 0.5)
    b = a.copy()
    a[0, 1] = 0.2
    b[0, 1] = 0.1
    assert relative_distance(a, b) == pytest.approx((2 / 3) / 6)
    assert relative_distance(a, a) == 0.0
    assert relative_distance(np.zeros((3, 3)), np.zeros((3, 3))) == 0.0


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_relative_distance_symmetric_and_zero_iff_equal(seed):
    rng = np.random.default_rng(seed)
    a = rng.random((5, 5)) * (rng.random((5, 5)) < 0.5)
    b = rng.random((5, 5)) * (rng.random((5, 5)) < 0.5)
    assert relative_distance(a, b) == relative_distance(b, a)
    off = ~np.eye(5, dtype=bool)
    assert (relative_distance(a, b) == 0) == bool((a[off] == b[off]).all())


def test_relative_distance_with_labels():
    a = np.array([[0, 0.4], [0.4, 0]])
    b = np.array([[0, 0.1, 0.4], [0.1, 0, 0], [0.4, 0, 0]])
    assert relative_distance(a, b, ["p", "q"], ["p", "z", "q"]) == 0.0


def test_split_records():
    records = generate(WorldSpec(seed=1))
    first, second = split_records(records, "2021-02-15")
    assert len(first) + len(second) == len(records)
    assert max(r.date for r in first) < "2021-02-15" <= min(r.date for r in second)
    with pytest.raises(ValueError, match="outside"):
        split_records(records, "2030-01-01")


def test_split_robustness_on_world():
    res = split_robustness(generate(WorldSpec(seed=1, n_transactions=2000)), "2021-02-18", PipelineConfig(q_s=0.0))
    assert res["n_shared_products"] == 13
    assert 0 <= res["relative_distance_c"] < 0.5
    assert res["role_nmi_subs"] > 0.8


def test_readers_round_trip(tmp_path):
    (tmp_path / "flav.csv").write_text("ingredient,compound\ntomato,c1\ntomato,c2\nbasil,c2\n")
    (tmp_path / "rec.tsv").write_text("italian\ttomato;basil\n\nthai\tbasil\n")
    (tmp_path / "m.csv").write_text("product_id,flavour_ingredients,recipe_ingredient\nA,tomato;basil,tomato\nB,,\n")
    (tmp_path / "h.csv").write_text("product_id,L1,L2,L3,L4\nA,f,g,veg,t\n")
    assert read_flavour_csv(tmp_path / "flav.csv") == {"tomato": {"c1", "c2"}, "basil": {"c2"}}
    assert read_recipes(tmp_path / "rec.tsv") == [frozenset({"tomato", "basil"}), frozenset({"basil"})]
    m = read_matches_csv(tmp_path / "m.csv")
    assert m["A"].flavour_ingredients == {"tomato", "basil"} and m["B"].recipe_ingredient is None
    assert read_hierarchy_csv(tmp_path / "h.csv")["A"]["L3"] == "veg"
    (tmp_path / "bad.csv").write_text("product_id,flavour_ingredients,recipe_ingredient\nA,,x;y\n")
    with pytest.raises(ValueError):
        read_matches_csv(tmp_path / "bad.csv")
    (tmp_path / "bad.tsv").write_text("no tab here\n")
    with pytest.raises(ValueError):
        read_recipes(tmp_path / "bad.tsv")


def test_histogram(tmp_path):
    write_histogram([0.05, 0.05, 0.95], tmp_path / "h.tsv", bins=2)
    assert (tmp_path / "h.tsv").read_text().splitlines() == ["bin_lo\tbin_hi\tcount", "0\t0.5\t2", "0.5\t1\t1"]


def test_run_validation_without_data(tmp_path):
    records = generate(WorldSpec(seed=0))
    out = run_validation(records, build_network(records), PipelineConfig(), tmp_path)
    assert out == {"notices": ["no external data given; validation skipped"], "files": []}
