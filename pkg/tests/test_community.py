import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from compsub.community import (
    Baseline,
    CalibrationGrid,
    Partition,
    RoleType,
    ami,
    calibrate,
    classify_roles,
    codelength,
    contingency,
    detect_communities,
    nmi,
    role_adjacency,
    write_role_adjacency_tsv,
    write_trace_tsv,
)
from compsub.measures import build_weighted_networks
from compsub.network import co_purchase_counts
from compsub.nullmodels import NullModel, NullModelSpec, relation_matrices
from compsub.simulator import WorldSpec
from oracles import contingency_nmi_ami, map_equation_oracle


def cliques(sizes, bridges=()):
    n = sum(sizes)
    w = np.zeros((n, n))
    start = 0
    for s in sizes:
        w[start:start + s, start:start + s] = 1.0
        start += s
    for i, j in bridges:
        w[i, j] = w[j, i] = 1.0
    np.fill_diagonal(w, 0.0)
    return w


TWO_TRIANGLES = cliques([3, 3], [(2, 3)])
RING = cliques([4, 4, 4, 4], [(3, 4), (7, 8), (11, 12), (15, 0)])


def test_codelength_matches_oracle():
    rng = np.random.default_rng(0)
    for _ in range(20):
        n = int(rng.integers(3, 10))
        w = rng.random((n, n)) * (rng.random((n, n)) < 0.5)
        w = w + w.T
        np.fill_diagonal(w, 0.0)
        if not w.any():
            continue
        a = rng.integers(0, 3, size=n)
        assert codelength(w, a) == pytest.approx(map_equation_oracle(w, a), abs=1e-12)


def test_one_module_codelength_is_visit_entropy():
    pi = TWO_TRIANGLES.sum(axis=1) / TWO_TRIANGLES.sum()
    assert codelength(TWO_TRIANGLES, np.zeros(6)) == pytest.approx(-(pi * np.log2(pi)).sum())


def test_two_triangles_partition_and_codelengths():
    p = detect_communities(TWO_TRIANGLES, seed=0)
    assert p.assignment.tolist() == [0, 0, 0, 1, 1, 1]
    one = map_equation_oracle(TWO_TRIANGLES, [0] * 6)
    singles = map_equation_oracle(TWO_TRIANGLES, list(range(6)))
    assert p.codelength == pytest.approx(map_equation_oracle(TWO_TRIANGLES, p.assignment.tolist()))
    assert p.codelength < one < singles


def test_clique_singletons_code_longer_than_one_module():
    k5 = cliques([5])
    assert codelength(k5, np.arange(5)) > codelength(k5, np.zeros(5))


def test_ring_of_cliques():
    p = detect_communities(RING, seed=1)
    assert p.n_roles == 4
    assert sorted(map(tuple, (m.tolist() for m in p.members()))) == [
        (0, 1, 2, 3), (4, 5, 6, 7), (8, 9, 10, 11), (12, 13, 14, 15)]
    assert p.codelength < map_equation_oracle(RING, [0] * 16)
    assert p.codelength < map_equation_oracle(RING, list(range(16)))


def test_disconnected_cliques_and_isolated_nodes():
    w = np.zeros((8, 8))
    w[:7, :7] = cliques([3, 4])
    p = detect_communities(w, seed=0)
    assert p.assignment.tolist() == [0, 0, 0, 1, 1, 1, 1, 2]
    assert p.isolated.tolist() == [False] * 7 + [True]


def test_all_zero_graph():
    p = detect_communities(np.zeros((3, 3)))
    assert p.n_roles == 3 and p.isolated.all()
    with pytest.raises(ValueError):
        codelength(np.zeros((3, 3)), [0, 0, 1])


def test_negative_weights_rejected():
    with pytest.raises(ValueError):
        detect_communities(-TWO_TRIANGLES)


def test_detect_is_deterministic():
    rng = np.random.default_rng(4)
    w = rng.random((15, 15)) * (rng.random((15, 15)) < 0.3)
    w = w + w.T
    a = detect_communities(w, seed=7)
    b = detect_communities(w, seed=7)
    assert a.assignment.tolist() == b.assignment.tolist()


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(4, 14), st.floats(0.01, 100.0))
def test_codelength_invariants(seed, n, scale):
    rng = np.random.default_rng(seed)
    w = rng.random((n, n)) * (rng.random((n, n)) < 0.4)
    w = w + w.T
    np.fill_diagonal(w, 0.0)
    if not w.any():
        return
    a = rng.integers(0, 3, size=n)
    assert codelength(w * scale, a) == pytest.approx(codelength(w, a), abs=1e-9)
    p = detect_communities(w, seed=seed, n_trials=3)
    active = w.sum(axis=1) > 0
    sub = w[np.ix_(active, active)]
    assert p.codelength <= codelength(sub, np.zeros(active.sum())) + 1e-12


def test_partition_relabels_densely():
    p = Partition(np.array([5, 5, 2, 9, 2]))
    assert p.assignment.tolist() == [0, 0, 1, 2, 1]
    assert p.sizes().tolist() == [2, 2, 1]
    assert p.to_dict(["a", "b", "c", "d", "e"]) == {"a": 0, "b": 0, "c": 1, "d": 2, "e": 1}


def test_nmi_examples():
    same = [0, 0, 1, 1, 2]
    assert nmi(same, same) == 1.0 and ami(same, same) == 1.0
    assert nmi(list(range(6)), [0] * 6) == 0.0
    with pytest.raises(ValueError):
        contingency([0, 1], [0, 1, 2])


def test_nmi_ten_node_fixture():
    a = [0, 0, 0, 1, 1, 1, 2, 2, 2, 2]
    b = [0, 0, 1, 1, 1, 2, 2, 2, 0, 0]
    want_nmi, want_ami = contingency_nmi_ami(a, b)
    assert nmi(a, b) == pytest.approx(want_nmi, abs=1e-12)
    assert ami(a, b) == pytest.approx(want_ami, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 30), st.integers(1, 6), st.integers(1, 6))
def test_nmi_ami_match_oracle(seed, n, k1, k2):
    rng = np.random.default_rng(seed)
    a = rng.integers(0, k1, size=n).tolist()
    b = rng.integers(0, k2, size=n).tolist()
    want_nmi, want_ami = contingency_nmi_ami(a, b)
    assert nmi(a, b) == pytest.approx(want_nmi, abs=1e-9)
    assert ami(a, b) == pytest.approx(want_ami, abs=1e-9)
    assert nmi(a, b) == pytest.approx(nmi(b, a), abs=1e-12)
    assert ami(a, b) == pytest.approx(ami(b, a), abs=1e-12)


def test_role_adjacency_hand_computation():
    w = np.zeros((4, 4))
    w[0, 1] = w[1, 0] = 1.0
    w[0, 2] = w[2, 0] = 0.5
    w[1, 3] = w[3, 1] = 0.25
    w[2, 3] = w[3, 2] = 2.0
    adj = role_adjacency(w, Partition(np.array([0, 0, 1, 1])))
    np.testing.assert_allclose(adj.b, [[0.5, 0.1875], [0.1875, 1.0]])
    assert classify_roles(adj) == [RoleType.MIXED, RoleType.ASSORTATIVE]


def test_role_classes():
    internal = cliques([3, 3])
    part = Partition(np.array([0, 0, 0, 1, 1, 1]))
    assert classify_roles(role_adjacency(internal, part)) == [RoleType.ASSORTATIVE] * 2
    across = np.zeros((6, 6))
    across[:3, 3:] = 1.0
    across[3:, :3] = 1.0
    assert classify_roles(role_adjacency(across, part)) == [RoleType.DISASSORTATIVE] * 2
    with pytest.raises(ValueError):
        classify_roles(role_adjacency(across, part), dominance_ratio=0)


def test_role_adjacency_drops_isolated(tmp_path):
    w = np.zeros((4, 4))
    w[:3, :3] = cliques([3])
    p = detect_communities(w)
    adj = role_adjacency(w, p, drop_isolated=True)
    assert adj.n_roles == 1 and adj.sizes.tolist() == [3]
    path = tmp_path / "b.tsv"
    write_role_adjacency_tsv(adj, path)
    assert path.read_text().splitlines()[0] == "role\t0"


def test_grid_must_be_sorted():
    with pytest.raises(ValueError):
        CalibrationGrid(alpha_m=(0.1, 0.05))
    with pytest.raises(ValueError):
        CalibrationGrid(q_c=())


def test_baseline_only_grid_returns_baseline(world_net):
    base = Baseline()
    grid = CalibrationGrid((base.alpha,), (base.alpha,), (base.q_c,), (base.q_s,))
    res = calibrate(world_net, grid=grid, baseline=base)
    assert (res.alpha_m, res.alpha_l, res.q_c, res.q_s) == (base.alpha, base.alpha, base.q_c, base.q_s)
    assert res.fell_back == []


def test_calibration_is_monotone_consistent(world_net, tmp_path):
    res = calibrate(world_net, n_trials=3)
    for name, smallest in (("alpha_m", True), ("q_s", True), ("q_c", False), ("alpha_l", False)):
        chosen = getattr(res, name)
        for v, score in res.nmi_traces[name]:
            beyond = v < chosen if smallest else v > chosen
            if beyond:
                assert score <= 0.8
    path = tmp_path / "trace.tsv"
    write_trace_tsv(res, path)
    rows = path.read_text().splitlines()
    assert rows[0] == "parameter\tvalue\tnmi\tselected"
    assert sum(r.endswith("\t1") for r in rows[1:]) == 4


def test_calibration_falls_back_with_warning(world_net):
    # a floor this close to 1 plus a grid that empties the substitute graph
    grid = CalibrationGrid(q_s=(0.95,))
    with pytest.warns(RuntimeWarning):
        res = calibrate(world_net, grid=grid, nmi_floor=0.999, n_trials=2)
    assert "q_s" in res.fell_back and res.q_s == Baseline().q_s


def test_world_roles(world_net):
    rel = relation_matrices(world_net, NullModelSpec(NullModel.ER_VARIANT, 0.05, 0.05), co_purchase_counts(world_net))
    nets = build_weighted_networks(world_net, rel, q_c=0.0, q_s=0.0)
    labels = world_net.product_labels
    spec = WorldSpec()
    subs = detect_communities(nets["ws"].values, seed=0, labels=labels)
    group_of = {p: k for k, g in enumerate(spec.substitute_groups) for p in g}
    grouped = [k for k, p in enumerate(labels) if p in group_of]
    truth = [group_of[labels[k]] for k in grouped]
    assert nmi(subs.assignment[grouped], truth) == 1.0
    comp = detect_communities(nets["wc"].values, seed=0, labels=labels).to_dict()
    for a, b in spec.complement_pairs:
        assert comp[a] == comp[b]


def test_nmi_ami_agree_with_sklearn():
    metrics = pytest.importorskip("sklearn.metrics")
    rng = np.random.default_rng(12)
    for _ in range(50):
        n = int(rng.integers(5, 60))
        a = rng.integers(0, 5, size=n)
        b = rng.integers(0, 7, size=n)
        assert nmi(a, b) == pytest.approx(metrics.normalized_mutual_info_score(a, b), abs=1e-12)
        assert ami(a, b) == pytest.approx(metrics.adjusted_mutual_info_score(a, b), abs=1e-12)
