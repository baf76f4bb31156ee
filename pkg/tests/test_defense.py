import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedward.attacks import AttackSpec, apply_model_poison, forge_update
from fedward.defense import (
    NOISE,
    DefenseSpec,
    adaptive_clip,
    aggregate,
    amgrad,
    auto_optics,
    baseline_aggregate,
    cluster_distance_matrix,
    core_distances,
    extract_dbscan,
    fedward_aggregate,
    kmeans2_accept,
    min_group_size,
    optics_order,
    select_eps,
)
from fedward.updates import LayeredUpdate, distance_matrix, flatten, l2_norm, pairwise_distances
from oracles import amgrad_scalar, dbscan_bruteforce, largest_group


def U(*layers):
    return LayeredUpdate.from_layers((f"l{i}", np.asarray(v, dtype=float)) for i, v in enumerate(layers))


def pts(points):
    return [U(p) for p in np.asarray(points, dtype=float)]


# --- AmGrad -----------------------------------------------------------------

def test_amgrad_single_layer():
    assert flatten(amgrad(U([1.0, -2.0, 0.5]))).tolist() == [2.0, -2.0, 2.0]


def test_amgrad_zero_layer():
    assert flatten(amgrad(U([0.0, 0.0]))).tolist() == [0.0, 0.0]


def test_amgrad_per_layer():
    out = amgrad(U([3, -1], [0.5, -0.25]))
    assert [a.tolist() for a in out.arrays] == [[3, -3], [0.5, -0.5]]


def test_amgrad_keeps_shapes():
    w = LayeredUpdate.from_layers([("a", np.ones((2, 3))), ("b", np.zeros(0)), ("c", -np.ones(4))])
    assert amgrad(w).shapes == w.shapes


layer_values = st.lists(
    st.one_of(st.just(0.0), st.floats(-1e6, 1e6, allow_subnormal=False)), min_size=1, max_size=30)


@settings(max_examples=200, deadline=None)
@given(st.lists(layer_values, min_size=1, max_size=4), st.floats(1e-3, 1e3))
def test_amgrad_properties(layers, c):
    w = U(*layers)
    out = amgrad(w)
    assert [a.tolist() for a in out.arrays] == amgrad_scalar(layers)
    assert amgrad(out) == out
    assert amgrad(w * c) == amgrad(w) * c


# --- OPTICS -----------------------------------------------------------------

def test_core_distances_identical_points():
    _, _, core = optics_order(np.zeros((4, 4)), 2)
    assert core.tolist() == [0, 0, 0, 0]


def test_core_distances_collinear():
    d = pairwise_distances(pts([[0], [1], [3]]))
    _, _, core = optics_order(d, 2)
    assert core.tolist() == [1, 1, 2]


def test_two_blobs_two_infinite_reachabilities():
    rng = np.random.default_rng(0)
    blob_a = rng.normal(0, 0.1, size=(5, 3))
    blob_b = rng.normal(20, 0.1, size=(6, 3))
    d = distance_matrix(np.vstack([blob_a, blob_b]))
    ordering, reach, _ = optics_order(d, 4, max_eps=5.0)
    assert sorted(ordering) == list(range(11))
    assert int(np.isinf(reach).sum()) == 2


def test_ordering_starts_at_lowest_index_and_pops_min_reach():
    d = distance_matrix(np.array([[0.0], [10.0], [1.0], [2.5]]))
    ordering, reach, core = optics_order(d, 2)
    assert ordering == [0, 2, 3, 1]
    assert math.isinf(reach[0])
    assert reach[2] == 1.0 and reach[3] == 1.5 and reach[1] == 7.5


def test_optics_min_pts_range():
    with pytest.raises(ValueError):
        optics_order(np.zeros((3, 3)), 4)
    with pytest.raises(ValueError):
        optics_order(np.zeros((3, 3)), 1)


def _extract(points, min_pts, eps):
    d = distance_matrix(np.asarray(points, dtype=float))
    o, r, c = optics_order(d, min_pts)
    return extract_dbscan(o, r, c, eps)


def test_extract_tiny_eps_all_noise():
    assert np.all(_extract([[0], [1], [3], [7]], 2, 0.5) == NOISE)


def test_extract_huge_eps_one_cluster():
    assert _extract([[0], [1], [3], [7]], 2, 100.0).tolist() == [0, 0, 0, 0]


def test_extract_blob_and_outlier():
    blob = [[0, 0], [1, 0], [0, 1], [1, 1]]
    diameter = math.sqrt(2)
    labels = _extract(blob + [[10 * diameter, 10 * diameter]], 4, diameter)
    assert labels.tolist() == [0, 0, 0, 0, NOISE]


def test_extract_negative_eps():
    with pytest.raises(ValueError):
        extract_dbscan([0], [math.inf], [0.0], -1.0)


def _random_instance(rng):
    m = int(rng.integers(3, 13))
    dim = int(rng.integers(1, 9))
    kind = rng.integers(4)
    if kind == 0:
        x = rng.normal(size=(m, dim))
    elif kind == 1:
        k = int(rng.integers(1, m))
        x = np.vstack([rng.normal(0, 0.1, size=(m - k, dim)), rng.normal(5, 3, size=(k, dim))])
    elif kind == 2:
        x = rng.integers(0, 3, size=(m, dim)).astype(float)  # many ties
    else:
        x = np.vstack([rng.normal(0, 0.1, size=(m // 2, dim)), rng.normal(3, 0.1, size=(m - m // 2, dim))])
    return x[rng.permutation(m)]


def test_extract_matches_bruteforce_on_cores():
    rng = np.random.default_rng(7)
    for _ in range(300):
        x = _random_instance(rng)
        d = distance_matrix(x)
        m = len(x)
        min_pts = int(rng.integers(2, m + 1))
        eps = float(rng.choice(d[np.triu_indices(m, 1)]))
        o, r, c = optics_order(d, min_pts)
        got = extract_dbscan(o, r, c, eps)
        want = dbscan_bruteforce(d.tolist(), eps, min_pts)
        cores = [i for i in range(m) if c[i] <= eps]
        # same partition of the core points
        for i, j in itertools.combinations(cores, 2):
            assert (got[i] == got[j]) == (want[i] == want[j])


# --- AutoOPTICS -------------------------------------------------------------

def test_min_group_size():
    assert [min_group_size(m) for m in (3, 4, 5, 8, 16)] == [3, 3, 4, 5, 9]


def test_auto_optics_blob_and_outlier():
    rng = np.random.default_rng(3)
    for _ in range(50):
        blob = rng.uniform(-0.035, 0.035, size=(4, 3))
        x = np.vstack([blob, [[10.0, 0, 0]]])
        order = rng.permutation(5)
        res = auto_optics(pts(x[order]))
        assert res.mins_used == 4 and not res.fallback
        assert sorted(order[list(res.inds)]) == [0, 1, 2, 3]


def test_auto_optics_identical():
    res = auto_optics([U([1.0, 2.0])] * 6)
    assert res.inds == tuple(range(6)) and res.size == 6 and not res.fallback
    res = auto_optics([U([1.0, 2.0])] * 6, eps_rule="smallest_pairs")
    assert res.inds == tuple(range(6)) and not res.fallback


def test_auto_optics_two_far_pairs():
    x = pts([[0.0], [0.1], [10.0], [10.1]])
    literal = auto_optics(x, eps_rule="smallest_pairs")
    assert literal.fallback and literal.inds == (0, 1, 2, 3) and literal.mins_used == 3
    # the k-NN radius bridges the pairs: one cluster, same accepted set
    adaptive = auto_optics(x)
    assert adaptive.inds == (0, 1, 2, 3) and not adaptive.fallback


def test_auto_optics_needs_three():
    with pytest.raises(ValueError):
        auto_optics(pts([[0.0], [1.0]]))


def test_select_eps_rules():
    d = distance_matrix(np.array([[0.0], [1.0], [3.0], [6.0]]))
    # pair distances 1,2,3,3,5,6; mins=3 -> smallest three 1,2,3 -> median 2
    assert select_eps(d, 3, "smallest_pairs") == 2.0
    # 3rd nearest (self included): rows -> 3, 2, 3, 5 -> median 3
    assert select_eps(d, 3, "knn_median") == 3.0
    with pytest.raises(ValueError):
        select_eps(d, 3, "nope")


def test_smallest_pairs_rule_cannot_cluster_distinct_points():
    rng = np.random.default_rng(0)
    for _ in range(100):
        m = int(rng.integers(5, 13))
        res = cluster_distance_matrix(distance_matrix(rng.normal(size=(m, 4))), "smallest_pairs")
        assert res.fallback


@pytest.mark.parametrize("rule", ["knn_median", "smallest_pairs"])
def test_auto_optics_matches_bruteforce(rule):
    rng = np.random.default_rng(11)
    for _ in range(200):
        x = _random_instance(rng)
        d = pairwise_distances(pts(x))
        res = auto_optics(pts(x), eps_rule=rule)
        want = largest_group(dbscan_bruteforce(d.tolist(), res.eps_used, min_group_size(len(x))))
        if want is None:
            assert res.fallback and res.inds == tuple(range(len(x)))
        else:
            assert not res.fallback and list(res.inds) == want


def test_auto_optics_permutation_equivariance():
    rng = np.random.default_rng(5)
    for _ in range(100):
        x = _random_instance(rng)
        if len(np.unique(x, axis=0)) < len(x):
            continue  # tie-breaks between duplicates depend on order
        base = auto_optics(pts(x))
        perm = rng.permutation(len(x))
        moved = auto_optics(pts(x[perm]))
        assert sorted(perm[list(moved.inds)]) == sorted(base.inds)


def test_at_most_one_cluster_in_practice():
    rng = np.random.default_rng(9)
    for _ in range(300):
        x = _random_instance(rng)
        d = distance_matrix(x)
        mins = min_group_size(len(x))
        eps = select_eps(d, mins)
        labels = dbscan_bruteforce(d.tolist(), eps, mins)
        assert len({lab for lab in labels if lab != -1}) <= 1


# --- adaptive clipping ------------------------------------------------------

def test_adaptive_clip_example():
    ws = [U([1.0, 0.0]), U([0.0, 2.0]), U([4.0, 0.0])]
    clipped, rho = adaptive_clip(ws, 2)
    assert rho == 2.0
    assert clipped[0] is ws[0] and clipped[1] is ws[1]
    assert flatten(clipped[2]).tolist() == [2.0, 0.0]


def test_adaptive_clip_equal_norms_and_k_max():
    ws = [U([3.0, 4.0]), U([0.0, 5.0]), U([5.0, 0.0])]
    assert all(c == w for c, w in zip(adaptive_clip(ws, 1)[0], ws))
    rng = np.random.default_rng(0)
    ws = [U(v) for v in rng.normal(size=(6, 4))]
    clipped, rho = adaptive_clip(ws, 6)
    assert rho == max(l2_norm(w) for w in ws) and all(c == w for c, w in zip(clipped, ws))


def test_adaptive_clip_k_range():
    with pytest.raises(ValueError):
        adaptive_clip([U([1.0])], 0)
    with pytest.raises(ValueError):
        adaptive_clip([U([1.0])], 2)


def test_adaptive_clip_zero_bound():
    clipped, rho = adaptive_clip([U([0.0]), U([3.0])], 1)
    assert rho == 0.0 and flatten(clipped[1]).tolist() == [0.0]


# --- fedward aggregation ----------------------------------------------------

def test_fedward_identical_clients():
    g = U([1.0, 1.0, 1.0])
    u = U([0.5, -0.25, 0.0])
    new, trace = fedward_aggregate(g, [u] * 5)
    assert new == g + u and trace.inds == tuple(range(5)) and not trace.fallback


def test_fedward_excludes_scaled_clients():
    rng = np.random.default_rng(2)
    base = rng.normal(size=40)
    ws = [U(base + rng.normal(scale=0.05, size=40)) for _ in range(8)]
    for i in (2, 5):
        ws[i] = apply_model_poison(ws[i], AttackSpec("scale", 100.0))
    g = U(np.zeros(40))
    new, trace = fedward_aggregate(g, ws)
    assert not {2, 5} & set(trace.inds)
    assert l2_norm(new - g) <= trace.rho_clip + 1e-9


def test_fedward_forged_update_is_bounded():
    rng = np.random.default_rng(4)
    ref = U(rng.normal(size=20))
    ws = [ref, ref * 0.9, forge_update(ref, 5.0, 1.05, seed=1)]
    g = U(np.ones(20))
    new, trace = fedward_aggregate(g, ws)
    assert l2_norm(new - g) <= trace.rho_clip + 1e-9


def test_fedward_layout_mismatch():
    with pytest.raises(ValueError):
        fedward_aggregate(U([0.0]), [U([1.0, 2.0])] * 3)


# --- baselines --------------------------------------------------------------

def _scalar_ws(vals):
    return [U([v]) for v in vals]


def test_median_example():
    new = baseline_aggregate("median", U([0.0]), _scalar_ws([1, 5, 3]))
    assert flatten(new).tolist() == [3.0]


def test_median_even():
    new = baseline_aggregate("median", U([0.0]), _scalar_ws([1, 5, 3, 4]))
    assert flatten(new).tolist() == [3.5]


def test_trimmed_mean_example():
    spec = DefenseSpec("trimmed_mean", trim_k=1)
    assert flatten(baseline_aggregate("trimmed_mean", U([0.0]), _scalar_ws([1, 2, 100]), spec)).tolist() == [2.0]


def test_trimmed_mean_invalid():
    with pytest.raises(ValueError):
        baseline_aggregate("trimmed_mean", U([0.0]), _scalar_ws([1, 2]), DefenseSpec("trimmed_mean", trim_k=1))


def test_fedavg_identical():
    u = U([0.25, -1.0])
    assert baseline_aggregate("fedavg", U([1.0, 1.0]), [u] * 4) == U([1.25, 0.0])


def test_static_clip():
    spec = DefenseSpec("static_clip", clip_bound=1.0)
    new = baseline_aggregate("static_clip", U([0.0, 0.0]), [U([3.0, 4.0]), U([0.5, 0.0])], spec)
    np.testing.assert_allclose(flatten(new), [(0.6 + 0.5) / 2, 0.8 / 2])


def test_kmeans2_accepts_majority():
    rng = np.random.default_rng(0)
    x = np.vstack([rng.normal(0, 0.1, size=(6, 5)), rng.normal(10, 0.1, size=(3, 5))])
    assert kmeans2_accept(x, seed=1).tolist() == list(range(6))
    new, trace = aggregate(U(np.zeros(5)), [U(v) for v in x], DefenseSpec("kmeans2"))
    assert trace.inds == tuple(range(6))
    np.testing.assert_allclose(flatten(new), x[:6].mean(axis=0))


def test_defense_spec_validation():
    with pytest.raises(ValueError):
        DefenseSpec("krum")
    with pytest.raises(ValueError):
        DefenseSpec("static_clip", clip_bound=0.0)
    with pytest.raises(ValueError):
        DefenseSpec("trimmed_mean", trim_k=-1)
    with pytest.raises(ValueError):
        baseline_aggregate("median", U([0.0]), _scalar_ws([1, 2]), DefenseSpec("fedavg"))
