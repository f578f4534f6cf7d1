import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.base import clone

from semdrift._validation import month_from_index, month_index
from semdrift.scoring import ChangeSeries, ScorePoint
from semdrift.series import ShapeProfile
from semdrift.shapes import (
    NearestShapeEncoder,
    NearestShapeFeatures,
    ShapeClusterer,
    ShapeDistanceMatrix,
    characteristic_shape,
    distance_matrix,
    dtw_distance,
    hierarchical_cluster,
    nearest_shape_features,
    write_assignments_csv,
    write_linkage_csv,
    write_shapes_csv,
)

from oracles import brute_dtw, rand_index


def months(n, first="2012-01"):
    s = month_index(first)
    return [month_from_index(s + i) for i in range(n)]


def prof(token, values, first="2012-01"):
    return ShapeProfile(token, months(len(values), first), values)


def series(token, values, first="2012-01"):
    ms = months(len(values), first)
    return ChangeSeries(token, ms[0], [ScorePoint(m, v, 10) for m, v in zip(ms, values)])


def test_dtw_examples():
    assert dtw_distance([0, 1, 2], [0, 1, 2]) == 0.0
    assert dtw_distance([0, 0, 1], [0, 1, 1]) == 0.0
    assert dtw_distance([0, 1, 0], [0, 0, 1, 0]) == 0.0
    assert dtw_distance([0.0], [3.0]) == 3.0
    assert dtw_distance([0, 0], [1, 1, 1]) == 3.0


def test_dtw_rejects_empty():
    with pytest.raises(ValueError):
        dtw_distance([], [1.0])


floats = st.floats(-3, 3, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(st.lists(floats, min_size=1, max_size=6), st.lists(floats, min_size=1, max_size=6))
def test_dtw_matches_path_enumeration(a, b):
    assert dtw_distance(a, b) == pytest.approx(brute_dtw(a, b), abs=1e-9)
    assert dtw_distance(a, b) == pytest.approx(dtw_distance(b, a), abs=1e-12)
    assert dtw_distance(a, b) >= 0


@settings(max_examples=30, deadline=None)
@given(st.lists(floats, min_size=1, max_size=20))
def test_dtw_self_zero(a):
    assert dtw_distance(a, a) == 0.0


def _random_profiles(n, length=12, seed=0, ragged=False):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        L = int(rng.integers(5, length + 1)) if ragged else length
        out.append(prof(f"w{i:03d}", rng.standard_normal(L)))
    return out


def test_distance_matrix_properties():
    ps = _random_profiles(9, ragged=True, seed=1)
    random.Random(0).shuffle(ps)
    dm = distance_matrix(ps)
    assert list(dm.tokens) == sorted(p.token for p in ps)
    d = dm.distances
    assert np.all(np.diag(d) == 0)
    np.testing.assert_array_equal(d, d.T)
    assert np.all(d >= 0)
    by_tok = {p.token: p.values for p in ps}
    for i, j in [(0, 1), (2, 7), (4, 8)]:
        a, b = by_tok[dm.tokens[i]], by_tok[dm.tokens[j]]
        # independent full-table DTW
        D = np.full((len(a) + 1, len(b) + 1), np.inf)
        D[0, 0] = 0
        for x in range(1, len(a) + 1):
            for y in range(1, len(b) + 1):
                D[x, y] = abs(a[x - 1] - b[y - 1]) + min(D[x - 1, y], D[x, y - 1], D[x - 1, y - 1])
        assert d[i, j] == pytest.approx(D[-1, -1], abs=1e-9)


def test_distance_matrix_jobs_identical():
    ps = _random_profiles(25, seed=2)
    a = distance_matrix(ps, n_jobs=1).distances
    b = distance_matrix(ps, n_jobs=4).distances
    np.testing.assert_array_equal(a, b)


def test_distance_matrix_errors():
    with pytest.raises(ValueError):
        distance_matrix(_random_profiles(1))
    with pytest.raises(ValueError):
        distance_matrix([prof("a", [1, 2]), prof("a", [1, 3])])


def test_features_cap_and_count():
    dm = distance_matrix(_random_profiles(6, seed=3))
    feats = nearest_shape_features(dm, m=10)
    for f in feats:
        assert f.feature_vector.sum() == 5
        assert f.feature_vector[dm.tokens.index(f.token)] == 0
    feats = nearest_shape_features(dm, m=2)
    for i, f in enumerate(feats):
        row = dm.distances[i].copy()
        row[i] = np.inf
        assert f.neighbors[0] == dm.tokens[int(np.argmin(row))]
        assert f.feature_vector.sum() == 2


def test_features_ties_lexicographic():
    d = np.array([[0, 1, 1, 1], [1, 0, 2, 2], [1, 2, 0, 2], [1, 2, 2, 0]], dtype=float)
    dm = ShapeDistanceMatrix(("a", "b", "c", "d"), d)
    feats = nearest_shape_features(dm, m=2)
    assert feats[0].neighbors == ("b", "c")
    assert feats[1].neighbors == ("a", "c")


def test_identical_profiles_share_first_neighbour():
    ps = [prof("a", [0, 1, 2, 1, 0]), prof("b", [0, 1, 2, 1, 0]), prof("c", [2, 1, 0, 1, 2]),
          prof("d", [3, 0, 3, 0, 3])]
    feats = {f.token: f for f in nearest_shape_features(distance_matrix(ps), m=1)}
    assert feats["a"].neighbors == ("b",) and feats["b"].neighbors == ("a",)


def _two_groups(n_each=6, seed=0):
    rng = np.random.default_rng(seed)
    t = np.linspace(0, 1, 24)
    up = [prof(f"up{i}", t + 0.05 * rng.standard_normal(24)) for i in range(n_each)]
    bump = [prof(f"bump{i}", np.exp(-((t - 0.5) ** 2) / 0.01) + 0.05 * rng.standard_normal(24))
            for i in range(n_each)]
    return up + bump


def test_two_group_features_separate():
    ps = _two_groups()
    feats = nearest_shape_features(distance_matrix(ps), m=5)
    for f in feats:
        prefix = f.token.rstrip("0123456789")
        assert all(n.rstrip("0123456789") == prefix for n in f.neighbors)


def test_cluster_recovers_planted_groups():
    ps = _two_groups()
    feats = nearest_shape_features(distance_matrix(ps), m=5)
    rep = hierarchical_cluster(feats, 2)
    truth = {p.token: p.token.rstrip("0123456789") for p in ps}
    assert rand_index(truth, rep.assignments) == 1.0
    assert rep.sizes == [6, 6]
    # equal sizes: cluster 0 holds the lexicographically smallest token
    assert rep.assignments["bump0"] == 0


def test_cluster_extremes():
    feats = nearest_shape_features(distance_matrix(_random_profiles(7, seed=4)), m=3)
    single = hierarchical_cluster(feats, 7)
    assert sorted(single.sizes) == [1] * 7
    one = hierarchical_cluster(feats, 1)
    assert set(one.assignments.values()) == {0}
    with pytest.raises(ValueError):
        hierarchical_cluster(feats, 8)
    with pytest.raises(ValueError):
        hierarchical_cluster(feats, 2, linkage="centroidish")


def test_cluster_permutation_invariant():
    feats = nearest_shape_features(distance_matrix(_random_profiles(15, seed=5)), m=4)
    ref = hierarchical_cluster(feats, 4).assignments
    for seed in range(5):
        shuffled = list(feats)
        random.Random(seed).shuffle(shuffled)
        assert hierarchical_cluster(shuffled, 4).assignments == ref


def test_linkage_shape():
    feats = nearest_shape_features(distance_matrix(_random_profiles(8, seed=6)), m=3)
    rep = hierarchical_cluster(feats, 3)
    assert rep.linkage.shape == (7, 4)
    assert np.all(np.diff(rep.linkage[:, 2]) >= -1e-12)
    assert rep.linkage[-1, 3] == 8


def test_characteristic_shape_aligned_on_months():
    ps = [prof("a", [1.0, 2.0, 3.0]), prof("b", [3.0, 4.0], first="2012-02")]
    raw = [series("a", [0.1, 0.2, 0.3]), series("b", [0.5, None], first="2012-02")]
    rep = hierarchical_cluster(
        [NearestShapeFeatures("a", ("b",), np.array([0, 1])),
         NearestShapeFeatures("b", ("a",), np.array([1, 0]))], 1)
    shapes = characteristic_shape(rep, ps, raw)
    z = [p for p in shapes if p.kind == "znormed"]
    assert [(p.month, p.mean, p.n_members) for p in z] == [
        ("2012-01", 1.0, 1), ("2012-02", 2.5, 2), ("2012-03", 3.5, 2)]
    assert z[1].std == pytest.approx(0.5)
    r = [p for p in shapes if p.kind == "raw"]
    assert [(p.month, p.n_members) for p in r] == [("2012-01", 1), ("2012-02", 2), ("2012-03", 1)]
    assert r[1].mean == pytest.approx(0.35)
    assert [p.cluster for p in rep.overall_curve] == ["all"] * 6


def test_characteristic_shape_missing_profile():
    rep = hierarchical_cluster(
        [NearestShapeFeatures("a", (), np.array([0, 1])),
         NearestShapeFeatures("b", (), np.array([1, 0]))], 2)
    with pytest.raises(KeyError):
        characteristic_shape(rep, [prof("a", [1, 2])])


def test_weighted_mean_of_clusters_matches_overall():
    ps = _two_groups(4, seed=3)
    feats = nearest_shape_features(distance_matrix(ps), m=3)
    rep = hierarchical_cluster(feats, 3)
    characteristic_shape(rep, ps)
    overall = {p.month: p.mean for p in rep.overall_curve}
    acc = {}
    for p in rep.characteristic_shapes:
        s, n = acc.get(p.month, (0.0, 0))
        acc[p.month] = (s + p.mean * p.n_members, n + p.n_members)
    for m, (s, n) in acc.items():
        assert s / n == pytest.approx(overall[m], abs=1e-12)


def test_shape_clusterer_estimator(tmp_path):
    rng = np.random.default_rng(8)
    t = np.linspace(0, 1, 20)
    xs = [series(f"u{i}", list(t + 0.02 * rng.random(20))) for i in range(5)]
    xs += [series(f"s{i}", list(np.sin(6 * t) + 0.02 * rng.random(20))) for i in range(5)]
    est = ShapeClusterer(n_clusters=2, n_neighbors=4)
    assert clone(est).get_params()["n_neighbors"] == 4
    labels = est.fit_predict(xs)
    assert len(labels) == 10
    assert len(set(labels[:5])) == 1 and len(set(labels[5:])) == 1 and labels[0] != labels[5]
    with pytest.raises(ValueError):
        ShapeClusterer(n_clusters=11).fit(xs)
    write_assignments_csv(est.report_, tmp_path / "a.csv")
    write_linkage_csv(est.report_, tmp_path / "l.csv")
    write_shapes_csv(est.report_, tmp_path / "s.csv")
    lines = (tmp_path / "l.csv").read_text().splitlines()
    assert lines[0] == "step,left_id,right_id,left_token,right_token,distance,size"
    assert len(lines) == 10


def test_encoder_transform():
    ps = _random_profiles(5, seed=9)
    enc = NearestShapeEncoder(n_neighbors=2).fit(ps)
    X = enc.transform(ps[::-1])
    assert X.shape == (5, 5)
    assert np.all(X.sum(axis=1) == 2)
    with pytest.raises(KeyError):
        enc.transform(["nope"])
