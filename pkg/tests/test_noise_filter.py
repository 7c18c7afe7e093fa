import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from actionlearn.noise_filter import (
    Cluster,
    FilterConfig,
    InsufficientPointsError,
    cluster_silhouette,
    discretise_fluents,
    divisive_cluster,
    filter_logical_noise,
    kmeans,
    kmeans_labels,
    nstd,
    quality,
    silhouette,
    wcss,
)
from actionlearn.transitions import DISCRETE, NUMERIC, POST, PRE
from worked_examples import AT12, AT13, BAT, ENERGY, SCANNED, goto_dataset


def random_clusters(rng, max_n=200):
    n = int(rng.integers(2, max_n + 1))
    k = int(rng.integers(1, min(5, n) + 1))
    values = rng.normal(rng.uniform(-50, 50), rng.uniform(0.1, 20), size=n)
    if rng.random() < 0.3:
        values = np.round(values)  # duplicates exercise the tie paths
    cuts = np.sort(rng.choice(np.arange(1, n), size=k - 1, replace=False)) if k > 1 else []
    return [Cluster(tuple(part)) for part in np.split(values, cuts)]


def test_silhouette_and_nstd_match_brute_force():
    rng = np.random.default_rng(20240601)
    for _ in range(100):
        clusters = random_clusters(rng)
        members = [list(c.members) for c in clusters]
        for i, c in enumerate(clusters):
            assert cluster_silhouette(c, clusters) == pytest.approx(oracles.cluster_silhouette(i, members), abs=1e-9)
            assert nstd(c) == pytest.approx(oracles.nstd(members[i]), abs=1e-9, rel=1e-9)
            v = members[i][0]
            others = [m for j, m in enumerate(members) if j != i]
            assert silhouette(v, c, clusters) == pytest.approx(oracles.silhouette_point(v, members[i], others), abs=1e-9)


def test_kmeans_two_matches_exhaustive_partition():
    cfg = FilterConfig()
    for seed in range(50):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 13))
        points = np.round(rng.uniform(-20, 20, size=n), 2)
        if seed % 5 == 0:
            points[: n // 2] += 100  # well separated groups
        labels = kmeans_labels(points, 2, cfg, np.random.default_rng(seed))
        assert wcss(points, labels) == pytest.approx(oracles.min_wcss_two_partition(list(points)), abs=1e-9)


def test_kmeans_rejects_too_few_points():
    with pytest.raises(InsufficientPointsError):
        kmeans([1.0], 2, FilterConfig())


def test_kmeans_labels_rank_by_centroid():
    labels = kmeans_labels([10, 11, 0, 1], 2, FilterConfig())
    assert list(labels) == [1, 1, 0, 0]


def test_nstd_guard_near_zero_mean():
    c = Cluster((-1.0, 1.0))
    assert nstd(c) == pytest.approx(1.0 / 1e-9)


def test_quality_weights():
    a, b = Cluster((1.0, 1.1)), Cluster((9.0, 9.2))
    cfg = FilterConfig(alpha=0.6, beta=0.4)
    expected = 0.6 * (1 - oracles.cluster_silhouette(0, [[1.0, 1.1], [9.0, 9.2]])) + 0.4 * oracles.nstd([1.0, 1.1])
    assert quality(a, [a, b], cfg) == pytest.approx(expected)


def test_logical_filter_below_threshold_erases():
    d = goto_dataset()
    # just above 1/9: both values seen once among nine post-state rows go
    out = filter_logical_noise(d, FilterConfig(logical_threshold=0.12))
    post = [r for r in out.rows if r.label == POST]
    assert [r.get(AT12) for r in post].count(True) == 0
    assert [r.get(AT12) for r in post].count(None) == 1
    assert [r.get(AT13) for r in post].count(False) == 0
    # pre-state columns and scanned (two thirds vs one third) are untouched
    assert [r.get(AT12) for r in out.rows if r.label == PRE] == [True] * 9
    assert out.values(SCANNED) == d.values(SCANNED)


def test_logical_filter_is_strict_at_the_frequency():
    d = goto_dataset()
    assert filter_logical_noise(d, FilterConfig(logical_threshold=1 / 9)).rows == d.rows


@pytest.mark.parametrize("threshold", [0.0, 0.05, 0.5, 1.0])
def test_all_true_column_is_never_touched(threshold):
    d = goto_dataset()
    out = filter_logical_noise(d, FilterConfig(logical_threshold=threshold))
    assert [r.get(AT12) for r in out.rows if r.label == PRE] == [True] * 9


def test_bat_usage_discretisation():
    cs = divisive_cluster(goto_dataset().values(BAT), FilterConfig())
    assert len(cs.clusters) == 2
    low, high = sorted(cs.centroids)
    assert 2.9 <= low <= 3.3 and 4.9 <= high <= 5.1
    assert cs.outliers == [-4.0]
    assert all(q <= 0.05 for q in cs.qualities)


def test_discretise_fluents_replaces_values_by_centroids():
    d, report = discretise_fluents(goto_dataset(), FilterConfig())
    assert d.column(BAT).kind == DISCRETE
    values = {v for v in d.values(BAT)}
    assert None in values and len(values - {None}) == 2
    assert report["(bat_usage ?arg1)"]["outliers"] == [-4.0]


def test_continuous_guard_keeps_measurements():
    d, report = discretise_fluents(goto_dataset(), FilterConfig(), continuous_ratio=0.3)
    assert d.column(ENERGY).kind == NUMERIC
    assert report["(energy ?arg1)"]["mode"] == "continuous"
    # the huge energy readings are beyond the fences
    assert 6000.0 in report["(energy ?arg1)"]["outliers"]


def test_duplicates_form_one_cluster():
    cs = divisive_cluster([2.0] * 7, FilterConfig())
    assert len(cs.clusters) == 1 and cs.outliers == []


def test_discretisation_is_deterministic():
    a = discretise_fluents(goto_dataset(), FilterConfig(seed=3))[0]
    b = discretise_fluents(goto_dataset(), FilterConfig(seed=3))[0]
    assert a.rows == b.rows


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=1, max_size=40))
def test_divisive_partition_covers_input(values):
    cs = divisive_cluster(values, FilterConfig())
    got = sorted([v for c in cs.clusters for v in c.members] + cs.outliers)
    assert got == sorted(float(v) for v in values)
    for c, q in zip(cs.clusters, cs.qualities):
        assert len(c) >= 2
        assert q <= 0.05 or len(set(c.members)) == 1


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-100, 100, allow_nan=False), min_size=2, max_size=30), st.integers(1, 4))
def test_silhouettes_lie_in_range(values, k):
    k = min(k, len(values))
    clusters = kmeans(values, k, FilterConfig())
    for c in clusters:
        if len(c):
            s = cluster_silhouette(c, clusters)
            assert -1 - 1e-12 <= s <= 1 + 1e-12
