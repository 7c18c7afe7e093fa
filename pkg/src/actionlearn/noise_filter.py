"""Noise filtering for lifted datasets.

Logical columns go through a per-class frequency filter: a truth value whose
relative frequency falls below ``logical_threshold`` is erased to a missing
value. Numeric columns are discretised by divisive hierarchical 2-means
clustering; each value is replaced by its cluster centroid and isolated
values (singleton clusters) are erased as outliers.
"""
from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .transitions import CLASSES, DISCRETE, LOGICAL, NUMERIC, Dataset, Key, key_text

NSTD_EPSILON = 1e-9


@dataclass(frozen=True)
class FilterConfig:
    logical_threshold: float = 0.05
    alpha: float = 0.6
    beta: float = 0.4
    acceptance: float = 0.05
    kmeans_max_iter: int = 100
    kmeans_restarts: int = 5
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.logical_threshold <= 1.0:
            raise ValueError("logical_threshold must lie in [0, 1]")
        if self.alpha < 0 or self.beta < 0 or self.acceptance < 0:
            raise ValueError("alpha, beta and acceptance must be non-negative")
        if self.kmeans_max_iter < 1 or self.kmeans_restarts < 1:
            raise ValueError("kmeans_max_iter and kmeans_restarts must be positive")


@dataclass(frozen=True)
class Cluster:
    members: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.members:
            raise ValueError("a cluster needs at least one member")
        object.__setattr__(self, "members", tuple(float(v) for v in self.members))

    @property
    def centroid(self) -> float:
        return float(np.mean(self.members))

    def __len__(self) -> int:
        return len(self.members)


@dataclass
class ClusterSet:
    clusters: list[Cluster] = field(default_factory=list)
    outliers: list[float] = field(default_factory=list)
    qualities: list[float] = field(default_factory=list)

    @property
    def centroids(self) -> list[float]:
        return [c.centroid for c in self.clusters]


def attribute_rng(seed: int, attribute: str = "") -> np.random.Generator:
    """PCG64 stream keyed by (seed, CRC-32 of the attribute name).

    Per-attribute streams make discretisation independent of column order.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, zlib.crc32(attribute.encode())])))


# ---------------------------------------------------------------------------
# logical values


def filter_logical_noise(d: Dataset, cfg: FilterConfig) -> Dataset:
    """Erase truth values whose per-class relative frequency is below the threshold."""
    updates: dict[int, dict[Key, None]] = {}
    for label in CLASSES:
        positions = [i for i, r in enumerate(d.rows) if r.label == label]
        for col in d.columns_of(LOGICAL):
            values = [d.rows[i].get(col.key) for i in positions]
            t_count = sum(1 for v in values if v is True)
            f_count = sum(1 for v in values if v is False)
            total = t_count + f_count
            if total == 0:
                continue
            erase = set()
            if t_count / total < cfg.logical_threshold:
                erase.add(True)
            if f_count / total < cfg.logical_threshold:
                erase.add(False)
            for i, v in zip(positions, values):
                if v is not None and v in erase:
                    updates.setdefault(i, {})[col.key] = None
    return d.with_cells(updates) if updates else d


# ---------------------------------------------------------------------------
# k-means


def _initial_centroids(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    distinct = np.unique(x)
    if len(distinct) >= k:
        chosen = rng.choice(distinct, size=k, replace=False)
    else:
        extra = rng.choice(x, size=k - len(distinct), replace=True)
        chosen = np.concatenate([distinct, extra])
    return np.sort(chosen)


def _lloyd(x: np.ndarray, centroids: np.ndarray, max_iter: int) -> tuple[np.ndarray, np.ndarray]:
    k = len(centroids)
    labels: np.ndarray | None = None
    rows = np.arange(len(x))
    for _ in range(max_iter):
        dist = np.abs(x[:, None] - centroids[None, :])
        nearest = np.argmin(dist, axis=1)
        if labels is None:
            new = nearest
        else:
            # ties keep the current assignment
            keep = dist[rows, labels] <= dist[rows, nearest]
            new = np.where(keep, labels, nearest)
        new = new.copy()
        for j in range(k):
            if not np.any(new == j):
                counts = np.bincount(new, minlength=k)
                own = np.abs(x - centroids[new])
                own = np.where(counts[new] > 1, own, -1.0)
                new[int(np.argmax(own))] = j
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        centroids = np.array([x[labels == j].mean() for j in range(k)])
    assert labels is not None
    return labels, centroids


def wcss(x: np.ndarray, labels: np.ndarray) -> float:
    total = 0.0
    for j in np.unique(labels):
        part = x[labels == j]
        total += float(np.sum((part - part.mean()) ** 2))
    return total


class InsufficientPointsError(ValueError):
    pass


def kmeans_labels(
    points: Sequence[float] | np.ndarray, k: int, cfg: FilterConfig, rng: np.random.Generator | None = None
) -> np.ndarray:
    """Cluster labels 0..k-1, numbered by ascending centroid.

    k = 2 is solved exactly; larger k runs Lloyd from random seeds.
    """
    x = np.asarray(points, dtype=float)
    if k < 1:
        raise ValueError("k must be at least 1")
    if k > len(x):
        raise InsufficientPointsError(f"cannot form {k} clusters from {len(x)} points")
    if k == 2:
        split = _best_split(x)
        if split is not None:
            return split
    if rng is None:
        rng = attribute_rng(cfg.seed)
    best: tuple[float, np.ndarray, np.ndarray] | None = None
    for _ in range(cfg.kmeans_restarts):
        labels, centroids = _lloyd(x, _initial_centroids(x, k, rng), cfg.kmeans_max_iter)
        score = wcss(x, labels)
        if best is None or score < best[0]:
            best = (score, labels, centroids)
    assert best is not None
    _, labels, centroids = best
    order = np.argsort(centroids, kind="stable")
    rank = np.empty(k, dtype=int)
    rank[order] = np.arange(k)
    return rank[labels]


def _best_split(x: np.ndarray) -> np.ndarray | None:
    # on the line an optimal 2-partition is a cut of the sorted values, and
    # it is a fixed point of Lloyd's iteration; prefix sums score every cut
    order = np.argsort(x, kind="stable")
    s = x[order]
    n = len(s)
    cuts = np.flatnonzero(s[1:] > s[:-1]) + 1
    if len(cuts) == 0:
        return None
    c1, c2 = np.cumsum(s), np.cumsum(s * s)
    left_n = cuts.astype(float)
    right_n = n - left_n
    left = c2[cuts - 1] - c1[cuts - 1] ** 2 / left_n
    right = (c2[-1] - c2[cuts - 1]) - (c1[-1] - c1[cuts - 1]) ** 2 / right_n
    cut = int(cuts[int(np.argmin(left + right))])
    labels = np.empty(n, dtype=int)
    labels[order[:cut]] = 0
    labels[order[cut:]] = 1
    return labels


def kmeans(
    points: Sequence[float], k: int, cfg: FilterConfig, rng: np.random.Generator | None = None
) -> list[Cluster]:
    """k clusters of reals; see ``kmeans_labels`` for how they are found."""
    x = np.asarray(points, dtype=float)
    labels = kmeans_labels(x, k, cfg, rng)
    return [Cluster(tuple(x[labels == j])) for j in range(k)]


# ---------------------------------------------------------------------------
# cluster quality


def _member_silhouettes(index: int, arrays: list[np.ndarray]) -> np.ndarray:
    own = arrays[index]
    n = len(own)
    if n == 1 or len(arrays) == 1:
        return np.zeros(n)
    a = np.abs(own[:, None] - own[None, :]).sum(axis=1) / (n - 1)
    b = np.min(
        np.stack([np.abs(own[:, None] - other[None, :]).mean(axis=1) for j, other in enumerate(arrays) if j != index]),
        axis=0,
    )
    denom = np.maximum(a, b)
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(denom > 0, (b - a) / np.where(denom > 0, denom, 1.0), 0.0)
    return s


def silhouette(value: float, cluster: Cluster, clusters: Sequence[Cluster]) -> float:
    """Silhouette of one member ``value`` of ``cluster`` within the cluster set."""
    if len(cluster) == 1 or len(clusters) == 1:
        return 0.0
    own = np.asarray(cluster.members)
    a = float(np.abs(own - value).sum() / (len(own) - 1))
    b = min(
        float(np.mean(np.abs(np.asarray(other.members) - value))) for other in clusters if other is not cluster
    )
    if max(a, b) == 0:
        return 0.0
    return (b - a) / max(a, b)


def cluster_silhouette(cluster: Cluster, clusters: Sequence[Cluster]) -> float:
    """Mean member silhouette of ``cluster``."""
    index = _position(cluster, clusters)
    return float(np.mean(_member_silhouettes(index, [np.asarray(c.members) for c in clusters])))


def _position(cluster: Cluster, clusters: Sequence[Cluster]) -> int:
    for i, c in enumerate(clusters):
        if c is cluster:
            return i
    for i, c in enumerate(clusters):
        if c == cluster:
            return i
    raise ValueError("cluster is not part of the cluster set")


def nstd(cluster: Cluster) -> float:
    """Population standard deviation over |centroid|, with a 1e-9 floor on the denominator."""
    members = np.asarray(cluster.members)
    std = float(np.std(members))
    if std == 0.0:
        return 0.0
    mu = abs(float(np.mean(members)))
    return std / max(mu, NSTD_EPSILON)


def quality(cluster: Cluster, clusters: Sequence[Cluster], cfg: FilterConfig) -> float:
    """alpha * (1 - mean silhouette) + beta * nSTD; zero is best."""
    return cfg.alpha * (1.0 - cluster_silhouette(cluster, clusters)) + cfg.beta * nstd(cluster)


# ---------------------------------------------------------------------------
# divisive clustering


@dataclass
class _Partition:
    clusters: list[np.ndarray]  # index arrays into the input
    qualities: list[float]
    outliers: np.ndarray


def _divide(x: np.ndarray, cfg: FilterConfig, rng: np.random.Generator) -> _Partition:
    accepted: list[tuple[np.ndarray, float]] = []
    outliers: list[int] = []
    whole = Cluster(tuple(x)) if len(x) else None
    stack: list[tuple[np.ndarray, float]] = []
    if whole is not None:
        stack.append((np.arange(len(x)), quality(whole, [whole], cfg)))
    while stack:
        idx, q_here = stack.pop()
        if len(idx) == 1:
            outliers.append(int(idx[0]))
            continue
        values = x[idx]
        if np.all(values == values[0]):
            # duplicates cannot be split any further
            accepted.append((idx, q_here))
            continue
        labels = kmeans_labels(values, 2, cfg, rng)
        parts = [idx[labels == j] for j in range(2)]
        clusters = [Cluster(tuple(x[p])) for p in parts]
        pending = []
        for part, cluster in zip(parts, clusters):
            q = quality(cluster, clusters, cfg)
            if q <= cfg.acceptance:
                if len(part) > 1:
                    accepted.append((part, q))
                else:
                    outliers.append(int(part[0]))
            else:
                pending.append((part, q))
        stack.extend(reversed(pending))
    accepted.sort(key=lambda item: (float(np.mean(x[item[0]])), int(item[0][0])))
    return _Partition([a for a, _ in accepted], [q for _, q in accepted], np.array(sorted(outliers), dtype=int))


def divisive_cluster(values: Sequence[float], cfg: FilterConfig, rng: np.random.Generator | None = None) -> ClusterSet:
    """Recursively halve ``values`` with 2-means until every cluster meets the acceptance criterion.

    Singletons met along the way are outliers.
    """
    x = np.asarray(values, dtype=float)
    if len(x) == 0:
        raise ValueError("divisive_cluster needs at least one value")
    part = _divide(x, cfg, rng if rng is not None else attribute_rng(cfg.seed))
    return ClusterSet(
        [Cluster(tuple(x[idx])) for idx in part.clusters],
        [float(v) for v in x[part.outliers]],
        list(part.qualities),
    )


def discretise_fluents(
    d: Dataset, cfg: FilterConfig, continuous_ratio: float | None = None
) -> tuple[Dataset, dict]:
    """Replace each numeric column by cluster centroids; outliers become missing.

    With ``continuous_ratio`` set, a column with more distinct values than
    that share of its observations is treated as a continuous measurement
    instead: values are kept as they are and only points beyond 3 IQR Tukey
    fences are erased.
    """
    updates: dict[int, dict[Key, float | None]] = {}
    kinds: dict[Key, str] = {}
    report: dict[str, dict] = {}
    for col in d.columns_of(NUMERIC):
        positions = [i for i, r in enumerate(d.rows) if r.get(col.key) is not None]
        if not positions:
            continue
        x = np.array([d.rows[i].get(col.key) for i in positions], dtype=float)
        name = key_text(col.key)
        distinct = len(np.unique(x))
        if continuous_ratio is not None and distinct > continuous_ratio * len(x):
            dropped = _fence_outliers(x)
            for j in dropped:
                updates.setdefault(positions[j], {})[col.key] = None
            report[name] = {
                "mode": "continuous",
                "distinct": distinct,
                "outliers": [float(x[j]) for j in dropped],
                "clusters": [],
            }
            continue
        part = _divide(x, cfg, attribute_rng(cfg.seed, name))
        kinds[col.key] = DISCRETE
        clusters = []
        for idx, q in zip(part.clusters, part.qualities):
            centroid = float(np.mean(x[idx]))
            for j in idx:
                updates.setdefault(positions[j], {})[col.key] = centroid
            clusters.append({"centroid": centroid, "size": int(len(idx)), "quality": float(q)})
        for j in part.outliers:
            updates.setdefault(positions[j], {})[col.key] = None
        report[name] = {
            "mode": "discrete",
            "distinct": distinct,
            "outliers": [float(x[j]) for j in part.outliers],
            "clusters": clusters,
        }
    return d.with_cells(updates, kinds), report


def _fence_outliers(x: np.ndarray, k: float = 3.0) -> list[int]:
    q1, q3 = np.percentile(x, [25, 75])
    iqr = q3 - q1
    if iqr == 0:
        return []
    lo, hi = q1 - k * iqr, q3 + k * iqr
    return [int(j) for j in np.flatnonzero((x < lo) | (x > hi))]
