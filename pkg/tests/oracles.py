"""Independent brute-force implementations used to cross-check the library."""
from __future__ import annotations

import itertools
import math
from typing import Sequence


def silhouette_point(value: float, own: Sequence[float], others: Sequence[Sequence[float]]) -> float:
    # plain loops over the textbook definition; the point itself is one entry of ``own``
    if len(own) == 1 or not others:
        return 0.0
    a = 0.0
    skipped = False
    for v in own:
        if v == value and not skipped:
            skipped = True
            continue
        a += abs(v - value)
    a /= len(own) - 1
    b = math.inf
    for other in others:
        b = min(b, sum(abs(v - value) for v in other) / len(other))
    top = max(a, b)
    return 0.0 if top == 0 else (b - a) / top


def cluster_silhouette(index: int, clusters: Sequence[Sequence[float]]) -> float:
    own = clusters[index]
    others = [c for j, c in enumerate(clusters) if j != index]
    return sum(silhouette_point(v, own, others) for v in own) / len(own)


def nstd(members: Sequence[float]) -> float:
    n = len(members)
    mu = sum(members) / n
    var = sum((v - mu) ** 2 for v in members) / n
    if var == 0:
        return 0.0
    return math.sqrt(var) / max(abs(mu), 1e-9)


def min_wcss_two_partition(points: Sequence[float]) -> float:
    """Exhaustive minimum within-cluster sum of squares over all 2-partitions."""
    best = math.inf
    n = len(points)
    for mask in range(1, 2 ** (n - 1)):
        left = [points[i] for i in range(n) if mask >> i & 1]
        right = [points[i] for i in range(n) if not mask >> i & 1]
        total = 0.0
        for part in (left, right):
            mu = sum(part) / len(part)
            total += sum((v - mu) ** 2 for v in part)
        best = min(best, total)
    return best


def enumerate_expressions(leaves: dict, ops: str, max_size: int):
    """Every right-linear expression (left-nested chain) up to ``max_size`` nodes.

    ``leaves`` maps a text to a vector of values; yields (text, values).
    """
    import numpy as np

    frontier = [(text, np.asarray(v, dtype=float), 1) for text, v in leaves.items()]
    out = list(frontier)
    while frontier:
        nxt = []
        for text, values, size in frontier:
            if size + 2 > max_size:
                continue
            for op, (ltext, lv) in itertools.product(ops, leaves.items()):
                lv = np.asarray(lv, dtype=float)
                with np.errstate(all="ignore"):
                    if op == "+":
                        v = values + lv
                    elif op == "-":
                        v = values - lv
                    elif op == "*":
                        v = values * lv
                    else:
                        if np.any(lv == 0):
                            continue
                        v = values / lv
                item = (f"({op} {text} {ltext})", v, size + 2)
                nxt.append(item)
        out.extend(nxt)
        frontier = nxt
    return [(t, v) for t, v, _ in out]


def prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    p = tp / (tp + fp) if tp + fp else 1.0
    r = tp / (tp + fn) if tp + fn else 1.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f
