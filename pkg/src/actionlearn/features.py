"""Feature synthesis: changed fluents, fitted change expressions, relational features.

Change expressions are found by best-first search over right-linear
expression trees ``(((s0 op s1) op s2) ...)`` built from atomic seeds (pre-state
numeric attributes and integer constants). Relational features compare a
numeric attribute against a fitted expression or another attribute and are
added to the dataset as logical columns.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .model import Atom, BinOp, Const, Expression, NumericCondition, Var
from .transitions import DISCRETE, LOGICAL, NUMERIC, PRE, POST, Column, Dataset, Key, Row, key_order

OPERATORS = ("+", "-", "*", "/")
RELATIONS = (">=", "<=", "=")


@dataclass(frozen=True)
class RegressionConfig:
    acceptance_threshold: float = 0.02
    timeout_seconds: float = 300.0
    constant_pool: tuple[int, ...] = tuple(range(1, 11))
    max_expression_size: int = 9
    # node expansions granted per second of timeout; keeps runs machine-independent
    expansions_per_second: float = 20.0
    change_fraction: float = 0.5
    # share of pairs allowed to disagree with the majority direction
    direction_tolerance: float = 0.0
    # share of the worst-fitting pairs ignored by the score (0 = plain mean)
    trim_fraction: float = 0.0
    # an expression must be evaluable on at least this share of pairs
    min_pair_fraction: float = 0.5

    def __post_init__(self) -> None:
        if self.acceptance_threshold < 0:
            raise ValueError("acceptance_threshold must be non-negative")
        if not self.constant_pool:
            raise ValueError("constant_pool must be nonempty")
        if self.max_expression_size < 1:
            raise ValueError("max_expression_size must be positive")
        if not 0 <= self.trim_fraction < 1:
            raise ValueError("trim_fraction must lie in [0, 1)")
        object.__setattr__(self, "constant_pool", tuple(int(c) for c in self.constant_pool))

    @property
    def expansion_budget(self) -> int:
        return max(1, int(self.timeout_seconds * self.expansions_per_second))


@dataclass(frozen=True)
class FluentDelta:
    target: Atom
    transitions: tuple[int, ...]
    pairs: tuple[tuple[float, float], ...]
    direction: str

    @property
    def effect_kind(self) -> str | None:
        return None if self.direction == "mixed" else self.direction


@dataclass(frozen=True)
class Fit:
    delta: FluentDelta
    expression: Expression
    score: float
    expansions: int

    @property
    def kind(self) -> str:
        return self.delta.direction


@dataclass
class SearchLog:
    """Line-oriented record of a regression search."""

    lines: list[str] = field(default_factory=list)

    def __str__(self) -> str:
        return "\n".join(self.lines)


def _numeric_columns(d: Dataset) -> list[Column]:
    return d.columns_of(NUMERIC, DISCRETE)


def _is_number(value: object) -> bool:
    return value is not None and not isinstance(value, bool)


def detect_variant_fluents(d: Dataset, cfg: RegressionConfig | None = None) -> list[FluentDelta]:
    """Fluents whose value changes in at least ``change_fraction`` of observed pairs."""
    cfg = cfg or RegressionConfig()
    pairs = d.pairs()
    out = []
    for col in _numeric_columns(d):
        ids, values = [], []
        for pre, post in pairs:
            a, b = pre.get(col.key), post.get(col.key)
            if _is_number(a) and _is_number(b):
                ids.append(pre.transition)
                values.append((float(a), float(b)))  # type: ignore[arg-type]
        if not values:
            continue
        changed = sum(1 for a, b in values if a != b)
        if changed < cfg.change_fraction * len(values) or changed == 0:
            continue
        out.append(FluentDelta(col.key, tuple(ids), tuple(values), _direction(values, cfg.direction_tolerance)))  # type: ignore[arg-type]
    return out


def _direction(values: Sequence[tuple[float, float]], tolerance: float) -> str:
    n = len(values)
    need = (1.0 - tolerance) * n
    if sum(1 for a, b in values if b < a) >= need:
        return "decrease"
    if sum(1 for a, b in values if b > a) >= need:
        return "increase"
    posts = [b for _, b in values]
    most = max(posts.count(v) for v in set(posts))
    if most >= need:
        return "assign"
    return "mixed"


# ---------------------------------------------------------------------------
# symbolic regression


def _pre_matrix(d: Dataset, delta: FluentDelta) -> tuple[list[Key], dict[Key, np.ndarray]]:
    by_id = {pre.transition: pre for pre, _ in d.pairs()}
    rows = [by_id[t] for t in delta.transitions]
    keys = [c.key for c in _numeric_columns(d)]
    matrix = {}
    for key in keys:
        matrix[key] = np.array([_as_float(r.get(key)) for r in rows], dtype=float)
    return keys, matrix


def _as_float(value: object) -> float:
    return float(value) if _is_number(value) else math.nan  # type: ignore[arg-type]


def _target(delta: FluentDelta) -> np.ndarray:
    pre = np.array([a for a, _ in delta.pairs])
    post = np.array([b for _, b in delta.pairs])
    if delta.direction == "assign":
        return post
    return np.abs(post - pre)


def _score(values: np.ndarray, target: np.ndarray, cfg: RegressionConfig) -> float:
    ok = np.isfinite(values)
    n_ok = int(ok.sum())
    if n_ok == 0 or n_ok < cfg.min_pair_fraction * len(values):
        return math.inf
    err = np.abs(values[ok] - target[ok]) / np.maximum(1.0, np.abs(target[ok]))
    if cfg.trim_fraction > 0:
        keep = max(1, int(math.ceil(n_ok * (1.0 - cfg.trim_fraction))))
        err = np.sort(err)[:keep]
    return float(err.mean())


def _combine(op: str, left: np.ndarray, right: np.ndarray) -> np.ndarray | None:
    if op == "+":
        return left + right
    if op == "-":
        return left - right
    if op == "*":
        return left * right
    if np.any(right[np.isfinite(right)] == 0):
        return None  # division by zero on a training row invalidates the node
    with np.errstate(divide="ignore", invalid="ignore"):
        return left / right


def score_expression(expr: Expression, d: Dataset, delta: FluentDelta, cfg: RegressionConfig | None = None) -> float:
    """Normalised error of ``expr`` against the change magnitude of ``delta``."""
    cfg = cfg or RegressionConfig()
    _, matrix = _pre_matrix(d, delta)
    values = _evaluate_vector(expr, matrix, len(delta.pairs))
    return math.inf if values is None else _score(values, _target(delta), cfg)


def _evaluate_vector(expr: Expression, matrix: dict[Key, np.ndarray], n: int) -> np.ndarray | None:
    if isinstance(expr, Const):
        return np.full(n, float(expr.value))
    if isinstance(expr, Var):
        return matrix.get(expr.atom, np.full(n, math.nan))
    left = _evaluate_vector(expr.left, matrix, n)
    right = _evaluate_vector(expr.right, matrix, n)
    if left is None or right is None:
        return None
    return _combine(expr.op, left, right)


def fit_expression(
    d: Dataset, delta: FluentDelta, cfg: RegressionConfig | None = None, log: SearchLog | None = None
) -> Fit | None:
    """Best-first search for an expression of the change; ``None`` means no fit."""
    cfg = cfg or RegressionConfig()
    if delta.direction == "mixed" or len(delta.pairs) < 2:
        return None
    keys, matrix = _pre_matrix(d, delta)
    target = _target(delta)
    n = len(target)
    seeds: list[tuple[Expression, np.ndarray]] = [(Var(k), matrix[k]) for k in sorted(keys, key=key_order)]
    seeds += [(Const(c), np.full(n, float(c))) for c in cfg.constant_pool]

    # ties prefer smaller, then constant-heavier expressions
    frontier: list[tuple[float, int, int, str, Expression, np.ndarray]] = []
    seen: set[str] = set()

    def push(expr: Expression, values: np.ndarray | None) -> None:
        if values is None:
            return
        text = expr.canonical()
        if text in seen:
            return
        seen.add(text)
        s = _score(values, target, cfg)
        if math.isfinite(s):
            heapq.heappush(frontier, (s, expr.size, len(expr.variables()), text, expr, values))

    for expr, values in seeds:
        push(expr, values)
    expansions = 0
    best = math.inf
    while frontier and expansions < cfg.expansion_budget:
        s, size, _, text, expr, values = heapq.heappop(frontier)
        if log is not None and s < best:
            best = s
            log.lines.append(f"{expansions}\t{s:.6g}\t{expr.to_pddl()}")
        if s <= cfg.acceptance_threshold:
            smaller = _smallest_fit(seeds, target, cfg, size, cfg.expansion_budget - expansions)
            if smaller is not None:
                s, expr, used = smaller
                expansions += used
            if log is not None:
                log.lines.append(f"accept\t{s:.6g}\t{expr.to_pddl()}")
            return Fit(delta, expr, s, expansions)
        expansions += 1
        if size + 2 > cfg.max_expression_size:
            continue
        for op in OPERATORS:
            for seed, seed_values in seeds:
                if op in "*/" and isinstance(seed, Const) and seed.value == 1:
                    continue
                push(BinOp(op, expr, seed), _combine(op, values, seed_values))
    if log is not None:
        log.lines.append(f"nofit\t{best:.6g}\texpansions={expansions}")
    return None


def _smallest_fit(
    seeds: list[tuple[Expression, np.ndarray]], target: np.ndarray, cfg: RegressionConfig, size: int, budget: int
) -> tuple[float, Expression, int] | None:
    """Acceptable expression strictly smaller than ``size``, by size-ordered enumeration.

    Score order can reach a long expression first (10 * 2 + 5 before 5 * 5);
    this pass restores parsimony within the remaining expansion budget.
    Returns (score, expression, expansions used) or None.
    """
    level = [(e, v) for e, v in seeds]
    current = 1
    used = 0
    while current < size:
        hits = []
        for expr, values in level:
            sc = _score(values, target, cfg)
            if sc <= cfg.acceptance_threshold:
                hits.append((sc, len(expr.variables()), expr.canonical(), expr))
        if hits:
            sc, _, _, expr = min(hits, key=lambda h: h[:3])
            return sc, expr, used
        if current + 2 >= size:
            return None
        nxt = []
        for expr, values in level:
            if used >= budget:
                return None
            used += 1
            for op in OPERATORS:
                for seed, seed_values in seeds:
                    if op in "*/" and isinstance(seed, Const) and seed.value == 1:
                        continue
                    combined = _combine(op, values, seed_values)
                    if combined is not None:
                        nxt.append((BinOp(op, expr, seed), combined))
        level = nxt
        current += 2
    return None


# ---------------------------------------------------------------------------
# relational features


def _env(row: Row) -> dict[Atom, float]:
    return {k: float(v) for k, v in row.cells.items() if isinstance(k, Atom) and _is_number(v)}  # type: ignore[arg-type]


def evaluate_feature(feature: NumericCondition, row: Row) -> bool | None:
    """Truth of ``feature`` on ``row``; ``None`` when a referenced value is missing."""
    env = _env(row)
    if not feature.atoms() <= env.keys():
        return None
    try:
        return feature.holds(env)
    except ZeroDivisionError:
        return None


def _truth_rate(feature: NumericCondition, rows: Sequence[Row]) -> tuple[float, int]:
    truths = [t for t in (evaluate_feature(feature, r) for r in rows) if t is not None]
    if not truths:
        return math.nan, 0
    return sum(truths) / len(truths), len(truths)


def _normalise(cond: NumericCondition) -> NumericCondition:
    # atomic mirrors collapse: B <= A becomes A >= B, A = B orders its sides
    if isinstance(cond.right, Var) and isinstance(cond.left, Var):
        if cond.comparator == "<=":
            return NumericCondition(">=", cond.right, cond.left)
        if cond.comparator == "=" and key_order(cond.right.atom) < key_order(cond.left.atom):
            return NumericCondition("=", cond.right, cond.left)
    return cond


def derive_relational_features(
    d: Dataset, fitted: Sequence[Fit], tolerance: float = 0.05, min_observed: float = 0.5
) -> list[NumericCondition]:
    """Comparisons that hold uniformly on pre-state rows but not on post-state rows.

    At most one feature is kept per (left attribute, comparator); preference
    goes to the expression fitted for that attribute's own change, then to
    the comparison violated most often after the action.
    """
    pre_rows = [r for r in d.rows if r.label == PRE]
    post_rows = [r for r in d.rows if r.label == POST]
    numeric = [c.key for c in _numeric_columns(d)]
    candidates: dict[str, tuple[NumericCondition, bool]] = {}
    for lhs in numeric:
        rhs_options: list[tuple[Expression, bool]] = [
            (f.expression, f.delta.target == lhs) for f in fitted if lhs not in f.expression.variables()
        ]
        rhs_options += [(Var(k), False) for k in numeric if k != lhs]
        for rhs, own in rhs_options:
            for cmp in RELATIONS:
                cond = _normalise(NumericCondition(cmp, Var(lhs), rhs))
                text = cond.to_pddl()
                if text in candidates:
                    candidates[text] = (cond, candidates[text][1] or own)
                else:
                    candidates[text] = (cond, own)

    groups: dict[tuple, list[tuple[tuple, NumericCondition]]] = {}
    for text, (cond, own) in candidates.items():
        pre_rate, pre_n = _truth_rate(cond, pre_rows)
        if pre_n == 0 or pre_n < min_observed * len(pre_rows) or pre_rate < 1.0 - tolerance:
            continue
        post_rate, post_n = _truth_rate(cond, post_rows)
        if post_n and post_rate >= 1.0 - tolerance:
            continue  # holds on both sides: carries no information about the action
        violation = 0.0 if not post_n else 1.0 - post_rate
        assert isinstance(cond.left, Var)
        group = (key_order(cond.left.atom), cond.comparator)
        groups.setdefault(group, []).append(((not own, -violation, text), cond))
    return [min(items, key=lambda it: it[0])[1] for _, items in sorted(groups.items())]


def extend_dataset(d: Dataset, feats: Sequence[NumericCondition]) -> Dataset:
    """Append one logical column per feature; original columns are left as they are."""
    known = set(d.keys)
    new = [f for f in feats if f not in known]
    if not new:
        return d
    updates = {}
    for pos, row in enumerate(d.rows):
        change = {f: evaluate_feature(f, row) for f in new}
        updates[pos] = {k: v for k, v in change.items() if v is not None}
    extended = Dataset(d.action, d.arity, d.columns + tuple(Column(f, LOGICAL) for f in new), d.rows, d.parameter_types)
    return extended.with_cells(updates)
