"""Weighted conjunctive rules describing the pre-state and post-state rows of a dataset.

The learner is a deterministic sequential-covering algorithm. For each class
it grows one rule at a time, greedily adding the feature that maximises
(in-class rows covered) - (out-of-class rows covered), records the rule with
its coverage weight and removes the in-class rows it covers.

Grown rules are discriminative, i.e. minimal. Planning needs descriptive
meta-states, so a grown rule is then completed with every further feature
that holds on nearly all of the uncovered in-class rows it was grown for.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .model import format_number
from .transitions import CLASSES, DISCRETE, LOGICAL, Cell, Dataset, Key, key_order, key_text


@dataclass(frozen=True)
class Feature:
    attribute: Key
    value: bool | float

    def __str__(self) -> str:
        value = self.value
        text = str(value) if isinstance(value, bool) else format_number(value)  # type: ignore[arg-type]
        return f"{key_text(self.attribute)}={text}"

    def sort_key(self) -> tuple:
        return (key_order(self.attribute), str(self))

    def matches(self, cell: Cell) -> bool:
        # missing cells satisfy nothing
        if cell is None or isinstance(cell, bool) != isinstance(self.value, bool):
            return False
        return cell == self.value


@dataclass(frozen=True)
class Rule:
    antecedent: frozenset[Feature]
    consequent: str
    weight: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "antecedent", frozenset(self.antecedent))
        attrs = [f.attribute for f in self.antecedent]
        if len(attrs) != len(set(attrs)):
            raise ValueError("a rule holds at most one feature per attribute")
        if self.consequent not in CLASSES:
            raise ValueError(f"unknown class {self.consequent!r}")

    def features(self) -> list[Feature]:
        return sorted(self.antecedent, key=Feature.sort_key)

    def __str__(self) -> str:
        body = " AND ".join(str(f) for f in self.features()) or "TRUE"
        return f"IF {body} THEN {self.consequent} [w={self.weight:.6g}]"


@dataclass(frozen=True)
class RuleSet:
    rules: tuple[Rule, ...]
    fingerprint: str = ""

    def of_class(self, label: str) -> list[Rule]:
        return [r for r in self.rules if r.consequent == label]

    def dump(self) -> str:
        return "\n".join(str(r) for r in self.rules) + ("\n" if self.rules else "")


def candidate_features(d: Dataset) -> list[Feature]:
    """Every (attribute, observed value) pair of the logical and discretised columns."""
    out = []
    for col in d.columns_of(LOGICAL, DISCRETE):
        values = {r.get(col.key) for r in d.rows} - {None}
        for v in sorted(values, key=float):  # type: ignore[arg-type]
            out.append(Feature(col.key, v))  # type: ignore[arg-type]
    return sorted(out, key=Feature.sort_key)


def coverage(rule_features: Iterable[Feature], d: Dataset, label: str) -> float:
    """Fraction of ``label`` rows satisfying every feature."""
    feats = list(rule_features)
    rows = [r for r in d.rows if r.label == label]
    if not rows:
        return 0.0
    hits = sum(1 for r in rows if all(f.matches(r.get(f.attribute)) for f in feats))
    return hits / len(rows)


def learn_rules(d: Dataset, purity: float = 0.0, completion: float = 0.0, min_weight: float = 0.0) -> RuleSet:
    """Sequential covering per class.

    ``purity`` bounds out-of-class coverage relative to in-class coverage.
    ``completion`` is the share of covered in-class rows a feature may
    contradict and still be appended to a grown rule; 0 keeps only features
    no covered row contradicts. Missing cells are ignored, provided the
    attribute is observed on most covered rows.
    Covering of a class stops at the first rule that newly covers less than
    ``min_weight`` of the class (the first rule of a class is always kept);
    such rules describe a handful of rows and, on noisy data, mostly the
    noise. The
    same share of the class is the least gain in (covered in-class minus
    covered out-of-class) a feature must bring to be added while growing;
    when no feature separates the classes that well, the first rule of a
    class starts from the most covering feature instead and covering of
    the class ends at any later rule. The first rule of a class is
    seeded by a value that holds on most of the class whenever one exists.
    """
    if not d.rows:
        raise ValueError(f"{d.action}: empty dataset")
    features = candidate_features(d)
    sat = np.array([[f.matches(r.get(f.attribute)) for r in d.rows] for f in features], dtype=bool)
    sat = sat.reshape(len(features), len(d.rows))
    observed = np.array([[r.get(f.attribute) is not None for r in d.rows] for f in features], dtype=bool)
    observed = observed.reshape(sat.shape)
    labels = np.array([r.label for r in d.rows])
    rules: list[Rule] = []
    for label in CLASSES:
        in_class = labels == label
        total = int(in_class.sum())
        if total == 0:
            continue
        uncovered = in_class.copy()
        while uncovered.any():
            first = not any(r.consequent == label for r in rules)
            chosen = _grow(sat, features, uncovered, ~in_class, purity, min_weight * total, describe=first)
            if not chosen:
                break
            covered = _covers(sat, chosen, len(d.rows))
            if not (covered & uncovered).any():
                break
            # describe the rows the rule was grown for, so completion cannot undo its progress
            chosen = _complete(sat, observed, features, chosen, covered & uncovered, completion)
            covered = _covers(sat, chosen, len(d.rows))
            rule = Rule(frozenset(features[i] for i in chosen), label, int((covered & in_class).sum()) / total)
            fresh = int((covered & uncovered).sum()) / total
            if fresh == 0 or (fresh < min_weight and any(r.consequent == label for r in rules)):
                break
            rules.append(rule)
            uncovered = uncovered & ~covered
    return RuleSet(tuple(rules), d.fingerprint())


def _covers(sat: np.ndarray, chosen: list[int], n: int) -> np.ndarray:
    mask = np.ones(n, dtype=bool)
    for i in chosen:
        mask &= sat[i]
    return mask


def _grow(
    sat: np.ndarray,
    features: list[Feature],
    positives: np.ndarray,
    negatives: np.ndarray,
    purity: float,
    min_gain: float = 0.0,
    describe: bool = True,
) -> list[int]:
    chosen: list[int] = []
    used: set[Key] = set()
    mask = np.ones(sat.shape[1], dtype=bool)
    pos, neg = int((mask & positives).sum()), int((mask & negatives).sum())
    while neg > purity * pos or not chosen:
        best = None
        # a class's first rule starts from a value most of the class shares, when there is one
        majority = describe and not chosen and any(2 * int((sat[i] & positives).sum()) > pos for i in range(len(features)))
        for i, f in enumerate(features):
            if f.attribute in used:
                continue
            m = mask & sat[i]
            p = int((m & positives).sum())
            if p == 0 or (majority and 2 * p <= pos):
                continue
            n = int((m & negatives).sum())
            # features are pre-sorted, so the first of equal scores wins the lexicographic tie-break
            cand = (p - n, p)
            if best is None or cand > best[0]:
                best = (cand, i, m, p, n)
        if best is None:
            break
        gain = best[0][0] - (pos - neg if chosen else 0)
        if chosen and (gain <= 0 or gain < min_gain):
            break  # no feature improves the rule enough
        if not chosen and gain < min_gain:
            if not describe:
                break
            # nothing separates the classes: describe rather than discriminate
            best = max(
                ((int((sat[i] & positives).sum()), -i) for i, f in enumerate(features) if (sat[i] & positives).any()),
                default=None,
            )
            if best is None:
                break
            i = -best[1]
            chosen.append(i)
            break
        _, i, mask, pos, neg = best
        chosen.append(i)
        used.add(features[i].attribute)
    return chosen


def _complete(
    sat: np.ndarray, observed: np.ndarray, features: list[Feature], chosen: list[int], covered: np.ndarray, slack: float
) -> list[int]:
    n = int(covered.sum())
    if n == 0:
        return chosen
    used = {features[i].attribute for i in chosen}
    out = list(chosen)
    for i, f in enumerate(features):
        if f.attribute in used:
            continue
        # missing cells are unknown rather than counterexamples, but most covered rows must be observed
        seen = int((observed[i] & covered).sum())
        if 2 * seen <= n:
            continue
        if int((sat[i] & covered).sum()) >= (1.0 - slack) * seen:
            out.append(i)
            used.add(f.attribute)
    return out
