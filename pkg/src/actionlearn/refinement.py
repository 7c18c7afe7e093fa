"""Meta-state refinement: collapse the rules of each class into a single rule.

Each feature is scored by its support, the summed weight of the rules that
contain it. Features far below the strongest one are discarded as
irrelevant; the rest are merged in descending support order, and two
features claiming the same attribute are reconciled by ``solve_conflict``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

from .model import NumericCondition, Var
from .rules import Feature, Rule, RuleSet, coverage
from .transitions import CLASSES, POST, PRE, Dataset, key_order

DROP_WEAKER = "drop_weaker"
DROP_BOTH = "drop_both"


class EmptyRuleSetError(ValueError):
    pass


class MissingClassError(ValueError):
    pass


@dataclass(frozen=True)
class RefineConfig:
    irrelevance_ratio: float = 0.05
    interval_coefficient: float = 0.1

    def __post_init__(self) -> None:
        for name in ("irrelevance_ratio", "interval_coefficient"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")


@dataclass(frozen=True)
class SupportedFeature:
    feature: Feature
    support: float

    def __post_init__(self) -> None:
        if self.support <= 0:
            raise ValueError("support must be positive")

    def as_dict(self) -> dict:
        return {"feature": str(self.feature), "support": self.support}


def conflict_key(feature: Feature) -> tuple:
    """Attribute identity for conflicts; comparisons share one slot per (left side, comparator)."""
    attr = feature.attribute
    if isinstance(attr, NumericCondition) and isinstance(attr.left, Var):
        return ("cmp", key_order(attr.left.atom), attr.comparator)
    return ("attr", key_order(attr))


def feature_supports(rules: Sequence[Rule]) -> list[SupportedFeature]:
    totals: dict[Feature, float] = {}
    for rule in rules:
        for f in rule.antecedent:
            totals[f] = totals.get(f, 0.0) + rule.weight
    items = [SupportedFeature(f, s) for f, s in totals.items() if s > 0]
    return sorted(items, key=lambda sf: (-sf.support, sf.feature.sort_key()))


def split_irrelevant(rules: Sequence[Rule], cfg: RefineConfig) -> tuple[list[SupportedFeature], list[SupportedFeature]]:
    """(kept, discarded) supported features, both in descending support order."""
    if not rules:
        raise EmptyRuleSetError("no rules to refine")
    classes = {r.consequent for r in rules}
    if len(classes) > 1:
        raise ValueError("rules of a single class expected")
    scored = feature_supports(rules)
    if not scored:
        return [], []
    cutoff = cfg.irrelevance_ratio * scored[0].support
    kept = [sf for sf in scored if sf.support >= cutoff]
    dropped = [sf for sf in scored if sf.support < cutoff]
    return kept, dropped


def extract_supported_features(rules: Sequence[Rule], cfg: RefineConfig) -> list[SupportedFeature]:
    return split_irrelevant(rules, cfg)[0]


def solve_conflict(s1: float, s2: float, coefficient: float = 0.1) -> str:
    """Supports within ``coefficient`` times their mean are indistinguishable: both go."""
    if s1 <= 0 or s2 <= 0:
        raise ValueError("supports must be positive")
    mean = (s1 + s2) / 2.0
    return DROP_BOTH if abs(s1 - s2) <= coefficient * mean else DROP_WEAKER


class MergeResult(NamedTuple):
    features: list[SupportedFeature]
    conflicts: list[dict]


def merge_supported(ordered: Sequence[SupportedFeature], cfg: RefineConfig) -> MergeResult:
    kept: dict[tuple, SupportedFeature] = {}
    blocked: set[tuple] = set()
    conflicts: list[dict] = []
    for sf in ordered:
        key = conflict_key(sf.feature)
        if key in blocked:
            conflicts.append({"feature": str(sf.feature), "support": sf.support, "decision": "blocked"})
            continue
        held = kept.get(key)
        if held is None:
            kept[key] = sf
            continue
        decision = solve_conflict(held.support, sf.support, cfg.interval_coefficient)
        conflicts.append(
            {
                "kept": str(held.feature) if decision == DROP_WEAKER else None,
                "features": [str(held.feature), str(sf.feature)],
                "supports": [held.support, sf.support],
                "decision": decision,
            }
        )
        if decision == DROP_BOTH:
            # a later, weaker feature must not resurrect a contested attribute
            del kept[key]
            blocked.add(key)
    order = {id(sf): i for i, sf in enumerate(ordered)}
    return MergeResult(sorted(kept.values(), key=lambda sf: order[id(sf)]), conflicts)


def merge_features(ordered: Sequence[SupportedFeature], cfg: RefineConfig, consequent: str = PRE) -> Rule:
    merged = merge_supported(ordered, cfg)
    weight = min(1.0, max((sf.support for sf in ordered), default=0.0))
    return Rule(frozenset(sf.feature for sf in merged.features), consequent, weight)


class Refined(NamedTuple):
    pre: Rule
    post: Rule
    report: dict


def _weight(features: frozenset[Feature], label: str, d: Dataset | None, fallback: float) -> float:
    if d is None:
        return fallback
    return coverage(features, d, label)


def refine(rs: RuleSet, cfg: RefineConfig, d: Dataset | None = None) -> Refined:
    """One rule per class; weights are recomputed on ``d`` when given."""
    out: dict[str, Rule] = {}
    report: dict[str, dict] = {}
    for label in CLASSES:
        rules = rs.of_class(label)
        if not rules:
            raise MissingClassError(f"no {label} rules")
        kept, dropped = split_irrelevant(rules, cfg)
        merged = merge_supported(kept, cfg)
        feats = frozenset(sf.feature for sf in merged.features)
        fallback = min(1.0, kept[0].support) if kept else 0.0
        out[label] = Rule(feats, label, _weight(feats, label, d, fallback))
        report[label] = {
            "rules": len(rules),
            "kept": [sf.as_dict() for sf in merged.features],
            "irrelevant": [sf.as_dict() for sf in dropped],
            "conflicts": merged.conflicts,
            "empty": not feats,
        }
    return Refined(out[PRE], out[POST], report)


def strongest_rules(rs: RuleSet) -> Refined:
    """Refinement bypass: keep the highest-weight rule of each class."""
    out = {}
    for label in CLASSES:
        rules = rs.of_class(label)
        if not rules:
            raise MissingClassError(f"no {label} rules")
        out[label] = max(rules, key=lambda r: r.weight)  # max keeps the first of equal weights
    return Refined(out[PRE], out[POST], {"skipped": True})
