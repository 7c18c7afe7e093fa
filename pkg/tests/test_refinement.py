import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from actionlearn.refinement import (
    DROP_BOTH,
    DROP_WEAKER,
    MissingClassError,
    RefineConfig,
    feature_supports,
    merge_features,
    refine,
    solve_conflict,
    split_irrelevant,
    strongest_rules,
)
from actionlearn.rules import Feature, Rule, RuleSet
from actionlearn.transitions import POST, PRE
from worked_examples import AT12, AT13, GUARD, SCANNED, goto_pre_rules


def test_supports_reproduce_the_multiset():
    supports = sorted(round(sf.support * 9, 9) for sf in feature_supports(goto_pre_rules()))
    assert supports == [1, 1, 3, 3, 8, 8, 9]


def test_illustrated_cutoff_drops_support_one():
    kept, dropped = split_irrelevant(goto_pre_rules(), RefineConfig(irrelevance_ratio=0.12))
    assert [round(sf.support * 9) for sf in kept] == [9, 8, 8, 3, 3]
    assert {str(sf.feature) for sf in dropped} == {"(at ?arg1 ?arg3)=True", "(at ?arg1 ?arg2)=False"}


def test_scanned_conflict_drops_both():
    cfg = RefineConfig(irrelevance_ratio=0.12)
    kept, _ = split_irrelevant(goto_pre_rules(), cfg)
    merged = merge_features(kept, cfg)
    assert merged.antecedent == {Feature(GUARD, True), Feature(AT13, False), Feature(AT12, True)}


def test_default_ratio_keeps_weak_features_until_conflicts():
    cfg = RefineConfig()
    kept, dropped = split_irrelevant(goto_pre_rules(), cfg)
    assert not dropped
    # the support-1 values lose their conflicts against the support-8 ones
    assert merge_features(kept, cfg).antecedent == {Feature(GUARD, True), Feature(AT13, False), Feature(AT12, True)}


@pytest.mark.parametrize(
    "s1, s2, decision",
    [(3, 3, DROP_BOTH), (10, 1, DROP_WEAKER), (1.0, 0.95, DROP_BOTH), (9, 3, DROP_WEAKER)],
)
def test_solve_conflict(s1, s2, decision):
    assert solve_conflict(s1, s2) == decision
    assert solve_conflict(s2, s1) == decision


def test_supports_add_up():
    f = Feature(AT12, True)
    rules = [Rule(frozenset({f}), PRE, 0.6), Rule(frozenset({f}), PRE, 0.3)]
    assert feature_supports(rules)[0].support == pytest.approx(0.9)


def test_two_rule_ruleset_passes_through():
    pre = Rule(frozenset({Feature(AT12, True)}), PRE, 1.0)
    post = Rule(frozenset({Feature(AT12, False)}), POST, 1.0)
    out = refine(RuleSet((pre, post)), RefineConfig())
    assert out.pre == pre and out.post == post


def test_missing_class():
    rs = RuleSet((Rule(frozenset({Feature(AT12, True)}), PRE, 1.0),))
    with pytest.raises(MissingClassError):
        refine(rs, RefineConfig())
    with pytest.raises(MissingClassError):
        strongest_rules(rs)


def test_strongest_rule_bypass():
    rules = goto_pre_rules() + [Rule(frozenset({Feature(AT12, False)}), POST, 1.0)]
    out = strongest_rules(RuleSet(tuple(rules)))
    assert out.pre == rules[0]


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 100), st.lists(st.integers(1, 9), min_size=4, max_size=4))
def test_refinement_is_scale_invariant(c, weights):
    f = Feature
    antecedents = [
        {f(AT12, True), f(SCANNED, False)},
        {f(AT12, True), f(SCANNED, True)},
        {f(AT12, False), f(AT13, True)},
        {f(AT13, False)},
    ]
    base = [Rule(frozenset(a), PRE, w / 10) for a, w in zip(antecedents, weights)]
    scaled = [Rule(r.antecedent, PRE, r.weight * c) for r in base]
    cfg = RefineConfig()
    a = merge_features(split_irrelevant(base, cfg)[0], cfg).antecedent
    b = merge_features(split_irrelevant(scaled, cfg)[0], cfg).antecedent
    assert a == b
