"""Turning refined meta-states into action models, and the end-to-end learner."""
from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

from .features import (
    Fit,
    RegressionConfig,
    derive_relational_features,
    detect_variant_fluents,
    extend_dataset,
    fit_expression,
)
from .model import (
    NEGATED,
    ActionModel,
    AddEffect,
    Atom,
    Const,
    DeleteEffect,
    Domain,
    LogicalCondition,
    NumericCondition,
    NumericEffect,
    PlanTrace,
    Var,
    param_symbol,
)
from .noise_filter import FilterConfig, discretise_fluents, filter_logical_noise
from .refinement import RefineConfig, refine, strongest_rules
from .rules import Rule, learn_rules
from .transitions import DISCRETE, LOGICAL, POST, PRE, Dataset, Transition, build_dataset, group_transitions, key_text


class ContradictionError(ValueError):
    pass


class NoTracesError(ValueError):
    pass


def _pins(rule: Rule) -> dict:
    pinned: dict = {}
    for f in rule.antecedent:
        if f.attribute in pinned:
            raise ContradictionError(f"{rule.consequent} rule pins {key_text(f.attribute)} twice")
        pinned[f.attribute] = f.value
    return pinned


def synthesize_action(
    pre_rule: Rule,
    post_rule: Rule,
    name: str,
    arity: int,
    fits: Sequence[Fit] = (),
    parameter_types: Sequence[str] = (),
    discrete: Sequence[Atom] = (),
    variant: Sequence[Atom] | None = None,
    dataset: Dataset | None = None,
    add_margin: float = 0.0,
) -> ActionModel:
    """Preconditions from the pre meta-state, effects from its difference to the post meta-state.

    ``discrete`` lists discretised fluents; pinned values on them become
    equality preconditions and unexplained changes become ``assign`` effects
    (restricted to ``variant`` fluents when that is given). With a
    ``dataset``, an add (delete) effect also needs the atom's true-frequency
    to rise (fall) by at least ``add_margin`` from pre- to post-rows.
    """
    pre, post = _pins(pre_rule), _pins(post_rule)
    discrete_set = set(discrete)
    effects: set = set()
    for attr, value in post.items():
        if not isinstance(attr, Atom) or not isinstance(value, bool):
            continue
        before = pre.get(attr)
        if dataset is not None and add_margin > 0:
            rise = _true_rate(dataset, attr, POST) - _true_rate(dataset, attr, PRE)
            if (rise if value else -rise) < add_margin:
                continue
        if value and before is not True:
            effects.add(AddEffect(attr))
        elif not value and before is True:
            effects.add(DeleteEffect(attr))
    fitted = {}
    for fit in fits:
        if fit.delta.effect_kind is not None:
            fitted[fit.delta.target] = fit
            effects.add(NumericEffect(fit.delta.effect_kind, fit.delta.target, fit.expression))
    for attr, value in post.items():
        if (
            isinstance(attr, Atom)
            and attr in discrete_set
            and attr not in fitted
            and (variant is None or attr in variant)
            and attr in pre
            and pre[attr] != value
        ):
            effects.add(NumericEffect("assign", attr, Const(float(value))))

    added = {e.atom for e in effects if isinstance(e, AddEffect)}
    preconditions: set = set()
    for attr, value in pre.items():
        if isinstance(attr, NumericCondition):
            if value:
                preconditions.add(attr)
            elif NEGATED[attr.comparator] is not None:
                preconditions.add(NumericCondition(NEGATED[attr.comparator], attr.left, attr.right))  # type: ignore[arg-type]
        elif isinstance(value, bool):
            # an atom the action adds is false beforehand by construction, and a
            # falsehood that persists through the action reads as a state invariant
            if value or (attr not in added and post.get(attr) is not False):
                preconditions.add(LogicalCondition(attr, value))
        elif attr in discrete_set:
            preconditions.add(NumericCondition("=", Var(attr), Const(float(value))))
    params = tuple(param_symbol(i) for i in range(arity))
    return ActionModel(name, params, frozenset(preconditions), frozenset(effects), tuple(parameter_types))


def _true_rate(d: Dataset, atom: Atom, label: str) -> float:
    values = [v for v in d.values(atom, label) if v is not None]
    return sum(1 for v in values if v is True) / len(values) if values else 0.0


# ---------------------------------------------------------------------------
# pipeline


@dataclass(frozen=True)
class LearnConfig:
    filters: FilterConfig = field(default_factory=FilterConfig)
    regression: RegressionConfig = field(default_factory=RegressionConfig)
    refinement: RefineConfig = field(default_factory=RefineConfig)
    purity: float = 0.0
    completion: float = 0.0
    min_rule_weight: float = 0.0
    add_margin: float = 0.0
    relational_tolerance: float = 0.05
    # numeric columns with more distinct values than this share of observations stay continuous
    continuous_ratio: float | None = 0.3
    skip_filters: bool = False
    skip_refinement: bool = False
    domain_name: str = "learned"
    jobs: int = 1

    def as_dict(self) -> dict:
        out = asdict(self)
        out["regression"]["constant_pool"] = list(self.regression.constant_pool)
        return out


def robust_config(**overrides) -> LearnConfig:
    """Settings for noisy corpora: tolerant completion, direction and fit scoring."""
    base = LearnConfig(
        regression=RegressionConfig(direction_tolerance=0.25, trim_fraction=0.3),
        purity=0.25,
        completion=0.2,
        min_rule_weight=0.1,
        add_margin=0.2,
        relational_tolerance=0.1,
    )
    return replace(base, **overrides)


def learn_action(name: str, transitions: Sequence[Transition], cfg: LearnConfig, objects: dict | None = None) -> tuple[ActionModel, dict]:
    arity = len(transitions[0].action.args)
    d = build_dataset(name, arity, transitions, objects)
    stats: dict = {"transitions": len(transitions), "rows": len(d.rows), "attributes": len(d.columns)}
    if not cfg.skip_filters:
        before = _cell_count(d, LOGICAL)
        d = filter_logical_noise(d, cfg.filters)
        stats["erased_logical_cells"] = before - _cell_count(d, LOGICAL)
        d, outliers = discretise_fluents(d, cfg.filters, cfg.continuous_ratio)
        stats["numeric"] = outliers
    deltas = detect_variant_fluents(d, cfg.regression)
    fits = []
    stats["fits"] = {}
    for delta in deltas:
        fit = fit_expression(d, delta, cfg.regression)
        stats["fits"][str(delta.target)] = (
            {"direction": delta.direction, "expression": fit.expression.to_pddl(), "score": fit.score, "expansions": fit.expansions}
            if fit
            else {"direction": delta.direction, "expression": None}
        )
        if fit is not None:
            fits.append(fit)
    feats = derive_relational_features(d, fits, cfg.relational_tolerance)
    stats["relational_features"] = [f.to_pddl() for f in feats]
    d = extend_dataset(d, feats)
    rules = learn_rules(d, cfg.purity, cfg.completion, cfg.min_rule_weight)
    stats["rules"] = len(rules.rules)
    refined = strongest_rules(rules) if cfg.skip_refinement else refine(rules, cfg.refinement, d)
    stats["refinement"] = refined.report
    discrete = [c.key for c in d.columns_of(DISCRETE)]
    model = synthesize_action(
        refined.pre,
        refined.post,
        name,
        arity,
        fits,
        d.parameter_types,
        discrete,  # type: ignore[arg-type]
        variant=[delta.target for delta in deltas],
        dataset=d,
        add_margin=cfg.add_margin,
    )
    return model, stats


def _cell_count(d: Dataset, kind: str) -> int:
    keys = [c.key for c in d.columns_of(kind)]
    return sum(1 for r in d.rows for k in keys if r.get(k) is not None)


def _learn_job(args: tuple) -> tuple[str, ActionModel | None, dict]:
    name, transitions, cfg, objects = args
    try:
        model, stats = learn_action(name, transitions, cfg, objects)
        return name, model, stats
    except Exception as exc:  # one failing action must not sink the others
        return name, None, {"error": f"{type(exc).__name__}: {exc}"}


def learn_domain(traces: Sequence[PlanTrace], cfg: LearnConfig | None = None) -> tuple[Domain, dict]:
    """Learn one action model per action name observed in ``traces``."""
    cfg = cfg or LearnConfig()
    if not traces:
        raise NoTracesError("at least one trace is required")
    objects: dict[str, str] = {}
    for t in traces:
        objects.update(t.objects)
    groups = group_transitions(traces)
    jobs = [(name, trs, cfg, objects or None) for name, trs in groups.items()]
    if cfg.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_learn_job, jobs))
    else:
        results = [_learn_job(j) for j in jobs]
    models = [m for _, m, _ in results if m is not None]
    report = {"config": cfg.as_dict(), "traces": len(traces), "actions": {name: stats for name, _, stats in results}}
    return Domain(cfg.domain_name, tuple(models)), report


def report_json(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, default=str) + "\n"
