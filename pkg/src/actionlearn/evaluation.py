"""Noise injection, structural scoring and the k-fold harness."""
from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from typing import Sequence

import numpy as np

from .generators import DeadEndError, GeneratorSpec, generate_traces
from .model import ActionModel, Atom, Domain, PlanTrace, State
from .replay import UnknownActionError, Validation, replay_validate
from .synthesis import LearnConfig, learn_domain

__all__ = [
    "ABLATIONS",
    "DeadEndError",
    "FoldReport",
    "GeneratorSpec",
    "Metrics",
    "NoiseSpec",
    "TooFewTracesError",
    "Validation",
    "cross_validate",
    "generate_traces",
    "inject_noise",
    "model_elements",
    "replay_validate",
    "score_domain",
    "score_model",
]

NOISE_KINDS = ("logical-outlier", "numeric-outlier", "numeric-random", "mixed")


@dataclass(frozen=True)
class NoiseSpec:
    percentage: float = 0.0
    kind: str = "mixed"
    seed: int = 0
    random_magnitude: float = 0.1
    outlier_span: float = 10.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.percentage <= 1.0:
            raise ValueError("percentage must lie in [0, 1]")
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}; expected one of {', '.join(NOISE_KINDS)}")


def _slots(traces: Sequence[PlanTrace]) -> list[tuple[int, int, str, Atom]]:
    out = []
    for ti, trace in enumerate(traces):
        for si, state in enumerate(trace.states):
            out += [(ti, si, "literal", a) for a in sorted(state.literals)]
            out += [(ti, si, "fluent", a) for a in sorted(state.fluents)]
    return out


def _fluent_ranges(traces: Sequence[PlanTrace]) -> dict[str, tuple[float, float]]:
    ranges: dict[str, tuple[float, float]] = {}
    for trace in traces:
        for state in trace.states:
            for atom, v in state.fluents.items():
                lo, hi = ranges.get(atom.name, (v, v))
                ranges[atom.name] = (min(lo, v), max(hi, v))
    return ranges


def inject_noise(traces: Sequence[PlanTrace], spec: NoiseSpec) -> list[PlanTrace]:
    """Corrupt ``ceil(percentage * eligible)`` state elements chosen without replacement.

    Logical outliers flip literals; numeric outliers draw from
    [min - 10 range, max + 10 range] of the fluent name with a random sign;
    numeric-random noise scales a value by 1 + U(-0.1, 0.1). ``mixed`` picks
    among the strategies valid for each chosen slot.
    """
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed & 0xFFFFFFFFFFFFFFFF, 0x401CE]))
    slots = _slots(traces)
    if spec.kind == "logical-outlier":
        eligible = [s for s in slots if s[2] == "literal"]
    elif spec.kind in ("numeric-outlier", "numeric-random"):
        eligible = [s for s in slots if s[2] == "fluent"]
    else:
        eligible = slots
    count = min(len(eligible), math.ceil(spec.percentage * len(eligible) - 1e-9))
    if count <= 0:
        return list(traces)
    chosen = sorted(int(i) for i in rng.choice(len(eligible), size=count, replace=False))
    ranges = _fluent_ranges(traces)
    literals = [[dict(s.literals) for s in t.states] for t in traces]
    fluents = [[dict(s.fluents) for s in t.states] for t in traces]
    for i in chosen:
        ti, si, slot, atom = eligible[i]
        if slot == "literal":
            literals[ti][si][atom] = not literals[ti][si][atom]
            continue
        kind = spec.kind
        if kind == "mixed":
            kind = ("numeric-outlier", "numeric-random")[int(rng.integers(2))]
        value = fluents[ti][si][atom]
        if kind == "numeric-random":
            value = value * (1.0 + rng.uniform(-spec.random_magnitude, spec.random_magnitude))
        else:
            lo, hi = ranges[atom.name]
            span = (hi - lo) or 1.0
            value = rng.uniform(lo - spec.outlier_span * span, hi + spec.outlier_span * span)
            if rng.random() < 0.5:
                value = -value
        fluents[ti][si][atom] = float(value)
    out = []
    for ti, trace in enumerate(traces):
        states = tuple(State(s.index, literals[ti][si], fluents[ti][si]) for si, s in enumerate(trace.states))
        out.append(PlanTrace(trace.actions, states, trace.objects))
    return out


# ---------------------------------------------------------------------------
# metrics


class ArityMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class Metrics:
    tp: int
    fp: int
    fn: int

    @property
    def precision(self) -> float:
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 1.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 1.0

    @property
    def fscore(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0

    def as_dict(self) -> dict:
        return {**asdict(self), "precision": self.precision, "recall": self.recall, "fscore": self.fscore}


def model_elements(model: ActionModel) -> set[str]:
    """Preconditions and effects as canonical strings over positional parameters."""
    norm = model.normalized()
    return {f"pre:{c.canonical()}" for c in norm.preconditions} | {f"eff:{e.canonical()}" for e in norm.effects}


def score_model(learned: ActionModel, reference: ActionModel) -> Metrics:
    if learned.arity != reference.arity:
        raise ArityMismatchError(f"{learned.name}: arity {learned.arity} vs reference {reference.arity}")
    got, want = model_elements(learned), model_elements(reference)
    return Metrics(len(got & want), len(got - want), len(want - got))


def score_domain(learned: Domain, reference: Domain) -> tuple[dict[str, Metrics], dict[str, float]]:
    """Per reference action metrics and their arithmetic means; a missing action scores zero recall."""
    per: dict[str, Metrics] = {}
    for ref in reference.actions:
        if ref.name in learned and learned[ref.name].arity == ref.arity:
            per[ref.name] = score_model(learned[ref.name], ref)
        else:
            per[ref.name] = Metrics(0, 0, len(model_elements(ref)))
    n = len(per) or 1
    means = {
        "precision": sum(m.precision for m in per.values()) / n,
        "recall": sum(m.recall for m in per.values()) / n,
        "fscore": sum(m.fscore for m in per.values()) / n,
    }
    return per, means


# ---------------------------------------------------------------------------
# cross-validation

ABLATIONS = {
    None: {"full": {}},
    "filters": {"filters_on": {}, "filters_off": {"skip_filters": True}},
    "refinement": {"refinement_on": {}, "refinement_off": {"skip_refinement": True}},
    "both": {"enabled": {}, "disabled": {"skip_filters": True, "skip_refinement": True}},
}


class TooFewTracesError(ValueError):
    pass


@dataclass(frozen=True)
class FoldReport:
    config: dict
    folds: tuple[dict, ...]
    summary: dict

    def as_dict(self) -> dict:
        return {"config": self.config, "folds": list(self.folds), "summary": self.summary}

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True) + "\n"


def _validity(domain: Domain, tests: Sequence[PlanTrace]) -> tuple[int, str | None]:
    failures = 0
    first = None
    for i, trace in enumerate(tests):
        try:
            result = replay_validate(domain, trace)
            detail = result.detail
        except (UnknownActionError, KeyError, ValueError, ZeroDivisionError) as exc:
            result, detail = Validation(False), f"{type(exc).__name__}: {exc}"
        if not result.valid:
            failures += 1
            if first is None:
                first = f"test trace {i}: {detail}"
    return failures, first


def _run_arm(job: tuple) -> dict:
    train, tests, cfg, reference = job
    domain, report = learn_domain(train, cfg)
    out: dict = {"actions": sorted(domain.action_names)}
    errors = {k: v["error"] for k, v in report["actions"].items() if "error" in v}
    if errors:
        out["errors"] = errors
    if reference is not None:
        per, means = score_domain(domain, reference)
        out["per_action"] = {k: m.as_dict() for k, m in per.items()}
        out["domain"] = means
    failures, first = _validity(domain, tests)
    out["validity"] = failures == 0
    out["invalid_traces"] = failures
    if first:
        out["first_failure"] = first
    return out


def cross_validate(
    traces: Sequence[PlanTrace],
    k: int = 5,
    cfg: LearnConfig | None = None,
    noise: NoiseSpec | None = None,
    reference: Domain | None = None,
    ablation: str | None = None,
    seed: int = 0,
    jobs: int = 1,
) -> FoldReport:
    """Seeded k-fold runs; noise touches training folds only, validity is judged on clean test folds."""
    cfg = cfg or LearnConfig()
    if ablation not in ABLATIONS:
        raise ValueError(f"unknown ablation {ablation!r}")
    if k < 2:
        raise ValueError("k must be at least 2")
    if len(traces) < k:
        raise TooFewTracesError(f"{len(traces)} traces cannot form {k} folds")
    order = np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, 0xF01D])).permutation(len(traces))
    folds = [list(map(int, part)) for part in np.array_split(order, k)]
    arms = ABLATIONS[ablation]
    jobs_list = []
    layout = []
    for i, test_idx in enumerate(folds):
        test_set = set(test_idx)
        train = [traces[j] for j in order if int(j) not in test_set]
        tests = [traces[j] for j in test_idx]
        if noise is not None and noise.percentage > 0:
            train = inject_noise(train, replace(noise, seed=noise.seed * 1000003 + i))
        for arm, overrides in arms.items():
            jobs_list.append((train, tests, replace(cfg, **overrides), reference))
            layout.append((i, arm, len(train), len(tests)))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_arm, jobs_list))
    else:
        results = [_run_arm(j) for j in jobs_list]

    fold_reports: list[dict] = [{"fold": i, "train": 0, "test": 0, "arms": {}} for i in range(k)]
    for (i, arm, n_train, n_test), result in zip(layout, results):
        fold_reports[i].update(train=n_train, test=n_test)
        fold_reports[i]["arms"][arm] = result
    summary = {}
    for arm in arms:
        runs = [f["arms"][arm] for f in fold_reports]
        entry: dict = {"validity_rate": sum(r["validity"] for r in runs) / k}
        if reference is not None:
            for metric in ("precision", "recall", "fscore"):
                entry[f"mean_{metric}"] = sum(r["domain"][metric] for r in runs) / k
        summary[arm] = entry
    config = {
        "k": k,
        "seed": seed,
        "ablation": ablation,
        "traces": len(traces),
        "noise": asdict(noise) if noise is not None else None,
        "learn": cfg.as_dict(),
    }
    return FoldReport(config, tuple(fold_reports), summary)
