"""Executing action models on concrete states.

Literals follow the closed world here: an atom missing from a state is
false. Deletes are applied before adds, and every numeric effect is
evaluated on the state before the action.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .model import (
    ActionInstance,
    ActionModel,
    AddEffect,
    DeleteEffect,
    Domain,
    LogicalCondition,
    NumericCondition,
    NumericEffect,
    PlanTrace,
    State,
    UnboundFluentError,
)


class UnknownActionError(KeyError):
    pass


def binding(model: ActionModel, args: Sequence[str]) -> dict[str, str]:
    if len(args) != model.arity:
        raise ValueError(f"{model.name} takes {model.arity} arguments, got {len(args)}")
    return dict(zip(model.parameters, args))


def unsatisfied(model: ActionModel, args: Sequence[str], state: State) -> list[str]:
    """Grounded preconditions that fail in ``state`` (empty when applicable)."""
    mapping = binding(model, args)
    failed = []
    for cond in sorted(model.preconditions, key=lambda c: c.to_pddl()):
        grounded = cond.rename(mapping)
        if isinstance(grounded, LogicalCondition):
            ok = state.literals.get(grounded.atom, False) == grounded.value
        else:
            assert isinstance(grounded, NumericCondition)
            try:
                ok = grounded.holds(state.fluents)
            except ZeroDivisionError:
                ok = False
        if not ok:
            failed.append(grounded.to_pddl())
    return failed


def apply(model: ActionModel, args: Sequence[str], state: State, index: int | None = None) -> State:
    """Successor state; raises ``UnboundFluentError`` when an effect reads an unknown fluent."""
    mapping = binding(model, args)
    literals = dict(state.literals)
    fluents = dict(state.fluents)
    effects = [e.rename(mapping) for e in model.effects]
    for e in effects:
        if isinstance(e, DeleteEffect):
            literals[e.atom] = False
    for e in effects:
        if isinstance(e, AddEffect):
            literals[e.atom] = True
    updates = {}
    for e in effects:
        if isinstance(e, NumericEffect):
            amount = e.amount.evaluate(state.fluents)
            if e.kind == "assign":
                updates[e.target] = amount
            else:
                if e.target not in state.fluents:
                    raise UnboundFluentError(str(e.target))
                sign = 1.0 if e.kind == "increase" else -1.0
                updates[e.target] = state.fluents[e.target] + sign * amount
    fluents.update(updates)
    return State(state.index + 1 if index is None else index, literals, fluents)


def _close(a: float, b: float) -> bool:
    return math.isclose(a, b, rel_tol=1e-9, abs_tol=1e-9)


def mismatches(computed: State, expected: State) -> list[str]:
    """Differences on the attributes ``expected`` mentions."""
    out = []
    for atom in sorted(expected.fluents):
        want = expected.fluents[atom]
        got = computed.fluents.get(atom)
        if got is None or not _close(got, want):
            shown = "unbound" if got is None else f"{got:g}"
            out.append(f"fluent mismatch: {atom} = {shown}, expected {want:g}")
    for atom in sorted(expected.literals):
        want = expected.literals[atom]
        if computed.literals.get(atom, False) != want:
            out.append(f"literal mismatch: {atom} should be {'true' if want else 'false'}")
    return out


@dataclass(frozen=True)
class Validation:
    valid: bool
    detail: str = ""
    step: int | None = None

    def __bool__(self) -> bool:
        return self.valid


def replay_validate(domain: Domain, trace: PlanTrace) -> Validation:
    """Replay the trace's actions from its first state and compare with its last state.

    When invalid, ``step`` is the first step whose computed state differs
    from the recorded one (or whose preconditions fail).
    """
    state = trace.states[0]
    first: tuple[int, str] | None = None
    for k, act in enumerate(trace.actions):
        if act.name not in domain:
            raise UnknownActionError(act.name)
        model = domain[act.name]
        failed = unsatisfied(model, act.args, state)
        if failed:
            detail = f"step {k} {act}: precondition unsatisfied: {failed[0]}"
            if first is not None:
                detail = f"step {first[0]}: {first[1]}; {detail}"
            return Validation(False, detail, first[0] if first else k)
        state = apply(model, act.args, state)
        if first is None:
            diff = mismatches(state, trace.states[k + 1])
            if diff:
                first = (k, f"{act}: {diff[0]}")
    final = mismatches(state, trace.states[-1])
    if final:
        where = f"step {first[0]}: {first[1]}" if first else final[0]
        return Validation(False, f"final state differs ({len(final)} attributes); first divergence at {where}", first[0] if first else None)
    return Validation(True)


def execute(domain: Domain, start: State, actions: Sequence[tuple[str, Sequence[str]]]) -> PlanTrace:
    """Run a plan from ``start`` and record every state; raises if a step is inapplicable."""
    states = [start]
    instances = []
    for k, (name, args) in enumerate(actions):
        model = domain[name]
        failed = unsatisfied(model, args, states[-1])
        if failed:
            raise ValueError(f"step {k} ({name} {' '.join(args)}): {failed[0]}")
        states.append(apply(model, args, states[-1], k + 1))
        instances.append(ActionInstance(name, tuple(args), k, k + 1))
    return PlanTrace(tuple(instances), tuple(states))

