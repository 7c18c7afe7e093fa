import pytest

from actionlearn.generators import GENERATORS, DeadEndError, generate_traces, rovers_generator
from actionlearn.model import ActionModel, Atom, Domain, LogicalCondition, NumericEffect
from actionlearn.pddl import parse_reference_domain
from actionlearn.replay import UnknownActionError, replay_validate
from actionlearn.traces import parse_plan_trace
from worked_examples import CLEAN_TRACE, GOTO_REFERENCE

REFERENCE = parse_reference_domain(GOTO_REFERENCE)
TRACE = parse_plan_trace(CLEAN_TRACE)


def with_goto(**changes):
    goto = REFERENCE["goto"]
    fields = {"preconditions": goto.preconditions, "effects": goto.effects, **changes}
    return Domain(REFERENCE.name, (ActionModel("goto", goto.parameters, types=goto.types, **fields),))


def test_reference_replays_its_worked_trace():
    assert replay_validate(REFERENCE, TRACE)


def test_spurious_precondition_fails_at_the_first_action():
    never = LogicalCondition(Atom("broken", ("?r",)), True)
    result = replay_validate(with_goto(preconditions=REFERENCE["goto"].preconditions | {never}), TRACE)
    assert not result
    assert result.step == 0
    assert "precondition unsatisfied: (broken rov1)" in result.detail


def test_missing_energy_decrease_is_a_fluent_mismatch():
    effects = {e for e in REFERENCE["goto"].effects if not isinstance(e, NumericEffect)}
    result = replay_validate(with_goto(effects=effects), TRACE)
    assert not result
    assert result.step == 0
    assert "fluent mismatch: (energy rov1) = 450, expected 300" in result.detail


def test_unknown_action():
    with pytest.raises(UnknownActionError):
        replay_validate(Domain("empty"), TRACE)


@pytest.mark.parametrize("name", sorted(GENERATORS))
def test_generated_traces_replay(name):
    spec = GENERATORS[name]()
    traces = generate_traces(spec, 30, 11)
    assert len(traces) == 30
    assert all(replay_validate(spec.domain, t) for t in traces)


def test_trace_i_depends_only_on_seed_and_index():
    spec = rovers_generator()
    assert generate_traces(spec, 5, 2)[:3] == generate_traces(spec, 3, 2)


def test_edge_lengths():
    spec = rovers_generator()
    assert generate_traces(spec, 0, 0) == []
    assert all(len(t.states) == 3 for t in generate_traces(spec, 4, 0, length=2))


def test_dead_end():
    spec = rovers_generator()
    stuck = Domain(spec.domain.name, ())
    from dataclasses import replace

    with pytest.raises(DeadEndError):
        generate_traces(replace(spec, domain=stuck), 1, 0, length=3, retries=2)
