import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from actionlearn.model import Atom, BinOp, Const, Var, format_number
from actionlearn.traces import (
    DuplicateLiteralError,
    IndexGapError,
    TraceSyntaxError,
    parse_plan_trace,
    read_traces,
    serialize_trace,
    write_traces,
)
from worked_examples import CLEAN_TRACE, NOISY_TRACE


def test_clean_trace_parses():
    t = parse_plan_trace(CLEAN_TRACE)
    assert [a.name for a in t.actions] == ["goto", "goto"]
    assert t.actions[1].args == ("rov1", "wp2", "wp3")
    s0, s1, s2 = t.states
    assert s0.literals[Atom("at", ("rov1", "wp1"))] is True
    assert s0.literals[Atom("scanned", ("wp3",))] is False
    assert s0.fluents[Atom("energy", ("rov1",))] == 450
    assert s1.fluents[Atom("energy", ("rov1",))] == 300
    assert s2.fluents[Atom("energy", ("rov1",))] == 60
    assert s2.literals[Atom("at", ("rov1", "wp3"))] is True


def test_noisy_trace_keeps_the_corrupted_values():
    t = parse_plan_trace(NOISY_TRACE)
    assert t.states[0].literals[Atom("at", ("rov1", "wp2"))] is True
    assert t.states[0].fluents[Atom("bat_usage", ("rov1",))] == 3.25
    assert t.states[1].fluents[Atom("energy", ("rov1",))] == 299
    assert t.states[2].fluents[Atom("dist", ("wp2", "wp3"))] == -8000


def test_round_trip_is_exact():
    t = parse_plan_trace(CLEAN_TRACE)
    assert parse_plan_trace(serialize_trace(t)) == t
    assert serialize_trace(parse_plan_trace(serialize_trace(t))) == serialize_trace(t)


def test_objects_section_feeds_types():
    text = "#Objects\nrov1 - rover\nwp1 wp2 - waypoint\n" + CLEAN_TRACE
    t = parse_plan_trace(text)
    assert t.objects == {"rov1": "rover", "wp1": "waypoint", "wp2": "waypoint"}


@pytest.mark.parametrize(
    "text, error",
    [
        ("#Actions\n[0][1] (goto a b\n#States\n[0] (p)\n[1] (p)\n", TraceSyntaxError),
        ("#States\n[0] (p)\n", TraceSyntaxError),
        ("[0] (p)\n", TraceSyntaxError),
        ("#Actions\n[0][1] (a)\n#States\n[0] (p) (p)\n[1] (p)\n", DuplicateLiteralError),
        ("#Actions\n[0][2] (a)\n#States\n[0] (p)\n[2] (p)\n", IndexGapError),
        ("#Actions\n[0][1] (a)\n#States\n[0] (= (f x) abc)\n[1] (p)\n", TraceSyntaxError),
    ],
)
def test_malformed_traces_are_rejected(text, error):
    with pytest.raises(error):
        parse_plan_trace(text)


def test_syntax_error_reports_position():
    with pytest.raises(TraceSyntaxError) as info:
        parse_plan_trace("#Actions\n[0][1] (a)\n#States\n[0] (p)) \n[1] (p)\n")
    assert info.value.line == 4


def test_directory_io(tmp_path):
    t = parse_plan_trace(CLEAN_TRACE)
    write_traces([t, t], tmp_path / "out")
    back = read_traces(tmp_path / "out")
    assert back == [t, t]


def test_format_number_is_shortest_exact():
    assert format_number(3.0) == "3"
    assert format_number(0.1) == "0.1"
    assert float(format_number(1 / 3)) == 1 / 3


def test_expression_helpers():
    e = BinOp("*", Var(Atom("dist", ("?arg1", "?arg2"))), Var(Atom("bat_usage", ("?arg0",))))
    env = {Atom("dist", ("?arg1", "?arg2")): 50.0, Atom("bat_usage", ("?arg0",)): 3.0}
    assert e.evaluate(env) == 150.0
    assert e.size == 3
    assert e.to_pddl() == "(* (dist ?arg1 ?arg2) (bat_usage ?arg0))"
    # commutative operands share a canonical form
    flipped = BinOp("*", e.right, e.left)
    assert flipped.canonical() == e.canonical()
    assert Const(2).canonical() != Const(3).canonical()


names = st.sampled_from(["p", "q", "at", "on-top"])
objs = st.sampled_from(["a", "b", "c1", "wp_2"])
atoms = st.builds(lambda n, args: Atom(n, tuple(args)), names, st.lists(objs, max_size=2))
numbers = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False).map(lambda v: round(v, 3))


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.dictionaries(atoms, st.booleans(), min_size=1, max_size=4), min_size=2, max_size=4),
    st.dictionaries(atoms.map(lambda a: Atom("f" + a.name, a.args)), numbers, max_size=3),
)
def test_serialisation_round_trip_property(literal_maps, fluents):
    from actionlearn.model import ActionInstance, PlanTrace, State

    states = tuple(State(i, lits, fluents) for i, lits in enumerate(literal_maps))
    actions = tuple(ActionInstance("act", ("a",), i, i + 1) for i in range(len(states) - 1))
    t = PlanTrace(actions, states)
    assert parse_plan_trace(serialize_trace(t)) == t
