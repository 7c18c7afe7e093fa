import pytest

from actionlearn.generators import GENERATORS, generate_traces, rovers_generator
from actionlearn.pddl import PddlSyntaxError, UnsupportedConstructError, parse_reference_domain, serialize_domain
from actionlearn.synthesis import learn_domain
from worked_examples import GOTO_REFERENCE


def test_reference_goto_normalises_to_positional_parameters():
    goto = parse_reference_domain(GOTO_REFERENCE)["goto"]
    assert goto.parameters == ("?r", "?from", "?to")
    assert goto.normalized().parameters == ("?arg0", "?arg1", "?arg2")
    assert goto.types == ("rover", "waypoint", "waypoint")


@pytest.mark.parametrize("name", sorted(GENERATORS))
def test_round_trip(name):
    domain = GENERATORS[name]().domain
    text = serialize_domain(domain)
    again = parse_reference_domain(text)
    assert again == domain
    assert serialize_domain(again) == text


def test_learned_domain_round_trips():
    domain, _ = learn_domain(generate_traces(rovers_generator(), 20, 1))
    text = serialize_domain(domain)
    assert "(decrease (energy ?arg0) (* (dist ?arg1 ?arg2) (bat_usage ?arg0)))" in text
    assert parse_reference_domain(text) == domain


def test_conditional_effects_are_rejected():
    text = GOTO_REFERENCE.replace("(at ?r ?to)", "(when (at ?r ?from) (at ?r ?to))")
    with pytest.raises(UnsupportedConstructError) as info:
        parse_reference_domain(text)
    assert "when" in info.value.construct


@pytest.mark.parametrize("text", ["(define (domain d)", "(define (domain d)) )", "(domain d)"])
def test_syntax_errors(text):
    with pytest.raises(PddlSyntaxError):
        parse_reference_domain(text)


def test_comments_are_ignored():
    text = GOTO_REFERENCE.replace("(:action goto", "; a comment\n  (:action goto")
    assert parse_reference_domain(text) == parse_reference_domain(GOTO_REFERENCE)
