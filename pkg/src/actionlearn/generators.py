"""Random-walk trace generators over hand-written reference domains.

Each generator pairs a reference ``Domain`` with a problem sampler that
draws objects and a closed-world initial state (every ground atom listed as
true or false). Traces come from executing uniformly chosen applicable
actions, so they replay-validate against the reference by construction.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .model import ActionModel, Atom, Domain, PlanTrace, State
from .pddl import parse_reference_domain
from .replay import apply, execute, unsatisfied


class DeadEndError(RuntimeError):
    pass


@dataclass(frozen=True)
class Problem:
    objects: Mapping[str, str]
    state: State


@dataclass(frozen=True)
class GeneratorSpec:
    name: str
    domain: Domain
    sample: Callable[[np.random.Generator], Problem]
    min_length: int = 4
    max_length: int = 12


def _groundings(model: ActionModel, by_type: Mapping[str, list[str]]) -> list[tuple[str, ...]]:
    pools = [by_type.get(t, []) if t != "object" else sorted(o for objs in by_type.values() for o in objs) for t in model.types]
    return [combo for combo in itertools.product(*pools) if len(set(combo)) == len(combo)]


def random_walk(domain: Domain, problem: Problem, length: int, rng: np.random.Generator) -> PlanTrace | None:
    """Uniform over action names with an applicable grounding, then over those groundings.

    Applications that leave the state unchanged are skipped; a planner would
    never emit them and they make pre- and post-states indistinguishable.
    """
    by_type: dict[str, list[str]] = {}
    for obj, typ in sorted(problem.objects.items()):
        by_type.setdefault(typ, []).append(obj)
    grounded = {m.name: _groundings(m, by_type) for m in domain.actions}
    state = problem.state
    plan: list[tuple[str, tuple[str, ...]]] = []
    for _ in range(length):
        options = {}
        for model in domain.actions:
            ok = [
                args
                for args in grounded[model.name]
                if not unsatisfied(model, args, state) and apply(model, args, state, state.index) != state
            ]
            if ok:
                options[model.name] = ok
        if not options:
            return None
        names = sorted(options)
        name = names[int(rng.integers(len(names)))]
        args = options[name][int(rng.integers(len(options[name])))]
        plan.append((name, args))
        state = apply(domain[name], args, state)
    trace = execute(domain, problem.state, plan)
    return PlanTrace(trace.actions, trace.states, problem.objects)


def generate_traces(
    spec: GeneratorSpec, n: int, seed: int, length: int | None = None, retries: int = 50
) -> list[PlanTrace]:
    """``n`` random-walk traces; trace ``i`` depends only on (seed, i)."""
    traces = []
    for i in range(n):
        rng = np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, i]))
        for _ in range(retries):
            steps = length if length is not None else int(rng.integers(spec.min_length, spec.max_length + 1))
            trace = random_walk(spec.domain, spec.sample(rng), steps, rng)
            if trace is not None:
                traces.append(trace)
                break
        else:
            raise DeadEndError(f"{spec.name}: no walk of length {length} found after {retries} attempts")
    return traces


def _closed_world(predicates: Mapping[str, tuple[str, ...]], objects: Mapping[str, str], true: set[Atom]) -> dict[Atom, bool]:
    by_type: dict[str, list[str]] = {}
    for obj, typ in sorted(objects.items()):
        by_type.setdefault(typ, []).append(obj)
    literals = {}
    for name, sig in predicates.items():
        for combo in itertools.product(*(by_type.get(t, []) for t in sig)):
            if len(set(combo)) == len(combo):
                atom = Atom(name, combo)
                literals[atom] = atom in true
    unknown = true - set(literals)
    assert not unknown, f"atoms outside the predicate signatures: {unknown}"
    return literals


# ---------------------------------------------------------------------------
# rovers: the goto model is the one the learner should recover exactly

ROVERS_PDDL = """
(define (domain rovers)
  (:requirements :typing :fluents)
  (:types rover waypoint)
  (:predicates (at ?r - rover ?w - waypoint) (scanned ?w - waypoint) (station ?w - waypoint))
  (:functions (energy ?r - rover) (bat_usage ?r - rover) (dist ?a ?b - waypoint) (charge ?w - waypoint))
  (:action goto
    :parameters (?r - rover ?from ?to - waypoint)
    :precondition (and (at ?r ?from) (>= (energy ?r) (* (dist ?from ?to) (bat_usage ?r))))
    :effect (and (not (at ?r ?from)) (at ?r ?to) (decrease (energy ?r) (* (dist ?from ?to) (bat_usage ?r)))))
  (:action scan
    :parameters (?r - rover ?w - waypoint)
    :precondition (and (at ?r ?w))
    :effect (and (scanned ?w)))
  (:action recharge
    :parameters (?r - rover ?w - waypoint)
    :precondition (and (at ?r ?w) (station ?w))
    :effect (and (increase (energy ?r) (charge ?w))))
)
"""


def _rovers_problem(rng: np.random.Generator) -> Problem:
    n_rovers = int(rng.integers(1, 3))
    n_way = int(rng.integers(3, 6))
    rovers = [f"rov{i}" for i in range(n_rovers)]
    ways = [f"wp{i}" for i in range(n_way)]
    objects = {**{r: "rover" for r in rovers}, **{w: "waypoint" for w in ways}}
    true = {Atom("at", (r, ways[int(rng.integers(n_way))])) for r in rovers}
    true |= {Atom("scanned", (w,)) for w in ways if rng.random() < 0.3}
    stations = [w for w in ways if rng.random() < 0.5] or [ways[int(rng.integers(n_way))]]
    true |= {Atom("station", (w,)) for w in stations}
    literals = _closed_world({"at": ("rover", "waypoint"), "scanned": ("waypoint",), "station": ("waypoint",)}, objects, true)
    fluents: dict[Atom, float] = {}
    for r in rovers:
        fluents[Atom("energy", (r,))] = round(float(rng.uniform(30, 150)), 2)
        fluents[Atom("bat_usage", (r,))] = float(rng.integers(1, 4))
    for a, b in itertools.permutations(ways, 2):
        fluents[Atom("dist", (a, b))] = float(10 * rng.integers(1, 5))
    for w in ways:
        fluents[Atom("charge", (w,))] = float(10 * rng.integers(1, 7))
    return Problem(objects, State(0, literals, fluents))


# ---------------------------------------------------------------------------
# blocks: plain STRIPS

BLOCKS_PDDL = """
(define (domain blocks)
  (:requirements :typing)
  (:types block)
  (:predicates (on ?a ?b - block) (ontable ?a - block) (clear ?a - block) (holding ?a - block) (handempty))
  (:action pickup
    :parameters (?b - block)
    :precondition (and (clear ?b) (ontable ?b) (handempty))
    :effect (and (holding ?b) (not (clear ?b)) (not (ontable ?b)) (not (handempty))))
  (:action putdown
    :parameters (?b - block)
    :precondition (and (holding ?b))
    :effect (and (clear ?b) (ontable ?b) (handempty) (not (holding ?b))))
  (:action stack
    :parameters (?b ?c - block)
    :precondition (and (holding ?b) (clear ?c))
    :effect (and (on ?b ?c) (clear ?b) (handempty) (not (holding ?b)) (not (clear ?c))))
  (:action unstack
    :parameters (?b ?c - block)
    :precondition (and (on ?b ?c) (clear ?b) (handempty))
    :effect (and (holding ?b) (clear ?c) (not (on ?b ?c)) (not (clear ?b)) (not (handempty))))
)
"""


def _blocks_problem(rng: np.random.Generator) -> Problem:
    n = int(rng.integers(3, 6))
    blocks = [f"b{i}" for i in range(n)]
    order = [blocks[i] for i in rng.permutation(n)]
    towers: list[list[str]] = []
    for b in order:
        if towers and rng.random() < 0.5:
            towers[int(rng.integers(len(towers)))].append(b)
        else:
            towers.append([b])
    true = {Atom("handempty")}
    for tower in towers:
        true.add(Atom("ontable", (tower[0],)))
        true.add(Atom("clear", (tower[-1],)))
        for below, above in zip(tower, tower[1:]):
            true.add(Atom("on", (above, below)))
    objects = {b: "block" for b in blocks}
    sig = {"on": ("block", "block"), "ontable": ("block",), "clear": ("block",), "holding": ("block",), "handempty": ()}
    return Problem(objects, State(0, _closed_world(sig, objects, true), {}))


# ---------------------------------------------------------------------------
# zeno-like travel with fuel and passengers

ZENO_PDDL = """
(define (domain zeno)
  (:requirements :typing :fluents)
  (:types plane person city)
  (:predicates (at ?a - plane ?c - city) (person-at ?p - person ?c - city) (in ?p - person ?a - plane))
  (:functions (fuel ?a - plane) (burn ?a - plane) (distance ?x ?y - city) (refill ?c - city) (onboard ?a - plane))
  (:action fly
    :parameters (?a - plane ?from ?to - city)
    :precondition (and (at ?a ?from) (>= (fuel ?a) (* (distance ?from ?to) (burn ?a))))
    :effect (and (at ?a ?to) (not (at ?a ?from)) (decrease (fuel ?a) (* (distance ?from ?to) (burn ?a)))))
  (:action refuel
    :parameters (?a - plane ?c - city)
    :precondition (and (at ?a ?c))
    :effect (and (increase (fuel ?a) (refill ?c))))
  (:action board
    :parameters (?p - person ?a - plane ?c - city)
    :precondition (and (person-at ?p ?c) (at ?a ?c))
    :effect (and (in ?p ?a) (not (person-at ?p ?c)) (increase (onboard ?a) 1)))
  (:action debark
    :parameters (?p - person ?a - plane ?c - city)
    :precondition (and (in ?p ?a) (at ?a ?c))
    :effect (and (person-at ?p ?c) (not (in ?p ?a)) (decrease (onboard ?a) 1)))
)
"""


def _zeno_problem(rng: np.random.Generator) -> Problem:
    planes = [f"plane{i}" for i in range(int(rng.integers(1, 3)))]
    people = [f"person{i}" for i in range(int(rng.integers(2, 6)))]
    cities = [f"city{i}" for i in range(int(rng.integers(2, 5)))]
    objects = {**{p: "plane" for p in planes}, **{p: "person" for p in people}, **{c: "city" for c in cities}}
    true = {Atom("at", (a, cities[int(rng.integers(len(cities)))])) for a in planes}
    true |= {Atom("person-at", (p, cities[int(rng.integers(len(cities)))])) for p in people}
    sig = {"at": ("plane", "city"), "person-at": ("person", "city"), "in": ("person", "plane")}
    fluents: dict[Atom, float] = {}
    for a in planes:
        fluents[Atom("fuel", (a,))] = round(float(rng.uniform(100, 600)), 2)
        fluents[Atom("burn", (a,))] = float(rng.integers(1, 5))
        fluents[Atom("onboard", (a,))] = 0.0
    for x, y in itertools.permutations(cities, 2):
        fluents[Atom("distance", (x, y))] = float(25 * rng.integers(1, 9))
    for c in cities:
        fluents[Atom("refill", (c,))] = float(50 * rng.integers(1, 5))
    return Problem(objects, State(0, _closed_world(sig, objects, true), fluents))


def rovers_generator() -> GeneratorSpec:
    return GeneratorSpec("rovers", parse_reference_domain(ROVERS_PDDL), _rovers_problem)


def blocks_generator() -> GeneratorSpec:
    return GeneratorSpec("blocks", parse_reference_domain(BLOCKS_PDDL), _blocks_problem)


def zeno_generator() -> GeneratorSpec:
    return GeneratorSpec("zeno", parse_reference_domain(ZENO_PDDL), _zeno_problem)


GENERATORS: dict[str, Callable[[], GeneratorSpec]] = {
    "rovers": rovers_generator,
    "blocks": blocks_generator,
    "zeno": zeno_generator,
}
