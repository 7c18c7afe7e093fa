"""Core value types: atoms, states, traces, arithmetic expressions and action models."""
from __future__ import annotations

import operator
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Iterable, Mapping, Union


def format_number(value: float) -> str:
    """Shortest text that parses back to exactly ``value``."""
    value = float(value)
    if value.is_integer() and abs(value) < 1e16:
        return str(int(value))
    return repr(value)


def param_symbol(index: int) -> str:
    return f"?arg{index}"


@dataclass(frozen=True, order=True)
class Atom:
    """A predicate or fluent applied to objects (grounded) or parameter symbols (lifted)."""

    name: str
    args: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("atom name must be nonempty")
        object.__setattr__(self, "args", tuple(self.args))

    def __str__(self) -> str:
        return "(" + " ".join((self.name, *self.args)) + ")"

    def rename(self, mapping: Mapping[str, str]) -> Atom:
        return Atom(self.name, tuple(mapping.get(a, a) for a in self.args))


PredicateAtom = Atom
FluentAtom = Atom


# ---------------------------------------------------------------------------
# states and traces


@dataclass(frozen=True)
class State:
    index: int
    literals: Mapping[Atom, bool] = field(default_factory=dict)
    fluents: Mapping[Atom, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "literals", MappingProxyType(dict(self.literals)))
        object.__setattr__(
            self, "fluents", MappingProxyType({k: float(v) for k, v in self.fluents.items()})
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, State):
            return NotImplemented
        return (
            self.index == other.index
            and dict(self.literals) == dict(other.literals)
            and dict(self.fluents) == dict(other.fluents)
        )

    def __hash__(self) -> int:
        return hash((self.index, frozenset(self.literals.items()), frozenset(self.fluents.items())))

    def atoms(self) -> set[Atom]:
        return set(self.literals) | set(self.fluents)


@dataclass(frozen=True)
class ActionInstance:
    name: str
    args: tuple[str, ...]
    start: int
    end: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "args", tuple(self.args))

    def __str__(self) -> str:
        return "(" + " ".join((self.name, *self.args)) + ")"


@dataclass(frozen=True)
class PlanTrace:
    actions: tuple[ActionInstance, ...]
    states: tuple[State, ...]
    objects: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "actions", tuple(self.actions))
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "objects", MappingProxyType(dict(self.objects)))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PlanTrace):
            return NotImplemented
        return (
            self.actions == other.actions
            and self.states == other.states
            and dict(self.objects) == dict(other.objects)
        )

    def __hash__(self) -> int:
        return hash((self.actions, self.states))


# ---------------------------------------------------------------------------
# arithmetic expressions

_OPS: dict[str, Callable[[float, float], float]] = {
    "+": operator.add,
    "-": operator.sub,
    "*": operator.mul,
    "/": operator.truediv,
}
COMMUTATIVE = frozenset("+*")


class UnboundFluentError(KeyError):
    """An expression referenced a fluent with no value in the current state."""


@dataclass(frozen=True)
class Const:
    value: float

    def evaluate(self, env: Mapping[Atom, float]) -> float:
        return float(self.value)

    @property
    def size(self) -> int:
        return 1

    def variables(self) -> set[Atom]:
        return set()

    def to_pddl(self) -> str:
        return format_number(self.value)

    def rename(self, mapping: Mapping[str, str]) -> Const:
        return self

    def canonical(self) -> str:
        return self.to_pddl()


@dataclass(frozen=True)
class Var:
    atom: Atom

    def evaluate(self, env: Mapping[Atom, float]) -> float:
        try:
            return float(env[self.atom])
        except KeyError:
            raise UnboundFluentError(str(self.atom)) from None

    @property
    def size(self) -> int:
        return 1

    def variables(self) -> set[Atom]:
        return {self.atom}

    def to_pddl(self) -> str:
        return str(self.atom)

    def rename(self, mapping: Mapping[str, str]) -> Var:
        return Var(self.atom.rename(mapping))

    def canonical(self) -> str:
        return self.to_pddl()


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expression"
    right: "Expression"

    def __post_init__(self) -> None:
        if self.op not in _OPS:
            raise ValueError(f"unknown operator {self.op!r}")

    def evaluate(self, env: Mapping[Atom, float]) -> float:
        lhs = self.left.evaluate(env)
        rhs = self.right.evaluate(env)
        if self.op == "/" and rhs == 0:
            raise ZeroDivisionError(f"division by zero in {self.to_pddl()}")
        return _OPS[self.op](lhs, rhs)

    @property
    def size(self) -> int:
        return 1 + self.left.size + self.right.size

    def variables(self) -> set[Atom]:
        return self.left.variables() | self.right.variables()

    def to_pddl(self) -> str:
        return f"({self.op} {self.left.to_pddl()} {self.right.to_pddl()})"

    def rename(self, mapping: Mapping[str, str]) -> BinOp:
        return BinOp(self.op, self.left.rename(mapping), self.right.rename(mapping))

    def canonical(self) -> str:
        # flatten associative chains of + and *, then sort operands
        if self.op in COMMUTATIVE:
            operands = sorted(o.canonical() for o in _flatten(self, self.op))
            return f"({self.op} {' '.join(operands)})"
        return f"({self.op} {self.left.canonical()} {self.right.canonical()})"


Expression = Union[Const, Var, BinOp]


def _flatten(expr: Expression, op: str) -> Iterable[Expression]:
    if isinstance(expr, BinOp) and expr.op == op:
        yield from _flatten(expr.left, op)
        yield from _flatten(expr.right, op)
    else:
        yield expr


# ---------------------------------------------------------------------------
# conditions and effects

COMPARATORS: dict[str, Callable[[float, float], bool]] = {
    ">=": operator.ge,
    "<=": operator.le,
    ">": operator.gt,
    "<": operator.lt,
    "=": operator.eq,
}
NEGATED = {">=": "<", "<=": ">", ">": "<=", "<": ">=", "=": None}


@dataclass(frozen=True)
class LogicalCondition:
    atom: Atom
    value: bool = True

    def to_pddl(self) -> str:
        return str(self.atom) if self.value else f"(not {self.atom})"

    def canonical(self) -> str:
        return self.to_pddl()

    def rename(self, mapping: Mapping[str, str]) -> LogicalCondition:
        return LogicalCondition(self.atom.rename(mapping), self.value)

    def atoms(self) -> set[Atom]:
        return {self.atom}


@dataclass(frozen=True)
class NumericCondition:
    comparator: str
    left: Expression
    right: Expression

    def __post_init__(self) -> None:
        if self.comparator not in COMPARATORS:
            raise ValueError(f"unknown comparator {self.comparator!r}")

    def holds(self, env: Mapping[Atom, float]) -> bool:
        return COMPARATORS[self.comparator](self.left.evaluate(env), self.right.evaluate(env))

    def to_pddl(self) -> str:
        return f"({self.comparator} {self.left.to_pddl()} {self.right.to_pddl()})"

    def canonical(self) -> str:
        return f"({self.comparator} {self.left.canonical()} {self.right.canonical()})"

    def rename(self, mapping: Mapping[str, str]) -> NumericCondition:
        return NumericCondition(self.comparator, self.left.rename(mapping), self.right.rename(mapping))

    def atoms(self) -> set[Atom]:
        return self.left.variables() | self.right.variables()

    def __str__(self) -> str:
        return self.to_pddl()


Condition = Union[LogicalCondition, NumericCondition]


@dataclass(frozen=True)
class AddEffect:
    atom: Atom

    def to_pddl(self) -> str:
        return str(self.atom)

    def canonical(self) -> str:
        return self.to_pddl()

    def rename(self, mapping: Mapping[str, str]) -> AddEffect:
        return AddEffect(self.atom.rename(mapping))

    def atoms(self) -> set[Atom]:
        return {self.atom}


@dataclass(frozen=True)
class DeleteEffect:
    atom: Atom

    def to_pddl(self) -> str:
        return f"(not {self.atom})"

    def canonical(self) -> str:
        return self.to_pddl()

    def rename(self, mapping: Mapping[str, str]) -> DeleteEffect:
        return DeleteEffect(self.atom.rename(mapping))

    def atoms(self) -> set[Atom]:
        return {self.atom}


NUMERIC_EFFECT_KINDS = ("increase", "decrease", "assign")


@dataclass(frozen=True)
class NumericEffect:
    kind: str
    target: Atom
    amount: Expression

    def __post_init__(self) -> None:
        if self.kind not in NUMERIC_EFFECT_KINDS:
            raise ValueError(f"unknown numeric effect {self.kind!r}")

    def to_pddl(self) -> str:
        return f"({self.kind} {self.target} {self.amount.to_pddl()})"

    def canonical(self) -> str:
        return f"({self.kind} {self.target} {self.amount.canonical()})"

    def rename(self, mapping: Mapping[str, str]) -> NumericEffect:
        return NumericEffect(self.kind, self.target.rename(mapping), self.amount.rename(mapping))

    def atoms(self) -> set[Atom]:
        return {self.target} | self.amount.variables()


Effect = Union[AddEffect, DeleteEffect, NumericEffect]


# ---------------------------------------------------------------------------
# action models and domains


@dataclass(frozen=True)
class ActionModel:
    name: str
    parameters: tuple[str, ...]
    preconditions: frozenset = frozenset()
    effects: frozenset = frozenset()
    types: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "parameters", tuple(self.parameters))
        object.__setattr__(self, "preconditions", frozenset(self.preconditions))
        object.__setattr__(self, "effects", frozenset(self.effects))
        types = tuple(self.types) or ("object",) * len(self.parameters)
        if len(types) != len(self.parameters):
            raise ValueError(f"{self.name}: {len(types)} types for {len(self.parameters)} parameters")
        object.__setattr__(self, "types", types)
        declared = set(self.parameters)
        for item in (*self.preconditions, *self.effects):
            for atom in item.atoms():
                undeclared = [a for a in atom.args if a.startswith("?") and a not in declared]
                if undeclared:
                    raise ValueError(f"{self.name}: undeclared parameter(s) {undeclared} in {item.to_pddl()}")
        adds = {e.atom for e in self.effects if isinstance(e, AddEffect)}
        dels = {e.atom for e in self.effects if isinstance(e, DeleteEffect)}
        if adds & dels:
            clash = ", ".join(str(a) for a in sorted(adds & dels))
            raise ValueError(f"{self.name}: atoms both added and deleted: {clash}")

    @property
    def arity(self) -> int:
        return len(self.parameters)

    def normalized(self) -> ActionModel:
        """The same model with parameters renamed positionally to ?arg0..?argN."""
        mapping = {p: param_symbol(i) for i, p in enumerate(self.parameters)}
        return ActionModel(
            self.name,
            tuple(mapping[p] for p in self.parameters),
            frozenset(c.rename(mapping) for c in self.preconditions),
            frozenset(e.rename(mapping) for e in self.effects),
            self.types,
        )

    def add_effects(self) -> set[Atom]:
        return {e.atom for e in self.effects if isinstance(e, AddEffect)}

    def delete_effects(self) -> set[Atom]:
        return {e.atom for e in self.effects if isinstance(e, DeleteEffect)}

    def numeric_effects(self) -> list[NumericEffect]:
        return sorted((e for e in self.effects if isinstance(e, NumericEffect)), key=lambda e: e.to_pddl())


@dataclass(frozen=True)
class Domain:
    name: str
    actions: tuple[ActionModel, ...] = ()

    def __post_init__(self) -> None:
        actions = tuple(sorted(self.actions, key=lambda a: a.name))
        names = [a.name for a in actions]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate action names in domain {self.name}")
        object.__setattr__(self, "actions", actions)

    def __getitem__(self, name: str) -> ActionModel:
        for action in self.actions:
            if action.name == name:
                return action
        raise KeyError(name)

    def __contains__(self, name: object) -> bool:
        return any(a.name == name for a in self.actions)

    @property
    def action_names(self) -> list[str]:
        return [a.name for a in self.actions]
