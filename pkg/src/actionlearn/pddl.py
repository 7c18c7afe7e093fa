"""PDDL emission and reading for the STRIPS + numeric-fluents subset the learner produces."""
from __future__ import annotations

import re
from typing import Union

from .model import (
    COMPARATORS,
    NUMERIC_EFFECT_KINDS,
    ActionModel,
    AddEffect,
    Atom,
    BinOp,
    Const,
    DeleteEffect,
    Domain,
    Expression,
    LogicalCondition,
    NumericCondition,
    NumericEffect,
    Var,
)

__all__ = ["serialize_domain", "parse_reference_domain", "PddlSyntaxError", "UnsupportedConstructError"]


class PddlSyntaxError(ValueError):
    pass


class UnsupportedConstructError(ValueError):
    def __init__(self, construct: str) -> None:
        super().__init__(f"unsupported PDDL construct: {construct}")
        self.construct = construct


# ---------------------------------------------------------------------------
# emission


def _signature(atom: Atom) -> str:
    return "(" + " ".join((atom.name, *(f"?x{i}" for i in range(len(atom.args))))) + ")"


def _collect_signatures(domain: Domain) -> tuple[list[str], list[str]]:
    predicates: dict[str, str] = {}
    functions: dict[str, str] = {}
    for action in domain.actions:
        for cond in action.preconditions:
            if isinstance(cond, LogicalCondition):
                predicates.setdefault(cond.atom.name, _signature(cond.atom))
            else:
                for atom in cond.atoms():
                    functions.setdefault(atom.name, _signature(atom))
        for eff in action.effects:
            if isinstance(eff, NumericEffect):
                for atom in eff.atoms():
                    functions.setdefault(atom.name, _signature(atom))
            else:
                predicates.setdefault(eff.atom.name, _signature(eff.atom))
    return [predicates[k] for k in sorted(predicates)], [functions[k] for k in sorted(functions)]


def _typed_list(params: tuple[str, ...], types: tuple[str, ...]) -> str:
    # group consecutive parameters sharing a type: ?a ?b - t1 ?c - t2
    chunks: list[str] = []
    i = 0
    while i < len(params):
        j = i
        while j + 1 < len(params) and types[j + 1] == types[i]:
            j += 1
        chunks.append(" ".join(params[i:j + 1]) + f" - {types[i]}")
        i = j + 1
    return " ".join(chunks)


def _conjunction(items: list[str], indent: str) -> str:
    if not items:
        return "()"
    if len(items) == 1:
        return "(and " + items[0] + ")"
    return "(and\n" + "\n".join(indent + "  " + it for it in items) + ")"


def _action_text(action: ActionModel) -> str:
    pre = sorted(c.to_pddl() for c in action.preconditions)
    # positive effects, then deletes, then numeric effects; each group lexicographic
    adds = sorted(e.to_pddl() for e in action.effects if isinstance(e, AddEffect))
    dels = sorted(e.to_pddl() for e in action.effects if isinstance(e, DeleteEffect))
    nums = sorted(e.to_pddl() for e in action.effects if isinstance(e, NumericEffect))
    lines = [
        f"  (:action {action.name}",
        f"    :parameters ({_typed_list(action.parameters, action.types)})",
        f"    :precondition {_conjunction(pre, '    ')}",
        f"    :effect {_conjunction(adds + dels + nums, '    ')})",
    ]
    return "\n".join(lines)


def serialize_domain(domain: Domain) -> str:
    """Deterministic PDDL text: actions by name, conditions and effects lexicographic."""
    predicates, functions = _collect_signatures(domain)
    requirements = [":typing", ":fluents"]
    if any(
        isinstance(c, LogicalCondition) and not c.value for a in domain.actions for c in a.preconditions
    ):
        requirements.append(":negative-preconditions")
    types = sorted({t for a in domain.actions for t in a.types} - {"object"})
    out = [f"(define (domain {domain.name})", f"  (:requirements {' '.join(requirements)})"]
    if types:
        out.append(f"  (:types {' '.join(types)})")
    out.append("  (:predicates" + "".join(f" {p}" for p in predicates) + ")")
    out.append("  (:functions" + "".join(f" {f}" for f in functions) + ")")
    for action in domain.actions:
        out.append(_action_text(action))
    out.append(")")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# reading

SExpr = Union[str, list]

_TOKEN = re.compile(r";[^\n]*|\(|\)|[^\s()]+")
_NUMBER = re.compile(r"[-+]?(\d+(\.\d*)?|\.\d+)([eE][-+]?\d+)?\Z")
_UNSUPPORTED = {
    "when": "conditional effect (when ...)",
    "forall": "universal quantifier (forall ...)",
    "exists": "existential quantifier (exists ...)",
    "or": "disjunctive condition (or ...)",
    "imply": "implication (imply ...)",
    "scale-up": "scale-up effect",
    "scale-down": "scale-down effect",
    ":durative-action": "durative action",
    ":derived": "derived predicate",
    ":constraints": "constraints block",
    ":constants": "domain constants",
}


def _tokenize(text: str) -> list[str]:
    return [t for t in _TOKEN.findall(text) if not t.startswith(";")]


def _read(tokens: list[str]) -> SExpr:
    stack: list[list] = [[]]
    for tok in tokens:
        if tok == "(":
            stack.append([])
        elif tok == ")":
            if len(stack) == 1:
                raise PddlSyntaxError("unbalanced ')'")
            done = stack.pop()
            stack[-1].append(done)
        else:
            stack[-1].append(tok)
    if len(stack) != 1:
        raise PddlSyntaxError("unbalanced '('")
    if len(stack[0]) != 1:
        raise PddlSyntaxError("expected exactly one top-level (define ...) form")
    return stack[0][0]


def _check_supported(node: SExpr) -> None:
    if isinstance(node, list):
        if node and isinstance(node[0], str) and node[0] in _UNSUPPORTED:
            raise UnsupportedConstructError(_UNSUPPORTED[node[0]])
        for child in node:
            _check_supported(child)


def _parse_typed(items: list) -> tuple[list[str], list[str]]:
    names: list[str] = []
    types: list[str] = []
    pending: list[str] = []
    i = 0
    while i < len(items):
        tok = items[i]
        if not isinstance(tok, str):
            raise PddlSyntaxError(f"unexpected list in typed list: {tok}")
        if tok == "-":
            if i + 1 >= len(items) or not isinstance(items[i + 1], str):
                raise PddlSyntaxError("'-' without a type name")
            names += pending
            types += [items[i + 1]] * len(pending)
            pending = []
            i += 2
            continue
        pending.append(tok)
        i += 1
    names += pending
    types += ["object"] * len(pending)
    return names, types


def _atom(node: SExpr) -> Atom:
    if not isinstance(node, list) or not node or not all(isinstance(t, str) for t in node):
        raise PddlSyntaxError(f"expected an atom, found {node!r}")
    return Atom(node[0], tuple(node[1:]))


def _expression(node: SExpr) -> Expression:
    if isinstance(node, str):
        if _NUMBER.match(node):
            return Const(float(node))
        raise PddlSyntaxError(f"bare symbol {node!r} in numeric expression")
    if node and node[0] in ("+", "-", "*", "/") and len(node) == 3:
        return BinOp(node[0], _expression(node[1]), _expression(node[2]))
    return Var(_atom(node))


def _conjuncts(node: SExpr) -> list:
    if node == [] or node is None:
        return []
    if isinstance(node, list) and node and node[0] == "and":
        return node[1:]
    return [node]


def _condition(node: SExpr):
    if not isinstance(node, list) or not node:
        raise PddlSyntaxError(f"bad condition {node!r}")
    head = node[0]
    if head == "not":
        if len(node) != 2:
            raise PddlSyntaxError(f"bad negation {node!r}")
        return LogicalCondition(_atom(node[1]), False)
    if head in COMPARATORS and len(node) == 3:
        return NumericCondition(head, _expression(node[1]), _expression(node[2]))
    return LogicalCondition(_atom(node), True)


def _effect(node: SExpr):
    if not isinstance(node, list) or not node:
        raise PddlSyntaxError(f"bad effect {node!r}")
    head = node[0]
    if head == "not":
        return DeleteEffect(_atom(node[1]))
    if head in NUMERIC_EFFECT_KINDS:
        if len(node) != 3:
            raise PddlSyntaxError(f"bad numeric effect {node!r}")
        return NumericEffect(head, _atom(node[1]), _expression(node[2]))
    return AddEffect(_atom(node))


def _action(node: list) -> ActionModel:
    if len(node) < 2 or not isinstance(node[1], str):
        raise PddlSyntaxError("action without a name")
    name = node[1]
    fields: dict[str, SExpr] = {}
    i = 2
    while i < len(node):
        key = node[i]
        if not isinstance(key, str) or not key.startswith(":") or i + 1 >= len(node):
            raise PddlSyntaxError(f"malformed action {name}")
        fields[key] = node[i + 1]
        i += 2
    unknown = set(fields) - {":parameters", ":precondition", ":effect"}
    if unknown:
        raise UnsupportedConstructError(f"action field {sorted(unknown)[0]}")
    params, types = _parse_typed(fields.get(":parameters", []))  # type: ignore[arg-type]
    pre = [_condition(c) for c in _conjuncts(fields.get(":precondition"))]
    eff = [_effect(e) for e in _conjuncts(fields.get(":effect"))]
    return ActionModel(name, tuple(params), frozenset(pre), frozenset(eff), tuple(types))


def parse_reference_domain(text: str) -> Domain:
    """Read a domain in the emitted subset; anything richer raises ``UnsupportedConstructError``."""
    tree = _read(_tokenize(text))
    if not isinstance(tree, list) or not tree or tree[0] != "define":
        raise PddlSyntaxError("expected (define ...)")
    _check_supported(tree)
    name = None
    actions = []
    for part in tree[1:]:
        if not isinstance(part, list) or not part:
            raise PddlSyntaxError(f"unexpected top-level item {part!r}")
        head = part[0]
        if head == "domain":
            name = part[1]
        elif head == ":action":
            actions.append(_action(part))
        elif head in (":requirements", ":types", ":predicates", ":functions"):
            continue  # signatures are recovered from the actions themselves
        else:
            raise UnsupportedConstructError(str(head))
    if name is None:
        raise PddlSyntaxError("missing (domain NAME)")
    return Domain(name, tuple(actions))
