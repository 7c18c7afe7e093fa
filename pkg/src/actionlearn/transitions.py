"""State transitions grouped by action, lifted into attribute-value datasets."""
from __future__ import annotations

import csv
import hashlib
import io
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Union

from .model import ActionInstance, Atom, NumericCondition, PlanTrace, State, format_number, param_symbol

PRE = "pre-state"
POST = "post-state"
CLASSES = (PRE, POST)

LOGICAL = "logical"
NUMERIC = "numeric"
DISCRETE = "discrete"

MISSING_TOKEN = "MV"

# A column is keyed either by a lifted atom or by a synthesized numeric comparison.
Key = Union[Atom, NumericCondition]
Cell = Union[bool, float, None]


def key_text(key: Key) -> str:
    return key.to_pddl() if isinstance(key, NumericCondition) else str(key)


def key_order(key: Key) -> tuple:
    # lifted atoms sort by (name, params); synthesized features after them
    if isinstance(key, Atom):
        return (0, key.name, key.args)
    return (1, key.to_pddl(), ())


@dataclass(frozen=True)
class Transition:
    pre: State
    action: ActionInstance
    post: State

    def __post_init__(self) -> None:
        if self.pre.index + 1 != self.post.index or self.action.start != self.pre.index:
            raise ValueError(f"inconsistent transition around {self.action}")


def group_transitions(traces: Iterable[PlanTrace]) -> dict[str, list[Transition]]:
    """Every action occurrence becomes one transition, grouped by action name."""
    groups: dict[str, list[Transition]] = {}
    for trace in traces:
        for action in trace.actions:
            transition = Transition(trace.states[action.start], action, trace.states[action.end])
            groups.setdefault(action.name, []).append(transition)
    return {name: groups[name] for name in sorted(groups)}


def lift_state(state: State, action: ActionInstance) -> dict[Atom, Union[bool, float]]:
    """Replace objects by ?argK (first position in the action's arguments).

    Atoms mentioning an object that is not an argument are dropped.
    """
    position: dict[str, str] = {}
    for i, obj in enumerate(action.args):
        position.setdefault(obj, param_symbol(i))
    lifted: dict[Atom, Union[bool, float]] = {}
    for source in (state.literals, state.fluents):
        for atom, value in source.items():
            if all(a in position for a in atom.args):
                key = atom.rename(position)
                assert key not in lifted, f"{atom} lifts onto an existing key {key}"
                lifted[key] = value
    return lifted


@dataclass(frozen=True)
class Column:
    key: Key
    kind: str

    @property
    def name(self) -> str:
        return key_text(self.key)


@dataclass(frozen=True)
class Row:
    transition: int
    label: str
    cells: Mapping[Key, Cell] = field(default_factory=dict)

    def get(self, key: Key) -> Cell:
        return self.cells.get(key)


@dataclass(frozen=True)
class Dataset:
    """Pre-state and post-state rows of one action; ``None`` cells are missing values."""

    action: str
    arity: int
    columns: tuple[Column, ...]
    rows: tuple[Row, ...]
    parameter_types: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "rows", tuple(self.rows))

    @property
    def keys(self) -> list[Key]:
        return [c.key for c in self.columns]

    def column(self, key: Key) -> Column:
        for col in self.columns:
            if col.key == key:
                return col
        raise KeyError(key_text(key))

    def columns_of(self, *kinds: str) -> list[Column]:
        return [c for c in self.columns if c.kind in kinds]

    def values(self, key: Key, label: str | None = None) -> list[Cell]:
        return [r.get(key) for r in self.rows if label is None or r.label == label]

    def pairs(self) -> list[tuple[Row, Row]]:
        """(pre row, post row) per transition, in transition order."""
        by_id: dict[int, dict[str, Row]] = {}
        for row in self.rows:
            by_id.setdefault(row.transition, {})[row.label] = row
        return [(v[PRE], v[POST]) for _, v in sorted(by_id.items()) if PRE in v and POST in v]

    def with_cells(self, updates: Mapping[int, Mapping[Key, Cell]], kinds: Mapping[Key, str] | None = None) -> Dataset:
        """Copy with some row cells replaced (row position -> key -> value) and column kinds changed."""
        rows = list(self.rows)
        for pos, change in updates.items():
            cells = dict(rows[pos].cells)
            for key, value in change.items():
                if value is None:
                    cells.pop(key, None)
                else:
                    cells[key] = value
            rows[pos] = replace(rows[pos], cells=cells)
        columns = self.columns
        if kinds:
            columns = tuple(Column(c.key, kinds.get(c.key, c.kind)) for c in self.columns)
        return replace(self, columns=columns, rows=tuple(rows))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([c.name for c in self.columns] + ["class"])
        for row in self.rows:
            writer.writerow([_cell_text(row.get(c.key)) for c in self.columns] + [row.label])
        return buf.getvalue()

    def fingerprint(self) -> str:
        return hashlib.sha256(self.to_csv().encode()).hexdigest()[:16]


def _cell_text(value: Cell) -> str:
    if value is None:
        return MISSING_TOKEN
    if isinstance(value, bool):
        return "True" if value else "False"
    return format_number(value)


class ArityMismatchError(ValueError):
    pass


def build_dataset(
    name: str,
    arity: int,
    transitions: Iterable[Transition],
    objects: Mapping[str, str] | None = None,
) -> Dataset:
    """Two rows per transition (pre-state, post-state); unobserved cells stay missing."""
    rows: list[Row] = []
    kinds: dict[Atom, str] = {}
    type_votes: list[set[str]] = [set() for _ in range(arity)]
    for tid, tr in enumerate(transitions):
        if tr.action.name != name or len(tr.action.args) != arity:
            raise ArityMismatchError(f"transition {tr.action} does not match {name}/{arity}")
        for label, state in ((PRE, tr.pre), (POST, tr.post)):
            cells = lift_state(state, tr.action)
            for key, value in cells.items():
                kind = LOGICAL if isinstance(value, bool) else NUMERIC
                if kinds.setdefault(key, kind) != kind:
                    raise ValueError(f"{key} is used both as a predicate and a fluent")
            rows.append(Row(tid, label, cells))
        if objects:
            for i, obj in enumerate(tr.action.args):
                type_votes[i].add(objects.get(obj, "object"))
    columns = tuple(Column(k, kinds[k]) for k in sorted(kinds, key=key_order))
    types = tuple(v.pop() if len(v) == 1 else "object" for v in type_votes) if objects else ()
    return Dataset(name, arity, columns, tuple(rows), types)
