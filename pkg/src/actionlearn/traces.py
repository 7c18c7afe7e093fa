"""Reading and writing the line-oriented plan-trace format.

A trace file looks like::

    #Actions
    [0][1] (goto rov1 wp1 wp2)
    #States
    [0] (at rov1 wp1) (not (at rov1 wp2)) (= (energy rov1) 450)
    [1] (not (at rov1 wp1)) (at rov1 wp2) (= (energy rov1) 300)

An optional ``#Objects`` section may precede ``#Actions`` with one
``name - type`` declaration per line; it only feeds parameter typing.
"""
from __future__ import annotations

import re
from pathlib import Path
from typing import Iterable, Iterator

from .model import ActionInstance, Atom, PlanTrace, State, format_number

__all__ = [
    "TraceError",
    "TraceSyntaxError",
    "IndexGapError",
    "DuplicateLiteralError",
    "parse_plan_trace",
    "serialize_trace",
    "read_traces",
    "write_traces",
]


class TraceError(ValueError):
    pass


class TraceSyntaxError(TraceError):
    def __init__(self, message: str, line: int, column: int) -> None:
        super().__init__(f"line {line}, column {column}: {message}")
        self.message = message
        self.line = line
        self.column = column


class IndexGapError(TraceError):
    pass


class DuplicateLiteralError(TraceError):
    pass


_IDENT = r"[A-Za-z_][A-Za-z0-9_\-]*"
_IDENT_RE = re.compile(_IDENT + r"\Z")
_NUMBER_RE = re.compile(r"[-+]?(\d+(\.\d*)?|\.\d+)([eE][-+]?\d+)?\Z")
_INDEX_RE = re.compile(r"\[(\d+)\]")
_TOKEN_RE = re.compile(r"\s*(\(|\)|[^\s()]+)")


def _tokens(text: str, line: int, offset: int) -> Iterator[tuple[str, int]]:
    pos = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None:
            break
        if not match.group(1):
            break
        yield match.group(1), offset + match.start(1) + 1
        pos = match.end()


class _Cursor:
    def __init__(self, text: str, line: int, offset: int) -> None:
        self.items = list(_tokens(text, line, offset))
        self.pos = 0
        self.line = line
        self.end_col = offset + len(text) + 1

    def peek(self) -> str | None:
        return self.items[self.pos][0] if self.pos < len(self.items) else None

    def column(self) -> int:
        return self.items[self.pos][1] if self.pos < len(self.items) else self.end_col

    def take(self, expected: str | None = None, what: str | None = None) -> str:
        if self.pos >= len(self.items):
            wanted = what or (repr(expected) if expected else "token")
            raise TraceSyntaxError(f"unexpected end of line, expected {wanted}", self.line, self.end_col)
        tok, col = self.items[self.pos]
        if expected is not None and tok != expected:
            raise TraceSyntaxError(f"expected {expected!r}, found {tok!r}", self.line, col)
        self.pos += 1
        return tok

    def ident(self) -> str:
        col = self.column()
        tok = self.take(what="identifier")
        if not _IDENT_RE.match(tok):
            raise TraceSyntaxError(f"invalid identifier {tok!r}", self.line, col)
        return tok

    def atom(self) -> Atom:
        self.take("(")
        name = self.ident()
        args = []
        while self.peek() not in (")", None):
            args.append(self.ident())
        self.take(")")
        return Atom(name, tuple(args))


def _parse_item(cur: _Cursor) -> tuple[str, Atom, object]:
    col = cur.column()
    cur.take("(")
    head = cur.peek()
    if head == "not":
        cur.take()
        kind, atom, value = _parse_item(cur)
        if kind != "literal" or value is not True:
            raise TraceSyntaxError("'not' must wrap a positive literal", cur.line, col)
        cur.take(")")
        return "literal", atom, False
    if head == "=":
        cur.take()
        atom = cur.atom()
        num_col = cur.column()
        tok = cur.take(what="number")
        if not _NUMBER_RE.match(tok):
            raise TraceSyntaxError(f"invalid number {tok!r}", cur.line, num_col)
        cur.take(")")
        return "fluent", atom, float(tok)
    # positive literal: rewind over the "(" and read it as an atom
    cur.pos -= 1
    return "literal", cur.atom(), True


def _parse_index(line: str, lineno: int) -> tuple[int, int]:
    match = _INDEX_RE.match(line)
    if match is None:
        raise TraceSyntaxError("expected '[INT]'", lineno, 1)
    return int(match.group(1)), match.end()


def parse_plan_trace(text: str) -> PlanTrace:
    """Parse one trace; raises ``TraceSyntaxError``, ``IndexGapError`` or ``DuplicateLiteralError``."""
    section = None
    objects: dict[str, str] = {}
    actions: list[ActionInstance] = []
    states: list[State] = []
    seen_sections: set[str] = set()

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip()
        if not line.strip() or line.lstrip().startswith(";"):
            continue
        if line.startswith("#"):
            header = line[1:].strip().lower()
            if header not in ("objects", "actions", "states"):
                raise TraceSyntaxError(f"unknown section {line.strip()!r}", lineno, 1)
            if header in seen_sections:
                raise TraceSyntaxError(f"repeated section {line.strip()!r}", lineno, 1)
            if header == "objects" and seen_sections:
                raise TraceSyntaxError("#Objects must precede #Actions", lineno, 1)
            if header == "states" and "actions" not in seen_sections:
                raise TraceSyntaxError("#States before #Actions", lineno, 1)
            seen_sections.add(header)
            section = header
            continue
        if section is None:
            raise TraceSyntaxError("content before '#Actions'", lineno, 1)
        if section == "objects":
            parts = line.split()
            if len(parts) < 3 or parts[-2] != "-":
                raise TraceSyntaxError("expected 'name ... - type'", lineno, 1)
            for name in parts[:-2]:
                if not _IDENT_RE.match(name):
                    raise TraceSyntaxError(f"invalid identifier {name!r}", lineno, line.index(name) + 1)
                objects[name] = parts[-1]
        elif section == "actions":
            start, pos = _parse_index(line, lineno)
            match = _INDEX_RE.match(line, pos)
            if match is None:
                raise TraceSyntaxError("expected '[INT]' end index", lineno, pos + 1)
            end = int(match.group(1))
            cur = _Cursor(line[match.end():], lineno, match.end())
            atom = cur.atom()
            if cur.peek() is not None:
                raise TraceSyntaxError("trailing text after action", lineno, cur.column())
            actions.append(ActionInstance(atom.name, atom.args, start, end))
        else:
            index, pos = _parse_index(line, lineno)
            cur = _Cursor(line[pos:], lineno, pos)
            literals: dict[Atom, bool] = {}
            fluents: dict[Atom, float] = {}
            if cur.peek() is None:
                raise TraceSyntaxError("state line without items", lineno, pos + 1)
            while cur.peek() is not None:
                col = cur.column()
                kind, atom, value = _parse_item(cur)
                if atom in literals or atom in fluents:
                    raise DuplicateLiteralError(f"line {lineno}, column {col}: {atom} appears twice in state {index}")
                if kind == "literal":
                    literals[atom] = bool(value)
                else:
                    fluents[atom] = float(value)  # type: ignore[arg-type]
            states.append(State(index, literals, fluents))

    if "actions" not in seen_sections:
        raise TraceSyntaxError("missing '#Actions' section", 1, 1)
    _check_indices(actions, states)
    return PlanTrace(tuple(actions), tuple(states), objects)


def _check_indices(actions: list[ActionInstance], states: list[State]) -> None:
    if len(states) != len(actions) + 1:
        raise IndexGapError(f"{len(states)} states for {len(actions)} actions (expected {len(actions) + 1})")
    for pos, state in enumerate(states):
        if state.index != pos:
            raise IndexGapError(f"state at position {pos} has index {state.index}")
    for pos, action in enumerate(actions):
        if action.start != pos:
            raise IndexGapError(f"action {action} at position {pos} starts at {action.start}")
        if action.end != action.start + 1:
            raise IndexGapError(f"action {action} spans [{action.start}][{action.end}]")


def _item_text(atom: Atom, value: object) -> str:
    if isinstance(value, bool):
        return str(atom) if value else f"(not {atom})"
    return f"(= {atom} {format_number(value)})"  # type: ignore[arg-type]


def serialize_trace(trace: PlanTrace) -> str:
    lines = []
    if trace.objects:
        lines.append("#Objects")
        for name in sorted(trace.objects):
            lines.append(f"{name} - {trace.objects[name]}")
    lines.append("#Actions")
    for action in trace.actions:
        lines.append(f"[{action.start}][{action.end}] {action}")
    lines.append("#States")
    for state in trace.states:
        items = [_item_text(a, state.literals[a]) for a in sorted(state.literals)]
        items += [_item_text(a, state.fluents[a]) for a in sorted(state.fluents)]
        lines.append(f"[{state.index}] " + " ".join(items))
    return "\n".join(lines) + "\n"


def read_traces(path: str | Path) -> list[PlanTrace]:
    """Read one trace file, or every ``*.trace``/``*.txt`` file of a directory in name order."""
    path = Path(path)
    if path.is_dir():
        files = sorted(p for p in path.iterdir() if p.suffix in (".trace", ".txt") and p.is_file())
    else:
        files = [path]
    traces = []
    for file in files:
        try:
            traces.append(parse_plan_trace(file.read_text(encoding="utf-8")))
        except TraceSyntaxError as exc:
            raise TraceSyntaxError(f"{file}: {exc.message}", exc.line, exc.column) from None
        except TraceError as exc:
            raise type(exc)(f"{file}: {exc}") from None
    return traces


def write_traces(traces: Iterable[PlanTrace], directory: str | Path, stem: str = "trace") -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, trace in enumerate(traces):
        path = directory / f"{stem}{i:04d}.trace"
        path.write_text(serialize_trace(trace), encoding="utf-8")
        paths.append(path)
    return paths
