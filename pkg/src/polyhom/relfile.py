"""Plain-text format for finite relational structures.

Grammar (UTF-8, # starts a comment, blank lines ignored):

    structure <name> <n>
    relation <name> <arity>
    <e1> <e2> ... <earity>      one tuple per line, whitespace separated
    relation <name> <arity>
    ...

Canonical serialization lists relations in declaration order and tuples in
ascending lexicographic order, so equal structures serialize byte-identically.
"""

from __future__ import annotations

from .structures import FiniteStructure, Relation, StructureError


class RelParseError(ValueError):
    """Syntax error in a .rel file; carries the 1-based line number."""

    def __init__(self, message, line_no):
        super().__init__("line %d: %s" % (line_no, message))
        self.line_no = line_no


def _logical_lines(text):
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield i, line


def parse_structure(text, name_hint=""):
    """Parse .rel text into a validated FiniteStructure."""
    header = None
    relations = []
    current = None  # [name, arity, tuples, line_no]
    for line_no, line in _logical_lines(text):
        tokens = line.split()
        if tokens[0] == "structure":
            if header is not None:
                raise RelParseError("duplicate structure header", line_no)
            if current is not None or relations:
                raise RelParseError("structure header must come first", line_no)
            if len(tokens) != 3:
                raise RelParseError("expected: structure <name> <n>", line_no)
            try:
                n = int(tokens[2])
            except ValueError:
                raise RelParseError("carrier size %r is not an integer"
                                    % (tokens[2],), line_no)
            header = (tokens[1], n)
        elif tokens[0] == "relation":
            if header is None:
                raise RelParseError("relation before structure header", line_no)
            if len(tokens) != 3:
                raise RelParseError("expected: relation <name> <arity>", line_no)
            try:
                arity = int(tokens[2])
            except ValueError:
                raise RelParseError("arity %r is not an integer"
                                    % (tokens[2],), line_no)
            if current is not None:
                relations.append(current)
            current = [tokens[1], arity, [], line_no]
        else:
            if current is None:
                raise RelParseError("tuple line before any relation header", line_no)
            try:
                t = tuple(int(tok) for tok in tokens)
            except ValueError:
                raise RelParseError("non-integer token in tuple %r" % (line,), line_no)
            if len(t) != current[1]:
                raise RelParseError(
                    "tuple %r has %d entries, relation %s declares arity %d"
                    % (line, len(t), current[0], current[1]), line_no)
            current[2].append(t)
    if header is None:
        raise RelParseError("missing structure header", 1)
    if current is not None:
        relations.append(current)
    rels = tuple(Relation(name, arity, frozenset(tuples))
                 for name, arity, tuples, _ in relations)
    name, n = header
    return FiniteStructure(n, rels, name=name or name_hint)


def load_structure(path):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    return parse_structure(text, name_hint=str(path))


def parse_structures(text):
    """Parse a stream of concatenated .rel structures, split at each
    'structure' header line."""
    blocks = []
    current = []
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line.startswith("structure ") or line == "structure":
            if current:
                blocks.append("\n".join(current))
            current = [raw]
        elif current or line:
            current.append(raw)
    if current:
        blocks.append("\n".join(current))
    if not blocks:
        raise RelParseError("missing structure header", 1)
    return [parse_structure(b) for b in blocks]


def serialize_structure(structure):
    lines = ["structure %s %d" % (structure.name or "anon", structure.size)]
    for rel in structure.relations:
        lines.append("relation %s %d" % (rel.name, rel.arity))
        for t in rel.sorted_tuples:
            lines.append(" ".join(str(e) for e in t))
    return "\n".join(lines) + "\n"


def save_structure(structure, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_structure(structure))


def parse_tuples(text):
    """Parse a bare tuple list: lines of integers, all of one arity.

    An optional leading 'tuples <arity>' line pins the arity (needed to
    express the empty list). Returns (arity, tuples); arity is None only
    for an empty list with no header.
    """
    arity = None
    tuples = []
    for line_no, line in _logical_lines(text):
        tokens = line.split()
        if tokens[0] == "tuples":
            if arity is not None or tuples:
                raise RelParseError("tuples header must come first", line_no)
            if len(tokens) != 2:
                raise RelParseError("expected: tuples <arity>", line_no)
            try:
                arity = int(tokens[1])
            except ValueError:
                raise RelParseError("arity %r is not an integer"
                                    % (tokens[1],), line_no)
            continue
        try:
            t = tuple(int(tok) for tok in tokens)
        except ValueError:
            raise RelParseError("non-integer token in tuple %r" % (line,), line_no)
        if arity is None:
            arity = len(t)
        elif len(t) != arity:
            raise RelParseError("tuple %r has %d entries, expected %d"
                                % (line, len(t), arity), line_no)
        tuples.append(t)
    return arity, tuples


def load_tuples(path):
    with open(path, encoding="utf-8") as fh:
        return parse_tuples(fh.read())


def serialize_tuples(arity, tuples):
    lines = ["tuples %d" % arity]
    for t in sorted(set(map(tuple, tuples))):
        lines.append(" ".join(str(e) for e in t))
    return "\n".join(lines) + "\n"
