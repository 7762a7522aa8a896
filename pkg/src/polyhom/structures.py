"""Finite relational structures, lazy powers, partial operation tables.

Elements are dense integers 0..n-1. Power elements are base-n encoded
integers (big-endian: the first coordinate is the most significant digit),
so lexicographic order of index vectors equals numeric order of codes.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from functools import cached_property

# Powers are never materialized above this many elements; consumers must
# go through the lazy handle beyond it.
MAX_MATERIALIZED_POWER = 1 << 20

# Power encodings must fit a signed 64-bit index.
MAX_POWER_CODE = 1 << 62


class StructureError(ValueError):
    """A structure, relation, or map failed validation."""

    def __init__(self, message, violations=()):
        super().__init__(message)
        self.violations = list(violations)


class EnvelopeError(RuntimeError):
    """A computation would exceed the declared feasibility envelope."""


def _check_tuple(t, arity, n, symbol, index, violations):
    if len(t) != arity:
        violations.append(
            (symbol, index, "arity mismatch: tuple %r has length %d, declared %d"
             % (t, len(t), arity)))
        return
    for entry in t:
        if not isinstance(entry, int) or not 0 <= entry < n:
            violations.append(
                (symbol, index, "entry %r out of range 0..%d in tuple %r"
                 % (entry, n - 1, t)))
            return


@dataclass(frozen=True)
class Relation:
    """One named relation: a duplicate-free set of arity-matching tuples."""

    name: str
    arity: int
    tuples: frozenset

    def __post_init__(self):
        object.__setattr__(self, "tuples",
                           frozenset(tuple(t) for t in self.tuples))

    @cached_property
    def sorted_tuples(self):
        return tuple(sorted(self.tuples))

    def __contains__(self, t):
        return tuple(t) in self.tuples


@dataclass(frozen=True)
class RelationSet:
    """An anonymous m-ary relation over a stated carrier size."""

    arity: int
    size: int
    tuples: frozenset

    def __post_init__(self):
        tuples = frozenset(tuple(t) for t in self.tuples)
        violations = []
        for i, t in enumerate(sorted(tuples)):
            _check_tuple(t, self.arity, self.size, "<relation-set>", i, violations)
        if violations:
            raise StructureError("invalid relation set", violations)
        object.__setattr__(self, "tuples", tuples)

    @cached_property
    def sorted_tuples(self):
        return tuple(sorted(self.tuples))

    def __contains__(self, t):
        return tuple(t) in self.tuples

    def __len__(self):
        return len(self.tuples)

    def to_json(self):
        return {"arity": self.arity, "size": self.size,
                "tuples": [list(t) for t in self.sorted_tuples]}


@dataclass(frozen=True)
class FiniteStructure:
    """A finite carrier 0..n-1 plus named finitary relations.

    Equality and hashing ignore the display name, so isomorphic copies with
    different labels still compare unequal while renamings compare equal.
    """

    size: int
    relations: tuple
    name: str = field(default="", compare=False)

    def __post_init__(self):
        rels = tuple(r if isinstance(r, Relation) else Relation(*r)
                     for r in self.relations)
        object.__setattr__(self, "relations", rels)
        violations = []
        if not isinstance(self.size, int) or self.size < 1:
            violations.append(("<structure>", -1, "carrier size must be >= 1"))
        seen = set()
        for rel in rels:
            if rel.name in seen:
                violations.append((rel.name, -1, "duplicate relation symbol"))
            seen.add(rel.name)
            if rel.arity < 1:
                violations.append((rel.name, -1, "arity must be >= 1"))
                continue
            for i, t in enumerate(sorted(rel.tuples)):
                _check_tuple(t, rel.arity, self.size, rel.name, i, violations)
        if violations:
            raise StructureError(
                "invalid structure %r: %s" % (self.name or "<anon>",
                                              "; ".join(v[2] for v in violations)),
                violations)

    @cached_property
    def relation_map(self):
        return {r.name: r for r in self.relations}

    @property
    def signature(self):
        return tuple((r.name, r.arity) for r in self.relations)

    @property
    def max_arity(self):
        return max((r.arity for r in self.relations), default=0)

    def relation(self, name):
        return self.relation_map[name]

    def with_name(self, name):
        return replace(self, name=name)

    @cached_property
    def adjacency(self):
        """Per binary relation, (row_masks, col_masks) bitsets; size <= 64 only.

        row_masks[a] has bit b set iff (a,b) is in the relation.
        """
        out = {}
        if self.size > 64:
            return out
        for rel in self.relations:
            if rel.arity != 2:
                continue
            rows = [0] * self.size
            cols = [0] * self.size
            for a, b in rel.tuples:
                rows[a] |= 1 << b
                cols[b] |= 1 << a
            out[rel.name] = (tuple(rows), tuple(cols))
        return out

    @cached_property
    def positional_index(self):
        """Per relation of arity >= 3: {(position, value): [tuples]}."""
        out = {}
        for rel in self.relations:
            if rel.arity < 3:
                continue
            index = {}
            for t in rel.sorted_tuples:
                for pos, val in enumerate(t):
                    index.setdefault((pos, val), []).append(t)
            out[rel.name] = index
        return out

    def elements(self):
        return range(self.size)


def validate_structure(raw):
    """Canonicalize a parsed structure description into a FiniteStructure.

    Accepts a FiniteStructure (revalidated) or a mapping with keys
    'name', 'size'/'n', 'relations' (list of (name, arity, tuples)).
    Raises StructureError carrying (symbol, tuple index, rule) violations.
    """
    if isinstance(raw, FiniteStructure):
        return FiniteStructure(raw.size, raw.relations, name=raw.name)
    size = raw.get("size", raw.get("n"))
    rels = tuple(Relation(name, arity, frozenset(map(tuple, tuples)))
                 for name, arity, tuples in raw["relations"])
    return FiniteStructure(size, rels, name=raw.get("name", ""))


@dataclass(frozen=True)
class PowerHandle:
    """A lazy view of base^exponent.

    Elements are codes 0..n^k-1; a tuple of power elements is in a relation
    iff every coordinate projection is in the base relation. Relation tuple
    sets are never materialized through this handle.
    """

    base: FiniteStructure
    exponent: int

    def __post_init__(self):
        if self.exponent < 1:
            raise StructureError("power exponent must be >= 1")
        if self.base.size ** self.exponent > MAX_POWER_CODE:
            raise EnvelopeError(
                "power %d^%d exceeds the 62-bit element index width"
                % (self.base.size, self.exponent))

    @property
    def size(self):
        return self.base.size ** self.exponent

    @property
    def name(self):
        return "%s^%d" % (self.base.name or "A", self.exponent)

    @property
    def signature(self):
        return self.base.signature

    def encode(self, vector):
        n = self.base.size
        if len(vector) != self.exponent:
            raise ValueError("vector length %d, exponent %d"
                             % (len(vector), self.exponent))
        code = 0
        for v in vector:
            if not 0 <= v < n:
                raise ValueError("coordinate %r out of range" % (v,))
            code = code * n + v
        return code

    def decode(self, code):
        n = self.base.size
        if not 0 <= code < self.size:
            raise ValueError("code %r out of range" % (code,))
        out = [0] * self.exponent
        for j in range(self.exponent - 1, -1, -1):
            out[j] = code % n
            code //= n
        return tuple(out)

    def elements(self):
        return range(self.size)

    def iter_vectors(self):
        return itertools.product(range(self.base.size), repeat=self.exponent)

    def contains(self, rel_name, codes):
        """Membership of a tuple of power elements in the named relation."""
        rel = self.base.relation_map[rel_name]
        vectors = [self.decode(c) for c in codes]
        for j in range(self.exponent):
            if tuple(v[j] for v in vectors) not in rel.tuples:
                return False
        return True

    def materialize(self, name=None, max_size=MAX_MATERIALIZED_POWER,
                    max_tuples=1 << 22):
        """Explicit product structure; guarded against blow-up."""
        if self.size > max_size:
            raise EnvelopeError(
                "refusing to materialize power with %d elements (cap %d)"
                % (self.size, max_size))
        n = self.base.size
        k = self.exponent
        rels = []
        for rel in self.base.relations:
            count = len(rel.tuples) ** k
            if count > max_tuples:
                raise EnvelopeError(
                    "relation %s would materialize %d tuples (cap %d)"
                    % (rel.name, count, max_tuples))
            tuples = set()
            for choice in itertools.product(rel.sorted_tuples, repeat=k):
                # choice[j] is the j-th coordinate's base tuple
                tuples.add(tuple(self.encode(tuple(choice[j][i] for j in range(k)))
                                 for i in range(rel.arity)))
            rels.append(Relation(rel.name, rel.arity, frozenset(tuples)))
        return FiniteStructure(self.size, tuple(rels),
                               name=name or self.name)


def power(structure, k):
    """Direct power A^k as a lazy handle."""
    return PowerHandle(structure, k)


def induced_substructure(structure, elements):
    """Substructure on a nonempty element subset, re-indexed 0..|S|-1.

    Returns (substructure, embedding) where embedding[i] is the original
    element of new index i (ascending order).
    """
    subset = sorted(set(elements))
    if not subset:
        raise StructureError("empty substructure carrier")
    if isinstance(structure, PowerHandle):
        for e in subset:
            if not 0 <= e < structure.size:
                raise StructureError("element %r outside carrier" % (e,))
        index = {e: i for i, e in enumerate(subset)}
        rels = []
        for rel_name, arity in structure.signature:
            if len(subset) ** arity > (1 << 22):
                raise EnvelopeError("substructure restriction too large")
            tuples = frozenset(
                tuple(index[c] for c in combo)
                for combo in itertools.product(subset, repeat=arity)
                if structure.contains(rel_name, combo))
            rels.append(Relation(rel_name, arity, tuples))
        sub = FiniteStructure(len(subset), tuple(rels),
                              name=structure.name + "|S")
        return sub, tuple(subset)
    for e in subset:
        if not 0 <= e < structure.size:
            raise StructureError("element %r outside carrier" % (e,))
    index = {e: i for i, e in enumerate(subset)}
    rels = []
    for rel in structure.relations:
        tuples = frozenset(tuple(index[c] for c in t)
                           for t in rel.tuples
                           if all(c in index for c in t))
        rels.append(Relation(rel.name, rel.arity, tuples))
    sub = FiniteStructure(len(subset), tuple(rels),
                          name=(structure.name + "|S") if structure.name else "")
    return sub, tuple(subset)


def _partition_relation(n, blocks):
    pairs = set()
    for block in blocks:
        for a in block:
            for b in block:
                pairs.add((a, b))
    return frozenset(pairs)


def _validate_partition(n, blocks, which, violations):
    seen = []
    for block in blocks:
        for e in block:
            if not isinstance(e, int) or not 0 <= e < n:
                violations.append((which, -1, "partition entry %r out of range" % (e,)))
                return
            seen.append(e)
    if sorted(seen) != list(range(n)):
        violations.append((which, -1,
                           "partition %r does not partition 0..%d" % (blocks, n - 1)))


def canonical_structure(family, n, data, name=""):
    """Canonical relational structure of a graph, poset, strict poset, or
    family of equivalence relations; family axioms verified with witnesses.

    data: graph - iterable of edges (unordered; symmetric closure applied);
    poset - the full reflexive order relation as pairs; strict_poset - the
    strict order pairs; eq_lattice - list of partitions (lists of blocks).
    """
    violations = []
    if family == "graph":
        tuples = set()
        for e in data:
            e = tuple(e)
            if len(e) != 2:
                violations.append(("edge", -1, "edge %r is not a pair" % (e,)))
                continue
            a, b = e
            if a == b:
                violations.append(("edge", -1, "loop at %r not allowed" % (a,)))
                continue
            tuples.add((a, b))
            tuples.add((b, a))
        if violations:
            raise StructureError("invalid graph", violations)
        return FiniteStructure(n, (Relation("edge", 2, frozenset(tuples)),),
                               name=name or "graph")
    if family == "poset":
        pairs = set(map(tuple, data))
        for a in range(n):
            if (a, a) not in pairs:
                violations.append(("le", -1, "not reflexive: missing (%d,%d)" % (a, a)))
        for a, b in sorted(pairs):
            if a != b and (b, a) in pairs:
                violations.append(("le", -1,
                                   "not antisymmetric: witness (%d,%d)" % (a, b)))
        for a, b in sorted(pairs):
            for c, d in sorted(pairs):
                if b == c and (a, d) not in pairs:
                    violations.append(
                        ("le", -1, "not transitive: (%d,%d),(%d,%d) but (%d,%d) missing"
                         % (a, b, c, d, a, d)))
        if violations:
            raise StructureError("invalid poset", violations)
        return FiniteStructure(n, (Relation("le", 2, frozenset(pairs)),),
                               name=name or "poset")
    if family in ("strict_poset", "strict"):
        pairs = set(map(tuple, data))
        for a, b in sorted(pairs):
            if a == b:
                violations.append(("lt", -1, "not asymmetric: witness (%d,%d)" % (a, a)))
            elif (b, a) in pairs:
                violations.append(("lt", -1, "not asymmetric: witness (%d,%d)" % (a, b)))
        for a, b in sorted(pairs):
            for c, d in sorted(pairs):
                if b == c and (a, d) not in pairs:
                    violations.append(
                        ("lt", -1, "not transitive: (%d,%d),(%d,%d) but (%d,%d) missing"
                         % (a, b, c, d, a, d)))
        if violations:
            raise StructureError("invalid strict poset", violations)
        return FiniteStructure(n, (Relation("lt", 2, frozenset(pairs)),),
                               name=name or "strict_poset")
    if family in ("eq_lattice", "eqlattice"):
        partitions = list(data)
        rels = []
        seen = set()
        for i, blocks in enumerate(partitions):
            _validate_partition(n, blocks, "th%d" % i, violations)
            if violations:
                raise StructureError("invalid equivalence family", violations)
            pairs = _partition_relation(n, blocks)
            if pairs in seen:
                violations.append(("th%d" % i, -1, "duplicate partition %r" % (blocks,)))
            seen.add(pairs)
            rels.append(Relation("th%d" % i, 2, pairs))
        if violations:
            raise StructureError("invalid equivalence family", violations)
        return FiniteStructure(n, tuple(rels), name=name or "eq_lattice")
    raise StructureError("unknown family %r" % (family,))


@dataclass(frozen=True)
class PartialOpMap:
    """A finite-domain k-ary partial function on the carrier 0..n-1.

    entries is a canonically sorted tuple of (args, value) pairs; functional
    by construction.
    """

    arity: int
    size: int
    entries: tuple

    def __post_init__(self):
        if self.arity < 1:
            raise StructureError("arity must be >= 1")
        normalized = {}
        items = (self.entries.items() if isinstance(self.entries, dict)
                 else self.entries)
        for args, value in items:
            args = tuple(args)
            if len(args) != self.arity:
                raise StructureError("key %r has wrong arity" % (args,))
            for a in args:
                if not 0 <= a < self.size:
                    raise StructureError("key entry %r out of range" % (a,))
            if not 0 <= value < self.size:
                raise StructureError("value %r out of range" % (value,))
            if normalized.get(args, value) != value:
                raise StructureError(
                    "conflicting values for key %r" % (args,))
            normalized[args] = value
        object.__setattr__(self, "entries", tuple(sorted(normalized.items())))

    @cached_property
    def as_dict(self):
        return dict(self.entries)

    @property
    def domain(self):
        return tuple(k for k, _ in self.entries)

    def __call__(self, args):
        return self.as_dict[tuple(args)]

    def get(self, args, default=None):
        return self.as_dict.get(tuple(args), default)

    def __contains__(self, args):
        return tuple(args) in self.as_dict

    def __len__(self):
        return len(self.entries)

    def with_entry(self, args, value):
        return PartialOpMap(self.arity, self.size, self.entries + ((tuple(args), value),))

    def restrict(self, keys):
        keys = set(map(tuple, keys))
        return PartialOpMap(self.arity, self.size,
                            tuple((k, v) for k, v in self.entries if k in keys))

    def to_json(self):
        return {"arity": self.arity, "size": self.size,
                "entries": [[list(k), v] for k, v in self.entries]}

    @staticmethod
    def from_json(obj):
        return PartialOpMap(obj["arity"], obj["size"],
                            tuple((tuple(k), v) for k, v in obj["entries"]))


def reduce_columns(f):
    """Remove duplicate columns of f's domain matrix.

    Rows are f's domain tuples in ascending order; column j is the vector of
    j-th coordinates down the rows. Returns (g, column_map) where g is the
    induced map on the distinct columns (first-occurrence order) and
    column_map[j] is the kept-column index that original coordinate j equals.
    f extends to a polymorphism iff g does: either extension is a minor of
    the other via column_map, and duplicate columns preserve row distinctness.
    """
    if not f.entries:
        raise StructureError("reduce_columns requires a nonempty map")
    rows = f.domain
    k = f.arity
    columns = [tuple(r[j] for r in rows) for j in range(k)]
    first_index = {}
    kept = []
    column_map = []
    for j, col in enumerate(columns):
        if col not in first_index:
            first_index[col] = len(kept)
            kept.append(j)
        column_map.append(first_index[col])
    entries = tuple((tuple(r[j] for j in kept), f(r)) for r in rows)
    g = PartialOpMap(len(kept), f.size, entries)
    return g, tuple(column_map)
