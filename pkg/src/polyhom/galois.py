"""The finite polymorphism / invariant-relation connection.

gamma_closure(A, tau) is the set of images of the tuple set tau under all
polymorphisms of matching arity, computed one candidate at a time through
the extendability engine; qf_type_closure(A, tau) is the outer bound given
by quantifier-free atomic constraints (relation atoms over row selections
plus equalities forced by repeated rows). A relation is pp-definable from
the structure exactly when it is gamma-closed, and the invariant relations
of the polymorphisms of bounded arity shrink onto the gamma-closed family
as the arity bound grows; cross_check_inv_pol verifies that convergence.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .structures import (EnvelopeError, PartialOpMap, RelationSet,
                         StructureError, power)
from .search import (ExtensionProblem, SearchLimits, default_limits,
                     enumerate_solutions)
from .homogeneity import FunctionTable, extendable

# exhaustive invariant enumeration: carrier of the relation space
MAX_INV_POINTS = 24
MAX_INV_MEMBERS = 1 << 16
MAX_QF_POINTS = 1 << 20


def enumerate_polymorphisms(structure, k, cap=1 << 15, limits=None):
    """All k-ary polymorphisms as FunctionTables, engine-enumerated in
    lexicographic table order. Returns (tables, complete)."""
    n = structure.size
    if n ** k > (1 << 20):
        raise EnvelopeError(
            "polymorphism space %d^%d exceeds the variable cap" % (n, k))
    source = power(structure, k) if k > 1 else structure
    sols, complete = enumerate_solutions(
        ExtensionProblem(source, structure), cap=cap,
        limits=limits or SearchLimits(node_budget=10_000_000))
    out = []
    for s in sols:
        table = [s[c] for c in range(n ** k)]
        out.append(FunctionTable(k, n, "table", table))
    return out, complete


def qf_type_closure(structure, tau):
    """Candidate images of tau permitted by quantifier-free atomic types.

    tau is a nonempty set of m-tuples. A tuple b qualifies when: for every
    relation and every coordinate selection under which all of tau lands in
    the relation, b lands in it too; and b_i = b_j whenever coordinates i
    and j agree across all of tau. Always a superset of the polymorphism
    image closure.
    """
    tau = sorted(set(map(tuple, tau)))
    if not tau:
        raise ValueError("tau must be nonempty")
    m = len(tau[0])
    if any(len(t) != m for t in tau):
        raise StructureError("tau tuples must share one arity")
    n = structure.size
    if n ** m > MAX_QF_POINTS:
        raise EnvelopeError("qf closure space %d^%d too large" % (n, m))
    forced_eq = []
    for i in range(m):
        for j in range(i + 1, m):
            if all(t[i] == t[j] for t in tau):
                forced_eq.append((i, j))
    constraints = []
    for rel in structure.relations:
        r = rel.arity
        if not rel.tuples:
            continue
        if m ** r > 1_000_000:
            raise EnvelopeError(
                "qf closure needs %d selections for relation %s"
                % (m ** r, rel.name))
        for sel in itertools.product(range(m), repeat=r):
            if all(tuple(t[i] for i in sel) in rel.tuples for t in tau):
                constraints.append((sel, rel.tuples))
    out = []
    for b in itertools.product(range(n), repeat=m):
        if any(b[i] != b[j] for i, j in forced_eq):
            continue
        if all(tuple(b[i] for i in sel) in tuples
               for sel, tuples in constraints):
            out.append(b)
    return out


def tau_extension_map(tau, b, size):
    """The partial map whose extendability decides b's membership in the
    image closure of tau: row i of the matrix with the tau tuples as
    columns maps to b_i."""
    tau = sorted(set(map(tuple, tau)))
    m = len(b)
    rows = [tuple(t[i] for t in tau) for i in range(m)]
    return PartialOpMap(len(tau), size, tuple(zip(rows, b)))


def gamma_closure(structure, tau, limits=None, known=()):
    """Images of tau under arity-|tau| polymorphisms, certified per
    candidate. Raises EnvelopeError when a candidate cannot be settled
    within the budget, rather than returning an uncertified set."""
    limits = limits or default_limits()
    tau = sorted(set(map(tuple, tau)))
    out = []
    for b in qf_type_closure(structure, tau):
        f = tau_extension_map(tau, b, structure.size)
        res = extendable(structure, f, limits, known=known)
        if res.exhausted:
            raise EnvelopeError(
                "image closure candidate %r exhausted the search budget"
                % (b,))
        if res.extendable:
            out.append(b)
    return out


@dataclass
class PpResult:
    definable: bool
    witness: tuple = None  # first closure tuple outside sigma
    closure: list = field(default_factory=list)
    detail: dict = field(default_factory=dict)

    def to_json(self):
        out = {"definable": self.definable,
               "closure": [list(t) for t in self.closure]}
        if self.witness is not None:
            out["witness"] = list(self.witness)
        if self.detail:
            out["detail"] = self.detail
        return out


def is_pp_definable(structure, sigma, limits=None, empty_is_definable=True):
    """Is sigma a primitive-positive-definable relation of the structure,
    i.e. closed under all polymorphisms of arity |sigma|?

    sigma is a RelationSet or an iterable of same-arity tuples. The empty
    relation is definable by convention (controlled by the flag). On a
    negative answer the witness is the first closure tuple outside sigma.
    """
    if isinstance(sigma, RelationSet):
        tuples = set(sigma.tuples)
    else:
        tuples = set(map(tuple, sigma))
    if not tuples:
        return PpResult(bool(empty_is_definable), None, [],
                        {"note": "empty relation handled by convention"})
    closure = gamma_closure(structure, tuples, limits)
    extra = [b for b in closure if b not in tuples]
    if extra:
        return PpResult(False, extra[0], closure)
    return PpResult(True, None, closure)


@dataclass
class RelationFamily:
    """A finite family of m-ary relations over a common carrier."""

    arity: int
    size: int
    members: tuple  # of frozensets of tuples

    def __post_init__(self):
        canon = sorted((frozenset(map(tuple, s)) for s in self.members),
                       key=lambda s: (len(s), sorted(s)))
        object.__setattr__(self, "members", tuple(canon))

    def __contains__(self, relation):
        return frozenset(map(tuple, relation)) in set(self.members)

    def __len__(self):
        return len(self.members)

    def __eq__(self, other):
        return (isinstance(other, RelationFamily)
                and self.arity == other.arity and self.size == other.size
                and set(self.members) == set(other.members))

    def member_lists(self):
        return [sorted(s) for s in self.members]

    def to_json(self):
        return {"arity": self.arity, "size": self.size,
                "members": [[list(t) for t in sorted(s)]
                            for s in self.members]}


def _closure_under_ops(points, index, ops, seed):
    """Smallest superset of seed closed under every operation, as a
    frozenset of point indices."""
    current = set(seed)
    added = True
    while added:
        added = False
        for ft in ops:
            k = ft.arity
            pool = [points[i] for i in sorted(current)]
            for combo in itertools.product(pool, repeat=k):
                # coordinatewise: coordinate i collects the i-th entries
                img = tuple(ft.apply(tuple(c[i] for c in combo))
                            for i in range(len(combo[0])))
                idx = index.get(img)
                if idx is None:
                    raise StructureError(
                        "operation leaves the point space; value %r" % (img,))
                if idx not in current:
                    current.add(idx)
                    added = True
    return frozenset(current)


def invariant_relations(ops, m, size=None, mode="exhaustive", seeds=(),
                        max_members=MAX_INV_MEMBERS):
    """Relations of arity m closed under every operation in ops.

    ops: FunctionTables over one carrier. mode 'exhaustive' enumerates the
    whole closed-set lattice (next-closure order); 'generated' returns the
    closures of the given seed tuple sets. The empty relation and the full
    relation are closed and always appear in exhaustive mode.
    """
    if not ops and size is None:
        raise ValueError("need ops or an explicit carrier size")
    n = size if size is not None else ops[0].size
    for ft in ops:
        if ft.size != n:
            raise StructureError("operations disagree on the carrier size")
    npoints = n ** m
    if mode == "exhaustive" and npoints > MAX_INV_POINTS:
        raise EnvelopeError(
            "exhaustive invariant enumeration over %d points (cap %d)"
            % (npoints, MAX_INV_POINTS))
    points = sorted(itertools.product(range(n), repeat=m))
    index = {p: i for i, p in enumerate(points)}

    def close(seed_idx):
        return _closure_under_ops(points, index, ops, seed_idx)

    if mode == "generated":
        members = []
        for seed in seeds:
            seed_idx = {index[tuple(t)] for t in seed}
            closed = close(seed_idx)
            members.append(frozenset(points[i] for i in closed))
        return RelationFamily(m, n, tuple(set(members)))
    if mode != "exhaustive":
        raise ValueError("mode must be 'exhaustive' or 'generated'")

    members = []
    current = close(frozenset())
    members.append(current)
    while True:
        if len(members) > max_members:
            raise EnvelopeError(
                "more than %d closed relations" % (max_members,))
        nxt = None
        for i in range(npoints - 1, -1, -1):
            if i in current:
                current = current - {i}
            else:
                candidate = close(current | {i})
                if not any(j < i for j in candidate - current - {i}):
                    nxt = candidate
                    break
        if nxt is None:
            break
        members.append(nxt)
        current = nxt
    rels = tuple(frozenset(points[i] for i in s) for s in members)
    return RelationFamily(m, n, rels)


@dataclass
class PolylocalResult:
    holds: bool
    separation: tuple = None  # (tau, b) with b in qf closure minus gamma
    checked: int = 0

    def to_json(self):
        out = {"holds": self.holds, "checked": self.checked}
        if self.separation is not None:
            tau, b = self.separation
            out["separation"] = {"tau": [list(t) for t in tau],
                                 "image": list(b)}
        return out


def check_finite_polylocal(structure, m, limits=None, subset_cap=1 << 16):
    """Does every qf-type-permitted image of every nonempty tuple set over
    A^m arise from a polymorphism? Fails with the first separating pair in
    sweep order (tuple-set size ascending, then lexicographic)."""
    limits = limits or default_limits()
    n = structure.size
    space = n ** m
    if (1 << space) - 1 > subset_cap:
        raise EnvelopeError(
            "polylocality sweep over %d tuple sets (cap %d)"
            % ((1 << space) - 1, subset_cap))
    all_tuples = sorted(itertools.product(range(n), repeat=m))
    checked = 0
    for size in range(1, space + 1):
        for tau in itertools.combinations(all_tuples, size):
            checked += 1
            qf = qf_type_closure(structure, tau)
            gamma = set(gamma_closure(structure, tau, limits))
            for b in qf:
                if b not in gamma:
                    return PolylocalResult(False, (list(tau), b), checked)
    return PolylocalResult(True, None, checked)


@dataclass
class CrossCheckResult:
    gamma_family: RelationFamily
    by_arity: dict  # k -> RelationFamily of Pol^{<=k}-invariant relations
    containment_ok: bool
    stabilization_arity: int = None
    pol_counts: dict = field(default_factory=dict)

    @property
    def equal_at_max(self):
        k = max(self.by_arity)
        return self.by_arity[k] == self.gamma_family

    def to_json(self):
        return {
            "gamma_family": self.gamma_family.to_json(),
            "by_arity": {str(k): fam.to_json()
                         for k, fam in self.by_arity.items()},
            "containment_ok": self.containment_ok,
            "stabilization_arity": self.stabilization_arity,
            "equal_at_max": self.equal_at_max,
            "pol_counts": {str(k): v for k, v in self.pol_counts.items()},
        }


def cross_check_inv_pol(structure, m, K, limits=None):
    """Compare the gamma-closed m-ary relations with the invariants of the
    polymorphisms of arity up to k, for k = 1..K.

    The gamma-closed family is always contained in every invariant family;
    they coincide once k reaches the stabilization arity. Containment
    failures raise, since they would mean one of the two computations is
    wrong.
    """
    limits = limits or default_limits()
    n = structure.size
    space = n ** m
    if space > 16:
        raise EnvelopeError(
            "gamma-closed family enumeration over %d points" % space)
    points = sorted(itertools.product(range(n), repeat=m))
    gamma_members = [frozenset()]
    for size in range(1, space + 1):
        for sigma in itertools.combinations(points, size):
            closure = gamma_closure(structure, sigma, limits)
            if set(closure) == set(sigma):
                gamma_members.append(frozenset(sigma))
    gamma_family = RelationFamily(m, n, tuple(gamma_members))

    by_arity = {}
    pol_counts = {}
    ops = []
    containment_ok = True
    stabilization = None
    for k in range(1, K + 1):
        tables, complete = enumerate_polymorphisms(structure, k)
        if not complete:
            raise EnvelopeError(
                "polymorphism enumeration at arity %d was cut off" % k)
        pol_counts[k] = len(tables)
        ops.extend(tables)
        fam = invariant_relations(ops, m, size=n)
        by_arity[k] = fam
        members = set(fam.members)
        if not set(gamma_family.members) <= members:
            containment_ok = False
            raise RuntimeError(
                "internal error: a gamma-closed relation is not invariant "
                "under Pol^<=%d" % k)
        if stabilization is None and members == set(gamma_family.members):
            stabilization = k
    return CrossCheckResult(gamma_family, by_arity, containment_ok,
                            stabilization, pol_counts)
