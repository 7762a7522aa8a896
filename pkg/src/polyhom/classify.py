"""Family-specific classification with constructive refutation witnesses.

Finite graphs are polymorphism-homogeneous exactly when they are edgeless
or a disjoint union of single edges; finite reflexive posets exactly when
they are antichains or lattices; finite strict posets exactly when the
order is empty; structures carrying a meet-complete sublattice of
equivalence relations exactly when that lattice is arithmetical (all pairs
permute and the lattice is distributive). Each NotPH classification is
backed, where the family admits a uniform construction, by an explicit
partial map that provably fails to extend, re-verified through the
extension engine. These classifiers serve as independent oracles for the
generic decision procedure and as its rescue path outside the certified
envelope.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .structures import (FiniteStructure, PartialOpMap, StructureError,
                         canonical_structure)
from .search import default_limits
from .homogeneity import extendable, is_k_ph, is_partial_polymorphism

ESCALATION_MAX_ARITY = 3
ESCALATION_MAX_DOMAIN = 4


@dataclass
class ClassReport:
    family: str
    verdict: str  # "PH" | "NotPH"
    reasons: dict = field(default_factory=dict)
    witness: PartialOpMap = None
    witness_arity: int = None
    notes: str = ""

    @property
    def is_ph(self):
        return self.verdict == "PH"

    def to_json(self):
        out = {"family": self.family, "verdict": self.verdict,
               "reasons": self.reasons}
        if self.witness is not None:
            out["witness"] = self.witness.to_json()
            out["witness_arity"] = self.witness_arity
        if self.notes:
            out["notes"] = self.notes
        return out


def _single_binary(structure):
    if len(structure.relations) != 1 or structure.relations[0].arity != 2:
        return None
    return structure.relations[0]


def _is_equivalence(tuples, n):
    pairs = set(tuples)
    if any((i, i) not in pairs for i in range(n)):
        return False
    if any((b, a) not in pairs for a, b in pairs):
        return False
    return all((a, c) in pairs
               for a, b in pairs for b2, c in pairs if b == b2)


def recognize_family(structure):
    """Name the classification family the structure belongs to, if any:
    graph, poset, strict_poset, or eq_lattice. Returns None otherwise."""
    n = structure.size
    rel = _single_binary(structure)
    if rel is not None:
        pairs = set(rel.tuples)
        reflexive = all((i, i) in pairs for i in range(n))
        irreflexive = all((i, i) not in pairs for i in range(n))
        symmetric = all((b, a) in pairs for a, b in pairs)
        transitive = all((a, c) in pairs
                         for a, b in pairs for b2, c in pairs if b == b2)
        antisym = all(not (a != b and (b, a) in pairs) for a, b in pairs)
        if irreflexive and symmetric:
            return "graph"
        if reflexive and antisym and transitive:
            return "poset"
        if irreflexive and transitive:
            return "strict_poset"
        if reflexive and symmetric and transitive:
            return "eq_lattice"
        return None
    if structure.relations and all(
            r.arity == 2 and _is_equivalence(r.tuples, n)
            for r in structure.relations):
        return "eq_lattice"
    return None


# ---------------------------------------------------------------- graphs

def _graph_neighbors(structure):
    rel = _single_binary(structure)
    if rel is None:
        raise StructureError("a graph carries exactly one binary relation")
    n = structure.size
    pairs = set(rel.tuples)
    for a, b in pairs:
        if a == b:
            raise StructureError("graphs are irreflexive; loop at %d" % a)
        if (b, a) not in pairs:
            raise StructureError("graphs are symmetric; %r one-way" % ((a, b),))
    nbrs = [set() for _ in range(n)]
    for a, b in pairs:
        nbrs[a].add(b)
    return nbrs


def _components(nbrs):
    n = len(nbrs)
    seen = [False] * n
    comps = []
    for s in range(n):
        if seen[s]:
            continue
        stack, comp = [s], []
        seen[s] = True
        while stack:
            u = stack.pop()
            comp.append(u)
            for v in nbrs[u]:
                if not seen[v]:
                    seen[v] = True
                    stack.append(v)
        comps.append(sorted(comp))
    return comps


def graph_property_star(structure):
    """Does every path a - b - c collapse (a = c)? Equivalent to every
    vertex having at most one neighbor, i.e. components are single
    vertices or single edges."""
    nbrs = _graph_neighbors(structure)
    return all(len(s) <= 1 for s in nbrs)


def graph_star_witness(structure, limits=None):
    """For a graph with some vertex b adjacent to two distinct vertices,
    build a non-extendable partial polymorphism.

    Pick the first minimum-size vertex set B = {b_1 < ... < b_k} with no
    common neighbor. The map of arity k+1 sends, for each i, the tuple
    with c at position i and a elsewhere to b_i (a, c being b's first two
    neighbors). Position 0 always holds a, so no relation constraint ever
    binds the domain rows and the map is vacuously a partial polymorphism.
    Any total extension g forces g(b,...,b) adjacent to every b_i, a
    common neighbor that does not exist. Returns (arity, map), or None
    when every vertex has at most one neighbor.
    """
    limits = limits or default_limits()
    nbrs = _graph_neighbors(structure)
    n = structure.size
    b = next((v for v in range(n) if len(nbrs[v]) >= 2), None)
    if b is None:
        return None
    a, c = sorted(nbrs[b])[:2]
    B = None
    for size in range(1, n + 1):
        for combo in itertools.combinations(range(n), size):
            common = set(range(n))
            for v in combo:
                common &= nbrs[v]
            if not common:
                B = combo
                break
        if B is not None:
            break
    k = len(B)
    entries = {}
    for i in range(1, k + 1):
        row = tuple(c if j == i else a for j in range(k + 1))
        entries[row] = B[i - 1]
    f = PartialOpMap(k + 1, n, entries)
    res = extendable(structure, f, limits)
    if not res.not_extendable:
        raise RuntimeError(
            "internal error: star witness unexpectedly %s" % res.status)
    return (k + 1, f)


def _isolated_vertex_witness(structure, limits):
    """With an isolated vertex u and an edge (x,y) present, the unary map
    x -> u cannot extend: the image of y would need a neighbor of u."""
    nbrs = _graph_neighbors(structure)
    u = next((v for v, s in enumerate(nbrs) if not s), None)
    x = next((v for v, s in enumerate(nbrs) if s), None)
    if u is None or x is None:
        return None
    f = PartialOpMap(1, structure.size, {(x,): u})
    res = extendable(structure, f, limits)
    if not res.not_extendable:
        raise RuntimeError(
            "internal error: isolated-vertex witness unexpectedly %s"
            % res.status)
    return (1, f)


def classify_graph(structure, limits=None, with_witness=True):
    """PH exactly when the edge set is empty or every connected component
    is a single edge."""
    limits = limits or default_limits()
    nbrs = _graph_neighbors(structure)
    comps = _components(nbrs)
    edgeless = all(not s for s in nbrs)
    k2_union = bool(nbrs) and all(
        len(c) == 2 and c[1] in nbrs[c[0]] for c in comps)
    star = all(len(s) <= 1 for s in nbrs)
    reasons = {
        "is_edgeless": edgeless,
        "is_k2_union": k2_union,
        "property_star": star,
        "components": comps,
    }
    if edgeless or k2_union:
        return ClassReport("graph", "PH", reasons)
    witness = arity = None
    if with_witness:
        got = graph_star_witness(structure, limits)
        if got is None:
            got = _isolated_vertex_witness(structure, limits)
        if got is not None:
            arity, witness = got
    return ClassReport("graph", "NotPH", reasons, witness, arity)


# ---------------------------------------------------------------- posets

def _poset_le(structure):
    rel = _single_binary(structure)
    if rel is None:
        raise StructureError("a poset carries exactly one binary relation")
    n = structure.size
    le = set(rel.tuples)
    for i in range(n):
        if (i, i) not in le:
            raise StructureError("poset not reflexive at %d" % i)
    for a, b in le:
        if a != b and (b, a) in le:
            raise StructureError("poset not antisymmetric on %r" % ((a, b),))
    for a, b in le:
        for b2, c in le:
            if b == b2 and (a, c) not in le:
                raise StructureError(
                    "poset not transitive on %r" % ((a, b, c),))
    return le


def _bounds(le, n):
    def lub(s):
        uppers = [u for u in range(n) if all((x, u) in le for x in s)]
        least = [u for u in uppers if all((u, w) in le for w in uppers)]
        return least[0] if least else None

    def glb(s):
        lowers = [u for u in range(n) if all((u, x) in le for x in s)]
        greatest = [u for u in lowers if all((w, u) in le for w in lowers)]
        return greatest[0] if greatest else None

    return lub, glb


def poset_is_lattice(structure):
    le = _poset_le(structure)
    n = structure.size
    if n == 0:
        return True
    lub, glb = _bounds(le, n)
    return all(lub((x, y)) is not None and glb((x, y)) is not None
               for x in range(n) for y in range(x + 1, n))


def poset_pair_witness(structure, limits=None):
    """An incomparable pair with a common upper bound mapped to one with
    no common upper bound cannot extend (the image of the bound would
    dominate both targets); dually with lower bounds. Returns (1, map) or
    None when neither configuration exists."""
    limits = limits or default_limits()
    le = _poset_le(structure)
    n = structure.size
    incomp = [(x, y) for x in range(n) for y in range(n)
              if x != y and (x, y) not in le and (y, x) not in le]

    def uppers(x, y):
        return [u for u in range(n) if (x, u) in le and (y, u) in le]

    def lowers(x, y):
        return [u for u in range(n) if (u, x) in le and (u, y) in le]

    for pick, name in ((uppers, "upper"), (lowers, "lower")):
        src = next((p for p in incomp if pick(*p)), None)
        dst = next((p for p in incomp if not pick(*p)), None)
        if src is None or dst is None:
            continue
        f = PartialOpMap(1, n, {(src[0],): dst[0], (src[1],): dst[1]})
        res = extendable(structure, f, limits)
        if not res.not_extendable:
            raise RuntimeError(
                "internal error: %s-bound pair witness unexpectedly %s"
                % (name, res.status))
        return (1, f)
    return None


def classify_poset(structure, limits=None, with_witness=True):
    """PH exactly when the order is an antichain or a lattice."""
    limits = limits or default_limits()
    le = _poset_le(structure)
    n = structure.size
    antichain = all(a == b for a, b in le)
    lattice = poset_is_lattice(structure)
    lub, glb = _bounds(le, n)
    x5_dense = True
    for a1 in range(n):
        for a2 in range(n):
            for a3 in range(n):
                for a4 in range(n):
                    if not ((a1, a3) in le and (a1, a4) in le
                            and (a2, a3) in le and (a2, a4) in le):
                        continue
                    if not any((a1, c) in le and (a2, c) in le
                               and (c, a3) in le and (c, a4) in le
                               for c in range(n)):
                        x5_dense = False
    bounded = (n == 0 or (
        any(all((m, x) in le for x in range(n)) for m in range(n))
        and any(all((x, m) in le for x in range(n)) for m in range(n))))
    reasons = {
        "is_antichain": antichain,
        "is_lattice": lattice,
        "is_x5_dense": x5_dense,
        "locally_bounded": bounded,
    }
    if antichain or lattice:
        return ClassReport("poset", "PH", reasons)
    witness = arity = None
    if with_witness:
        got = poset_pair_witness(structure, limits)
        if got is None:
            got = _escalating_counterexample(
                structure, ESCALATION_MAX_ARITY, ESCALATION_MAX_DOMAIN,
                limits)
        if got is not None:
            arity, witness = got
    return ClassReport("poset", "NotPH", reasons, witness, arity)


def realizer(structure):
    """Linear extensions of the poset whose intersection is exactly its
    order: two per incomparable pair (one per orientation), deduplicated,
    then greedily thinned. A chain realizes itself."""
    le = _poset_le(structure)
    n = structure.size
    incomp = [(x, y) for x in range(n) for y in range(x + 1, n)
              if (x, y) not in le and (y, x) not in le]

    def topo(extra):
        edges = {(a, b) for a, b in le if a != b} | set(extra)
        indeg = [0] * n
        for a, b in edges:
            indeg[b] += 1
        out = []
        avail = sorted(v for v in range(n) if indeg[v] == 0)
        while avail:
            v = avail.pop(0)
            out.append(v)
            for a, b in sorted(edges):
                if a == v:
                    indeg[b] -= 1
                    if indeg[b] == 0:
                        avail.append(b)
            avail.sort()
        if len(out) != n:
            raise StructureError("cycle while extending the order")
        return tuple(out)

    if not incomp:
        return [topo(())]
    exts = []
    for x, y in incomp:
        for forced in (((x, y),), ((y, x),)):
            t = topo(forced)
            if t not in exts:
                exts.append(t)

    def order_of(ext):
        pos = {v: i for i, v in enumerate(ext)}
        return {(a, b) for a in range(n) for b in range(n)
                if pos[a] <= pos[b]}

    def meets(subset):
        acc = None
        for t in subset:
            o = order_of(t)
            acc = o if acc is None else acc & o
        return acc == le

    if not meets(exts):
        raise RuntimeError("internal error: extensions fail to realize "
                           "the order")
    kept = list(exts)
    for t in list(exts):
        trial = [u for u in kept if u != t]
        if trial and meets(trial):
            kept = trial
    return kept


# ---------------------------------------------------------- strict posets

def _strict_lt(structure):
    rel = _single_binary(structure)
    if rel is None:
        raise StructureError(
            "a strict poset carries exactly one binary relation")
    lt = set(rel.tuples)
    for a, b in lt:
        if a == b:
            raise StructureError("strict order has a loop at %d" % a)
        if (b, a) in lt:
            raise StructureError("strict order not asymmetric on %r"
                                 % ((a, b),))
    for a, b in lt:
        for b2, c in lt:
            if b == b2 and (a, c) not in lt:
                raise StructureError(
                    "strict order not transitive on %r" % ((a, b, c),))
    return lt


def strict_poset_witness(structure, limits=None):
    """Map some b to a minimal element a lying strictly below b; an
    extension would need the image of a strictly below a itself."""
    limits = limits or default_limits()
    lt = _strict_lt(structure)
    n = structure.size
    minimal = [v for v in range(n) if not any((u, v) in lt for u in range(n))]
    for a in minimal:
        above = sorted(b for b in range(n) if (a, b) in lt)
        if above:
            f = PartialOpMap(1, n, {(above[0],): a})
            res = extendable(structure, f, limits)
            if not res.not_extendable:
                raise RuntimeError(
                    "internal error: strict witness unexpectedly %s"
                    % res.status)
            return (1, f)
    return None


def classify_strict_poset(structure, limits=None, with_witness=True):
    """PH exactly when the strict order is empty: any nonempty finite
    strict order has a minimal element a below some b, and mapping b to a
    is a partial polymorphism with no extension."""
    limits = limits or default_limits()
    lt = _strict_lt(structure)
    reasons = {"is_empty_order": not lt,
               "finite_collapse": bool(lt)}
    if not lt:
        return ClassReport("strict_poset", "PH", reasons)
    witness = arity = None
    if with_witness:
        got = strict_poset_witness(structure, limits)
        if got is not None:
            arity, witness = got
    return ClassReport("strict_poset", "NotPH", reasons, witness, arity)


# -------------------------------------------- equivalence-relation lattices

def partitions_of(n):
    """All set partitions of 0..n-1, canonical form: blocks sorted, block
    list sorted by least element; enumerated in restricted-growth order."""
    out = []
    for rgs in itertools.product(*[range(i + 1) for i in range(n)]):
        if any(rgs[i] > max(rgs[:i], default=-1) + 1 for i in range(n)):
            continue
        blocks = {}
        for x, b in enumerate(rgs):
            blocks.setdefault(b, []).append(x)
        out.append(tuple(tuple(sorted(b))
                         for b in sorted(blocks.values())))
    return out


def partition_pairs(part):
    pairs = set()
    for block in part:
        for a in block:
            for b in block:
                pairs.add((a, b))
    return pairs


def pairs_to_partition(pairs, n):
    seen = set()
    blocks = []
    for x in range(n):
        if x in seen:
            continue
        block = sorted({b for a, b in pairs if a == x} | {x})
        seen.update(block)
        blocks.append(tuple(block))
    return tuple(blocks)


def partition_meet(p, q):
    blocks = []
    for bp in p:
        for bq in q:
            common = sorted(set(bp) & set(bq))
            if common:
                blocks.append(tuple(common))
    return tuple(sorted(blocks, key=lambda b: b[0]))


def partition_join(p, q, n):
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    for part in (p, q):
        for block in part:
            for x in block[1:]:
                union(block[0], x)
    blocks = {}
    for x in range(n):
        blocks.setdefault(find(x), []).append(x)
    return tuple(tuple(sorted(b)) for b in sorted(blocks.values()))


def enumerate_meet_complete_sublattices(n, cap=100_000):
    """All nonempty families of equivalence relations on 0..n-1 closed
    under pairwise meet (common refinement) and join (transitive closure
    of the union), in canonical subset order."""
    parts = partitions_of(n)
    if len(parts) > 20:
        raise StructureError(
            "partition lattice too large for exhaustive enumeration")
    index = {p: i for i, p in enumerate(parts)}
    meets = {}
    joins = {}
    for i, p in enumerate(parts):
        for j, q in enumerate(parts):
            meets[i, j] = index[partition_meet(p, q)]
            joins[i, j] = index[partition_join(p, q, n)]
    out = []
    for size in range(1, len(parts) + 1):
        for combo in itertools.combinations(range(len(parts)), size):
            chosen = set(combo)
            if all(meets[i, j] in chosen and joins[i, j] in chosen
                   for i in combo for j in combo):
                out.append(tuple(parts[i] for i in combo))
                if len(out) > cap:
                    raise StructureError(
                        "more than %d closed families" % cap)
    return out


def _compose_pairs(p_pairs, q_pairs):
    by_first = {}
    for a, b in q_pairs:
        by_first.setdefault(a, set()).add(b)
    return {(a, c) for a, b in p_pairs for c in by_first.get(b, ())}


def is_arithmetical(family, n=None):
    """True when all member pairs permute under relational composition and
    the family is distributive as a lattice of partitions. Returns
    (flag, witness) with the violating pair or triple."""
    family = [tuple(tuple(b) for b in p) for p in family]
    if n is None:
        n = max((b[-1] for p in family for b in p), default=-1) + 1
    pairs = {p: partition_pairs(p) for p in family}
    for p, q in itertools.combinations(family, 2):
        if _compose_pairs(pairs[p], pairs[q]) != _compose_pairs(
                pairs[q], pairs[p]):
            return False, {"kind": "permutability", "pair": [p, q]}
    for t1, t2, t3 in itertools.product(family, repeat=3):
        lhs = partition_meet(t1, partition_join(t2, t3, n))
        rhs = partition_join(partition_meet(t1, t2),
                             partition_meet(t1, t3), n)
        if lhs != rhs:
            return False, {"kind": "distributivity", "triple": [t1, t2, t3]}
    return True, None


def structure_partitions(structure):
    """Read each relation back as a partition; rejects non-equivalences."""
    n = structure.size
    out = []
    for rel in structure.relations:
        if rel.arity != 2 or not _is_equivalence(rel.tuples, n):
            raise StructureError(
                "relation %s is not an equivalence" % rel.name)
        out.append(pairs_to_partition(set(rel.tuples), n))
    return out


def classify_eq_lattice(structure, limits=None):
    """For a structure whose relations form a meet-complete sublattice of
    the partition lattice: PH exactly when the family is arithmetical."""
    limits = limits or default_limits()
    n = structure.size
    family = structure_partitions(structure)
    fam_set = set(family)
    closed = all(
        partition_meet(p, q) in fam_set and partition_join(p, q, n) in fam_set
        for p in family for q in family)
    if not closed:
        raise StructureError(
            "relation family is not closed under meet and join")
    arith, witness = is_arithmetical(family, n)
    reasons = {
        "is_meet_complete": True,
        "is_arithmetical": arith,
    }
    if witness is not None:
        reasons["arithmetical_witness"] = witness
    verdict = "PH" if arith else "NotPH"
    return ClassReport("eq_lattice", verdict, reasons)


def _escalating_counterexample(structure, max_arity, max_domain, limits):
    """Scan partial maps in canonical order (arity, domain size, domain,
    values) for a partial polymorphism with an unsatisfiable extension
    problem. Returns (arity, map) or None."""
    n = structure.size
    for k in range(1, max_arity + 1):
        points = sorted(itertools.product(range(n), repeat=k))
        for dsize in range(1, max_domain + 1):
            for domain in itertools.combinations(points, dsize):
                for values in itertools.product(range(n), repeat=dsize):
                    f = PartialOpMap(k, n, tuple(zip(domain, values)))
                    ok, _ = is_partial_polymorphism(structure, f)
                    if not ok:
                        continue
                    res = extendable(structure, f, limits)
                    if res.not_extendable:
                        return (k, f)
    return None


def escalating_counterexample(structure, max_arity=ESCALATION_MAX_ARITY,
                              max_domain=ESCALATION_MAX_DOMAIN, limits=None):
    return _escalating_counterexample(
        structure, max_arity, max_domain, limits or default_limits())


def kaarli_cross_check(n, limits=None, max_arity=ESCALATION_MAX_ARITY):
    """Compare is_arithmetical with polymorphism-homogeneity over every
    meet-complete sublattice of the partition lattice on n points.

    For n <= 3 the comparison runs the full decision procedure; at n = 4
    non-arithmetical families get an escalating counterexample search and
    arithmetical ones are recorded as unverified (the decision procedure's
    certified envelope stops at n = 3).
    """
    from .homogeneity import decide_ph
    limits = limits or default_limits()
    families = enumerate_meet_complete_sublattices(n)
    rows = []
    agreements = 0
    refutation_arities = {}
    inconclusive = []
    for idx, fam in enumerate(families):
        arith, wit = is_arithmetical(fam, n)
        A = canonical_structure("eq_lattice", n, [list(map(list, p))
                                                  for p in fam],
                                name="eq%d_%d" % (n, idx))
        row = {"family": [list(map(list, p)) for p in fam],
               "arithmetical": arith}
        if n <= 3:
            verdict = decide_ph(A, limits)
            row["verdict"] = verdict.status
            row["agrees"] = (verdict.status == "PH") == arith \
                and verdict.status != "Inconclusive"
            if verdict.status == "Inconclusive":
                inconclusive.append(idx)
            elif row["agrees"]:
                agreements += 1
        elif not arith:
            got = _escalating_counterexample(
                A, max_arity, ESCALATION_MAX_DOMAIN, limits)
            if got is None:
                row["verdict"] = "Inconclusive"
                row["agrees"] = False
                inconclusive.append(idx)
            else:
                k, f = got
                row["verdict"] = "NotPH"
                row["agrees"] = True
                row["refutation_arity"] = k
                row["witness"] = f.to_json()
                refutation_arities[idx] = k
                agreements += 1
        else:
            row["verdict"] = "unverified"
            inconclusive.append(idx)
        rows.append(row)
    return {
        "n": n,
        "families": len(families),
        "rows": rows,
        "agreements": agreements,
        "refutation_arities": refutation_arities,
        "inconclusive": inconclusive,
    }


# ------------------------------------------------------------------ rescue

def classify_structure(structure, limits=None):
    """Dispatch to the recognized family's classifier; None if the
    structure fits no classified family."""
    family = recognize_family(structure)
    if family == "graph":
        return classify_graph(structure, limits)
    if family == "poset":
        return classify_poset(structure, limits)
    if family == "strict_poset":
        return classify_strict_poset(structure, limits)
    if family == "eq_lattice":
        return classify_eq_lattice(structure, limits)
    return None


def rescue_witness(structure, limits=None):
    """Classification assist for the generic decision procedure when its
    own sweep is out of budget: returns (family, claims_ph, witness_map,
    reason) or None. A NotPH witness map still has to be re-verified by
    the caller; a PH claim is advisory only and never yields a verdict.
    """
    try:
        report = classify_structure(structure, limits)
    except StructureError:
        return None
    if report is None:
        return None
    reason_bits = ["%s=%s" % (k, v) for k, v in sorted(report.reasons.items())
                   if isinstance(v, bool)]
    reason = "%s classification: %s" % (report.family, ", ".join(reason_bits))
    return (report.family, report.is_ph, report.witness, reason)
