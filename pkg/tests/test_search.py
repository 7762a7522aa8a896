import itertools

import pytest

from polyhom.structures import (canonical_structure, power, FiniteStructure,
                                Relation, StructureError)
from polyhom.search import (ExtensionProblem, SearchLimits, solve,
                            enumerate_solutions, check_is_homomorphism,
                            default_limits, InconsistentPinsError)

from oracles import oracle_homomorphisms


def chain2():
    return canonical_structure("poset", 2, [(0, 0), (0, 1), (1, 1)],
                               name="chain2")


def chain3():
    le = [(i, j) for i in range(3) for j in range(3) if i <= j]
    return canonical_structure("poset", 3, le, name="chain3")


def k2():
    return canonical_structure("graph", 2, [(0, 1)], name="k2")


def path3():
    return canonical_structure("graph", 3, [(0, 1), (1, 2)], name="p3")


def _rename(structure, names):
    rels = tuple(Relation(names[r.name], r.arity, r.tuples)
                 for r in structure.relations)
    return FiniteStructure(structure.size, rels, name=structure.name)


def _problem_catalog():
    """Deterministic source <= 6, target <= 3 problem set, mixing Sat and
    Unsat instances and pins."""
    cases = []
    c5_le = [(i, j) for i in range(5) for j in range(5) if i <= j]
    chain5 = canonical_structure("poset", 5, c5_le, name="chain5")
    cyc5 = canonical_structure("graph", 5,
                               [(i, (i + 1) % 5) for i in range(5)])
    cyc6 = canonical_structure("graph", 6,
                               [(i, (i + 1) % 6) for i in range(6)])
    p3t = canonical_structure("graph", 3, [(0, 1), (1, 2)])
    tri = canonical_structure("graph", 3, [(0, 1), (1, 2), (0, 2)])
    bow = canonical_structure(
        "poset", 4,
        [(i, i) for i in range(4)] + [(0, 2), (0, 3), (1, 2), (1, 3)])
    cases.append(ExtensionProblem(chain5, chain3()))
    cases.append(ExtensionProblem(chain5, chain3(), pins={0: 1, 4: 1}))
    cases.append(ExtensionProblem(chain5, chain2(), pins={2: 1}))
    cases.append(ExtensionProblem(cyc5, _rename(tri, {"edge": "edge"})))
    cases.append(ExtensionProblem(cyc5, p3t))
    cases.append(ExtensionProblem(cyc6, p3t))
    cases.append(ExtensionProblem(cyc6, p3t, pins={0: 0}))
    cases.append(ExtensionProblem(bow, _rename(chain3(), {"le": "le"})))
    cases.append(ExtensionProblem(bow, chain2()))
    strict4 = canonical_structure(
        "strict_poset", 4, [(0, 1), (0, 2), (0, 3), (1, 3), (2, 3)])
    strict3 = canonical_structure("strict_poset", 3,
                                  [(0, 1), (1, 2), (0, 2)])
    cases.append(ExtensionProblem(strict4, strict3))
    cases.append(ExtensionProblem(strict4, strict3, pins={1: 0}))
    return cases


def test_solve_agrees_with_exhaustive_enumeration():
    limits = default_limits()
    for prob in _problem_catalog():
        brute = oracle_homomorphisms(prob.source, prob.target, prob.pins)
        out = solve(prob, limits)
        if brute:
            assert out.found, (prob, out.status)
            image = tuple(out.assignment[i] for i in range(prob.source.size))
            assert image in brute
        else:
            assert out.unsat, (prob, out.status)


def test_enumerate_matches_oracle_exactly():
    limits = default_limits()
    for prob in _problem_catalog():
        brute = sorted(oracle_homomorphisms(prob.source, prob.target,
                                            prob.pins))
        sols, complete = enumerate_solutions(prob, cap=10_000, limits=limits)
        assert complete
        got = sorted(tuple(s[i] for i in range(prob.source.size))
                     for s in sols)
        assert got == brute


def test_found_maps_are_verified_homomorphisms():
    limits = default_limits()
    for prob in _problem_catalog():
        out = solve(prob, limits)
        if out.found:
            ok, violations = check_is_homomorphism(
                prob.source, prob.target, out.assignment)
            assert ok, violations


def test_power_source_solves():
    A = chain2()
    h = power(A, 3)
    out = solve(ExtensionProblem(h, A), default_limits())
    assert out.found
    ok, _ = check_is_homomorphism(h, A, out.assignment)
    assert ok
    # brute force on the materialized power agrees
    brute = oracle_homomorphisms(h.materialize(), A)
    image = tuple(out.assignment[i] for i in range(h.size))
    assert image in brute


def test_determinism_identical_outcomes():
    limits = default_limits()
    for prob in _problem_catalog():
        a = solve(prob, limits)
        b = solve(prob, limits)
        assert a.status == b.status and a.assignment == b.assignment
        assert a.nodes == b.nodes
        s1, _ = enumerate_solutions(prob, cap=1000, limits=limits)
        s2, _ = enumerate_solutions(prob, cap=1000, limits=limits)
        assert s1 == s2


def test_unsat_monotone_under_added_pins():
    limits = default_limits()
    for prob in _problem_catalog():
        out = solve(prob, limits)
        if not out.unsat:
            continue
        for var in range(prob.source.size):
            if any(p[0] == var for p in prob.pins):
                continue
            for val in range(prob.target.size):
                stronger = ExtensionProblem(
                    prob.source, prob.target,
                    prob.pins + ((var, val),))
                try:
                    out2 = solve(stronger, limits)
                except InconsistentPinsError:
                    continue
                assert out2.unsat
            break


def test_budget_exhaustion_is_distinct_status():
    cyc6 = canonical_structure("graph", 6,
                               [(i, (i + 1) % 6) for i in range(6)])
    p3t = canonical_structure("graph", 3, [(0, 1), (1, 2)])
    out = solve(ExtensionProblem(cyc6, p3t),
                SearchLimits(node_budget=1))
    assert out.exhausted and out.reason == "node_budget"
    out = solve(ExtensionProblem(cyc6, p3t),
                SearchLimits(node_budget=10_000, wall_budget=1e-9))
    assert out.exhausted and out.reason == "wall_budget"


def test_inconsistent_pins_rejected():
    A = chain2()
    with pytest.raises(InconsistentPinsError):
        ExtensionProblem(A, A, pins=((0, 0), (0, 1)))
    with pytest.raises(InconsistentPinsError):
        solve(ExtensionProblem(A, A, pins=((0, 5),)))


def test_signature_mismatch_rejected():
    A = chain2()
    B = k2()
    with pytest.raises(StructureError):
        ExtensionProblem(A, B)


def test_check_is_homomorphism_flags_violations():
    A = k2()
    ok, violations = check_is_homomorphism(A, A, {0: 0, 1: 0})
    assert not ok and violations
    ok, violations = check_is_homomorphism(A, A, {0: 1, 1: 0})
    assert ok and not violations
