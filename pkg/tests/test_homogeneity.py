import itertools

import pytest

from polyhom.structures import (FiniteStructure, Relation, PartialOpMap,
                                canonical_structure, power)
from polyhom.search import SearchLimits, default_limits
from polyhom.homogeneity import (FunctionTable, is_partial_polymorphism,
                                 extendable, canonical_partial_nu,
                                 find_nu_polymorphism, is_k_ph,
                                 is_hom_homogeneous, decide_ph)
from polyhom.generate import all_n2_binary, all_graphs

from oracles import (table_apply, oracle_polymorphisms,
                     oracle_is_polymorphism, oracle_is_partial_polymorphism,
                     oracle_extends, oracle_all_partial_maps, oracle_is_k_ph)


def chain2():
    return canonical_structure("poset", 2, [(0, 0), (0, 1), (1, 1)],
                               name="chain2")


def k2():
    return canonical_structure("graph", 2, [(0, 1)], name="k2")


def path3():
    return canonical_structure("graph", 3, [(0, 1), (1, 2)], name="p3")


def bowtie():
    return canonical_structure(
        "poset", 4,
        [(i, i) for i in range(4)] + [(0, 2), (0, 3), (1, 2), (1, 3)],
        name="bowtie")


def tern3():
    # one ternary relation on three points
    return FiniteStructure(3, [Relation("t", 3, {(0, 1, 2), (1, 2, 0),
                                                 (2, 0, 1), (0, 0, 0)})],
                           name="tern3")


def _total_as_partial(ft):
    return PartialOpMap(ft.arity, ft.size, tuple(ft.graph_entries()))


# ------------------------------------------------- partial polymorphism

def test_is_partial_polymorphism_matches_oracle_n2():
    for A in all_n2_binary():
        for k in (1, 2):
            for entries in oracle_all_partial_maps(2, k):
                f = PartialOpMap(k, 2, tuple(entries.items()))
                ok, violation = is_partial_polymorphism(A, f)
                assert ok == oracle_is_partial_polymorphism(A, entries, k)
                if not ok:
                    rel = A.relation(violation[0])
                    image = violation[2]
                    assert tuple(image) not in rel.tuples


def test_is_partial_polymorphism_matches_oracle_ternary():
    A = tern3()
    maps = [
        {(0,): 0, (1,): 2},
        {(0,): 0, (1,): 1, (2,): 2},
        {(0,): 1, (1,): 2, (2,): 0},
        {(0, 1): 0, (1, 2): 1},
        {(0, 1): 1, (1, 2): 2, (2, 0): 0},
    ]
    for entries in maps:
        k = len(next(iter(entries)))
        f = PartialOpMap(k, 3, tuple(entries.items()))
        ok, _ = is_partial_polymorphism(A, f)
        assert ok == oracle_is_partial_polymorphism(A, entries, k)


# ------------------------------------------------------------ extendable

def test_extendable_agrees_with_brute_force_n2():
    limits = default_limits()
    for A in all_n2_binary():
        for k in (1, 2):
            pols = oracle_polymorphisms(A, k)
            for entries in oracle_all_partial_maps(2, k):
                f = PartialOpMap(k, 2, tuple(entries.items()))
                res = extendable(A, f, limits)
                want = (oracle_is_partial_polymorphism(A, entries, k)
                        and oracle_extends(A, entries, k, pols))
                assert res.extendable == want, (A.name, entries, res.status)
                if res.extendable:
                    assert res.witness.extends(f)
                    table = tuple(res.witness.apply(args) for args in
                                  itertools.product(range(2), repeat=k))
                    assert oracle_is_polymorphism(A, table, k)


def test_extendable_agrees_with_brute_force_n3_samples():
    limits = default_limits()
    A = path3()
    pols2 = oracle_polymorphisms(A, 2)
    count = 0
    for entries in oracle_all_partial_maps(3, 2):
        if len(entries) > 2:
            continue
        count += 1
        f = PartialOpMap(2, 3, tuple(entries.items()))
        res = extendable(A, f, limits)
        want = (oracle_is_partial_polymorphism(A, entries, 2)
                and oracle_extends(A, entries, 2, pols2))
        assert res.extendable == want, (entries, res.status)
    assert count > 100


def test_extendable_empty_map():
    res = extendable(chain2(), PartialOpMap(2, 2, ()), default_limits())
    assert res.extendable and res.detail["route"] == "projection"


def test_extendable_rejects_non_partial_polymorphism():
    A = k2()
    f = PartialOpMap(1, 2, (((0,), 0), ((1,), 0)))
    res = extendable(A, f, default_limits())
    assert res.not_extendable and res.detail["route"] == "rejected"


def test_extendable_known_ops_do_not_change_status():
    A = chain2()
    limits = default_limits()
    nu = find_nu_polymorphism(A, 3, limits)
    assert nu.extendable
    for entries in oracle_all_partial_maps(2, 2):
        f = PartialOpMap(2, 2, tuple(entries.items()))
        a = extendable(A, f, limits)
        b = extendable(A, f, limits, known=(nu.witness,))
        assert a.status == b.status


# --------------------------------------------------------- near-unanimity

def test_canonical_partial_nu_shape():
    g = canonical_partial_nu(chain2(), 3)
    assert g.arity == 3 and len(g) == 2 + 2 * 1 * 3
    assert g((0, 0, 0)) == 0 and g((0, 1, 0)) == 0 and g((1, 0, 1)) == 1
    with pytest.raises(ValueError):
        canonical_partial_nu(chain2(), 2)


def test_canonical_partial_nu_is_always_partial_polymorphism():
    # arity max(2, max relation arity) + 1 leaves one undisturbed column,
    # so the image tuple appears among the columns of any selection
    for A in [chain2(), k2(), path3(), bowtie(), tern3()]:
        r = max(2, A.max_arity) + 1
        g = canonical_partial_nu(A, r)
        ok, violation = is_partial_polymorphism(A, g)
        assert ok, (A.name, violation)


def test_total_op_is_nu_iff_it_extends_canonical_map():
    A = chain2()
    g = canonical_partial_nu(A, 3)

    def is_nu(table):
        for a in range(2):
            for t in itertools.product(range(2), repeat=3):
                if sum(1 for e in t if e != a) <= 1 and \
                        table_apply(table, 2, t) != a:
                    return False
        return True

    for table in itertools.product(range(2), repeat=8):
        ext = all(table_apply(table, 2, args) == v for args, v in g.entries)
        assert ext == is_nu(table)


def test_find_nu_agrees_with_brute_existence_n2():
    limits = default_limits()
    for A in all_n2_binary():
        res = find_nu_polymorphism(A, 3, limits)
        brute = any(
            oracle_is_polymorphism(A, t, 3)
            and all(table_apply(t, 2, args) == v
                    for args, v in canonical_partial_nu(A, 3).entries)
            for t in itertools.product(range(2), repeat=8))
        assert res.extendable == brute
        if res.extendable:
            table = tuple(res.witness.apply(args) for args in
                          itertools.product(range(2), repeat=3))
            assert oracle_is_polymorphism(A, table, 3)


def test_bowtie_has_no_ternary_nu():
    res = find_nu_polymorphism(bowtie(), 3, default_limits())
    assert res.not_extendable


# ------------------------------------------------------------ k-homogeneity

def test_one_point_reduction_matches_full_brute_force_n2():
    # the one-point-extension reduction must agree with literal
    # every-partial-map-extends brute force before it is trusted
    limits = default_limits()
    for A in all_n2_binary():
        for k in (1, 2, 3):
            got = is_k_ph(A, k, limits)
            assert got.status in ("holds", "fails")
            assert (got.status == "holds") == oracle_is_k_ph(A, k), \
                (A.name, k)


def test_is_k_ph_strategies_agree():
    limits = default_limits()
    for A in all_n2_binary():
        for k in (1, 2):
            a = is_k_ph(A, k, limits, strategy="one_point")
            b = is_k_ph(A, k, limits, strategy="power_hh")
            assert a.status == b.status


def test_k_ph_counterexample_is_genuinely_stuck():
    limits = default_limits()
    for A in all_n2_binary():
        res = is_k_ph(A, 2, limits)
        if not res.fails:
            continue
        f = res.counterexample["map"]
        x = res.counterexample["point"]
        entries = dict(f.entries)
        assert oracle_is_partial_polymorphism(A, entries, 2)
        for v in range(A.size):
            extended = dict(entries)
            extended[x] = v
            assert not oracle_is_partial_polymorphism(A, extended, 2)


def test_phhh_equivalence_n2():
    # k-homogeneity of A equals unary homogeneity of the k-th power
    limits = default_limits()
    for A in all_n2_binary():
        for k in (2, 3):
            direct = is_k_ph(A, k, limits).status
            via = is_hom_homogeneous(power(A, k)).status
            assert direct == via, (A.name, k)


def test_hierarchy_monotone_n2():
    limits = default_limits()
    for A in all_n2_binary():
        status = {k: is_k_ph(A, k, limits).status for k in (1, 2, 3)}
        for k in (1, 2):
            if status[k + 1] == "holds":
                assert status[k] == "holds", (A.name, status)


def test_is_k_ph_rejects_bad_k():
    with pytest.raises(ValueError):
        is_k_ph(chain2(), 0)
    with pytest.raises(ValueError):
        is_k_ph(chain2(), 1, strategy="bogus")


# --------------------------------------------------------------- decide_ph

def test_decide_ph_singleton():
    A = FiniteStructure(1, [Relation("r", 1, {(0,)})], name="pt")
    v = decide_ph(A)
    assert v.status == "PH" and v.certificate["kind"] == "singleton"


def test_decide_ph_known_verdicts():
    limits = default_limits()
    assert decide_ph(chain2(), limits).status == "PH"
    assert decide_ph(k2(), limits).status == "PH"
    assert decide_ph(path3(), limits).status == "NotPH"
    v = decide_ph(bowtie(), limits)
    assert v.status == "NotPH"
    assert v.certificate["kind"] == "no_near_unanimity"


def test_decide_ph_nu_necessity():
    # a PH verdict implies the near-unanimity stage found a witness
    limits = default_limits()
    for A in all_n2_binary() + all_graphs(3):
        v = decide_ph(A, limits)
        if v.status != "PH":
            continue
        res = find_nu_polymorphism(A, max(2, A.max_arity) + 1, limits)
        assert res.extendable, A.name


def test_decide_ph_certificates_reverify():
    from polyhom.crosscheck import verify_certificate
    limits = default_limits()
    for A in all_n2_binary() + all_graphs(3):
        v = decide_ph(A, limits)
        assert v.status in ("PH", "NotPH")
        check = verify_certificate(A, v.to_json(), limits)
        assert check["ok"], (A.name, check)


def test_decide_ph_inconclusive_when_sweep_is_capped():
    # the diamond is a lattice (so actually PH), but a tight tuple-set cap
    # blocks the m=2 sweep; classification may only add guidance, never a
    # PH verdict
    diamond = canonical_structure(
        "poset", 4,
        [(i, i) for i in range(4)] + [(0, 1), (0, 2), (0, 3), (1, 3),
                                      (2, 3)],
        name="diamond")
    v = decide_ph(diamond, tau_subset_cap=1000)
    assert v.status == "Inconclusive"
    assert v.certificate is None
    assert v.blocked
    assert "classification of the poset family indicates PH" in v.guidance


def test_decide_ph_envelope_guidance_on_large_poset():
    le = [(i, i) for i in range(5)]
    le += [(0, j) for j in range(1, 5)] + [(j, 4) for j in range(1, 4)]
    le.append((1, 3))
    n5 = canonical_structure("poset", 5, le, name="n5")
    v = decide_ph(n5, default_limits())
    assert v.status == "Inconclusive"
    assert v.certificate is None
    assert "classification of the poset family indicates PH" in v.guidance


def test_decide_ph_budget_one_can_still_refute_soundly():
    # refutations proven by root propagation alone consume no nodes, so a
    # starved budget may still produce a (valid) negative certificate
    from polyhom.crosscheck import verify_certificate
    v = decide_ph(bowtie(), SearchLimits(node_budget=1))
    assert v.status == "NotPH"
    assert verify_certificate(bowtie(), v.to_json())["ok"]


def test_decide_ph_classification_rescue_not_trusted_blindly(monkeypatch):
    # rescue witnesses must re-verify; with every extendability check
    # knocked out the classification's NotPH claim cannot be confirmed and
    # the verdict stays Inconclusive
    import polyhom.homogeneity as hm
    from polyhom.structures import EnvelopeError

    def refuse(*args, **kwargs):
        raise EnvelopeError("verification disabled for this test")

    monkeypatch.setattr(hm, "extendable", refuse)
    v = decide_ph(bowtie(), default_limits())
    assert v.status == "Inconclusive"
    assert v.certificate is None
    assert v.blocked
