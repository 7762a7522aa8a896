"""Batch cross-validation harness.

Each suite pits the generic decision procedure against an independent
authority (direct k-extendability checks, power-structure reduction,
family classification, the arithmetical-lattice test, or hand-computed
closure values) over a canonical instance list. Instances fan out across
a worker pool; report order is canonical regardless of scheduling.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ProcessPoolExecutor

from .structures import (FiniteStructure, Relation, PartialOpMap,
                         canonical_structure, power)
from .homogeneity import (FunctionTable, decide_ph, extendable,
                          is_k_ph, is_partial_polymorphism)
from .search import default_limits
from . import generate as gen
from . import galois


SUITE_NAMES = ("n2", "phhh", "graphs3", "posets3", "strict3",
               "galois", "kaarli")


# ---------------------------------------------------------- named fixtures

def chain2():
    return canonical_structure("poset", 2, [(0, 0), (0, 1), (1, 1)],
                               name="chain2")


def edge2():
    return canonical_structure("graph", 2, [(0, 1)], name="edge2")


def bowtie_poset():
    # two minimal points both below two maximal points, no midpoint
    le = [(i, i) for i in range(4)] + [(0, 2), (0, 3), (1, 2), (1, 3)]
    return canonical_structure("poset", 4, le, name="bowtie")


def diamond_poset():
    # bottom 0, incomparable 1 and 2, top 3: a lattice
    le = [(i, i) for i in range(4)]
    le += [(0, 1), (0, 2), (0, 3), (1, 3), (2, 3)]
    return canonical_structure("poset", 4, le, name="diamond")


def m3_partitions():
    """The three perfect matchings of 4 points plus bounds: a modular,
    non-distributive sublattice of the partition lattice."""
    return [
        ((0,), (1,), (2,), (3,)),
        ((0, 1), (2, 3)),
        ((0, 2), (1, 3)),
        ((0, 3), (1, 2)),
        ((0, 1, 2, 3),),
    ]


def m3_structure():
    return canonical_structure(
        "eq_lattice", 4, [list(map(list, p)) for p in m3_partitions()],
        name="m3")


# ---------------------------------------------------------------- verifier

def _table_from_json(obj):
    if "values" in obj:
        return FunctionTable(obj["arity"], obj["size"], "table",
                             list(obj["values"]))
    if obj.get("kind") == "projection":
        return FunctionTable(obj["arity"], obj["size"], "projection",
                             obj["coordinate"])
    return None


def _is_nu_table(ft):
    n, r = ft.size, ft.arity
    for a in range(n):
        if ft.apply((a,) * r) != a:
            return False
        for b in range(n):
            if b == a:
                continue
            for i in range(r):
                t = [a] * r
                t[i] = b
                if ft.apply(tuple(t)) != a:
                    return False
    return True


def verify_certificate(structure, verdict_json, limits=None):
    """Re-check an embedded certificate independently of the pipeline that
    produced it. Returns {ok, kind, checks}; a NotPH map must re-verify as
    a partial polymorphism with an unsatisfiable extension problem, and a
    PH near-unanimity witness must re-verify as one."""
    limits = limits or default_limits()
    status = verdict_json.get("status")
    cert = verdict_json.get("certificate")
    checks = []
    if status == "Inconclusive":
        ok = cert is None
        checks.append({"check": "no_certificate_on_inconclusive", "ok": ok})
        return {"ok": ok, "kind": None, "checks": checks}
    if cert is None:
        return {"ok": False, "kind": None,
                "checks": [{"check": "certificate_present", "ok": False}]}
    kind = cert.get("kind")
    if kind == "singleton":
        ok = structure.size == 1
        checks.append({"check": "one_element_carrier", "ok": ok})
    elif kind in ("no_near_unanimity", "non_extendable_map"):
        raw = cert.get("map") or cert.get("partial_map")
        f = PartialOpMap.from_json(raw)
        ok1, _ = is_partial_polymorphism(structure, f)
        checks.append({"check": "is_partial_polymorphism", "ok": ok1})
        res = extendable(structure, f, limits)
        ok2 = res.not_extendable
        checks.append({"check": "extension_unsat", "ok": ok2,
                       "status": res.status})
        ok = ok1 and ok2 and status == "NotPH"
    elif kind == "sweep_complete":
        ok = status == "PH"
        checks.append({"check": "status_is_ph", "ok": ok})
        wit = cert.get("nu_witness")
        if wit is not None:
            ft = _table_from_json(wit)
            if ft is None:
                checks.append({"check": "nu_witness_materializable",
                               "ok": False})
                ok = False
            else:
                good = _is_nu_table(ft)
                checks.append({"check": "nu_witness_is_nu", "ok": good})
                total = PartialOpMap(ft.arity, ft.size,
                                     tuple(ft.graph_entries()))
                good2, _ = is_partial_polymorphism(structure, total)
                checks.append({"check": "nu_witness_is_polymorphism",
                               "ok": good2})
                ok = ok and good and good2
    else:
        checks.append({"check": "known_kind", "ok": False, "kind": kind})
        ok = False
    return {"ok": ok, "kind": kind, "checks": checks}


# ------------------------------------------------------------------ suites

def _row_n2(index, limits):
    A = gen.all_n2_binary()[index]
    verdict = decide_ph(A, limits)
    kph = {}
    for k in range(1, 5):
        kph[k] = is_k_ph(A, k, limits).status
    # PH means every level holds; NotPH is conclusively visible at k = 4
    # (= |A|^d here), lower levels may legitimately still hold
    if verdict.status == "PH":
        agree = all(kph[k] == "holds" for k in kph)
    elif verdict.status == "NotPH":
        agree = kph[4] == "fails"
    else:
        agree = False
    return {"name": A.name, "status": verdict.status,
            "k_ph": {str(k): v for k, v in kph.items()},
            "agree": agree, "verdict": verdict.to_json()}


def _row_phhh(index, k, limits):
    A = gen.all_n2_binary()[index]
    direct = is_k_ph(A, k, limits).status
    via_power = is_k_ph(power(A, k).materialize(), 1, limits).status
    agree = (direct == via_power and direct in ("holds", "fails"))
    return {"name": A.name, "k": k, "direct": direct,
            "via_power": via_power, "agree": agree}


def _row_family(family, index, limits):
    from .classify import classify_structure
    if family == "graphs3":
        A = gen.all_graphs(3)[index]
    elif family == "posets3":
        A = gen.all_posets(3)[index]
    else:
        A = gen.all_strict_posets(3)[index]
    verdict = decide_ph(A, limits)
    report = classify_structure(A, limits)
    agree = (verdict.status == report.verdict
             and verdict.status in ("PH", "NotPH"))
    return {"name": A.name, "decide_ph": verdict.status,
            "classify": report.verdict, "agree": agree,
            "verdict": verdict.to_json()}


def _galois_checks(limits):
    c2 = chain2()
    k2 = edge2()
    bt = bowtie_poset()
    rows = []

    def add(check, got, want):
        rows.append({"check": check, "got": got, "want": want,
                     "agree": got == want})

    pol1, comp1 = galois.enumerate_polymorphisms(c2, 1)
    add("unary_polymorphism_count_chain2", len(pol1), 3)
    pol2, comp2 = galois.enumerate_polymorphisms(c2, 2)
    add("binary_polymorphism_count_chain2", len(pol2), 6)
    add("enumeration_complete", comp1 and comp2, True)
    add("gamma_chain2_01",
        sorted(galois.gamma_closure(c2, [(0, 1)], limits)),
        [(0, 0), (0, 1), (1, 1)])
    add("gamma_edge2_01",
        sorted(galois.gamma_closure(k2, [(0, 1)], limits)),
        [(0, 1), (1, 0)])
    add("pp_definable_chain2_10",
        galois.is_pp_definable(c2, [(1, 0)], limits).definable, False)
    cc_c2 = galois.cross_check_inv_pol(c2, 2, 2, limits)
    add("inv_pol_equal_chain2", cc_c2.equal_at_max, True)
    cc_k2 = galois.cross_check_inv_pol(k2, 2, 2, limits)
    add("inv_pol_equal_edge2", cc_k2.equal_at_max, True)
    add("polylocal_chain2_m2",
        galois.check_finite_polylocal(c2, 2, limits).holds, True)
    add("polylocal_bowtie_m2",
        galois.check_finite_polylocal(bt, 2, limits).holds, False)
    return rows


def _kaarli_rows(limits):
    from .classify import (is_arithmetical, escalating_counterexample,
                           kaarli_cross_check)
    rows = []
    for n in (1, 2, 3):
        table = kaarli_cross_check(n, limits)
        rows.append({"check": "arithmetical_iff_ph_n%d" % n,
                     "families": table["families"],
                     "agreements": table["agreements"],
                     "inconclusive": table["inconclusive"],
                     "agree": (table["agreements"] == table["families"]
                               and not table["inconclusive"])})
    fam = m3_partitions()
    arith, wit = is_arithmetical(fam, 4)
    rows.append({"check": "m3_non_arithmetical", "got": arith,
                 "witness": wit, "agree": arith is False
                 and wit is not None and wit["kind"] == "distributivity"})
    A = m3_structure()
    found = escalating_counterexample(A, limits=limits)
    if found is None:
        rows.append({"check": "m3_counterexample", "agree": False})
    else:
        k, f = found
        ok1, _ = is_partial_polymorphism(A, f)
        res = extendable(A, f, limits)
        rows.append({"check": "m3_counterexample", "arity": k,
                     "map": f.to_json(),
                     "agree": ok1 and res.not_extendable})
    return rows


def suite_jobs(suite):
    if suite == "n2":
        return [("n2", i) for i in range(16)]
    if suite == "phhh":
        return [("phhh", (i, k)) for i in range(16) for k in (2, 3)]
    if suite == "graphs3":
        return [("graphs3", i) for i in range(8)]
    if suite == "posets3":
        return [("posets3", i) for i in range(19)]
    if suite == "strict3":
        return [("strict3", i) for i in range(len(gen.all_strict_posets(3)))]
    if suite == "galois":
        return [("galois", None)]
    if suite == "kaarli":
        return [("kaarli", None)]
    raise ValueError("unknown suite %r" % (suite,))


def run_job(job):
    suite, key = job
    limits = default_limits()
    if suite == "n2":
        return [_row_n2(key, limits)]
    if suite == "phhh":
        return [_row_phhh(key[0], key[1], limits)]
    if suite in ("graphs3", "posets3", "strict3"):
        return [_row_family(suite, key, limits)]
    if suite == "galois":
        return _galois_checks(limits)
    if suite == "kaarli":
        return _kaarli_rows(limits)
    raise ValueError("unknown suite %r" % (suite,))


def _rebuild_instance(suite, key):
    if suite == "n2":
        return gen.all_n2_binary()[key]
    if suite == "graphs3":
        return gen.all_graphs(3)[key]
    if suite == "posets3":
        return gen.all_posets(3)[key]
    if suite == "strict3":
        return gen.all_strict_posets(3)[key]
    return None


def run_suite(suite, jobs=1, verify_certificates=False):
    """Run one suite (or 'all') and return the canonical report dict."""
    if suite == "all":
        reports = [run_suite(s, jobs, verify_certificates)
                   for s in SUITE_NAMES]
        return {"suite": "all", "suites": reports,
                "ok": all(r["ok"] for r in reports),
                "rows": sum(r["rows"] for r in reports),
                "disagreements": sum(r["disagreements"] for r in reports)}
    job_list = suite_jobs(suite)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(run_job, job_list))
    else:
        chunks = [run_job(j) for j in job_list]
    rows = list(itertools.chain.from_iterable(chunks))
    if verify_certificates:
        limits = default_limits()
        for job, chunk in zip(job_list, chunks):
            A = _rebuild_instance(job[0], job[1])
            if A is None:
                continue
            for row in chunk:
                if "verdict" in row:
                    row["certificate_check"] = verify_certificate(
                        A, row["verdict"], limits)
    bad = [r for r in rows if not r.get("agree", True)]
    if verify_certificates:
        bad += [r for r in rows
                if not r.get("certificate_check", {"ok": True})["ok"]]
    return {"suite": suite, "rows": len(rows), "instances": rows,
            "disagreements": len(bad), "ok": not bad}
