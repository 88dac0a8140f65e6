import pytest

from bllp import corpus as C
from bllp import formula as F
from bllp import lammu as L
from bllp.formula import LF, lf
from bllp.respoly import const, poly_leq, pvar
from bllp.syntax import parse_lf, parse_poly
from bllp.typecheck import (
    Derivation,
    DerivationError,
    add_to_mult,
    check_additive,
    check_mult,
    ctx_lower,
    lower_type,
    subject_reduce,
    subst_derivation,
)

P = parse_poly


def chain(entry):
    d = add_to_mult(entry.derivation)
    out = [d]
    while L.head_redex_position(out[-1].concl.subject) is not None:
        out.append(subject_reduce(out[-1]))
    return out


# -- acceptance of the bundled derivations ------------------------------------


@pytest.mark.parametrize("name", [e.name for e in C.entries() if e.derivation])
def test_corpus_derivations_check(name):
    d = C.by_name(name).derivation
    assert check_additive(d).ok


def test_kappa_accepts_at_the_stated_instance():
    assert check_additive(C.kappa_derivation(const(1), const(1), const(2))).ok


def test_kappa_rejects_zero_budget():
    rep = check_additive(C.kappa_derivation(const(1), const(1), const(0)))
    assert not rep.ok


def test_kappa_generic_parameters():
    r, s = pvar("r"), pvar("s")
    from bllp.respoly import add, mul

    k = add(r, mul(s, r)) + const(1)
    assert check_additive(C.kappa_derivation(r, s, k)).ok


def test_aleph_accepts_and_needs_one_use():
    assert check_additive(C.aleph_derivation(const(1), const(1), const(1))).ok
    assert not check_additive(C.aleph_derivation(const(1), const(1), const(0))).ok


def test_var_requires_entry():
    d = C.node(
        "var",
        C.jm([("x", C.modal(C.X, 1, 1))], L.Var("y"), lf(C.X, F.VACUOUS, 1)),
    )
    assert not check_additive(d).ok


def test_var_requires_budget():
    d = C.node(
        "var",
        C.jm([("x", C.modal(C.X, 1, 0))], L.Var("x"), lf(C.X, F.VACUOUS, 1)),
    )
    rep = check_additive(d)
    assert not rep.ok and "one use" in str(rep)


# -- elaboration ----------------------------------------------------------------


@pytest.mark.parametrize("name", [e.name for e in C.entries() if e.derivation])
def test_add_to_mult_checks(name):
    m = add_to_mult(C.by_name(name).derivation)
    assert check_mult(m).ok


def test_multiplicative_var_rejects_extra_context():
    d = Derivation(
        "var_m",
        C.jm(
            [("x", C.modal(C.X, 1, 1)), ("y", C.modal(C.X, 1, 1))],
            L.Var("x"),
            lf(C.X, F.VACUOUS, 1),
        ),
    )
    assert not check_mult(d).ok


def test_elaborated_var_inserts_weakenings():
    d = C.node(
        "var",
        C.jm(
            [("x", C.modal(C.X, 1, 1)), ("y", C.modal(C.Y, 1, 1))],
            L.Var("x"),
            lf(C.X, F.VACUOUS, 1),
        ),
    )
    m = add_to_mult(d)
    rules = []
    cur = m
    while cur.premises:
        rules.append(cur.rule)
        cur = cur.premise()
    rules.append(cur.rule)
    assert rules == ["w_lam", "var_m"]
    assert check_mult(m).ok


def test_elaborated_shared_variable_contracts():
    m = add_to_mult(C.church_derivation(2))

    def rules(d):
        yield d.rule
        for q in d.premises:
            yield from rules(q)

    assert "c_lam" in set(rules(m))


def test_identity_elaboration_shape():
    d_id = C.identity_applied_derivation().premise(0)
    m = add_to_mult(d_id)
    assert m.rule == "abs" and m.premise().rule == "var_m"


def test_mult_contraction_renames_subject():
    m = add_to_mult(C.church_derivation(2))
    assert L.alpha_eq(m.concl.subject, C.church_term(2))


# -- subject reduction ------------------------------------------------------------


@pytest.mark.parametrize("name", [e.name for e in C.entries() if e.derivation])
def test_subject_reduction_chain(name):
    entry = C.by_name(name)
    ds = chain(entry)
    term = entry.term
    for k, d in enumerate(ds):
        assert check_mult(d).ok, f"step {k} fails"
        assert L.alpha_eq(d.concl.subject, term)
        nxt = L.step_head(term)
        if k + 1 < len(ds):
            term = nxt
    assert L.step_head(ds[-1].concl.subject) is None


def test_subject_reduction_preserves_judgment():
    entry = C.by_name("kappa-callcc")
    ds = chain(entry)
    first, last = ds[0].concl, ds[-1].concl
    assert {v for v, _ in first.lam} == {v for v, _ in last.lam}
    assert F.lf_alpha_eq(first.type, last.type)


def test_subject_reduce_rejects_normal_forms():
    d = add_to_mult(C.by_name("kappa").derivation)
    with pytest.raises(DerivationError):
        subject_reduce(d)


def test_subject_reduce_rejects_non_redex_position():
    d = add_to_mult(C.by_name("identity-app").derivation)
    with pytest.raises(DerivationError):
        subject_reduce(d, ("mu",))


def test_theta_case_via_kappa():
    entry = C.by_name("kappa-callcc")
    ds = chain(entry)
    assert isinstance(ds[2].concl.subject, L.Mu)
    assert isinstance(ds[3].concl.subject, L.Var)


# -- malleability at the derivation level ------------------------------------------


def test_lower_type_label_inflation():
    m = add_to_mult(C.by_name("kappa").derivation)
    t = m.concl.type
    target = LF(t.formula, t.binder, t.label + const(3))
    out = lower_type(m, target)
    assert check_mult(out).ok
    assert out.concl.type.label == t.label + const(3)


def test_ctx_lower_label_inflation():
    m = add_to_mult(C.by_name("identity-app").derivation)
    cur = m.concl.lam_get("y0")
    target = LF(cur.formula, cur.binder, cur.label + const(2))
    out = ctx_lower(m, "lam", "y0", target)
    assert check_mult(out).ok


def test_subst_derivation_keeps_validity():
    r, s = pvar("r"), pvar("s")
    from bllp.respoly import add, mul

    k = add(r, mul(s, r)) + const(1)
    d = add_to_mult(C.kappa_derivation(r, s, k))
    inst = subst_derivation(subst_derivation(d, "r", const(2)), "s", const(3))
    assert check_mult(inst).ok


def test_subst_derivation_commutes_for_disjoint_vars():
    r, s = pvar("r"), pvar("s")
    from bllp.respoly import add, mul

    k = add(r, mul(s, r)) + const(1)
    d = add_to_mult(C.kappa_derivation(r, s, k))
    a = subst_derivation(subst_derivation(d, "r", const(2)), "s", const(3))
    b = subst_derivation(subst_derivation(d, "s", const(3)), "r", const(2))
    assert a.concl == b.concl


def test_contraction_sum_condition_rejected():
    prem = Derivation(
        "var_m",
        C.jm([("x1", C.modal(C.X, 1, 1))], L.Var("x1"), lf(C.X, F.VACUOUS, 1)),
    )
    prem = Derivation(
        "w_lam",
        C.jm(
            [("x1", C.modal(C.X, 1, 1)), ("x2", C.modal(C.X, 1, 1))],
            L.Var("x1"),
            lf(C.X, F.VACUOUS, 1),
        ),
        (prem,),
    )
    bad = Derivation(
        "c_lam",
        C.jm([("x", C.modal(C.X, 1, 1))], L.Var("x"), lf(C.X, F.VACUOUS, 1)),
        (prem,),
        {"left": "x1", "right": "x2", "into": "x"},
    )
    rep = check_mult(bad)
    assert not rep.ok and "below the sum" in str(rep)
    good = Derivation(
        "c_lam",
        C.jm([("x", C.modal(C.X, 1, 2))], L.Var("x"), lf(C.X, F.VACUOUS, 1)),
        (prem,),
        {"left": "x1", "right": "x2", "into": "x"},
    )
    assert check_mult(good).ok


def test_elaboration_equivalence_under_label_perturbation():
    from bllp.respoly import add, mul

    for bump in (0, 1, 3):
        r, s = const(1), const(1)
        k = add(const(2), const(bump))
        d = C.kappa_derivation(r, s, k)
        assert check_additive(d).ok
        assert check_mult(add_to_mult(d)).ok
    bad = C.kappa_derivation(const(1), const(1), const(1))
    assert not check_additive(bad).ok


def test_symbolic_parameters_through_the_whole_pipeline():
    from bllp.proofs import check_proof, map_derivation, step_special, weight
    from bllp.respoly import add, mul

    r, s = pvar("r"), pvar("s")
    k = add(add(r, mul(s, r)), const(1))
    d = C.kappa_derivation(r, s, k)
    assert check_additive(d).ok
    m = add_to_mult(d)
    assert check_mult(m).ok
    pf = map_derivation(m)
    assert check_proof(pf).ok
    weights = [weight(pf)]
    while (hit := step_special(pf)) is not None:
        pf = hit.result
        assert check_proof(pf).ok
        weights.append(weight(pf))
    assert len(weights) > 1
    assert all(poly_leq(b, a) and a != b for a, b in zip(weights, weights[1:]))
    assert {"r"} <= weights[0].free_vars()
