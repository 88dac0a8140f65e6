import pytest
from hypothesis import given, settings, strategies as st

from bllp import formula as F
from bllp import respoly as R
from bllp.formula import (
    LF,
    ShapeMismatch,
    alpha_eq,
    classify,
    formula_leq,
    lf,
    lf_alpha_eq,
    lf_bounded_sum,
    lf_leq,
    lf_neg,
    lf_shift,
    lf_sum,
    negate,
    subst_poly,
    verify_bounded_sum,
)
from bllp.syntax import parse_formula, parse_lf, parse_poly

P = parse_poly


@st.composite
def formulas(draw, depth=3):
    if depth == 0 or draw(st.booleans()):
        return draw(
            st.sampled_from(
                [F.Atom("V"), F.NegAtom("V"), F.Atom("W"), F.ONE_F, F.BOTTOM]
            )
        )
    kind = draw(st.sampled_from(["tensor", "par", "bang", "whynot"]))
    a = draw(formulas(depth=depth - 1))
    bound = draw(st.sampled_from([P("1"), P("x"), P("x + 2"), P("bin(x,2)")]))
    match kind:
        case "tensor":
            return F.Tensor(a, draw(formulas(depth=depth - 1)))
        case "par":
            return F.Par(a, draw(formulas(depth=depth - 1)))
        case "bang":
            return F.Bang("y", bound, a if F.is_negative(a) else negate(a))
        case "whynot":
            return F.WhyNot("y", bound, a if F.is_positive(a) else negate(a))


def test_negate_units_and_atoms():
    assert negate(F.ONE_F) == F.BOTTOM
    assert negate(F.Atom("V")) == F.NegAtom("V")
    assert negate(parse_formula("!{x<p} ~V")) == parse_formula("?{x<p} V")


@settings(max_examples=80)
@given(formulas())
def test_negate_involutive_and_flips_polarity(f):
    assert negate(negate(f)) == f
    assert F.is_positive(f) != F.is_positive(negate(f))


def test_subst_identity():
    f = parse_formula("?{y<x} V")
    assert subst_poly(f, "x", R.pvar("x")) == f


def test_subst_simple():
    assert subst_poly(parse_formula("?{y<x} V"), "x", P("3")) == parse_formula(
        "?{y<3} V"
    )


def test_subst_shadowed_binder():
    f = parse_formula("!{x<p} ?{z<x} V")
    assert alpha_eq(subst_poly(f, "x", P("7")), f)


def test_subst_capture_avoided():
    f = parse_formula("!{y<p} ?{z<x + y} V")
    g = subst_poly(f, "x", P("y"))
    inner = g.body
    assert g.var != "y"
    assert "y" in inner.bound.free_vars()


def test_formula_leq_reflexive():
    f = parse_formula("!{x<p} (~V par ?{y<x} W)")
    assert formula_leq(f, f)


def test_formula_leq_bang_contravariant():
    assert formula_leq(parse_formula("!{x<p + 1} ~V"), parse_formula("!{x<p} ~V"))
    assert not formula_leq(parse_formula("!{x<p} ~V"), parse_formula("!{x<p + 1} ~V"))


def test_formula_leq_whynot_covariant():
    assert formula_leq(parse_formula("?{x<p} V"), parse_formula("?{x<p + 1} V"))


def test_lf_leq_negative_contravariant_label():
    n1 = parse_lf("<~V>[p + 1]")
    n2 = parse_lf("<~V>[p]")
    assert lf_leq(n1, n2)
    assert not lf_leq(n2, n1)


def test_lf_leq_positive_covariant_label():
    p1 = parse_lf("<V>[p]")
    p2 = parse_lf("<V>[p + 1]")
    assert lf_leq(p1, p2)
    assert not lf_leq(p2, p1)


def test_lf_leq_polarity_mismatch():
    with pytest.raises(ShapeMismatch):
        lf_leq(parse_lf("<V>[1]"), parse_lf("<~V>[1]"))


@settings(max_examples=80)
@given(formulas(), st.sampled_from(["0", "1", "q", "q + 1"]), st.sampled_from(["0", "2", "q"]))
def test_lf_leq_duality(f, l1, l2):
    a = lf(f, F.VACUOUS, P(l1))
    b = lf(f, F.VACUOUS, P(l2))
    assert lf_leq(a, b) == lf_leq(lf_neg(b), lf_neg(a))


def test_lf_sum_constant():
    a = parse_lf("<bot>[p]")
    b = parse_lf("<bot>[q]")
    assert lf_sum(a, b) == parse_lf("<bot>[p + q]")


def test_lf_sum_shifted():
    a = parse_lf("<?{z<x} V>[x<1]")
    b = lf_shift(a, "y")
    assert b.formula == parse_formula("?{z<y + 1} V")
    total = lf_sum(a, b)
    assert total.label == P("2")
    assert alpha_eq(total.formula, a.formula)


def test_lf_sum_shape_mismatch():
    a = parse_lf("<?{z<x} V>[x<1]")
    b = parse_lf("<?{z<y} V>[y<1]")
    with pytest.raises(ShapeMismatch):
        lf_sum(a, b)


def test_lf_sum_associative_where_defined():
    a = parse_lf("<~V>[p]")
    b = parse_lf("<~V>[q]")
    c = parse_lf("<~V>[1]")
    assert lf_sum(lf_sum(a, b), c) == lf_sum(a, lf_sum(b, c))


def test_bounded_sum_constant_family():
    fam = parse_lf("<~V>[r]")
    out = lf_bounded_sum("z", P("q"), fam)
    assert out == parse_lf("<~V>[r*q]")


def test_bounded_sum_needs_witness():
    with pytest.raises(ShapeMismatch):
        lf_bounded_sum("z", P("q"), lf(parse_formula("?{u<z} V"), F.VACUOUS, P("1")))
    with pytest.raises(ShapeMismatch):
        lf_bounded_sum("z", P("q"), lf(parse_formula("?{u<x} V"), "x", P("1")))


def test_verify_bounded_sum_wrong_label():
    fam = parse_lf("<~V>[r]")
    assert verify_bounded_sum(parse_lf("<~V>[r*q]"), "z", P("q"), fam)
    assert not verify_bounded_sum(parse_lf("<~V>[r*q + 1]"), "z", P("q"), fam)


def test_bounded_sum_witnessed_shift_family():
    # family M = N{x/y + sum(u<z, 1)} with N = ?{w<x} V, per-index label 1
    base = parse_formula("?{w<x} V")
    fam_formula = parse_formula("?{w<y + z} V")
    fam = lf(fam_formula, "y", P("1"))
    out = lf_bounded_sum("z", P("q"), fam, witness=(base, "x"))
    assert out.binder == "x"
    assert alpha_eq(out.formula, base)
    assert out.label == P("q")


def test_lemma_singleton_sum_collapses():
    # sum over z<1 of a constant family is subsumed by the z:=0 instance
    fam = parse_lf("<~V>[r]")
    total = lf_bounded_sum("z", P("1"), fam)
    inst = F.lf_subst(fam, "z", R.ZERO)
    assert lf_leq(total, inst)


def test_classify():
    assert classify(parse_formula("bot")) == "typing"
    assert classify(parse_formula("~X")) == "typing"
    assert classify(parse_formula("~X -[x<p]-> bot")) == "typing"
    assert classify(parse_formula("?{x<p} X")) == "modal"
    assert classify(parse_formula("V * V")) == "neither"
    assert classify(parse_formula("?{x<p} (X * X)")) == "neither"


@settings(max_examples=60)
@given(formulas())
def test_subst_commutes_with_negate(f):
    q = P("q + 1")
    assert alpha_eq(negate(subst_poly(f, "x", q)), subst_poly(negate(f), "x", q))


@settings(max_examples=60)
@given(formulas(), st.sampled_from(["0", "1", "q"]))
def test_lf_leq_antisymmetric(f, l):
    a = lf(f, F.VACUOUS, P(l))
    b = lf(f, F.VACUOUS, P(l) + P("1"))
    if F.is_negative(f):
        assert lf_leq(b, a) and not lf_leq(a, b)
    else:
        assert lf_leq(a, b) and not lf_leq(b, a)


def test_substitution_monotone():
    # a ⊒ b implies the shifted instances remain comparable
    a = parse_formula("?{z<x + 1} V")
    b = parse_formula("?{z<x} V")
    assert formula_leq(b, a)
    shift = P("y + 3")
    assert formula_leq(subst_poly(b, "x", shift), subst_poly(a, "x", shift))
