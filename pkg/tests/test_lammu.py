from hypothesis import given, settings, strategies as st

from bllp import lammu as L
from bllp.lammu import (
    App,
    Lam,
    Mu,
    Named,
    Var,
    alpha_eq,
    app_spine,
    free_mvars,
    free_vars,
    mu_subst,
    reduce,
    root_step,
    step_head,
    step_machine,
    step_weak,
    subst,
)
from bllp.syntax import parse_term

T = parse_term

KAPPA = T(r"\x. mu a. [a] (x) \y. mu b. [a] y")
ALEPH = T(r"\f. mu a. (f) \x. [a] x")


@st.composite
def terms(draw, depth=4, lvars=("x", "y", "z"), mvars=("a", "b")):
    if depth == 0:
        return Var(draw(st.sampled_from(lvars)))
    kind = draw(st.sampled_from(["var", "lam", "mu", "named", "app"]))
    match kind:
        case "var":
            return Var(draw(st.sampled_from(lvars)))
        case "lam":
            return Lam(draw(st.sampled_from(lvars)), draw(terms(depth=depth - 1)))
        case "mu":
            return Mu(draw(st.sampled_from(mvars)), draw(terms(depth=depth - 1)))
        case "named":
            return Named(draw(st.sampled_from(mvars)), draw(terms(depth=depth - 1)))
        case "app":
            return App(draw(terms(depth=depth - 1)), draw(terms(depth=depth - 1)))


# -- substitution ---------------------------------------------------------------


def test_subst_var():
    assert subst(Var("x"), "x", T("u v")) == T("u v")


def test_subst_capture_avoiding():
    out = subst(T(r"\y. x"), "x", Var("y"))
    assert isinstance(out, Lam)
    assert out.var != "y"
    assert out.body == Var("y")


def test_subst_dropped_when_absent():
    e = T(r"\z. z w")
    assert subst(e, "k", T(r"\y. mu b. [a] y")) == e


def test_mu_subst_single_occurrence():
    out = mu_subst(Named("a", Var("x")), "a", Var("u"))
    assert out == T("[a] x u")


def test_mu_subst_other_name_untouched():
    assert mu_subst(Named("b", Var("x")), "a", Var("u")) == Named("b", Var("x"))


def test_mu_subst_nested_bottom_up():
    t = Named("a", Named("a", Var("x")))
    out = mu_subst(t, "a", Var("u"))
    assert out == Named("a", App(Named("a", App(Var("x"), Var("u"))), Var("u")))


def test_mu_subst_untouched_inside_argument():
    t = Named("a", Var("x"))
    u = Named("a", Var("z"))
    out = mu_subst(t, "a", u)
    assert out == Named("a", App(Var("x"), u))


@settings(max_examples=80)
@given(terms(), terms(depth=2))
def test_subst_preserves_alpha_classes(t, u):
    t2 = L.subst(L.subst(t, "x", Var("x_tmp")), "x_tmp", Var("x"))
    assert alpha_eq(t, t2)
    assert alpha_eq(subst(t, "x", u), subst(t2, "x", u))


# -- steps ----------------------------------------------------------------------


def test_root_beta():
    out = step_head(T(r"(\x. t) u"))
    assert out == Var("t")


def test_step_weak_examples():
    assert step_weak(T(r"(\x. x) y")) == Var("y")
    assert step_weak(T(r"mu a. [a] (\x. x) y")) is None
    assert step_weak(T(r"\x. x")) is None


def test_step_head_normal_forms():
    assert step_head(T(r"\x. x")) is None
    assert step_head(T(r"[a] \x. (\y. y) z")) is None  # λ inside a naming blocks


def test_step_machine_examples():
    assert step_machine(T(r"mu a. [a] (\x. x) y")) == T(r"mu a. [a] y")
    assert step_machine(T(r"\x. (\y. y) z")) is None
    assert step_machine(T(r"mu a. [a] t")) == Var("t")
    assert step_head(T(r"mu a. [a] (\x. x) y")) == T(r"mu a. [a] y")


def test_theta_side_condition():
    blocked = Mu("a", Named("a", Named("a", Var("x"))))
    assert L.theta_step(blocked) is None
    assert step_head(blocked) is None
    ok = Mu("a", Named("a", Var("x")))
    assert L.theta_step(ok) == Var("x")
    assert step_head(ok) == Var("x")


def test_mu_redex():
    out = step_head(T(r"(mu a. [a] x) u"))
    assert alpha_eq(out, T(r"mu a. [a] x u"))


def test_kappa_head_three_steps():
    t, steps, exhausted = reduce(App(KAPPA, T(r"\k. y")), "head", 10)
    assert (t, steps, exhausted) == (Var("y"), 3, False)


def test_kappa_weak_stalls():
    t, steps, exhausted = reduce(App(KAPPA, T(r"\k. y")), "weak", 10)
    assert not exhausted
    assert isinstance(t, Mu) and isinstance(t.body, Named)
    assert steps == 1
    assert step_weak(t) is None


def test_kappa_machine_reaches_head_normal_form():
    t, steps, _ = reduce(App(KAPPA, T(r"\k. y")), "machine", 10)
    assert t == Var("y")
    assert steps == 3


def test_aleph_behavior():
    for k in range(4):
        args = [Var(f"t{i}") for i in range(1, k + 1)]
        t, steps, _ = reduce(app_spine(ALEPH, Var("w"), *args), "head", 100)
        expected = Mu(
            "a",
            App(Var("w"), Lam("x", Named("a", app_spine(Var("x"), *args)))),
        )
        assert alpha_eq(t, expected)
        assert steps == 1 + k


def test_reduce_normal_form_zero_steps():
    t, steps, exhausted = reduce(T(r"\x. x"), "head", 5)
    assert (t, steps, exhausted) == (T(r"\x. x"), 0, False)


@settings(max_examples=120)
@given(terms())
def test_weak_subset_of_head(t):
    w = step_weak(t)
    if w is not None:
        h = step_head(t)
        assert h is not None and alpha_eq(h, w)


@settings(max_examples=120)
@given(terms())
def test_steps_deterministic_and_theta_guarded(t):
    for stepper in (step_weak, step_head, step_machine):
        a, b = stepper(t), stepper(t)
        assert (a is None) == (b is None)
        if a is not None:
            assert alpha_eq(a, b)
    out = L.theta_step(t)
    if out is not None:
        assert t.mvar not in free_mvars(out)


@settings(max_examples=80)
@given(terms())
def test_free_vars_shrink_under_steps(t):
    out = step_head(t)
    if out is not None:
        assert free_vars(out) <= free_vars(t)
        assert free_mvars(out) <= free_mvars(t)


@settings(max_examples=80)
@given(terms(), terms(depth=2))
def test_mu_subst_preserves_alpha_classes(t, u):
    t2 = L.rename_mvar(L.rename_mvar(t, "a", "a_tmp"), "a_tmp", "a")
    assert alpha_eq(t, t2)
    assert alpha_eq(mu_subst(t, "a", u), mu_subst(t2, "a", u))
