"""Concrete syntax: tokenizer, parsers and printers.

Grammars are documented in FORMATS.md.  Parse errors carry the character
offset of the offending token.  Printing composed with parsing is the
identity up to α-renaming and polynomial canonicalisation.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from . import formula as F
from . import lammu as L
from . import respoly as R


class ParseError(Exception):
    def __init__(self, offset: int, message: str):
        super().__init__(f"at offset {offset}: {message}")
        self.offset = offset


_TOKEN_RE = re.compile(
    r"\s*(?:(?P<nat>\d+)"
    r"|(?P<punct><=|-\[|\]->|[()<>,+*~!?\[\]{}.\\_])"
    r"|(?P<ident>[A-Za-z][A-Za-z0-9'_]*))"
)

KEYWORDS = {"bin", "sum", "par", "bot", "mu"}


@dataclass
class Token:
    kind: str  # nat | punct | ident | eof
    text: str
    offset: int


def tokenize(src: str) -> list[Token]:
    out = []
    pos = 0
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if m is None or m.end() == pos:
            stripped = src[pos:].lstrip()
            if not stripped:
                break
            raise ParseError(len(src) - len(stripped), f"unexpected character {stripped[0]!r}")
        if m.lastgroup is None:
            pos = m.end()
            continue
        text = m.group(m.lastgroup)
        out.append(Token(m.lastgroup, text, m.start(m.lastgroup)))
        pos = m.end()
    out.append(Token("eof", "", len(src)))
    return out


class _Parser:
    def __init__(self, src: str):
        self.toks = tokenize(src)
        self.i = 0

    def peek(self) -> Token:
        return self.toks[self.i]

    def next(self) -> Token:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> Token:
        t = self.next()
        if t.text != text:
            raise ParseError(t.offset, f"expected {text!r}, found {t.text or 'end of input'!r}")
        return t

    def at(self, text: str) -> bool:
        return self.peek().text == text

    def eat(self, text: str) -> bool:
        if self.at(text):
            self.next()
            return True
        return False

    def ident(self, what: str = "identifier") -> str:
        t = self.next()
        if t.kind != "ident" or t.text in KEYWORDS:
            raise ParseError(t.offset, f"expected {what}, found {t.text or 'end of input'!r}")
        return t.text

    def done(self) -> None:
        t = self.peek()
        if t.kind != "eof":
            raise ParseError(t.offset, f"trailing input {t.text!r}")


# -- polynomials ---------------------------------------------------------------


def _parse_poly(p: _Parser) -> R.Poly:
    out = _parse_poly_term(p)
    while p.eat("+"):
        out = R.add(out, _parse_poly_term(p))
    return out


def _parse_poly_term(p: _Parser) -> R.Poly:
    out = _parse_poly_factor(p)
    while p.eat("*"):
        out = R.mul(out, _parse_poly_factor(p))
    return out


def _parse_poly_factor(p: _Parser) -> R.Poly:
    t = p.peek()
    if t.kind == "nat":
        p.next()
        return R.const(int(t.text))
    if t.text == "(":
        p.next()
        out = _parse_poly(p)
        p.expect(")")
        return out
    if t.text == "bin":
        p.next()
        p.expect("(")
        v = p.ident("variable")
        p.expect(",")
        n = p.next()
        if n.kind != "nat":
            raise ParseError(n.offset, "expected a degree")
        p.expect(")")
        return R.binom(v, int(n.text))
    if t.text == "sum":
        p.next()
        p.expect("(")
        v = p.ident("sum variable")
        p.expect("<")
        bound = _parse_poly(p)
        p.expect(",")
        body = _parse_poly(p)
        p.expect(")")
        return R.bounded_sum(v, bound, body)
    if t.kind == "ident" and t.text not in KEYWORDS:
        p.next()
        return R.pvar(t.text)
    raise ParseError(t.offset, f"expected a polynomial, found {t.text or 'end of input'!r}")


def parse_poly(src: str) -> R.Poly:
    p = _Parser(src)
    out = _parse_poly(p)
    p.done()
    return out


def print_poly(q: R.Poly) -> str:
    if q.is_zero():
        return "0"
    parts = []
    for mono, coeff in q.terms:
        factors = [f"bin({v},{n})" if n > 1 else v for v, n in mono.factors]
        if coeff != 1 or not factors:
            factors = [str(coeff)] + factors
        parts.append("*".join(factors))
    return " + ".join(parts)


# -- formulas ------------------------------------------------------------------


def _parse_bound(p: _Parser) -> tuple[str, R.Poly]:
    """The ``{x<p}`` or ``{p}`` piece of a modality."""
    p.expect("{")
    save = p.i
    if p.peek().kind == "ident" and p.peek().text not in KEYWORDS:
        v = p.next().text
        if p.eat("<"):
            bound = _parse_poly(p)
            p.expect("}")
            return v, bound
        p.i = save
    if p.eat("_"):
        p.expect("<")
        bound = _parse_poly(p)
        p.expect("}")
        return F.VACUOUS, bound
    bound = _parse_poly(p)
    p.expect("}")
    return F.VACUOUS, bound


def _parse_formula(p: _Parser) -> F.Formula:
    left = _parse_par(p)
    if p.eat("-["):
        save = p.i
        binder = F.VACUOUS
        if p.peek().kind == "ident" and p.peek().text not in KEYWORDS:
            binder = p.next().text
            if not p.eat("<"):
                p.i = save
                binder = F.VACUOUS
        elif p.eat("_"):
            p.expect("<")
        bound = _parse_poly(p)
        p.expect("]->")
        right = _parse_formula(p)
        return F.arrow(left, binder, bound, right)
    return left


def _parse_par(p: _Parser) -> F.Formula:
    out = _parse_tensor(p)
    while p.at("par"):
        p.next()
        out = F.Par(out, _parse_tensor(p))
    return out


def _parse_tensor(p: _Parser) -> F.Formula:
    out = _parse_atom_formula(p)
    while p.eat("*"):
        out = F.Tensor(out, _parse_atom_formula(p))
    return out


def _parse_atom_formula(p: _Parser) -> F.Formula:
    t = p.peek()
    if t.text == "(":
        p.next()
        out = _parse_formula(p)
        p.expect(")")
        return out
    if t.text == "1":
        p.next()
        return F.ONE_F
    if t.text == "bot":
        p.next()
        return F.BOTTOM
    if t.text == "~":
        p.next()
        return F.negate(_parse_atom_formula(p))
    if t.text == "!":
        p.next()
        v, bound = _parse_bound(p)
        return F.Bang(v, bound, _parse_atom_formula(p))
    if t.text == "?":
        p.next()
        v, bound = _parse_bound(p)
        return F.WhyNot(v, bound, _parse_atom_formula(p))
    if t.kind == "ident" and t.text not in KEYWORDS:
        p.next()
        return F.Atom(t.text)
    raise ParseError(t.offset, f"expected a formula, found {t.text or 'end of input'!r}")


def parse_formula(src: str) -> F.Formula:
    p = _Parser(src)
    out = _parse_formula(p)
    p.done()
    return out


def _print_bound(var: str, bound: R.Poly) -> str:
    if var == F.VACUOUS:
        return "{" + print_poly(bound) + "}"
    return "{" + var + "<" + print_poly(bound) + "}"


def print_formula(f: F.Formula) -> str:
    f = _display_formula(f, F.free_rvars(f))
    return _print_formula(f)


def _print_formula(f: F.Formula) -> str:
    match f:
        case F.Atom(n):
            return n
        case F.NegAtom(n):
            return f"~{n}"
        case F.One():
            return "1"
        case F.Bottom():
            return "bot"
        case F.Tensor(l, r):
            return f"{_paren_mult(l)} * {_paren_mult(r)}"
        case F.Par(l, r):
            return f"{_paren_mult(l)} par {_paren_mult(r)}"
        case F.Bang(v, p, n):
            return f"!{_print_bound(v, p)} {_paren_mult(n)}"
        case F.WhyNot(v, p, n):
            return f"?{_print_bound(v, p)} {_paren_mult(n)}"
    raise TypeError(f)


def _paren_mult(f: F.Formula) -> str:
    if isinstance(f, (F.Tensor, F.Par)):
        return f"({_print_formula(f)})"
    return _print_formula(f)


def parse_lf(src: str) -> F.LF:
    p = _Parser(src)
    out = _parse_lf(p)
    p.done()
    return out


def _parse_lf(p: _Parser) -> F.LF:
    p.expect("<")
    f = _parse_formula(p)
    p.expect(">")
    p.expect("[")
    save = p.i
    binder = F.VACUOUS
    if p.peek().kind == "ident" and p.peek().text not in KEYWORDS:
        binder = p.next().text
        if not p.eat("<"):
            p.i = save
            binder = F.VACUOUS
    elif p.eat("_"):
        p.expect("<")
    label = _parse_poly(p)
    p.expect("]")
    return F.lf(f, binder, label)


def print_lf(a: F.LF) -> str:
    if a.binder == F.VACUOUS:
        return f"<{print_formula(a.formula)}>[{print_poly(a.label)}]"
    return f"<{print_formula(a.formula)}>[{a.binder}<{print_poly(a.label)}]"


# -- display renaming ----------------------------------------------------------
#
# Internally generated names carry '%' (terms) or '#' (formulas) so they can
# never collide with parsed input; they are renamed to plain names on output.


def _pretty_name(base: str, avoid: set[str]) -> str:
    root = base.split("%")[0].split("#")[0].lstrip("#@%") or "v"
    if root not in avoid:
        return root
    k = 1
    while f"{root}{k}" in avoid:
        k += 1
    return f"{root}{k}"


def _display_term(t: L.Term, avoid: set[str]) -> L.Term:
    match t:
        case L.Var(_):
            return t
        case L.Lam(x, b):
            if "%" in x:
                x2 = _pretty_name(x, avoid | L.free_vars(b))
                b = L.subst(b, x, L.Var(x2))
                x = x2
            return L.Lam(x, _display_term(b, avoid | {x}))
        case L.Mu(a, b) | L.Named(a, b):
            cls = type(t)
            if isinstance(t, L.Mu) and "%" in a:
                a2 = _pretty_name(a, avoid | L.free_mvars(b))
                b = L.rename_mvar(b, a, a2)
                a = a2
            return cls(a, _display_term(b, avoid | {a}))
        case L.App(f, a):
            return L.App(_display_term(f, avoid), _display_term(a, avoid))
    raise TypeError(t)


def _display_formula(f: F.Formula, avoid: set[str]) -> F.Formula:
    match f:
        case F.Atom(_) | F.NegAtom(_) | F.One() | F.Bottom():
            return f
        case F.Tensor(l, r):
            return F.Tensor(_display_formula(l, avoid), _display_formula(r, avoid))
        case F.Par(l, r):
            return F.Par(_display_formula(l, avoid), _display_formula(r, avoid))
        case F.Bang(x, p, n) | F.WhyNot(x, p, n):
            cls = type(f)
            if x != F.VACUOUS and ("#" in x or "%" in x):
                x2 = _pretty_name(x, avoid | F.free_rvars(n) | p.free_vars())
                n = F.subst_poly(n, x, R.pvar(x2))
                x = x2
            return cls(x, p, _display_formula(n, avoid | {x}))
    raise TypeError(f)


# -- terms ---------------------------------------------------------------------


def _parse_term(p: _Parser) -> L.Term:
    t = p.peek()
    if t.text == "\\":
        p.next()
        x = p.ident("λ-variable")
        p.expect(".")
        return L.Lam(x, _parse_term(p))
    if t.text == "mu":
        p.next()
        a = p.ident("μ-variable")
        p.expect(".")
        return L.Mu(a, _parse_term(p))
    if t.text == "[":
        p.next()
        a = p.ident("μ-variable")
        p.expect("]")
        return L.Named(a, _parse_term(p))
    out = _parse_term_atom(p)
    while True:
        nxt = p.peek()
        if nxt.text == "(" or (nxt.kind == "ident" and nxt.text not in KEYWORDS):
            out = L.App(out, _parse_term_atom(p))
        elif nxt.text in ("\\", "mu", "["):
            out = L.App(out, _parse_term(p))
            break
        else:
            break
    return out


def _parse_term_atom(p: _Parser) -> L.Term:
    t = p.peek()
    if t.text == "(":
        p.next()
        out = _parse_term(p)
        p.expect(")")
        return out
    if t.kind == "ident" and t.text not in KEYWORDS:
        p.next()
        return L.Var(t.text)
    raise ParseError(t.offset, f"expected a term, found {t.text or 'end of input'!r}")


def parse_term(src: str) -> L.Term:
    p = _Parser(src)
    out = _parse_term(p)
    p.done()
    return out


def print_term(t: L.Term) -> str:
    t = _display_term(t, L.free_vars(t) | L.free_mvars(t))
    return _print_term(t)


def _print_term(t: L.Term) -> str:
    match t:
        case L.Var(x):
            return x
        case L.Lam(x, b):
            return f"\\{x}. {_print_term(b)}"
        case L.Mu(a, b):
            return f"mu {a}. {_print_term(b)}"
        case L.Named(a, b):
            return f"[{a}] {_print_term(b)}"
        case L.App(f, a):
            fs = _print_term(f)
            if isinstance(f, (L.Lam, L.Mu, L.Named)):
                fs = f"({fs})"
            if isinstance(a, L.Var):
                return f"{fs} {a.name}"
            return f"{fs} ({_print_term(a)})"
    raise TypeError(t)


# -- derivation and proof files --------------------------------------------------------
#
# JSON layouts are documented in FORMATS.md; both carry a format tag and a
# version field.

DERIVATION_FORMAT = "bllp-derivation"
PROOF_FORMAT = "bllp-proof"
FORMAT_VERSION = 1


def judgment_to_obj(j) -> dict:
    return {
        "lam": [[x, print_lf(a)] for x, a in j.lam],
        "subject": print_term(j.subject),
        "type": print_lf(j.type),
        "mu": [[x, print_lf(a)] for x, a in j.mu],
    }


def judgment_from_obj(obj: dict):
    from .typecheck import Judgment

    return Judgment(
        tuple((x, parse_lf(s)) for x, s in obj["lam"]),
        parse_term(obj["subject"]),
        parse_lf(obj["type"]),
        tuple((x, parse_lf(s)) for x, s in obj["mu"]),
    )


def _ann_to_obj(ann: dict) -> dict:
    out = {}
    for k, v in ann.items():
        if k in ("h",):
            out[k] = print_poly(v)
        elif k in ("left", "right", "into"):
            out[k] = v
        elif k in ("sum_witness_lam", "sum_witness_mu"):
            out[k] = {
                name: [print_formula(base), binder] for name, (base, binder) in v.items()
            }
    return out


def _ann_from_obj(obj: dict) -> dict:
    out = {}
    for k, v in obj.items():
        if k == "h":
            out[k] = parse_poly(v)
        elif k in ("left", "right", "into"):
            out[k] = v
        elif k in ("sum_witness_lam", "sum_witness_mu"):
            out[k] = {name: (parse_formula(b), binder) for name, (b, binder) in v.items()}
    return out


def derivation_to_obj(d, system: str) -> dict:
    def node(x) -> dict:
        return {
            "rule": x.rule,
            "judgment": judgment_to_obj(x.concl),
            "ann": _ann_to_obj(x.ann),
            "premises": [node(q) for q in x.premises],
        }

    return {
        "format": DERIVATION_FORMAT,
        "version": FORMAT_VERSION,
        "system": system,
        "tree": node(d),
    }


def derivation_from_obj(obj: dict):
    from .typecheck import Derivation

    if obj.get("format") != DERIVATION_FORMAT:
        raise ParseError(0, "not a derivation file")
    if obj.get("version") != FORMAT_VERSION:
        raise ParseError(0, f"unsupported derivation format version {obj.get('version')!r}")

    def node(x) -> Derivation:
        return Derivation(
            x["rule"],
            judgment_from_obj(x["judgment"]),
            tuple(node(q) for q in x.get("premises", [])),
            _ann_from_obj(x.get("ann", {})),
        )

    return node(obj["tree"]), obj.get("system", "additive")


def proof_to_obj(p) -> dict:
    def data_obj(data: dict) -> dict:
        out = {}
        for k, v in data.items():
            if k in ("left_idx", "right_idx", "left", "right", "idx"):
                out[k] = v
            elif k == "witness":
                out[k] = print_lf(v)
            elif k == "P":
                out[k] = print_formula(v)
            elif k in ("x", "y"):
                out[k] = v
            elif k == "p":
                out[k] = print_poly(v)
            elif k == "sum_witness":
                out[k] = {str(i): [print_formula(b), binder] for i, (b, binder) in v.items()}
        return out

    def node(x) -> dict:
        return {
            "rule": x.rule,
            "sequent": [print_lf(a) for a in x.concl],
            "data": data_obj(x.data),
            "premises": [node(q) for q in x.premises],
        }

    return {"format": PROOF_FORMAT, "version": FORMAT_VERSION, "tree": node(p)}


def proof_from_obj(obj: dict):
    from .proofs import Proof

    if obj.get("format") != PROOF_FORMAT:
        raise ParseError(0, "not a proof file")
    if obj.get("version") != FORMAT_VERSION:
        raise ParseError(0, f"unsupported proof format version {obj.get('version')!r}")

    def data_from(d: dict) -> dict:
        out = {}
        for k, v in d.items():
            if k in ("left_idx", "right_idx", "left", "right", "idx"):
                out[k] = int(v)
            elif k == "witness":
                out[k] = parse_lf(v)
            elif k == "P":
                out[k] = parse_formula(v)
            elif k in ("x", "y"):
                out[k] = v
            elif k == "p":
                out[k] = parse_poly(v)
            elif k == "sum_witness":
                out[k] = {int(i): (parse_formula(b), binder) for i, (b, binder) in v.items()}
        return out

    def node(x) -> Proof:
        return Proof(
            x["rule"],
            tuple(parse_lf(s) for s in x["sequent"]),
            tuple(node(q) for q in x.get("premises", [])),
            data_from(x.get("data", {})),
        )

    return node(obj["tree"])
