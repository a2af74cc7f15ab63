"""Text form of germs: parser and canonical printer.

Grammar (EBNF)::

    expr     = term , { ("+" | "-") , term } ;
    term     = unary , { ("*" | "/") , unary } ;
    unary    = ("+" | "-") , unary | power ;
    power    = atom , [ ("^" | "**") , [ "-" ] , digits ] ;
    atom     = number | "i" | variable | "(" , expr , ")" ;
    number   = digits , [ "." , digits ] ;
    variable = "l" , digits ;           (* 1-based index, 1..p *)

Coefficients are exact Gaussian rationals ("i" is the imaginary unit; decimal
literals are read as exact fractions).  Division distributes over the
divisor's syntactic products, powers and quotients; every remaining divisor
must expand to a constant times a power of a single linear form, otherwise
the pole is not linear and parsing fails.  ``germ_to_text`` produces a
canonical string that parses back to an equal germ (exact field).
"""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence

from ..errors import GermParseError, NonlinearPoleError
from .field import GaussianRational
from .germ import MeroGerm
from .linform import LinearForm, normalize_form
from .poly import APPROX, EXACT, Poly, poly_product

# -- tokenizer ----------------------------------------------------------------

_SIMPLE = {"+": "+", "-": "-", "*": "*", "/": "/", "^": "^", "(": "(", ")": ")"}
_ALIASES = {"−": "-", "·": "*", "⋅": "*"}


def _tokenize(text: str) -> list[tuple[str, object, int]]:
    tokens: list[tuple[str, object, int]] = []
    i, n = 0, len(text)
    while i < n:
        ch = _ALIASES.get(text[i], text[i])
        if ch in " \t\r\n":
            i += 1
            continue
        if ch == "*" and i + 1 < n and text[i + 1] == "*":
            tokens.append(("^", "^", i))
            i += 2
            continue
        if ch in _SIMPLE:
            tokens.append((_SIMPLE[ch], ch, i))
            i += 1
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            if j < n and text[j] == "." and j + 1 < n and text[j + 1].isdigit():
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
            tokens.append(("number", Fraction(text[i:j]), i))
            i = j
            continue
        if ch == "l" and i + 1 < n and text[i + 1].isdigit():
            j = i + 1
            while j < n and text[j].isdigit():
                j += 1
            tokens.append(("var", int(text[i + 1 : j]), i))
            i = j
            continue
        if ch == "i" and (i + 1 >= n or not text[i + 1].isalnum()):
            tokens.append(("imag", None, i))
            i += 1
            continue
        raise GermParseError(f"unexpected character {text[i]!r}", i)
    tokens.append(("end", None, n))
    return tokens


# -- syntax tree ---------------------------------------------------------------
# Nodes are tuples (tag, ..., pos): ("num", Fraction, pos), ("imag", pos),
# ("var", index, pos), ("neg", node, pos), ("add"|"sub"|"mul"|"div", l, r, pos),
# ("pow", node, exponent, pos).


class _Parser:
    def __init__(self, text: str, p: int) -> None:
        self.text = text
        self.p = p
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> tuple[str, object, int]:
        return self.tokens[self.i]

    def next(self) -> tuple[str, object, int]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, kind: str) -> tuple[str, object, int]:
        tok = self.next()
        if tok[0] != kind:
            raise GermParseError(f"expected {kind!r}, found {tok[0]!r}", tok[2])
        return tok

    def parse(self):
        node = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise GermParseError(f"unexpected trailing {tok[0]!r}", tok[2])
        return node

    def expr(self):
        node = self.term()
        while self.peek()[0] in ("+", "-"):
            op, _, pos = self.next()
            rhs = self.term()
            node = ("add" if op == "+" else "sub", node, rhs, pos)
        return node

    def term(self):
        node = self.unary()
        while self.peek()[0] in ("*", "/"):
            op, _, pos = self.next()
            rhs = self.unary()
            node = ("mul" if op == "*" else "div", node, rhs, pos)
        return node

    def unary(self):
        tok = self.peek()
        if tok[0] in ("+", "-"):
            self.next()
            inner = self.unary()
            return inner if tok[0] == "+" else ("neg", inner, tok[2])
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "^":
            _, _, pos = self.next()
            sign = 1
            if self.peek()[0] == "-":
                self.next()
                sign = -1
            tok = self.expect("number")
            if tok[1].denominator != 1:
                raise GermParseError("exponent must be an integer", tok[2])
            n = sign * int(tok[1])
            if n < 0:
                return ("div", ("num", Fraction(1), pos), ("pow", base, -n, pos), pos)
            return ("pow", base, n, pos)
        return base

    def atom(self):
        tok = self.next()
        kind, value, pos = tok
        if kind == "number":
            return ("num", value, pos)
        if kind == "imag":
            return ("imag", pos)
        if kind == "var":
            if not 1 <= value <= self.p:
                raise GermParseError(f"variable l{value} out of range 1..{self.p}", pos)
            return ("var", value - 1, pos)
        if kind == "(":
            node = self.expr()
            self.expect(")")
            return node
        raise GermParseError(f"unexpected {kind!r}", pos)


# -- evaluation into numerator/pole form ---------------------------------------


class _Val:
    """A rational value numerator / prod(pole_form^power) during evaluation."""

    __slots__ = ("num", "poles")

    def __init__(self, num: Poly, poles: dict[LinearForm, int] | None = None) -> None:
        self.num = num
        self.poles = poles or {}

    def mul(self, other: "_Val") -> "_Val":
        poles = dict(self.poles)
        for f, s in other.poles.items():
            poles[f] = poles.get(f, 0) + s
        return _Val(self.num * other.num, poles)

    def add(self, other: "_Val", negate: bool = False) -> "_Val":
        union = {
            f: max(self.poles.get(f, 0), other.poles.get(f, 0))
            for f in {*self.poles, *other.poles}
        }
        p = self.num.p
        lift1 = poly_product(p, [(f, s - self.poles.get(f, 0)) for f, s in union.items()])
        lift2 = poly_product(p, [(f, s - other.poles.get(f, 0)) for f, s in union.items()])
        rhs = other.num * lift2
        num = self.num * lift1 + (-rhs if negate else rhs)
        return _Val(num, union)

    def pow(self, n: int) -> "_Val":
        if n == 0:
            return _Val(Poly.const(self.num.p, GaussianRational(1)))
        return _Val(self.num**n, {f: s * n for f, s in self.poles.items()})

    def scale(self, c: GaussianRational) -> "_Val":
        return _Val(self.num.scale(c), dict(self.poles))


def _eval_node(node, p: int) -> _Val:
    tag = node[0]
    if tag == "num":
        return _Val(Poly.const(p, GaussianRational(node[1])))
    if tag == "imag":
        return _Val(Poly.const(p, GaussianRational(0, 1)))
    if tag == "var":
        return _Val(Poly.variable(p, node[1]))
    if tag == "neg":
        return _eval_node(node[1], p).scale(GaussianRational(-1))
    if tag == "add":
        return _eval_node(node[1], p).add(_eval_node(node[2], p))
    if tag == "sub":
        return _eval_node(node[1], p).add(_eval_node(node[2], p), negate=True)
    if tag == "mul":
        return _eval_node(node[1], p).mul(_eval_node(node[2], p))
    if tag == "pow":
        return _eval_node(node[1], p).pow(node[2])
    if tag == "div":
        return _apply_divisor(_eval_node(node[1], p), node[2], p)
    raise AssertionError(f"unknown node {tag}")


def _apply_divisor(val: _Val, node, p: int) -> _Val:
    """Divide ``val`` by the expression ``node``, distributing over structure."""
    tag = node[0]
    if tag == "mul":
        return _apply_divisor(_apply_divisor(val, node[1], p), node[2], p)
    if tag == "pow":
        out = val
        for _ in range(node[2]):
            out = _apply_divisor(out, node[1], p)
        return out
    if tag == "div":
        return _apply_divisor(val.mul(_eval_node(node[2], p)), node[1], p)
    if tag == "neg":
        return _apply_divisor(val, node[1], p).scale(GaussianRational(-1))
    divisor = _eval_node(node, p)
    pos = node[-1]
    if divisor.num.is_zero():
        raise GermParseError("division by zero", pos)
    # val / (num2 / prod L^s2) = val * prod L^s2 / num2
    if divisor.poles:
        val = val.mul(_Val(poly_product(p, list(divisor.poles.items()))))
    return _divide_by_poly(val, divisor.num, pos)


def _divide_by_poly(val: _Val, divisor: Poly, pos: int) -> _Val:
    if divisor.is_constant():
        c = divisor.constant_term()
        return val.scale(GaussianRational(1) / c)
    recognized = _as_const_form_power(divisor)
    if recognized is None:
        raise NonlinearPoleError(
            "nonlinear pole: divisor is not a constant times a power of a linear form", pos
        )
    c, form, d = recognized
    poles = dict(val.poles)
    poles[form] = poles.get(form, 0) + d
    return _Val(val.num.scale(GaussianRational(1) / c), poles)


def _as_const_form_power(poly: Poly) -> tuple[GaussianRational, LinearForm, int] | None:
    """Recognize poly == c * L^d for a linear form L, or return None."""
    if not poly.is_homogeneous():
        return None
    d = poly.total_degree()
    support = sorted(poly.variables_used())
    j0 = support[0]
    e0 = tuple(d if j == j0 else 0 for j in range(poly.p))
    c0 = poly.terms.get(e0)
    if c0 is None:
        return None
    coeffs = [Fraction(0)] * poly.p
    coeffs[j0] = Fraction(1)
    for k in support[1:]:
        e = tuple((d - 1 if j == j0 else 0) + (1 if j == k else 0) for j in range(poly.p))
        ck = poly.terms.get(e)
        if ck is None:
            return None
        ratio = ck / (d * c0)
        if not ratio.is_real_rational():
            return None
        coeffs[k] = ratio.re
    form, scale = normalize_form(coeffs)
    base = Poly.from_form(form) ** d
    a0 = base.terms.get(e0)
    c = c0 / a0
    if base.scale(c) == poly:
        return c, form, d
    return None


# -- public API -----------------------------------------------------------------


def parse_germ(text: str, p: int, center: Sequence[int] | None = None) -> MeroGerm:
    """Parse a germ expression over variables l1..lp into canonical form."""
    if p < 1:
        raise ValueError("p must be >= 1")
    node = _Parser(text, p).parse()
    val = _eval_node(node, p)
    return MeroGerm(p, center if center is not None else (0,) * p, val.num, val.poles)


def parse_form(text: str, p: int) -> tuple[LinearForm, Fraction]:
    """Parse a linear-form expression; returns (normalized form, scale)."""
    node = _Parser(text, p).parse()
    val = _eval_node(node, p)
    if val.poles or val.num.total_degree() != 1 or not val.num.is_homogeneous():
        raise GermParseError("expression is not a linear form", 0)
    coeffs = [Fraction(0)] * p
    for e, c in val.num.terms.items():
        g = GaussianRational.coerce(c) if not isinstance(c, GaussianRational) else c
        if not g.is_real_rational():
            raise GermParseError("linear form coefficients must be real rationals", 0)
        coeffs[e.index(1)] = g.re
    return normalize_form(coeffs)


# -- canonical printer ------------------------------------------------------------


def _mono_text(e: tuple[int, ...]) -> str:
    parts = [f"l{j + 1}" + (f"^{k}" if k > 1 else "") for j, k in enumerate(e) if k]
    return "*".join(parts)


def _fraction_text(f: Fraction) -> str:
    return str(f)


def _coeff_pieces(c, kind: str) -> tuple[int, str | None]:
    """Return (sign, magnitude text or None for magnitude one)."""
    if kind == EXACT:
        g = c if isinstance(c, GaussianRational) else GaussianRational.coerce(c)
        if g.is_real_rational():
            sign = 1 if g.re > 0 else -1
            mag = abs(g.re)
            return sign, None if mag == 1 else _fraction_text(mag)
        return 1, f"({g})"
    z = complex(c)
    if z.imag == 0.0:
        sign = 1 if z.real >= 0 else -1
        mag = abs(z.real)
        return sign, None if mag == 1.0 else repr(mag)
    op = "+" if z.imag >= 0 else "-"
    return 1, f"({z.real!r}{op}{abs(z.imag)!r}*i)"


def poly_text(poly: Poly) -> str:
    if poly.is_zero():
        return "0"
    out: list[str] = []
    for e, c in poly.sorted_terms():
        sign, mag = _coeff_pieces(c, poly.kind)
        mono = _mono_text(e)
        if mono and mag is not None:
            body = f"{mag}*{mono}"
        elif mono:
            body = mono
        else:
            body = mag if mag is not None else "1"
        if not out:
            out.append(body if sign > 0 else f"-{body}")
        else:
            out.append((" + " if sign > 0 else " - ") + body)
    return "".join(out)


def germ_to_text(g: MeroGerm) -> str:
    """Canonical text; parses back to an equal germ for the exact field."""
    num = poly_text(g.num)
    if not g.poles:
        return num
    den_parts = []
    for form, s in g.poles:
        base = str(form)
        atom = base if base.isalnum() else f"({base})"
        den_parts.append(atom if s == 1 else f"{atom}^{s}")
    return f"({num})/({'*'.join(den_parts)})"
