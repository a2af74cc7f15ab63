"""Sparse multivariate polynomials over Gaussian rationals or complex floats.

The coefficient kind is a property of the whole polynomial ("exact" or
"approx") and never mixes.  Rational scalars (change-of-variable matrices,
pole-normalization factors) may multiply either kind; they are lifted into
the polynomial's own field first.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

from .field import GaussianRational
from .linform import LinearForm

Exponent = tuple[int, ...]

EXACT = "exact"
APPROX = "approx"


def _coeff_kind(c) -> str:
    if isinstance(c, GaussianRational):
        return EXACT
    if isinstance(c, (complex, float)):
        return APPROX
    if isinstance(c, (int, Fraction)):
        return EXACT
    raise TypeError(f"unsupported coefficient type {type(c).__name__}")


def _lift(c, kind: str):
    if kind == EXACT:
        if isinstance(c, GaussianRational):
            return c
        return GaussianRational(c)
    if isinstance(c, complex):
        return c
    if isinstance(c, GaussianRational):
        return complex(c)
    return complex(c)


def _is_zero(c) -> bool:
    return not c if isinstance(c, GaussianRational) else c == 0


class Poly:
    """A polynomial in p variables with sparse term storage."""

    __slots__ = ("p", "kind", "terms")

    def __init__(self, p: int, terms: Mapping[Exponent, object], kind: str | None = None) -> None:
        if kind is None:
            kind = EXACT
            for c in terms.values():
                kind = _coeff_kind(c)
                break
        clean: dict[Exponent, object] = {}
        for e, c in terms.items():
            if len(e) != p:
                raise ValueError("exponent length does not match p")
            c = _lift(c, kind)
            if _is_zero(c):
                continue
            clean[tuple(int(x) for x in e)] = c
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "terms", clean)

    def __setattr__(self, name, value):  # pragma: no cover - guard
        raise AttributeError("Poly is immutable")

    # -- constructors --------------------------------------------------

    @classmethod
    def zero(cls, p: int, kind: str = EXACT) -> "Poly":
        return cls(p, {}, kind)

    @classmethod
    def const(cls, p: int, c, kind: str | None = None) -> "Poly":
        if kind is None:
            kind = _coeff_kind(c)
        return cls(p, {(0,) * p: c}, kind)

    @classmethod
    def variable(cls, p: int, j: int, kind: str = EXACT) -> "Poly":
        e = [0] * p
        e[j] = 1
        return cls(p, {tuple(e): 1 if kind == EXACT else 1.0 + 0j}, kind)

    @classmethod
    def from_form(cls, form: LinearForm, kind: str = EXACT) -> "Poly":
        p = form.p
        terms: dict[Exponent, object] = {}
        for j, a in enumerate(form.coeffs):
            if a:
                e = [0] * p
                e[j] = 1
                terms[tuple(e)] = a if kind == EXACT else complex(a)
        return cls(p, terms, kind)

    # -- predicates -----------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return all(all(x == 0 for x in e) for e in self.terms)

    def constant_term(self):
        zero = (0,) * self.p
        c = self.terms.get(zero)
        if c is None:
            return GaussianRational(0) if self.kind == EXACT else 0j
        return c

    def total_degree(self) -> int:
        return max((sum(e) for e in self.terms), default=0)

    def degree_in(self, j: int) -> int:
        return max((e[j] for e in self.terms), default=0)

    def variables_used(self) -> frozenset[int]:
        used = set()
        for e in self.terms:
            for j, x in enumerate(e):
                if x:
                    used.add(j)
        return frozenset(used)

    def is_homogeneous(self) -> bool:
        degs = {sum(e) for e in self.terms}
        return len(degs) <= 1

    # -- arithmetic -----------------------------------------------------

    def _check(self, other: "Poly") -> None:
        if self.p != other.p:
            raise ValueError("variable counts differ")
        if self.kind != other.kind:
            raise ValueError("cannot mix exact and approximate coefficients")

    def __add__(self, other: "Poly") -> "Poly":
        self._check(other)
        terms = dict(self.terms)
        for e, c in other.terms.items():
            if e in terms:
                s = terms[e] + c
                if _is_zero(s):
                    del terms[e]
                else:
                    terms[e] = s
            else:
                terms[e] = c
        return Poly(self.p, terms, self.kind)

    def __sub__(self, other: "Poly") -> "Poly":
        return self + (-other)

    def __neg__(self) -> "Poly":
        return Poly(self.p, {e: -c for e, c in self.terms.items()}, self.kind)

    def __mul__(self, other: "Poly") -> "Poly":
        self._check(other)
        terms: dict[Exponent, object] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                c = c1 * c2
                if e in terms:
                    s = terms[e] + c
                    if _is_zero(s):
                        del terms[e]
                    else:
                        terms[e] = s
                elif not _is_zero(c):
                    terms[e] = c
        return Poly(self.p, terms, self.kind)

    def __pow__(self, n: int) -> "Poly":
        if n < 0:
            raise ValueError("negative power of a polynomial")
        result = Poly.const(self.p, 1 if self.kind == EXACT else 1.0 + 0j, self.kind)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base if n > 1 else base
            n >>= 1
        return result

    def scale(self, c) -> "Poly":
        """Multiply by a scalar; rational scalars lift into either field."""
        c = _lift(c, self.kind)
        if _is_zero(c):
            return Poly.zero(self.p, self.kind)
        return Poly(self.p, {e: v * c for e, v in self.terms.items()}, self.kind)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Poly)
            and self.p == other.p
            and self.kind == other.kind
            and self.terms == other.terms
        )

    def __hash__(self) -> int:
        return hash((self.p, self.kind, frozenset(self.terms.items())))

    # -- evaluation and substitution -------------------------------------

    def eval(self, point: Sequence) -> object:
        """Evaluate at a point; exact when coefficients and point are exact."""
        if len(point) != self.p:
            raise ValueError("point length does not match p")
        total = None
        for e, c in self.terms.items():
            val = c
            for j, k in enumerate(e):
                for _ in range(k):
                    val = val * point[j]
            total = val if total is None else total + val
        if total is None:
            return GaussianRational(0) if self.kind == EXACT else 0j
        return total

    def eval_complex(self, point: Sequence[complex]) -> complex:
        total = 0j
        for e, c in self.terms.items():
            val = complex(c)
            for j, k in enumerate(e):
                if k:
                    val *= point[j] ** k
            total += val
        return total

    def substitute(self, images: Sequence["Poly"]) -> "Poly":
        """Compose: substitute images[j] for variable j.

        All images must share a common variable count and the polynomial's
        coefficient kind.
        """
        if len(images) != self.p:
            raise ValueError("need one image per variable")
        q = images[0].p if images else self.p
        power_cache: dict[tuple[int, int], Poly] = {}

        def power(j: int, k: int) -> Poly:
            key = (j, k)
            if key not in power_cache:
                if k == 0:
                    power_cache[key] = Poly.const(q, 1 if self.kind == EXACT else 1.0 + 0j, self.kind)
                else:
                    power_cache[key] = power(j, k - 1) * images[j]
            return power_cache[key]

        total = Poly.zero(q, self.kind)
        for e, c in self.terms.items():
            term = Poly.const(q, c, self.kind)
            for j, k in enumerate(e):
                if k:
                    term = term * power(j, k)
            total = total + term
        return total

    def divide_by_form(self, form: LinearForm) -> "Poly | None":
        """Exact quotient by a linear form, or None when not divisible."""
        if form.p != self.p:
            raise ValueError("form length does not match p")
        if self.is_zero():
            return self
        j = next(i for i, a in enumerate(form.coeffs) if a != 0)
        cj = form.coeffs[j]
        rem = dict(self.terms)
        quot: dict[Exponent, object] = {}
        deg = max((e[j] for e in rem), default=0)
        for d in range(deg, 0, -1):
            layer = [(e, c) for e, c in rem.items() if e[j] == d]
            for e, c in layer:
                qc = c / cj if self.kind == EXACT else c / complex(cj)
                qe = tuple(x - (1 if i == j else 0) for i, x in enumerate(e))
                quot[qe] = quot.get(qe, _lift(0, self.kind)) + qc
                for i, a in enumerate(form.coeffs):
                    if a == 0:
                        continue
                    se = tuple(x + (1 if ii == i else 0) for ii, x in enumerate(qe))
                    sub = qc * a if self.kind == EXACT else qc * complex(a)
                    cur = rem.get(se, _lift(0, self.kind)) - sub
                    if _is_zero(cur):
                        rem.pop(se, None)
                    else:
                        rem[se] = cur
        if rem:
            return None
        return Poly(self.p, quot, self.kind)

    # -- conversions ------------------------------------------------------

    def to_approx(self) -> "Poly":
        if self.kind == APPROX:
            return self
        return Poly(self.p, {e: complex(c) for e, c in self.terms.items()}, APPROX)

    def map_coeffs(self, fn: Callable) -> "Poly":
        return Poly(self.p, {e: fn(c) for e, c in self.terms.items()}, self.kind)

    def embed(self, p_new: int, offset: int = 0) -> "Poly":
        if offset + self.p > p_new:
            raise ValueError("embedding does not fit")
        terms = {}
        for e, c in self.terms.items():
            ee = [0] * p_new
            for j, x in enumerate(e):
                ee[offset + j] = x
            terms[tuple(ee)] = c
        return Poly(p_new, terms, self.kind)

    def max_abs_coeff(self) -> float:
        best = 0.0
        for c in self.terms.values():
            mag = abs(complex(c))
            if mag > best:
                best = mag
        return best

    # -- ordering and printing ---------------------------------------------

    def sorted_terms(self) -> list[tuple[Exponent, object]]:
        """Terms in degree-then-lex order (ascending), stable for printing."""
        return sorted(self.terms.items(), key=lambda item: (sum(item[0]), item[0]))

    def __repr__(self) -> str:
        return f"Poly(p={self.p}, {dict(self.sorted_terms())!r})"


def poly_product(p: int, factors: Iterable[tuple[LinearForm, int]], kind: str = EXACT) -> Poly:
    """Expand prod L_i^{s_i} as a polynomial."""
    acc = Poly.const(p, 1 if kind == EXACT else 1.0 + 0j, kind)
    for form, s in factors:
        acc = acc * (Poly.from_form(form, kind) ** s)
    return acc
