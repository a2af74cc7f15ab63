"""Meromorphic germs with linear poles and the projection onto holomorphic parts.

A germ at center k in Z^p is numerator(z) / prod L_i(z)^{s_i} in the shifted
variable z = lam - k, where every pole form L_i is an integer linear form
(so every pole hyperplane passes through the center).  The projection splits
a germ into a holomorphic polynomial part plus polar terms whose numerators
live purely in coordinates Q-orthogonal to their pole span; that split is the
direct-sum decomposition, and the holomorphic part is the projection's value.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from ..errors import OnPoleHyperplaneError
from .field import GaussianRational
from .linform import (
    LinearForm,
    dependence_relation,
    form_rank,
    invert_matrix,
    orth_complement,
)
from .poly import APPROX, EXACT, Poly, poly_product

Poles = tuple[tuple[LinearForm, int], ...]


def _canonical_poles(poles: Mapping[LinearForm, int] | Sequence[tuple[LinearForm, int]]) -> Poles:
    merged: dict[LinearForm, int] = {}
    items = poles.items() if isinstance(poles, Mapping) else poles
    for form, s in items:
        s = int(s)
        if s < 0:
            raise ValueError("pole power must be >= 1")
        if s == 0:
            continue
        merged[form] = merged.get(form, 0) + s
    return tuple(sorted(merged.items(), key=lambda item: item[0].coeffs))


class MeroGerm:
    """An element of the algebra of meromorphic germs with linear poles."""

    __slots__ = ("p", "center", "num", "poles")

    def __init__(
        self,
        p: int,
        center: Sequence[int],
        num: Poly,
        poles: Mapping[LinearForm, int] | Sequence[tuple[LinearForm, int]] = (),
        reduce: bool = True,
    ) -> None:
        if num.p != p:
            raise ValueError("numerator variable count does not match p")
        center_t = tuple(int(c) for c in center)
        if len(center_t) != p:
            raise ValueError("center length does not match p")
        pole_t = _canonical_poles(poles)
        for form, _ in pole_t:
            if form.p != p:
                raise ValueError("pole form length does not match p")
        if num.is_zero():
            pole_t = ()
        elif reduce and num.kind == EXACT and pole_t:
            num, pole_t = _cancel_common_factors(num, pole_t)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "center", center_t)
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "poles", pole_t)

    def __setattr__(self, name, value):  # pragma: no cover - guard
        raise AttributeError("MeroGerm is immutable")

    # -- constructors ---------------------------------------------------

    @classmethod
    def zero(cls, p: int, center: Sequence[int] | None = None, kind: str = EXACT) -> "MeroGerm":
        return cls(p, center if center is not None else (0,) * p, Poly.zero(p, kind))

    @classmethod
    def const(cls, p: int, value, center: Sequence[int] | None = None) -> "MeroGerm":
        return cls(p, center if center is not None else (0,) * p, Poly.const(p, value))

    # -- structure ------------------------------------------------------

    @property
    def kind(self) -> str:
        return self.num.kind

    def pole_dict(self) -> dict[LinearForm, int]:
        return dict(self.poles)

    def is_holomorphic(self) -> bool:
        return not self.poles

    def is_zero(self) -> bool:
        return self.num.is_zero()

    def variables_used(self) -> frozenset[int]:
        used = set(self.num.variables_used())
        for form, _ in self.poles:
            used |= form.support()
        return frozenset(used)

    def total_pole_order(self) -> int:
        return sum(s for _, s in self.poles)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, MeroGerm)
            and self.p == other.p
            and self.center == other.center
            and self.poles == other.poles
            and self.num == other.num
        )

    def __hash__(self) -> int:
        return hash((self.p, self.center, self.poles, self.num))

    def __repr__(self) -> str:
        return f"MeroGerm({self.to_text()!r}, center={self.center})"

    # -- ring operations --------------------------------------------------

    def _check(self, other: "MeroGerm") -> None:
        if self.p != other.p:
            raise ValueError("variable counts differ (embed into a union variable set first)")
        if self.center != other.center:
            raise ValueError("centers differ")

    def __mul__(self, other: "MeroGerm") -> "MeroGerm":
        self._check(other)
        poles: dict[LinearForm, int] = self.pole_dict()
        for form, s in other.poles:
            poles[form] = poles.get(form, 0) + s
        return MeroGerm(self.p, self.center, self.num * other.num, poles)

    def __add__(self, other: "MeroGerm") -> "MeroGerm":
        self._check(other)
        mine = self.pole_dict()
        theirs = other.pole_dict()
        union = {form: max(mine.get(form, 0), theirs.get(form, 0)) for form in {*mine, *theirs}}
        kind = self.num.kind
        lift1 = poly_product(self.p, [(f, union[f] - mine.get(f, 0)) for f in union], kind)
        lift2 = poly_product(self.p, [(f, union[f] - theirs.get(f, 0)) for f in union], kind)
        num = self.num * lift1 + other.num * lift2
        return MeroGerm(self.p, self.center, num, union)

    def __sub__(self, other: "MeroGerm") -> "MeroGerm":
        return self + (-other)

    def __neg__(self) -> "MeroGerm":
        return MeroGerm(self.p, self.center, -self.num, self.poles, reduce=False)

    def scale(self, c) -> "MeroGerm":
        scaled = self.num.scale(c)
        if scaled.is_zero():
            return MeroGerm.zero(self.p, self.center, self.kind)
        return MeroGerm(self.p, self.center, scaled, self.poles, reduce=False)

    def embed(self, p_new: int, offset: int = 0) -> "MeroGerm":
        """Re-index into a larger variable set (new variables are spectators)."""
        center = [0] * p_new
        for j, c in enumerate(self.center):
            center[offset + j] = c
        poles = [(form.embed(p_new, offset), s) for form, s in self.poles]
        return MeroGerm(p_new, center, self.num.embed(p_new, offset), poles, reduce=False)

    # -- evaluation ---------------------------------------------------------

    def eval(self, lam: Sequence, guard: float = 1e-12) -> complex:
        """Evaluate at a point of C^p, guarding against pole hyperplanes."""
        z = [complex(x) - c for x, c in zip(lam, self.center)]
        den = 1.0 + 0j
        for form, s in self.poles:
            val = complex(form(z))
            if abs(val) <= guard:
                raise OnPoleHyperplaneError(f"on pole hyperplane {form}")
            den *= val**s
        return self.num.eval_complex(z) / den

    def eval_exact(self, lam: Sequence[Fraction | int]) -> GaussianRational:
        """Exact evaluation at a rational point (exact field only)."""
        if self.kind != EXACT:
            raise ValueError("exact evaluation requires the exact field")
        z = [Fraction(x) - c for x, c in zip(lam, self.center)]
        den = GaussianRational(1)
        for form, s in self.poles:
            val = form(z)
            if val == 0:
                raise OnPoleHyperplaneError(f"on pole hyperplane {form}")
            den = den * GaussianRational(val) ** s
        num = self.num.eval(z)
        if not isinstance(num, GaussianRational):
            num = GaussianRational(num)
        return num / den

    # -- text form ------------------------------------------------------------

    def to_text(self) -> str:
        from .parse import germ_to_text

        return germ_to_text(self)


def independent(g1: MeroGerm, g2: MeroGerm) -> bool:
    """True iff the germs use disjoint sets of variable indices."""
    return not (g1.variables_used() & g2.variables_used())


def _cancel_common_factors(num: Poly, poles: Poles) -> tuple[Poly, Poles]:
    out: list[tuple[LinearForm, int]] = []
    for form, s in poles:
        while s > 0:
            q = num.divide_by_form(form)
            if q is None:
                break
            num = q
            s -= 1
        if s > 0:
            out.append((form, s))
    return num, tuple(out)


# -- reduction to independent pole sets -------------------------------------


def reduce_dependent(g: MeroGerm, max_steps: int = 100_000) -> list[MeroGerm]:
    """Rewrite a germ as a sum of germs with linearly independent pole sets.

    Repeatedly applies the partial-fraction rewrite
    1 = -sum_{i != i0} (c_i / c_i0) L_i / L_i0 for a dependence relation
    sum c_i L_i = 0, with pivot i0 the form of largest exponent (ties broken
    by the canonical form order).  The relation's off-pivot total exponent
    drops by one per application, so the loop terminates.
    """
    if g.kind != EXACT:
        raise ValueError("reduce_dependent requires the exact field")
    work = [g]
    done: list[MeroGerm] = []
    steps = 0
    while work:
        cur = work.pop()
        if cur.is_zero():
            continue
        forms = [form for form, _ in cur.poles]
        relation = dependence_relation(forms)
        if relation is None:
            done.append(cur)
            continue
        steps += 1
        if steps > max_steps:
            raise RuntimeError("reduce_dependent exceeded the step budget")
        powers = dict(cur.poles)
        pivot = max(relation, key=lambda i: (powers[forms[i]], forms[i].coeffs))
        c0 = relation[pivot]
        for i, ci in relation.items():
            if i == pivot:
                continue
            new_poles = dict(cur.poles)
            new_poles[forms[i]] -= 1
            new_poles[forms[pivot]] += 1
            work.append(
                MeroGerm(cur.p, cur.center, cur.num.scale(-ci / c0), new_poles, reduce=False)
            )
    merged: dict[Poles, MeroGerm] = {}
    order: list[Poles] = []
    for germ in done:
        key = germ.poles
        if key in merged:
            existing = merged[key]
            merged[key] = MeroGerm(
                germ.p, germ.center, existing.num + germ.num, germ.poles, reduce=False
            )
        else:
            merged[key] = germ
            order.append(key)
    out = [merged[k] for k in order if not merged[k].is_zero()]
    return out if out else [MeroGerm.zero(g.p, g.center, g.kind)]


# -- the projection ----------------------------------------------------------


@dataclass(frozen=True)
class PolarTerm:
    """numerator(ell) / prod L_i^{s_i} with numerator in complement coordinates.

    ``ell_basis`` lists the Q-orthogonal complement forms of the parent pole
    span; the numerator is a polynomial in those coordinates only, which is
    what keeps the singular space transverse to the holomorphic one.
    """

    p: int
    center: tuple[int, ...]
    ell_basis: tuple[LinearForm, ...]
    num: Poly
    poles: Poles

    def eval(self, lam: Sequence, guard: float = 1e-12) -> complex:
        z = [complex(x) - c for x, c in zip(lam, self.center)]
        den = 1.0 + 0j
        for form, s in self.poles:
            val = complex(form(z))
            if abs(val) <= guard:
                raise OnPoleHyperplaneError(f"on pole hyperplane {form}")
            den *= val**s
        ell_vals = [complex(form(z)) for form in self.ell_basis]
        return self.num.eval_complex(ell_vals) / den

    def as_germ(self) -> MeroGerm:
        if self.ell_basis:
            images = [Poly.from_form(f, EXACT) for f in self.ell_basis]
            if self.num.kind == APPROX:
                images = [im.to_approx() for im in images]
            num_z = self.num.substitute(images)
        else:
            num_z = Poly.const(self.p, self.num.constant_term(), self.num.kind)
        return MeroGerm(self.p, self.center, num_z, self.poles, reduce=False)

    def max_abs_coeff(self) -> float:
        return self.num.max_abs_coeff()


@dataclass(frozen=True)
class Decomposition:
    """Result of the projection: germ = sum(singular) + holomorphic."""

    p: int
    center: tuple[int, ...]
    kind: str
    singular: tuple[PolarTerm, ...]
    holomorphic: Poly

    def eval(self, lam: Sequence, guard: float = 1e-12) -> complex:
        z = [complex(x) - c for x, c in zip(lam, self.center)]
        total = self.holomorphic.eval_complex(z)
        for term in self.singular:
            total += term.eval(lam, guard)
        return total

    def holomorphic_value_at_center(self) -> complex:
        return complex(self.holomorphic.constant_term())

    def holomorphic_germ(self) -> MeroGerm:
        return MeroGerm(self.p, self.center, self.holomorphic, (), reduce=False)

    def reassemble(self) -> MeroGerm:
        total = MeroGerm(self.p, self.center, self.holomorphic, (), reduce=False)
        for term in self.singular:
            total = total + term.as_germ()
        return total

    def max_singular_coeff(self) -> float:
        return max((t.max_abs_coeff() for t in self.singular), default=0.0)

    def to_json(self) -> dict:
        return decomposition_to_json(self)

    def to_json_text(self, **kwargs) -> str:
        return json.dumps(self.to_json(), **kwargs)


def project_pi(g: MeroGerm) -> Decomposition:
    """Split a germ into polar terms plus its holomorphic part.

    The numerator is rewritten in coordinates (L_1..L_m, ell_{m+1}..ell_p)
    where the ell-forms span the Q-orthogonal complement of the pole span.
    Monomials that cover every pole power are holomorphic; monomials that
    cover some pole fully while leaving another are re-split recursively; the
    rest land in polar terms with numerators purely in ell-coordinates.
    """
    if g.kind == EXACT:
        parts = reduce_dependent(g)
    else:
        forms = [form for form, _ in g.poles]
        if forms and form_rank(forms) < len(forms):
            raise ValueError("approximate germs must have independent pole forms")
        parts = [g]
    singular: list[PolarTerm] = []
    holo = Poly.zero(g.p, g.kind)
    for part in parts:
        s_terms, h = _project_independent(part.num, list(part.poles), g.p, g.center)
        singular.extend(s_terms)
        holo = holo + h
    return Decomposition(g.p, g.center, g.kind, tuple(singular), holo)


def _project_independent(
    num: Poly,
    poles: list[tuple[LinearForm, int]],
    p: int,
    center: tuple[int, ...],
) -> tuple[list[PolarTerm], Poly]:
    kind = num.kind
    if num.is_zero():
        return [], Poly.zero(p, kind)
    if not poles:
        return [], num
    poles = sorted(poles, key=lambda item: item[0].coeffs)
    forms = [form for form, _ in poles]
    powers = [s for _, s in poles]
    m = len(forms)
    ell = orth_complement(forms, p)
    rows = [list(f.coeffs) for f in forms] + [list(l.coeffs) for l in ell]
    ainv = invert_matrix(rows)

    # z_j expressed in the w = (L, ell) coordinates
    images = []
    for j in range(p):
        terms = {}
        for k in range(p):
            if ainv[j][k] != 0:
                e = [0] * p
                e[k] = 1
                terms[tuple(e)] = ainv[j][k]
        img = Poly(p, terms, EXACT)
        images.append(img.to_approx() if kind == APPROX else img)
    h_w = num.substitute(images)

    singular: list[PolarTerm] = []
    holo_z = Poly.zero(p, kind)
    holo_w: dict[tuple[int, ...], object] = {}
    polar_groups: dict[tuple[int, ...], dict[tuple[int, ...], object]] = {}

    for beta, coeff in h_w.terms.items():
        beta_l = beta[:m]
        beta_e = beta[m:]
        if all(beta_l[i] >= powers[i] for i in range(m)):
            carry = tuple(beta_l[i] - powers[i] for i in range(m)) + beta_e
            if carry in holo_w:
                holo_w[carry] = holo_w[carry] + coeff
            else:
                holo_w[carry] = coeff
        elif any(beta_l[i] > powers[i] for i in range(m)):
            sub_num = Poly.const(p, coeff, kind)
            for i in range(m):
                if beta_l[i] > powers[i]:
                    sub_num = sub_num * (_form_poly(forms[i], kind) ** (beta_l[i] - powers[i]))
            for j, bj in enumerate(beta_e):
                if bj:
                    sub_num = sub_num * (_form_poly(ell[j], kind) ** bj)
            sub_poles = [
                (forms[i], powers[i] - beta_l[i]) for i in range(m) if beta_l[i] < powers[i]
            ]
            s_terms, h = _project_independent(sub_num, sub_poles, p, center)
            singular.extend(s_terms)
            holo_z = holo_z + h
        else:
            residual = tuple(powers[i] - beta_l[i] for i in range(m))
            group = polar_groups.setdefault(residual, {})
            if beta_e in group:
                group[beta_e] = group[beta_e] + coeff
            else:
                group[beta_e] = coeff

    for residual in sorted(polar_groups):
        num_e = Poly(p - m, polar_groups[residual], kind)
        if num_e.is_zero():
            continue
        sub_poles = tuple((forms[i], residual[i]) for i in range(m) if residual[i] > 0)
        singular.append(PolarTerm(p, center, tuple(ell), num_e, sub_poles))

    if holo_w:
        back = [_form_poly(f, kind) for f in forms] + [_form_poly(l, kind) for l in ell]
        holo_z = holo_z + Poly(p, holo_w, kind).substitute(back)
    return singular, holo_z


def _form_poly(form: LinearForm, kind: str) -> Poly:
    poly = Poly.from_form(form, EXACT)
    return poly.to_approx() if kind == APPROX else poly


# -- serialization ------------------------------------------------------------


def _coeff_to_json(c, kind: str) -> list:
    if kind == EXACT:
        g = c if isinstance(c, GaussianRational) else GaussianRational(c)
        return [str(g.re), str(g.im)]
    z = complex(c)
    return [z.real, z.imag]


def _poly_to_json(poly: Poly) -> dict:
    return {
        "terms": [[list(e), _coeff_to_json(c, poly.kind)] for e, c in poly.sorted_terms()]
    }


def decomposition_to_json(d: Decomposition) -> dict:
    singular = []
    for term in d.singular:
        singular.append(
            {
                "numerator": {
                    "vars": [list(f.coeffs) for f in term.ell_basis],
                    **_poly_to_json(term.num),
                },
                "poles": [[list(f.coeffs), s] for f, s in term.poles],
            }
        )
    return {
        "p": d.p,
        "center": list(d.center),
        "field": d.kind,
        "singular": singular,
        "holomorphic": _poly_to_json(d.holomorphic),
    }


def germ_to_json(g: MeroGerm) -> dict:
    return {
        "p": g.p,
        "center": list(g.center),
        "field": g.kind,
        "numerator": _poly_to_json(g.num),
        "poles": [[list(f.coeffs), s] for f, s in g.poles],
    }
