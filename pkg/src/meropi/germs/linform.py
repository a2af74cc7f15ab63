"""Integer linear forms, the standard inner product Q, and Q-orthogonal complements.

A linear form L(z) = sum_j a_j z_j over p variables is stored as an integer
coefficient tuple, normalized so that gcd(a_j) = 1 and the first nonzero
coefficient is positive.  Two forms describe the same pole hyperplane exactly
when their normalizations coincide; the positive rescaling factor is returned
separately so callers can move it into numerators.
"""

from __future__ import annotations

from fractions import Fraction
from math import gcd
from typing import Iterable, Sequence

Vector = tuple[Fraction, ...]


class LinearForm:
    """A normalized integer linear form over p variables."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Sequence[int]) -> None:
        c = tuple(int(x) for x in coeffs)
        if all(x == 0 for x in c):
            raise ValueError("linear form must not be identically zero")
        g = 0
        for x in c:
            g = gcd(g, abs(x))
        if g != 1:
            raise ValueError("linear form coefficients must have gcd 1 (use normalize)")
        lead = next(x for x in c if x != 0)
        if lead < 0:
            raise ValueError("leading coefficient must be positive (use normalize)")
        object.__setattr__(self, "coeffs", c)

    def __setattr__(self, name, value):  # pragma: no cover - guard
        raise AttributeError("LinearForm is immutable")

    @property
    def p(self) -> int:
        return len(self.coeffs)

    def __eq__(self, other) -> bool:
        return isinstance(other, LinearForm) and self.coeffs == other.coeffs

    def __hash__(self) -> int:
        return hash(self.coeffs)

    def __lt__(self, other: "LinearForm") -> bool:
        return self.coeffs < other.coeffs

    def __call__(self, z: Sequence) -> object:
        """Evaluate at a point (exact for Fraction input, float/complex otherwise)."""
        acc = None
        for a, x in zip(self.coeffs, z):
            if a == 0:
                continue
            term = a * x
            acc = term if acc is None else acc + term
        return 0 if acc is None else acc

    def embed(self, p_new: int, offset: int = 0) -> "LinearForm":
        """Re-index into a larger variable set, shifting indices by ``offset``."""
        if offset + self.p > p_new:
            raise ValueError("embedding does not fit")
        c = [0] * p_new
        for j, a in enumerate(self.coeffs):
            c[offset + j] = a
        return LinearForm(c)

    def support(self) -> frozenset[int]:
        return frozenset(j for j, a in enumerate(self.coeffs) if a != 0)

    def __repr__(self) -> str:
        return f"LinearForm({self.coeffs})"

    def __str__(self) -> str:
        parts = []
        for j, a in enumerate(self.coeffs):
            if a == 0:
                continue
            name = f"l{j + 1}"
            if not parts:
                if a == 1:
                    parts.append(name)
                elif a == -1:
                    parts.append(f"-{name}")
                else:
                    parts.append(f"{a}*{name}")
            else:
                sign = " + " if a > 0 else " - "
                mag = abs(a)
                parts.append(sign + (name if mag == 1 else f"{mag}*{name}"))
        return "".join(parts)


def normalize_form(coeffs: Sequence[Fraction | int]) -> tuple[LinearForm, Fraction]:
    """Normalize a rational coefficient vector.

    Returns (form, scale) with ``coeffs = scale * form.coeffs`` and scale > 0
    whenever possible; a negative leading coefficient flips into the scale.
    """
    fr = [Fraction(x) for x in coeffs]
    if all(x == 0 for x in fr):
        raise ValueError("cannot normalize the zero form")
    den_lcm = 1
    for x in fr:
        den_lcm = den_lcm * x.denominator // gcd(den_lcm, x.denominator)
    ints = [int(x * den_lcm) for x in fr]
    g = 0
    for x in ints:
        g = gcd(g, abs(x))
    ints = [x // g for x in ints]
    lead = next(x for x in ints if x != 0)
    sign = 1 if lead > 0 else -1
    ints = [sign * x for x in ints]
    scale = Fraction(sign * g, den_lcm)
    return LinearForm(ints), scale


def q_dot(u: Sequence, v: Sequence) -> Fraction:
    """The standard inner product Q on coefficient vectors."""
    return sum((Fraction(a) * Fraction(b) for a, b in zip(u, v)), Fraction(0))


def form_rank(forms: Iterable[LinearForm]) -> int:
    rows = [[Fraction(a) for a in f.coeffs] for f in forms]
    return _rank(rows)


def _rank(rows: list[list[Fraction]]) -> int:
    rows = [r[:] for r in rows]
    rank = 0
    ncols = len(rows[0]) if rows else 0
    col = 0
    while rank < len(rows) and col < ncols:
        pivot = next((i for i in range(rank, len(rows)) if rows[i][col] != 0), None)
        if pivot is None:
            col += 1
            continue
        rows[rank], rows[pivot] = rows[pivot], rows[rank]
        pr = rows[rank]
        for i in range(rank + 1, len(rows)):
            if rows[i][col] != 0:
                factor = rows[i][col] / pr[col]
                rows[i] = [a - factor * b for a, b in zip(rows[i], pr)]
        rank += 1
        col += 1
    return rank


def dependence_relation(forms: Sequence[LinearForm]) -> dict[int, Fraction] | None:
    """Find a linear relation sum_i c_i * forms[i] = 0 with some c_i != 0.

    Returns a map index -> nonzero rational coefficient, or None when the
    forms are linearly independent.  Deterministic: Gaussian elimination in
    the given order, reporting the first row that becomes dependent.
    """
    if not forms:
        return None
    p = forms[0].p
    reduced: list[tuple[list[Fraction], dict[int, Fraction]]] = []
    for idx, f in enumerate(forms):
        row = [Fraction(a) for a in f.coeffs]
        combo = {idx: Fraction(1)}
        for base, base_combo in reduced:
            lead = next((j for j in range(p) if base[j] != 0))
            if row[lead] != 0:
                factor = row[lead] / base[lead]
                row = [a - factor * b for a, b in zip(row, base)]
                for k, v in base_combo.items():
                    combo[k] = combo.get(k, Fraction(0)) - factor * v
        if all(x == 0 for x in row):
            return {k: v for k, v in combo.items() if v != 0}
        reduced.append((row, combo))
    return None


def orth_complement(forms: Sequence[LinearForm], p: int) -> list[LinearForm]:
    """Q-orthogonal complement of independent forms, as integer forms.

    Gram-Schmidt runs over the standard basis in index order against the
    input span; each surviving residual is rescaled to integers (gcd 1,
    positive leading coefficient), so the output is deterministic.
    """
    for f in forms:
        if f.p != p:
            raise ValueError("form length does not match p")
    m = len(forms)
    if form_rank(forms) < m:
        raise ValueError("dependent input")
    ortho: list[Vector] = []

    def reduce_against(v: list[Fraction]) -> list[Fraction]:
        for b in ortho:
            num = q_dot(v, b)
            if num != 0:
                den = q_dot(b, b)
                factor = num / den
                v = [a - factor * c for a, c in zip(v, b)]
        return v

    for f in forms:
        v = reduce_against([Fraction(a) for a in f.coeffs])
        ortho.append(tuple(v))
    out: list[LinearForm] = []
    for j in range(p):
        if len(out) == p - m:
            break
        e = [Fraction(0)] * p
        e[j] = Fraction(1)
        v = reduce_against(e)
        if any(x != 0 for x in v):
            form, _ = normalize_form(v)
            out.append(form)
            ortho.append(tuple(v))
    return out


def invert_matrix(rows: Sequence[Sequence[Fraction | int]]) -> list[list[Fraction]]:
    """Exact inverse of a square rational matrix (Gauss-Jordan)."""
    n = len(rows)
    aug = [[Fraction(x) for x in row] + [Fraction(int(i == j)) for j in range(n)]
           for i, row in enumerate(rows)]
    for col in range(n):
        pivot = next((i for i in range(col, n) if aug[i][col] != 0), None)
        if pivot is None:
            raise ValueError("singular matrix")
        aug[col], aug[pivot] = aug[pivot], aug[col]
        pv = aug[col][col]
        aug[col] = [x / pv for x in aug[col]]
        for i in range(n):
            if i != col and aug[i][col] != 0:
                factor = aug[i][col]
                aug[i] = [a - factor * b for a, b in zip(aug[i], aug[col])]
    return [row[n:] for row in aug]
