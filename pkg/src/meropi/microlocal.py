"""Causal order, polarization tests, and conic wavefront data over flat spacetime.

This module is the discrete/combinatorial layer of the package: the
forward-cone order on R^{1+d}, traces of finite cotangent configurations with
the polarization predicates built on them, a sum-compatibility check for
pairs of configurations over common base points, a sequential-closure sum
``hat_plus`` on conic cells (exact for catalog pairs, sampled closure
otherwise), and closed-form membership tests for the gradient-ray sets
``Lambda_f`` attached to catalog functions.

Arithmetic policy: every membership test runs in exact rational arithmetic
when all the coordinates involved are ``int`` or ``fractions.Fraction``;
otherwise it runs in floating point with a 1e-9 guard band so that boundary
data (null covectors, vanishing sums, points sitting on a zero set) does not
flip classification under rounding.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .dist.catalog import CatalogEntry, get_entry
from .errors import UnsupportedFunctionError, UnsupportedPairError

__all__ = [
    "CausalSite",
    "ConeCell",
    "CotangentElement",
    "PolarizedConfig",
    "SumPolarizationReport",
    "Trace",
    "causal_leq",
    "check_sum_polarization",
    "hat_plus",
    "is_polarized_family",
    "is_reduced_polarized",
    "lambda_membership",
    "polarization_batch",
    "random_admissible_pair",
    "trace",
]

#: guard band applied to float comparisons against cone boundaries and zero
_GUARD = 1e-9


# -- scalar/vector helpers -----------------------------------------------------------


def _is_exact(*vals) -> bool:
    return all(isinstance(v, (int, Fraction)) for v in vals)


def _coerce_vec(vec, dim: int | None = None, what: str = "vector") -> tuple:
    """Validate and canonicalize a coordinate tuple.

    Integers (including numpy integers) become ``int``, floating values become
    ``float`` and must be finite, ``Fraction`` entries are kept exact.
    """
    try:
        items = tuple(vec)
    except TypeError:
        raise ValueError(f"{what} must be a coordinate sequence, got {vec!r}")
    if dim is not None and len(items) != dim:
        raise ValueError(f"{what} has {len(items)} coordinates, expected {dim}")
    out = []
    for v in items:
        if isinstance(v, Fraction):
            out.append(v)
        elif isinstance(v, (bool, np.bool_)):
            raise ValueError(f"{what} contains a boolean entry")
        elif isinstance(v, (int, np.integer)):
            out.append(int(v))
        elif isinstance(v, (float, np.floating)):
            fv = float(v)
            if not np.isfinite(fv):
                raise ValueError(f"{what} contains a non-finite entry")
            out.append(fv)
        else:
            raise ValueError(f"{what} contains a non-numeric entry {v!r}")
    return tuple(out)


def _vadd(a: tuple, b: tuple) -> tuple:
    return tuple(x + y for x, y in zip(a, b))


def _vsub(a: tuple, b: tuple) -> tuple:
    return tuple(x - y for x, y in zip(a, b))


def _vneg(a: tuple) -> tuple:
    return tuple(-x for x in a)


def _scale_of(*vecs) -> float:
    s = 1.0
    for vec in vecs:
        for c in vec:
            s = max(s, abs(float(c)))
    return s


def _scalar_is_zero(v, scale: float = 1.0) -> bool:
    if _is_exact(v):
        return v == 0
    return abs(float(v)) <= _GUARD * scale


def _vec_is_zero(vec: tuple, scale: float | None = None) -> bool:
    if _is_exact(*vec):
        return all(c == 0 for c in vec)
    s = _scale_of(vec) if scale is None else scale
    return max(abs(float(c)) for c in vec) <= _GUARD * s


def _vec_eq(a: tuple, b: tuple) -> bool:
    if _is_exact(*a, *b):
        return all(x == y for x, y in zip(a, b))
    s = _scale_of(a, b)
    return max(abs(float(x) - float(y)) for x, y in zip(a, b)) <= _GUARD * s


def _solve_ray(xi: tuple, gen: tuple):
    """Return c with xi == c * gen, or None if xi is not a multiple of gen."""
    pivot = max(range(len(gen)), key=lambda i: abs(float(gen[i])))
    if _scalar_is_zero(gen[pivot], _scale_of(gen)):
        return None
    if _is_exact(*xi, *gen):
        c = Fraction(xi[pivot]) / Fraction(gen[pivot])
        if all(xi[i] == c * gen[i] for i in range(len(gen))):
            return int(c) if c.denominator == 1 else c
        return None
    c = float(xi[pivot]) / float(gen[pivot])
    s = _scale_of(xi, tuple(c * float(g) for g in gen))
    if all(abs(float(xi[i]) - c * float(gen[i])) <= _GUARD * s for i in range(len(gen))):
        return c
    return None


def _num_to_json(v):
    return str(v) if isinstance(v, Fraction) else v


def _num_from_json(v):
    if isinstance(v, str):
        return Fraction(v)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValueError(f"bad numeric entry {v!r}")
    return v


def _vec_to_json(vec: tuple) -> list:
    return [_num_to_json(c) for c in vec]


def _vec_from_json(data) -> tuple:
    return _coerce_vec([_num_from_json(c) for c in data])


# -- causal site ---------------------------------------------------------------------


class CausalSite:
    """Flat spacetime R^{1+d} with metric signature (+, -, ..., -).

    The closed forward cone gamma = {xi : xi_0 >= 0, xi_0^2 >= |xi_spatial|^2}
    plays two roles: it is the covector cone entering the polarization
    predicates, and through ``causal_leq`` it orders base points.  The cone is
    closed, convex, and proper (gamma intersected with -gamma is {0}).
    """

    __slots__ = ("d",)

    def __init__(self, d: int) -> None:
        if not isinstance(d, (int, np.integer)) or isinstance(d, bool) or d < 1:
            raise ValueError(f"spatial dimension must be a positive integer, got {d!r}")
        self.d = int(d)

    @property
    def dim(self) -> int:
        """Total coordinate count 1 + d."""
        return 1 + self.d

    def __repr__(self) -> str:
        return f"CausalSite(d={self.d})"

    def __eq__(self, other) -> bool:
        return isinstance(other, CausalSite) and other.d == self.d

    def __hash__(self) -> int:
        return hash(("CausalSite", self.d))

    def quad_form(self, vec) -> Fraction | int | float:
        """Minkowski square v_0^2 - v_1^2 - ... - v_d^2 (exact on rational input)."""
        vec = _coerce_vec(vec, self.dim, "vector")
        q = vec[0] * vec[0]
        for c in vec[1:]:
            q = q - c * c
        return q

    def in_forward_cone(self, vec) -> bool:
        """Membership of a vector/covector in the closed forward cone."""
        vec = _coerce_vec(vec, self.dim, "vector")
        q = vec[0] * vec[0]
        for c in vec[1:]:
            q = q - c * c
        if _is_exact(*vec):
            return vec[0] >= 0 and q >= 0
        s = _scale_of(vec)
        return float(vec[0]) >= -_GUARD * s and float(q) >= -_GUARD * s * s

    def is_zero_covector(self, vec) -> bool:
        return _vec_is_zero(_coerce_vec(vec, self.dim, "covector"))

    def same_point(self, x, y) -> bool:
        return _vec_eq(
            _coerce_vec(x, self.dim, "point"), _coerce_vec(y, self.dim, "point")
        )

    def causal_leq(self, x, y) -> bool:
        """True iff y - x lies in the closed forward cone."""
        x = _coerce_vec(x, self.dim, "point")
        y = _coerce_vec(y, self.dim, "point")
        return self.in_forward_cone(_vsub(y, x))

    def strictly_precedes(self, x, y) -> bool:
        return self.causal_leq(x, y) and not self.same_point(x, y)

    def maximal_points(self, points: Iterable) -> tuple:
        """Distinct points with no other point strictly after them."""
        distinct: list[tuple] = []
        for p in points:
            p = _coerce_vec(p, self.dim, "point")
            if not any(self.same_point(p, q) for q in distinct):
                distinct.append(p)
        return tuple(
            p
            for p in distinct
            if not any(self.strictly_precedes(p, q) for q in distinct)
        )


def causal_leq(site: CausalSite, x, y) -> bool:
    """Forward-cone order on base points of ``site``."""
    return site.causal_leq(x, y)


# -- configurations and traces -------------------------------------------------------


@dataclass(frozen=True)
class CotangentElement:
    """A base point with an attached covector."""

    x: tuple
    xi: tuple

    def __post_init__(self) -> None:
        object.__setattr__(self, "x", _coerce_vec(self.x, None, "base point"))
        object.__setattr__(self, "xi", _coerce_vec(self.xi, None, "covector"))
        if len(self.x) != len(self.xi):
            raise ValueError(
                f"base point has {len(self.x)} coordinates but covector has {len(self.xi)}"
            )

    def __neg__(self) -> "CotangentElement":
        return CotangentElement(self.x, _vneg(self.xi))

    def to_json(self) -> dict:
        return {"x": _vec_to_json(self.x), "xi": _vec_to_json(self.xi)}

    @classmethod
    def from_json(cls, data: dict) -> "CotangentElement":
        return cls(_vec_from_json(data["x"]), _vec_from_json(data["xi"]))


@dataclass(frozen=True)
class Trace:
    """Grouped configuration data: one summed covector per occupied base point.

    ``entries`` keeps first-appearance order of the points.  Points whose
    covectors were all zero are dropped entirely (they carry no direction).
    """

    site: CausalSite
    entries: tuple[tuple[tuple, tuple], ...]

    @property
    def points(self) -> tuple:
        return tuple(p for p, _ in self.entries)

    def eta_at(self, point) -> tuple:
        point = _coerce_vec(point, self.site.dim, "point")
        for p, eta in self.entries:
            if self.site.same_point(p, point):
                return eta
        raise KeyError(f"point {point!r} does not appear in the trace")

    def maximal_points(self) -> tuple:
        return self.site.maximal_points(self.points)

    def is_reduced_polarized(self, strict: bool = False) -> bool:
        """Every maximal point's summed covector lies in the forward cone.

        With ``strict=True`` the summed covector must additionally be nonzero.
        """
        for p in self.maximal_points():
            eta = self.eta_at(p)
            if self.site.is_zero_covector(eta):
                if strict:
                    return False
                continue
            if not self.site.in_forward_cone(eta):
                return False
        return True

    def to_json(self) -> dict:
        return {
            "entries": [
                {"point": _vec_to_json(p), "eta": _vec_to_json(eta)}
                for p, eta in self.entries
            ]
        }


def trace(site: CausalSite, elements) -> Trace:
    """Group elements by equal base points and sum their covectors.

    Points are grouped by exact coordinate equality; only points carrying at
    least one individually nonzero covector are kept.
    """
    if isinstance(elements, PolarizedConfig):
        site = elements.site
        elements = elements.elements
    order: list[tuple] = []
    sums: dict[tuple, tuple] = {}
    seen_nonzero: dict[tuple, bool] = {}
    for el in elements:
        if not isinstance(el, CotangentElement):
            el = CotangentElement(*el)
        x = _coerce_vec(el.x, site.dim, "base point")
        xi = _coerce_vec(el.xi, site.dim, "covector")
        if x not in sums:
            order.append(x)
            sums[x] = tuple(0 for _ in range(site.dim))
            seen_nonzero[x] = False
        sums[x] = _vadd(sums[x], xi)
        seen_nonzero[x] = seen_nonzero[x] or not _vec_is_zero(xi)
    entries = tuple((p, sums[p]) for p in order if seen_nonzero[p])
    return Trace(site, entries)


def is_reduced_polarized(tr: Trace, strict: bool = False) -> bool:
    """Polarization predicate on a trace; see :meth:`Trace.is_reduced_polarized`."""
    if not isinstance(tr, Trace):
        raise ValueError("expected a Trace (output of trace())")
    return tr.is_reduced_polarized(strict=strict)


@dataclass(frozen=True)
class PolarizedConfig:
    """A finite list of cotangent elements over a causal site."""

    site: CausalSite
    elements: tuple

    def __post_init__(self) -> None:
        if not isinstance(self.site, CausalSite):
            raise ValueError("site must be a CausalSite")
        els = []
        for el in self.elements:
            if not isinstance(el, CotangentElement):
                el = CotangentElement(*el)
            if len(el.x) != self.site.dim:
                raise ValueError(
                    f"element lives in dimension {len(el.x)}, site has {self.site.dim}"
                )
            els.append(el)
        object.__setattr__(self, "elements", tuple(els))

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def __neg__(self) -> "PolarizedConfig":
        return PolarizedConfig(self.site, tuple(-el for el in self.elements))

    @property
    def base_points(self) -> tuple:
        return tuple(el.x for el in self.elements)

    def covectors_all_zero(self) -> bool:
        return all(self.site.is_zero_covector(el.xi) for el in self.elements)

    def trace(self) -> Trace:
        return trace(self.site, self.elements)

    def is_polarized(self, strict: bool = False) -> bool:
        return self.trace().is_reduced_polarized(strict=strict)

    def to_json(self) -> dict:
        return {
            "site": {"d": self.site.d},
            "elements": [el.to_json() for el in self.elements],
        }

    @classmethod
    def from_json(cls, data: dict) -> "PolarizedConfig":
        site = CausalSite(int(data["site"]["d"]))
        elements = tuple(CotangentElement.from_json(e) for e in data["elements"])
        return cls(site, elements)


def is_polarized_family(configs: Sequence[PolarizedConfig], strict: bool = False) -> bool:
    """A finite family of configurations is polarized iff every member is."""
    return all(cfg.is_polarized(strict=strict) for cfg in configs)


# -- sum compatibility check ---------------------------------------------------------


def _point_set_eq(site: CausalSite, a: Sequence[tuple], b: Sequence[tuple]) -> bool:
    if len(a) != len(b):
        return False
    unmatched = list(b)
    for p in a:
        for i, q in enumerate(unmatched):
            if site.same_point(p, q):
                del unmatched[i]
                break
        else:
            return False
    return True


def _sorted_points(points: Sequence[tuple]) -> tuple:
    return tuple(sorted(points, key=lambda p: tuple(float(c) for c in p)))


@dataclass(frozen=True)
class SumPolarizationReport:
    """Outcome of the pairwise sum check on two cotangent configurations.

    ``admissible`` records whether the documented preconditions held;
    violations are listed rather than raised so that deliberately broken
    inputs can be probed for counterexamples.
    """

    nonzero_sum: bool
    maxA_eq_maxB_cap_maxC: bool
    admissible: bool
    violations: tuple[str, ...]
    max_a: tuple
    max_b: tuple
    max_c: tuple

    @property
    def passed(self) -> bool:
        return self.admissible and self.nonzero_sum and self.maxA_eq_maxB_cap_maxC

    def to_json(self) -> dict:
        return {
            "nonzero_sum": self.nonzero_sum,
            "maxA_eq_maxB_cap_maxC": self.maxA_eq_maxB_cap_maxC,
            "admissible": self.admissible,
            "violations": list(self.violations),
            "max_a": [_vec_to_json(p) for p in self.max_a],
            "max_b": [_vec_to_json(p) for p in self.max_b],
            "max_c": [_vec_to_json(p) for p in self.max_c],
        }


def check_sum_polarization(u: PolarizedConfig, v: PolarizedConfig) -> SumPolarizationReport:
    """Check the element-wise sum of two configurations over common base points.

    The first configuration must have a reduced polarized trace and the second
    a reduced strictly polarized trace; both must share the same ordered base
    points and avoid the zero section.  Under those preconditions the summed
    configuration avoids the zero section (``nonzero_sum``) and the maximal
    points of its trace are exactly the common maximal points of the two
    input traces (``maxA_eq_maxB_cap_maxC``).  Precondition violations are
    reported, not raised, and the flags are still computed whenever the sum
    makes sense.
    """
    if not isinstance(u, PolarizedConfig) or not isinstance(v, PolarizedConfig):
        raise ValueError("expected two PolarizedConfig inputs")
    if u.site != v.site:
        raise ValueError("configurations live over different causal sites")
    site = u.site
    violations: list[str] = []
    same_base = len(u) == len(v) and all(
        site.same_point(a.x, b.x) for a, b in zip(u.elements, v.elements)
    )
    if not same_base:
        violations.append("configurations do not share the same ordered base points")
    if u.covectors_all_zero():
        violations.append("first configuration lies in the zero section")
    if v.covectors_all_zero():
        violations.append("second configuration lies in the zero section")
    tr_u = u.trace()
    tr_v = v.trace()
    if not tr_u.is_reduced_polarized():
        violations.append("trace of the first configuration is not reduced polarized")
    if not tr_v.is_reduced_polarized(strict=True):
        violations.append(
            "trace of the second configuration is not reduced strictly polarized"
        )
    max_b = tr_u.maximal_points()
    max_c = tr_v.maximal_points()
    if same_base:
        summed = PolarizedConfig(
            site,
            tuple(
                CotangentElement(a.x, _vadd(a.xi, b.xi))
                for a, b in zip(u.elements, v.elements)
            ),
        )
        nonzero_sum = not summed.covectors_all_zero()
        max_a = summed.trace().maximal_points()
    else:
        nonzero_sum = False
        max_a = ()
    inter = tuple(p for p in max_b if any(site.same_point(p, q) for q in max_c))
    identity = _point_set_eq(site, max_a, inter)
    return SumPolarizationReport(
        nonzero_sum=nonzero_sum,
        maxA_eq_maxB_cap_maxC=identity,
        admissible=not violations,
        violations=tuple(violations),
        max_a=_sorted_points(max_a),
        max_b=_sorted_points(max_b),
        max_c=_sorted_points(max_c),
    )


# -- random admissible configurations ------------------------------------------------


def _draw_future_nonzero(rng, m: int) -> tuple:
    t = int(rng.integers(1, 5))
    while True:
        s = [int(c) for c in rng.integers(-t, t + 1, size=m - 1)]
        if sum(c * c for c in s) <= t * t:
            return (t, *s)


def _draw_any(rng, m: int, nonzero: bool = False) -> tuple:
    while True:
        vec = tuple(int(c) for c in rng.integers(-3, 4, size=m))
        if not nonzero or any(c != 0 for c in vec):
            return vec


def random_admissible_pair(
    site: CausalSite, rng, max_points: int = 6, zero_eta_prob: float = 0.15
):
    """Draw a random pair (u, v) satisfying the sum-check preconditions.

    Both configurations share the same ordered integer base points; every
    point carries at least one nonzero covector; at causally maximal points
    the summed covector is forward and nonzero for ``v`` and forward (zero
    allowed with probability ``zero_eta_prob``) for ``u``.

    Parameters
    ----------
    site : CausalSite
        Ambient flat spacetime.
    rng : numpy.random.Generator
        Source of randomness.
    max_points : int
        Maximum number of cotangent elements per configuration.
    zero_eta_prob : float
        Probability that ``u`` takes a vanishing summed covector at a maximal
        point carrying at least two elements.

    Returns
    -------
    (PolarizedConfig, PolarizedConfig)
    """
    m = site.dim
    k = int(rng.integers(1, max_points + 1))
    n_pts = int(rng.integers(1, k + 1))
    pts: list[tuple] = []
    while len(pts) < n_pts:
        cand = tuple(int(c) for c in rng.integers(-3, 4, size=m))
        if cand not in pts:
            pts.append(cand)
    assign = list(range(n_pts)) + [int(rng.integers(0, n_pts)) for _ in range(k - n_pts)]
    assign = [assign[i] for i in rng.permutation(k)]
    maximal = set(site.maximal_points(pts))

    def fill(strict: bool) -> PolarizedConfig:
        cov: list[tuple | None] = [None] * k
        for j, p in enumerate(pts):
            idxs = [i for i, a in enumerate(assign) if a == j]
            if p in maximal:
                if not strict and len(idxs) >= 2 and rng.random() < zero_eta_prob:
                    eta = tuple(0 for _ in range(m))
                else:
                    eta = _draw_future_nonzero(rng, m)
            else:
                eta = _draw_any(rng, m, nonzero=(len(idxs) == 1))
            parts = [_draw_any(rng, m) for _ in idxs[:-1]]
            rest = eta
            for part in parts:
                rest = _vsub(rest, part)
            parts.append(rest)
            if all(all(c == 0 for c in part) for part in parts):
                # keep the point visible in the trace without moving its sum
                bump = tuple([1] + [0] * (m - 1))
                parts[0] = _vadd(parts[0], bump)
                parts[1] = _vsub(parts[1], bump)
            for i, part in zip(idxs, parts):
                cov[i] = part
        return PolarizedConfig(
            site, tuple(CotangentElement(pts[assign[i]], cov[i]) for i in range(k))
        )

    return fill(strict=False), fill(strict=True)


def polarization_batch(
    site: CausalSite,
    n_pairs: int,
    max_points: int = 6,
    seed: int = 0,
    negative_controls: bool = True,
) -> dict:
    """Run the sum check over random admissible pairs and report as JSON data.

    Returns a dictionary with pass counts, full dumps of any failing pair,
    and a negative-control section where the first configuration is replaced
    by the antipode of the second (which breaks the preconditions and must
    produce zero-section counterexamples).
    """
    if n_pairs < 1:
        raise ValueError("n_pairs must be positive")
    rng = np.random.default_rng(seed)
    failures = []
    for i in range(n_pairs):
        u, v = random_admissible_pair(site, rng, max_points=max_points)
        rep = check_sum_polarization(u, v)
        if not rep.passed:
            failures.append(
                {"pair_index": i, "u": u.to_json(), "v": v.to_json(), "report": rep.to_json()}
            )
    out = {
        "site": {"d": site.d},
        "pairs": int(n_pairs),
        "max_points": int(max_points),
        "seed": int(seed),
        "passed": int(n_pairs - len(failures)),
        "failures": failures,
    }
    if negative_controls:
        total = max(1, n_pairs // 10)
        found = 0
        examples = []
        for i in range(total):
            _, v = random_admissible_pair(site, rng, max_points=max_points)
            rep = check_sum_polarization(-v, v)
            if (not rep.admissible) and (not rep.nonzero_sum):
                found += 1
                if len(examples) < 3:
                    examples.append({"v": v.to_json(), "report": rep.to_json()})
        out["negative_controls"] = {
            "total": total,
            "counterexamples": found,
            "examples": examples,
        }
    return out


# -- gradient-ray membership for catalog functions -----------------------------------


#: catalog functions with closed-form zero sets, gradients and gradient-ray sets
_LAMBDA_NAMES = frozenset({"x", "x2", "uv", "minkowski"})


def _catalog_entry(f) -> CatalogEntry:
    if isinstance(f, str):
        return get_entry(f)
    if isinstance(f, CatalogEntry):
        return f
    raise UnsupportedFunctionError(f"expected a catalog function or name, got {f!r}")


def _f_scalar(entry: CatalogEntry, x: tuple):
    if entry.name == "x":
        return x[0]
    if entry.name == "x2":
        return x[0] * x[0]
    if entry.name == "uv":
        return x[0] * x[1]
    if entry.name == "minkowski":
        return x[0] * x[0] - x[1] * x[1]
    raise UnsupportedFunctionError(f"no exact value rule for {entry.name!r}")


def _grad_scalar(entry: CatalogEntry, x: tuple) -> tuple:
    if entry.name == "x":
        return (1,)
    if entry.name == "x2":
        return (2 * x[0],)
    if entry.name == "uv":
        return (x[1], x[0])
    if entry.name == "minkowski":
        return (2 * x[0], -2 * x[1])
    raise UnsupportedFunctionError(f"no exact gradient rule for {entry.name!r}")


def lambda_membership(f, x, xi) -> bool:
    """Membership of (x; xi) in the gradient-ray set of a catalog function.

    The set collects all limits a_k * grad f(x_k) -> xi with a_k > 0,
    x_k -> x and f(x_k) -> 0, zero covectors excluded.  Closed forms:

    - ``x``: the downward boundary point 0 with xi = (s,), s > 0;
    - ``x2``: the point 0 with any nonzero xi (both signs reachable);
    - ``uv``: on a branch off the vertex, the one-sided conormal ray matching
      the sign of the surviving coordinate; at the vertex every nonzero xi;
    - ``minkowski``: one-sided conormal rays on the two null branches and the
      full fiber at the vertex.

    Raises
    ------
    UnsupportedFunctionError
        For catalog entries without a closed-form rule (monomial powers).
    """
    entry = _catalog_entry(f)
    x = _coerce_vec(x, entry.dim, "base point")
    xi = _coerce_vec(xi, entry.dim, "covector")
    if _vec_is_zero(xi):
        return False
    xscale = _scale_of(x)
    cscale = _scale_of(xi)
    if entry.name == "x":
        return _scalar_is_zero(x[0], xscale) and float(xi[0]) > 0
    if entry.name == "x2":
        return _scalar_is_zero(x[0], xscale)
    if entry.name == "uv":
        u, v = x
        uz = _scalar_is_zero(u, xscale)
        vz = _scalar_is_zero(v, xscale)
        if uz and vz:
            return True
        if uz:
            return _scalar_is_zero(xi[1], cscale) and float(xi[0]) * float(v) > 0
        if vz:
            return _scalar_is_zero(xi[0], cscale) and float(xi[1]) * float(u) > 0
        return False
    if entry.name == "minkowski":
        t, s = x
        tz = _scalar_is_zero(t, xscale)
        sz = _scalar_is_zero(s, xscale)
        if tz and sz:
            return True
        q = t * t - s * s
        if not _scalar_is_zero(q, xscale * xscale):
            return False
        if float(t) * float(s) > 0:
            # branch {t = s}: gradient direction (t, -t)
            return _scalar_is_zero(xi[0] + xi[1], cscale) and float(xi[0]) * float(t) > 0
        # branch {t = -s}: gradient direction (t, t)
        return _scalar_is_zero(xi[0] - xi[1], cscale) and float(xi[0]) * float(t) > 0
    raise UnsupportedFunctionError(
        f"no closed-form gradient-ray rule for {entry.name!r}; "
        "supported: x, x2, uv, minkowski"
    )


# -- conic cells and their sequential sum --------------------------------------------


def _coerce_hulls(fibers, dim: int) -> tuple:
    out = []
    for hull in fibers:
        gens = tuple(_coerce_vec(g, dim, "fiber generator") for g in hull)
        if not 1 <= len(gens) <= 2:
            raise ValueError("each fiber hull needs one or two generators")
        for g in gens:
            if _vec_is_zero(g):
                raise ValueError("fiber generators must be nonzero")
        out.append(gens)
    return tuple(out)


class ConeCell:
    """A conic subset of the cotangent bundle over R^m.

    A cell pairs a base-set rule with a fiber rule.  Supported kinds:

    - ``empty``: no elements;
    - ``i0_time``: the hyperplane {t = 0} with the single positive time ray
      in the fiber (boundary-value cell of one complex half-plane power);
    - ``delta_graph``: the graph {t = f(xbar)} of a catalog function with the
      conormal line as fiber;
    - ``i0_delta``: the exact sequential sum of the two cells above;
    - ``lambda``: the gradient-ray set of a catalog function on its base
      space (the tau = 0 section of ``i0_delta``);
    - ``explicit``: finitely many sampled base points, each with a finite
      union of open positive hulls of one or two generator covectors.

    All fibers are conic: membership is invariant under positive scaling of
    the covector.
    """

    __slots__ = ("kind", "dim", "entry", "rays")

    def __init__(self, kind: str, dim: int, entry: CatalogEntry | None = None, rays=None):
        if kind not in {"empty", "i0_time", "delta_graph", "i0_delta", "lambda", "explicit"}:
            raise ValueError(f"unknown cone-cell kind {kind!r}")
        if dim < 1:
            raise ValueError("cell dimension must be positive")
        self.kind = kind
        self.dim = int(dim)
        self.entry = entry
        self.rays = rays
        if kind in {"delta_graph", "i0_delta", "lambda"}:
            if entry is None:
                raise ValueError(f"{kind} cells need a catalog function")
            expected = entry.dim + (0 if kind == "lambda" else 1)
            if self.dim != expected:
                raise ValueError(
                    f"{kind} cell over {entry.name!r} must have dimension {expected}"
                )
        if kind == "explicit" and rays is None:
            raise ValueError("explicit cells need (point, fiber hulls) data")

    # -- constructors ------------------------------------------------------

    @classmethod
    def empty(cls, dim: int) -> "ConeCell":
        return cls("empty", dim)

    @classmethod
    def i0_time(cls, spatial_dim: int) -> "ConeCell":
        """Cell of (0, xbar; tau, 0) with tau > 0 over R x R^spatial_dim."""
        if spatial_dim < 1:
            raise ValueError("spatial dimension must be positive")
        return cls("i0_time", 1 + spatial_dim)

    @classmethod
    def delta_graph(cls, f) -> "ConeCell":
        """Conormal cell of the graph {t = f(xbar)} of a catalog function."""
        entry = _catalog_entry(f)
        return cls("delta_graph", 1 + entry.dim, entry=entry)

    @classmethod
    def lambda_cell(cls, f) -> "ConeCell":
        entry = _catalog_entry(f)
        return cls("lambda", entry.dim, entry=entry)

    @classmethod
    def explicit(cls, dim: int, data) -> "ConeCell":
        """Cell from (point, fibers) pairs; each fiber is a generator tuple.

        ``data`` is an iterable of ``(point, fibers)`` where ``fibers`` is an
        iterable of hulls and each hull is a sequence of one or two nonzero
        generator covectors (one generator: an open ray; two: the open
        positive hull).
        """
        rays = []
        for point, fibers in data:
            point = _coerce_vec(point, dim, "base point")
            hulls = _coerce_hulls(fibers, dim)
            if hulls:
                rays.append((point, hulls))
        return cls("explicit", dim, rays=tuple(rays))

    def __repr__(self) -> str:
        tag = self.entry.name if self.entry is not None else ""
        if self.kind == "explicit":
            tag = f"{len(self.rays)} points"
        return f"ConeCell({self.kind}{', ' + tag if tag else ''}, dim={self.dim})"

    @property
    def is_empty(self) -> bool:
        return self.kind == "empty" or (self.kind == "explicit" and not self.rays)

    def base_points(self) -> tuple:
        if self.kind != "explicit":
            raise ValueError(f"{self.kind} cells do not list base points")
        return tuple(p for p, _ in self.rays)

    # -- membership --------------------------------------------------------

    def contains(self, x, xi) -> bool:
        """Exact membership of (x; xi), zero covectors never members."""
        x = _coerce_vec(x, self.dim, "base point")
        xi = _coerce_vec(xi, self.dim, "covector")
        if _vec_is_zero(xi):
            return False
        if self.kind == "empty":
            return False
        if self.kind == "i0_time":
            return self._contains_i0(x, xi)
        if self.kind == "delta_graph":
            return self._contains_delta(x, xi)
        if self.kind == "i0_delta":
            return self._contains_i0_delta(x, xi)
        if self.kind == "lambda":
            return lambda_membership(self.entry, x, xi)
        return self._contains_explicit(x, xi)

    def _contains_i0(self, x: tuple, xi: tuple) -> bool:
        if not _scalar_is_zero(x[0], _scale_of(x)):
            return False
        if not _vec_is_zero(xi[1:], _scale_of(xi)):
            return False
        return float(xi[0]) > 0

    def _contains_delta(self, x: tuple, xi: tuple) -> bool:
        t, xbar = x[0], x[1:]
        fv = _f_scalar(self.entry, xbar)
        if not _scalar_is_zero(t - fv, _scale_of(x, (fv,))):
            return False
        tau = xi[0]
        if _scalar_is_zero(tau, _scale_of(xi)):
            return False
        grad = _grad_scalar(self.entry, xbar)
        want = tuple(-tau * g for g in grad)
        return _vec_eq(xi[1:], want)

    def _contains_i0_delta(self, x: tuple, xi: tuple) -> bool:
        t, xbar = x[0], x[1:]
        tau, xibar = xi[0], xi[1:]
        if not _scalar_is_zero(t, _scale_of(x)):
            # away from the time slice only the graph conormal survives
            return self._contains_delta(x, xi)
        fv = _f_scalar(self.entry, xbar)
        if not _scalar_is_zero(fv, _scale_of(x) ** 2):
            return False
        if _vec_is_zero(xibar, _scale_of(xi)):
            return float(tau) > 0
        grad = _grad_scalar(self.entry, xbar)
        if _vec_is_zero(grad, _scale_of(xbar) if any(float(c) for c in xbar) else 1.0):
            # degenerate zero-set point: scales may blow up, full ray set
            return lambda_membership(self.entry, xbar, xibar)
        c = _solve_ray(xibar, grad)
        if c is None or _scalar_is_zero(c, _scale_of(xi)):
            return False
        # bounded-scale sums reach coefficients down to -tau
        if _is_exact(c, tau):
            return c >= -tau
        return float(c) >= -float(tau) - _GUARD * _scale_of(xi)

    def _contains_explicit(self, x: tuple, xi: tuple) -> bool:
        for point, hulls in self.rays:
            if not _vec_eq(point, x):
                continue
            for gens in hulls:
                if _hull_contains(xi, gens):
                    return True
        return False

    # -- sections and sampling ----------------------------------------------

    def tau_zero_section(self) -> "ConeCell":
        """Project an ``i0_delta`` cell on the tau = 0 slice of its fiber."""
        if self.kind != "i0_delta":
            raise ValueError("tau_zero_section only applies to i0_delta cells")
        return ConeCell.lambda_cell(self.entry)

    def sample_elements(self, rng, n_base: int = 24, n_scale: int = 7) -> list:
        """Draw float elements of the cell, biased toward its boundary strata.

        Base points follow a geometric grid toward the degenerate strata of
        the base set; fiber scales follow a log grid.  Used by the sampled
        closure of :func:`hat_plus`; see the caveat there.
        """
        scales = np.logspace(-3.0, 3.0, n_scale)
        out = []
        if self.kind == "empty":
            return out
        if self.kind == "explicit":
            for point, hulls in self.rays:
                p = np.array([float(c) for c in point])
                for gens in hulls:
                    for s in scales:
                        coeffs = s * (0.25 + rng.random(len(gens)))
                        vec = sum(
                            c * np.array([float(g) for g in gen])
                            for c, gen in zip(coeffs, gens)
                        )
                        out.append((p, vec))
            return out
        if self.kind == "i0_time":
            n = self.dim - 1
            for _ in range(n_base):
                xbar = rng.uniform(-2.0, 2.0, size=n) * 2.0 ** (-rng.integers(0, 21))
                for s in scales:
                    out.append(
                        (np.concatenate(([0.0], xbar)), np.concatenate(([s], np.zeros(n))))
                    )
            return out
        if self.kind == "delta_graph":
            n = self.entry.dim
            for _ in range(n_base):
                xbar = rng.uniform(-2.0, 2.0, size=n) * 2.0 ** (-rng.integers(0, 21))
                fv = float(self.entry.f_value(xbar[None, :])[0])
                grad = self.entry.gradient(xbar[None, :])[0]
                for s in scales:
                    for sign in (1.0, -1.0):
                        tau = sign * s
                        out.append(
                            (
                                np.concatenate(([fv], xbar)),
                                np.concatenate(([tau], -tau * grad)),
                            )
                        )
            return out
        raise ValueError(f"{self.kind} cells do not support sampling")

    def to_json(self) -> dict:
        data: dict = {"kind": self.kind, "dim": self.dim}
        if self.entry is not None:
            data["function"] = self.entry.name
        if self.kind == "explicit":
            data["points"] = [
                {
                    "point": _vec_to_json(p),
                    "fibers": [[_vec_to_json(g) for g in gens] for gens in hulls],
                }
                for p, hulls in self.rays
            ]
        return data


def _hull_contains(xi: tuple, gens: tuple) -> bool:
    """Membership of xi in the open positive hull of one or two generators."""
    if len(gens) == 1:
        c = _solve_ray(xi, gens[0])
        return c is not None and float(c) > 0
    u, w = gens
    # collinear generators degenerate to rays
    if _solve_ray(w, u) is not None:
        cu = _solve_ray(xi, u)
        cw = _solve_ray(xi, w)
        return (cu is not None and float(cu) > 0) or (cw is not None and float(cw) > 0)
    m = len(xi)
    exact = _is_exact(*xi, *u, *w)
    rows = None
    for i in range(m):
        for j in range(i + 1, m):
            det = u[i] * w[j] - u[j] * w[i]
            if not _scalar_is_zero(det, _scale_of(u, w) ** 2):
                rows = (i, j, det)
                break
        if rows:
            break
    if rows is None:
        return False
    i, j, det = rows
    if exact:
        a = Fraction(xi[i] * w[j] - xi[j] * w[i], 1) / Fraction(det)
        b = Fraction(u[i] * xi[j] - u[j] * xi[i], 1) / Fraction(det)
        if a <= 0 or b <= 0:
            return False
        return all(xi[r] == a * u[r] + b * w[r] for r in range(m))
    det_f = float(det)
    a = (float(xi[i]) * float(w[j]) - float(xi[j]) * float(w[i])) / det_f
    b = (float(u[i]) * float(xi[j]) - float(u[j]) * float(xi[i])) / det_f
    if a <= 0 or b <= 0:
        return False
    s = _scale_of(xi, u, w) * max(1.0, abs(a), abs(b))
    return all(
        abs(float(xi[r]) - a * float(u[r]) - b * float(w[r])) <= _GUARD * s
        for r in range(m)
    )


def _explicit_transverse(c1: ConeCell, c2: ConeCell) -> bool:
    """No common base point carries opposite rays (c1 does not meet -c2)."""
    for p1, hulls1 in c1.rays:
        for p2, hulls2 in c2.rays:
            if not _vec_eq(p1, p2):
                continue
            for gens1 in hulls1:
                for gens2 in hulls2:
                    for u in gens1:
                        for w in gens2:
                            c = _solve_ray(_vneg(u), w)
                            if c is not None and float(c) > 0:
                                return False
    return True


def _require_single_generators(cell: ConeCell) -> None:
    for _, hulls in cell.rays:
        for gens in hulls:
            if len(gens) != 1:
                raise UnsupportedPairError(
                    "cells with summed (two-generator) fibers cannot be summed "
                    "again exactly; rebuild them from single rays"
                )


def hat_plus(c1: ConeCell, c2: ConeCell, exact: bool = True, rng=None, n_base: int = 24) -> ConeCell:
    """Sequential-closure sum of two conic cells.

    For catalog pairs the result is exact: an empty cell is absorbed; the
    pair (positive time ray over {t = 0}, graph conormal of a catalog
    function) yields the closed ``i0_delta`` cell whose tau = 0 section is
    the gradient-ray set; a transverse pair of explicit cells yields the
    union of both cells and all pointwise fiber sums over common base
    points.

    With ``exact=False`` a sampled closure is returned instead: elements of
    both cells are drawn on geometric grids toward their boundary strata
    with log-spaced fiber scales, sums at nearby base points are normalized,
    and all accumulation directions found are collected into an explicit
    cell.  This route is an approximation; it can miss directions that only
    appear along unsampled sequences.

    Raises
    ------
    UnsupportedPairError
        When ``exact=True`` and the pair is outside the catalog above.
    """
    if not isinstance(c1, ConeCell) or not isinstance(c2, ConeCell):
        raise ValueError("expected two ConeCell inputs")
    if c1.dim != c2.dim:
        raise ValueError("cells live over spaces of different dimension")
    if c1.is_empty:
        return c2
    if c2.is_empty:
        return c1
    if not exact:
        return _sampled_closure(c1, c2, rng=rng, n_base=n_base)
    kinds = {c1.kind, c2.kind}
    if kinds == {"i0_time", "delta_graph"}:
        entry = c1.entry if c1.kind == "delta_graph" else c2.entry
        if entry.name not in _LAMBDA_NAMES:
            raise UnsupportedPairError(
                "no exact closed sum for the graph conormal of "
                f"{entry.name!r}; supported: x, x2, uv, minkowski"
            )
        return ConeCell("i0_delta", c1.dim, entry=entry)
    if kinds == {"explicit"}:
        _require_single_generators(c1)
        _require_single_generators(c2)
        if not _explicit_transverse(c1, c2):
            raise UnsupportedPairError(
                "explicit cells carry opposite rays at a shared base point; "
                "the closed-form sum only covers transverse pairs"
            )
        merged: dict[tuple, list] = {}
        order: list[tuple] = []

        def add(point, hulls):
            for known in order:
                if _vec_eq(known, point):
                    merged[known].extend(hulls)
                    return
            order.append(point)
            merged[point] = list(hulls)

        for point, hulls in c1.rays:
            add(point, hulls)
        for point, hulls in c2.rays:
            add(point, hulls)
        for p1, hulls1 in c1.rays:
            for p2, hulls2 in c2.rays:
                if not _vec_eq(p1, p2):
                    continue
                sums = [
                    (gens1[0], gens2[0]) for gens1 in hulls1 for gens2 in hulls2
                ]
                add(p1, sums)
        return ConeCell(
            "explicit",
            c1.dim,
            rays=tuple((p, tuple(merged[p])) for p in order),
        )
    raise UnsupportedPairError(
        f"no exact sum rule for cell kinds {c1.kind!r} and {c2.kind!r}"
    )


def _sampled_closure(c1: ConeCell, c2: ConeCell, rng=None, n_base: int = 24) -> ConeCell:
    """Approximate sequential sum: accumulation directions of sampled sums."""
    if rng is None:
        rng = np.random.default_rng(0)
    els1 = c1.sample_elements(rng, n_base=n_base)
    els2 = c2.sample_elements(rng, n_base=n_base)
    if not els1 or not els2:
        return ConeCell.empty(c1.dim)
    x1 = np.array([e[0] for e in els1])
    x2 = np.array([e[0] for e in els2])
    found: dict[tuple, list] = {}
    eps = 1e-3
    dists = np.linalg.norm(x1[:, None, :] - x2[None, :, :], axis=2)
    pairs = np.argwhere(dists <= eps)
    for i, j in pairs:
        xi = els1[i][1] + els2[j][1]
        norm = np.linalg.norm(xi)
        if norm <= 1e-9 * (np.linalg.norm(els1[i][1]) + np.linalg.norm(els2[j][1])):
            continue
        direction = xi / norm
        key = tuple(np.round((x1[i] + x2[j]) / 2.0, 6))
        bucket = found.setdefault(key, [])
        if not any(np.linalg.norm(direction - d) <= 1e-4 for d in bucket):
            bucket.append(direction)
    data = [
        (point, [
            (tuple(float(c) for c in d),) for d in dirs
        ])
        for point, dirs in found.items()
    ]
    return ConeCell.explicit(c1.dim, data)
