"""Propagator powers on flat model spacetimes and their renormalized pairings.

Two model geometries are supported: the line (``d=1``), where the squared
interval between two points is ``(x - y)**2``, and the Minkowski plane
(``d=2``) with ``(x0 - y0)**2 - (x1 - y1)**2``.  A propagator is a rational
function ``U/(Gamma + i0) + V*log(Gamma + i0) + W`` of the interval, and an
amplitude attaches a power of it to every edge of a finite graph whose
vertices carry test functions.

Everything singular funnels through the relative coordinate of a two-point
block, where the interval becomes a catalog factor (``x2`` on the line,
``minkowski`` on the plane) and the germ extraction / polar projection
machinery of :mod:`meropi.renorm` applies verbatim.  Regularized amplitudes
away from that regime are computed by direct quadrature or Monte Carlo with
a reported standard error, and a configuration is accepted only when one of
the routes is actually valid for it (:class:`ValidityRegionError` otherwise).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .config import DEFAULT_CONFIG, QuadratureConfig
from .dist.catalog import CatalogEntry, get_entry
from .dist.pairing import power_pairing
from .dist.quadrature import gauss_legendre_on, integrate_1d, integrate_box
from .dist.testfn import (
    BumpFactor,
    LinearImageTestFn,
    NumericConvolutionFactor,
    ProductTestFunction,
)
from .errors import ValidityRegionError
from .microlocal import CausalSite, CotangentElement, PolarizedConfig
from .renorm import (
    CheckReport,
    RenormRequest,
    SingularTerm,
    _report,
    renormalize,
)

__all__ = [
    "AmplitudeResult",
    "AmplitudeSpec",
    "Isometry",
    "PlanarCorrelation",
    "PropagatorModel",
    "RegionCover",
    "Spacetime",
    "check_covariance",
    "check_holomorphy",
    "check_qft_factorization",
    "check_two_route",
    "cover_regions",
    "feynman_relation_check",
    "regularized_amplitude",
    "relative_test_function",
    "renormalize_amplitude",
    "synge",
]


# --------------------------------------------------------------------------
# geometry


@dataclass(frozen=True)
class Spacetime:
    """Flat model spacetime: the line (d=1) or the Minkowski plane (d=2)."""

    d: int

    def __post_init__(self) -> None:
        if self.d not in (1, 2):
            raise ValueError("supported spacetime dimensions are 1 and 2")

    @property
    def dim(self) -> int:
        return self.d

    def synge(self, x, y):
        """Squared interval and its two gradients, exactly.

        Returns ``(gamma, d_x gamma, d_y gamma)``; the arithmetic stays in
        whatever number type the points carry (int, Fraction, float), so
        rational inputs give rational outputs.
        """
        x = _point(x, self.d)
        y = _point(y, self.d)
        if self.d == 1:
            diff = x[0] - y[0]
            gamma = diff * diff
            return gamma, (2 * diff,), (-2 * diff,)
        dt = x[0] - y[0]
        ds = x[1] - y[1]
        gamma = dt * dt - ds * ds
        return gamma, (2 * dt, -2 * ds), (-2 * dt, 2 * ds)

    def metric_square(self, xi):
        """g^{mu nu} xi_mu xi_nu for a covector, in the same arithmetic."""
        xi = _point(xi, self.d)
        if self.d == 1:
            return xi[0] * xi[0]
        return xi[0] * xi[0] - xi[1] * xi[1]

    def gamma_values(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """Vectorized squared interval between rows of ``xs`` and ``ys``."""
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        ys = np.atleast_2d(np.asarray(ys, dtype=float))
        if self.d == 1:
            diff = xs[:, 0] - ys[:, 0]
            return diff * diff
        dt = xs[:, 0] - ys[:, 0]
        ds = xs[:, 1] - ys[:, 1]
        return dt * dt - ds * ds

    def relative_entry(self) -> CatalogEntry:
        """Catalog factor equal to the interval in the relative coordinate."""
        return get_entry("x2" if self.d == 1 else "minkowski")

    def site(self) -> CausalSite:
        """Causal site of the plane; the line orders points by <= directly."""
        if self.d == 1:
            raise ValueError("the line carries no spatial direction; compare points directly")
        return CausalSite(1)


def _point(x, d: int) -> tuple:
    if np.isscalar(x) or isinstance(x, (int, float, Fraction)):
        x = (x,)
    x = tuple(x)
    if len(x) != d:
        raise ValueError(f"point has {len(x)} coordinates, expected {d}")
    return x


def synge(s: Spacetime, x, y):
    """Module-level alias for :meth:`Spacetime.synge`."""
    return s.synge(x, y)


# --------------------------------------------------------------------------
# propagator and amplitude data


def _log_i0(gamma: np.ndarray) -> np.ndarray:
    """log(gamma + i0) for real gamma, as the boundary value off the zero set."""
    gamma = np.asarray(gamma, dtype=float)
    return np.log(np.abs(gamma)) + 1j * np.pi * (gamma < 0.0)


@dataclass(frozen=True)
class PropagatorModel:
    """G(Gamma) = U/(Gamma + i0) + V log(Gamma + i0) + W."""

    U: complex = 1.0
    V: complex = 0.0
    W: complex = 0.0

    def __post_init__(self) -> None:
        for name in ("U", "V", "W"):
            z = complex(getattr(self, name))
            if not (math.isfinite(z.real) and math.isfinite(z.imag)):
                raise ValueError(f"coefficient {name} must be finite")
            object.__setattr__(self, name, z)

    @property
    def has_log(self) -> bool:
        return self.V != 0

    def power_terms(self, m: int) -> list[tuple[int, complex]]:
        """Expansion G^m = sum_k coeff_k (Gamma + i0)^{-k}, valid for V = 0.

        Returns (k, coeff) pairs with coeff = C(m, k) U^k W^{m-k}; the
        logarithmic term has no such finite power expansion.
        """
        if self.has_log:
            raise ValidityRegionError(
                "the logarithmic propagator term admits no finite power expansion; "
                "set V = 0 or use a quadrature route"
            )
        return [
            (k, math.comb(m, k) * self.U**k * self.W ** (m - k)) for k in range(m + 1)
        ]

    def propagator(self, gamma: np.ndarray) -> np.ndarray:
        """Pointwise boundary value of G off the zero set of Gamma."""
        with np.errstate(divide="ignore", invalid="ignore"):
            lg = _log_i0(gamma)
            return self.U * np.exp(-lg) + self.V * lg + self.W

    def kernel(self, gamma: np.ndarray, m: int, mu: complex) -> np.ndarray:
        """G(Gamma)^m * (Gamma + i0)^mu pointwise, off the zero set.

        Computed in the factored form (U + V g log g + W g)^m g^(mu - m)
        whose inner bracket stays finite as gamma -> 0; quadrature nodes
        that underflow onto the zero set itself contribute nothing on the
        absolutely integrable routes and are dropped.
        """
        gamma = np.asarray(gamma, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            lg = _log_i0(gamma)
            g = np.exp(lg)
            glg = np.where(gamma == 0.0, 0.0, g * lg)
            out = (self.U + self.V * glg + self.W * g) ** m * np.exp((mu - m) * lg)
        return np.where(np.isfinite(out), out, 0.0)


@dataclass(frozen=True)
class AmplitudeSpec:
    """Vertex count and edge multiplicities of a product of propagator powers."""

    n: int
    edges: tuple[tuple[tuple[int, int], int], ...]

    def __init__(self, n: int, edges) -> None:
        object.__setattr__(self, "n", int(n))
        if self.n < 2:
            raise ValueError("an amplitude needs at least two vertices")
        if isinstance(edges, Mapping):
            items = edges.items()
        else:
            items = list(edges)
        cleaned = {}
        for (i, j), m in items:
            i, j, m = int(i), int(j), int(m)
            if not (1 <= i < j <= self.n):
                raise ValueError(f"edge ({i}, {j}) must satisfy 1 <= i < j <= n")
            if m < 0:
                raise ValueError("edge multiplicities must be nonnegative")
            if m == 0:
                continue
            if (i, j) in cleaned:
                raise ValueError(f"edge ({i}, {j}) listed twice")
            cleaned[(i, j)] = m
        if not cleaned:
            raise ValueError("at least one edge multiplicity must be positive")
        object.__setattr__(self, "edges", tuple(sorted(cleaned.items())))

    @property
    def edge_list(self) -> tuple[tuple[int, int], ...]:
        return tuple(e for e, _ in self.edges)

    def multiplicity(self, i: int, j: int) -> int:
        key = (min(i, j), max(i, j))
        for e, m in self.edges:
            if e == key:
                return m
        return 0


def _lambda_vector(spec: AmplitudeSpec, lam) -> dict[tuple[int, int], complex]:
    """One complex exponent per positive edge, from a scalar, sequence, or map."""
    edges = spec.edge_list
    if isinstance(lam, Mapping):
        out = {}
        for e in edges:
            if e not in lam:
                raise ValueError(f"missing exponent for edge {e}")
            out[e] = complex(lam[e])
        return out
    if np.isscalar(lam) or isinstance(lam, (int, float, complex)):
        return {e: complex(lam) for e in edges}
    vals = list(lam)
    if len(vals) != len(edges):
        raise ValueError("need one exponent per edge")
    return {e: complex(v) for e, v in zip(edges, vals)}


@dataclass(frozen=True)
class AmplitudeResult:
    """Value of an amplitude plus how it was obtained."""

    value: complex
    route: str
    singular: tuple[SingularTerm, ...] = ()
    stderr: float | None = None
    meta: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        blob = {
            "value": [self.value.real, self.value.imag],
            "singular": [t.to_json() for t in self.singular],
            "route": self.route,
            "meta": dict(self.meta),
        }
        if self.stderr is not None:
            blob["stderr"] = self.stderr
        return blob


# --------------------------------------------------------------------------
# region cover of the off-diagonal configuration space


@dataclass(frozen=True)
class RegionCover:
    """Open cover of n-point configurations that are not all at one point.

    Each region is labelled by a proper nonempty vertex subset I and contains
    the configurations where every cross pair (i in I, j outside) is distinct.
    """

    n: int
    regions: tuple[frozenset[int], ...]

    def contains(self, region: frozenset[int], points) -> bool:
        pts = [_point(p, _infer_dim(points)) for p in points]
        if len(pts) != self.n:
            raise ValueError(f"expected {self.n} points")
        inside = set(region)
        outside = set(range(1, self.n + 1)) - inside
        return all(pts[i - 1] != pts[j - 1] for i in inside for j in outside)

    def covers(self, points) -> bool:
        return any(self.contains(region, points) for region in self.regions)


def _infer_dim(points) -> int:
    first = points[0]
    if np.isscalar(first) or isinstance(first, (int, float, Fraction)):
        return 1
    return len(first)


def cover_regions(n: int) -> RegionCover:
    """All proper nonempty vertex subsets, as regions of a configuration cover."""
    n = int(n)
    if n < 2:
        raise ValueError("a cover needs at least two vertices")
    verts = list(range(1, n + 1))
    regions = []
    for mask in range(1, 2**n - 1):
        regions.append(frozenset(v for k, v in enumerate(verts) if mask >> k & 1))
    return RegionCover(n, tuple(regions))


# --------------------------------------------------------------------------
# gradient-ray pairs over the zero set


def feynman_relation_check(
    s: Spacetime,
    model: PropagatorModel | None = None,
    n_samples: int = 60,
    seed: int = 0,
    sign: int = 1,
) -> bool:
    """Covector pairs scaled off the interval gradients are polarized iff a > 0.

    Samples null-separated rational point pairs, attaches ``a * d_x Gamma``
    and ``a * d_y Gamma`` with ``a`` of the requested sign, and asks whether
    the covector at the causally later point lies in the closed forward cone
    (strictly, i.e. nonzero).  Pairs on the diagonal with opposite covectors
    must be polarized in the reduced sense regardless of sign.  On the line
    the zero set is the diagonal and the gradient vanishes there, so the ray
    part is empty and only the diagonal part is exercised.

    Returns True iff every sampled pair satisfies the relation.  The gradient
    identity ``g(d_x Gamma, d_x Gamma) = 4 Gamma`` is verified exactly along
    the way and a failure raises AssertionError (it is an identity, not a
    sampled property).
    """
    del model  # the relation depends only on the geometry
    if sign not in (-1, 1):
        raise ValueError("sign must be +1 or -1")
    rng = np.random.default_rng(seed)

    def _frac(lo: int, hi: int, den: int = 8) -> Fraction:
        return Fraction(int(rng.integers(lo * den, hi * den + 1)), den)

    for _ in range(n_samples):
        if s.d == 2:
            x = (_frac(-3, 3), _frac(-3, 3))
            t = _frac(1, 4) * (1 if rng.integers(2) else -1)
            eps = 1 if rng.integers(2) else -1
            y = (x[0] + t, x[1] + eps * t)
            gamma, dx, dy = s.synge(x, y)
            if gamma != 0:
                raise AssertionError("null offset failed to land on the zero set")
            for grad in (dx, dy):
                if s.metric_square(grad) != 4 * gamma:
                    raise AssertionError("gradient identity violated at a rational point")
            a = sign * _frac(1, 3)
            config = PolarizedConfig(
                s.site(),
                (
                    CotangentElement(x, tuple(a * g for g in dx)),
                    CotangentElement(y, tuple(a * g for g in dy)),
                ),
            )
            if not config.is_polarized(strict=True):
                return False
        else:
            x, y = _frac(-3, 3), _frac(-3, 3)
            gamma, dx, _ = s.synge(x, y)
            if s.metric_square(dx) != 4 * gamma:
                raise AssertionError("gradient identity violated at a rational point")
            if x != y and gamma == 0:
                return False  # the line has no null-separated distinct pairs

        # diagonal pairs with cancelling covectors are polarized for either sign
        if s.d == 2:
            p = (_frac(-3, 3), _frac(-3, 3))
            xi = (_frac(-2, 2), _frac(-2, 2))
            if all(c == 0 for c in xi):
                xi = (Fraction(1), Fraction(0))
            config = PolarizedConfig(
                s.site(),
                (
                    CotangentElement(p, xi),
                    CotangentElement(p, tuple(-c for c in xi)),
                ),
            )
            if not config.is_polarized():
                return False
    return True


# --------------------------------------------------------------------------
# relative-coordinate test functions


class PlanarCorrelation:
    """psi(w) = integral phi1(c + w) phi2(c) d^2 c for planar test functions.

    The relative-coordinate reduction of a two-point pairing needs the
    cross-correlation of the vertex functions; when either one is not a
    product (a boosted function, say) the correlation is evaluated on a
    fixed Gauss-Legendre grid over phi2's support, with w-derivatives
    falling on phi1 under the integral sign.
    """

    def __init__(self, phi1, phi2, nodes: int = 40):
        if phi1.dim != 2 or phi2.dim != 2:
            raise ValueError("planar correlation needs two 2-d test functions")
        self.phi1 = phi1
        self.phi2 = phi2
        box = phi2.support_box()
        x, wx = gauss_legendre_on(box[0][0], box[0][1], nodes)
        y, wy = gauss_legendre_on(box[1][0], box[1][1], nodes)
        gx, gy = np.meshgrid(x, y, indexing="ij")
        self._pts = np.stack([gx.reshape(-1), gy.reshape(-1)], axis=-1)
        weights = np.outer(wx, wy).reshape(-1)
        self._w = np.asarray(phi2.deriv_eval((0, 0), self._pts)) * weights

    @property
    def dim(self) -> int:
        return 2

    @property
    def is_product(self) -> bool:
        return False

    def support_box(self) -> list[tuple[float, float]]:
        b1 = self.phi1.support_box()
        b2 = self.phi2.support_box()
        return [(a1 - b2_, b1_ - a2) for (a1, b1_), (a2, b2_) in zip(b1, b2)]

    def deriv_eval(self, d: Sequence[int], pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        out = np.empty(pts.shape[0])
        ncell = self._pts.shape[0]
        chunk = max(1, (1 << 22) // ncell)
        for start in range(0, pts.shape[0], chunk):
            block = pts[start : start + chunk]
            targets = (block[:, None, :] + self._pts[None, :, :]).reshape(-1, 2)
            vals = np.asarray(self.phi1.deriv_eval(tuple(d), targets))
            out[start : start + chunk] = vals.reshape(block.shape[0], ncell) @ self._w
        return out

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        return self.deriv_eval((0, 0), pts)


class ModulatedConvolutionFactor:
    """psi(w) = integral f1(c) f2(c + w) p(c + w) dc with a Chebyshev weight p.

    Mirrors :class:`NumericConvolutionFactor` except that the moving factor
    is multiplied by a polynomial supplied in the Chebyshev basis on a fixed
    interval; that basis stays numerically stable at degrees where a power
    basis conversion would have destroyed every digit.
    """

    def __init__(self, f1, f2, cheb_coef, domain, nodes: int = 160):
        self.f1 = f1
        self.f2 = f2
        self._p = [np.polynomial.Chebyshev(np.asarray(cheb_coef), domain=domain)]
        a1, b1 = f1.support()
        a2, b2 = f2.support()
        self._lo = a2 - b1
        self._hi = b2 - a1
        self._nodes, self._weights = gauss_legendre_on(a1, b1, nodes)
        self._base = None

    def _weight_deriv(self, r: int) -> np.polynomial.Chebyshev:
        while len(self._p) <= r:
            self._p.append(self._p[-1].deriv())
        return self._p[r]

    def support(self) -> tuple[float, float]:
        return (self._lo, self._hi)

    def deriv(self, j: int, w: np.ndarray) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        if self._base is None:
            self._base = self.f1(self._nodes) * self._weights
        shifted = self._nodes[None, :] + w.reshape(-1, 1)
        total = np.zeros(shifted.shape)
        for a in range(j + 1):
            total += math.comb(j, a) * self.f2.deriv(a, shifted) * self._weight_deriv(j - a)(shifted)
        return (total @ self._base).reshape(w.shape)

    def __call__(self, w: np.ndarray) -> np.ndarray:
        return self.deriv(0, w)


class PanelChebFactor:
    """Piecewise-Chebyshev tabulation of an expensive smooth 1-d factor.

    Correlation factors cost an inner quadrature per evaluation, which the
    tensor grids of the hyperbolic pairings cannot afford.  Between its seam
    points (support-edge coincidences) such a factor is analytic, so
    per-panel Chebyshev interpolation reproduces it and its derivatives to
    near machine accuracy at polynomial-evaluation cost.
    """

    def __init__(self, base, seams=(), degree: int = 48, panels_between: int = 4):
        lo, hi = base.support()
        cuts = sorted({float(lo), float(hi), *(float(x) for x in seams if lo < x < hi)})
        edges: list[float] = []
        for a, b in zip(cuts, cuts[1:]):
            edges.extend(np.linspace(a, b, panels_between + 1)[:-1])
        edges.append(cuts[-1])
        self._edges = np.asarray(edges)
        self._base = base
        self._degree = degree
        self._tables: dict[int, list] = {}
        self._order(0)

    def support(self) -> tuple[float, float]:
        return (float(self._edges[0]), float(self._edges[-1]))

    def _order(self, j: int):
        # each derivative order is interpolated from the base factor itself:
        # the correlation is smooth but not analytic, so differentiating a
        # fitted series would compound the interpolation error per order
        if j not in self._tables:
            cheb = np.polynomial.chebyshev.Chebyshev
            self._tables[j] = [
                cheb.interpolate(lambda x: self._base.deriv(j, x), self._degree, domain=[a, b])
                for a, b in zip(self._edges, self._edges[1:])
            ]
        return self._tables[j]

    def deriv(self, j: int, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1)
        out = np.zeros(flat.shape)
        series = self._order(j)
        idx = np.searchsorted(self._edges, flat, side="right") - 1
        idx = np.clip(idx, 0, len(series) - 1)
        inside = (flat >= self._edges[0]) & (flat <= self._edges[-1])
        for p in np.unique(idx[inside]):
            sel = inside & (idx == p)
            out[sel] = series[p](flat[sel])
        return out.reshape(x.shape)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.deriv(0, x)


def _axis_factors(phi, d: int):
    """Per-axis 1-d factors of a test function, or None if genuinely coupled."""
    if hasattr(phi, "deriv") and hasattr(phi, "support"):
        return [phi] if d == 1 else None
    if getattr(phi, "is_product", False) and hasattr(phi, "factors"):
        factors = list(phi.factors)
        if len(factors) == d:
            return factors
    return None


def _tabulated_correlation(g1, g2, nodes: int) -> PanelChebFactor:
    """Axis correlation of g1 against g2, tabulated panel-wise.

    Seams sit where a support edge of the moving factor crosses one of the
    static factor; between the seams the correlation is smooth.  Tensor
    pairings differentiate the tables through integration-by-parts shifts,
    and the convolution's quadrature noise grows about three decades per
    derivative order, so the base gets a generous node count to keep that
    noise from surfacing as derivative jumps at the panel joints.
    """
    a1, b1 = g1.support()
    a2, b2 = g2.support()
    seams = (a1 - a2, a1 - b2, b1 - a2, b1 - b2)
    return PanelChebFactor(NumericConvolutionFactor(g2, g1, max(nodes, 1024)), seams)


def relative_test_function(s: Spacetime, phi1, phi2, nodes: int = 160):
    """Correlation psi(w) = integral phi1(c + w) phi2(c) dc as a test function.

    Pairing a two-point kernel K(x1 - x2) against phi1 (x) phi2 is the same
    as pairing K(w) against this psi.  Product inputs give a product of 1-d
    correlations (tabulated panel-wise on the plane, where they feed tensor
    grids); isometric images of products with a shared matrix reduce to the
    image of the underlying correlation; anything else falls back to the
    full planar grid.
    """
    f1 = _axis_factors(phi1, s.d)
    f2 = _axis_factors(phi2, s.d)
    if f1 is not None and f2 is not None:
        if s.d == 1:
            return ProductTestFunction(
                [NumericConvolutionFactor(g2, g1, nodes) for g1, g2 in zip(f1, f2)]
            )
        return ProductTestFunction(
            [_tabulated_correlation(g1, g2, nodes) for g1, g2 in zip(f1, f2)]
        )
    if (
        isinstance(phi1, LinearImageTestFn)
        and isinstance(phi2, LinearImageTestFn)
        and np.allclose(phi1.matrix, phi2.matrix)
    ):
        if abs(abs(np.linalg.det(phi1.matrix)) - 1.0) > 1e-12:
            raise ValueError("matched linear images must be volume preserving")
        base = relative_test_function(s, phi1.base, phi2.base, nodes)
        offset = phi1.offset - phi2.offset
        return LinearImageTestFn(_as_testfn(base, s.d), phi1.matrix, offset)
    if s.d == 2:
        return PlanarCorrelation(phi1, phi2)
    raise ValueError("1-d test functions must expose their single factor")


def _as_testfn(phi, d: int):
    if hasattr(phi, "deriv_eval"):
        if phi.dim != d:
            raise ValueError(f"test function has dimension {phi.dim}, expected {d}")
        return phi
    if d == 1 and hasattr(phi, "deriv") and hasattr(phi, "support"):
        return ProductTestFunction([phi])
    raise ValueError("not a test function on this spacetime")


def _testfn_integral(phi, cfg: QuadratureConfig) -> complex:
    if getattr(phi, "is_product", False) and hasattr(phi, "factors"):
        total = 1.0 + 0.0j
        for f in phi.factors:
            lo, hi = f.support()
            total *= integrate_1d(lambda x, f=f: f(x), lo, hi, cfg)
        return total
    return integrate_box(lambda pts: phi.deriv_eval((0,) * phi.dim, pts), phi.support_box(), cfg)


def _is_zero_testfn(phi) -> bool:
    box = phi.support_box()
    axes = [np.linspace(lo, hi, 9) for lo, hi in box]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.reshape(-1) for g in mesh], axis=-1)
    vals = np.asarray(phi.deriv_eval((0,) * phi.dim, pts))
    return bool(np.max(np.abs(vals)) == 0.0)


# --------------------------------------------------------------------------
# interval arithmetic for cone avoidance


def _minus_interval(a: tuple[float, float], b: tuple[float, float]) -> tuple[float, float]:
    return (a[0] - b[1], a[1] - b[0])


def _square_interval(iv: tuple[float, float]) -> tuple[float, float]:
    lo, hi = iv
    top = max(lo * lo, hi * hi)
    if lo <= 0.0 <= hi:
        return (0.0, top)
    return (min(lo * lo, hi * hi), top)


def _gamma_interval(s: Spacetime, box_i, box_j) -> tuple[float, float]:
    """Exact interval range of the squared interval over two support boxes."""
    if s.d == 1:
        return _square_interval(_minus_interval(box_i[0], box_j[0]))
    sq_t = _square_interval(_minus_interval(box_i[0], box_j[0]))
    sq_s = _square_interval(_minus_interval(box_i[1], box_j[1]))
    return (sq_t[0] - sq_s[1], sq_t[1] - sq_s[0])


def _edges_off_cone(s: Spacetime, spec: AmplitudeSpec, phis) -> bool:
    """True when interval arithmetic certifies every edge off the zero set."""
    boxes = [phi.support_box() for phi in phis]
    for (i, j), _ in spec.edges:
        lo, hi = _gamma_interval(s, boxes[i - 1], boxes[j - 1])
        if lo <= 0.0 <= hi:
            return False
    return True


# --------------------------------------------------------------------------
# evaluation routes


def _chart_value(s, model, m, lam_e, psi, cfg) -> complex:
    """Route through the relative-coordinate catalog factor, any exponent."""
    terms = model.power_terms(m)
    entry = s.relative_entry()
    psi_fn = _as_testfn(psi, s.d)
    total = 0.0 + 0.0j
    for k, coeff in terms:
        if coeff == 0:
            continue
        mu = m * lam_e - k
        if mu == 0:
            total += coeff * _testfn_integral(psi_fn, cfg)
        else:
            total += coeff * power_pairing(entry, mu, psi_fn, cfg)
    return total


def _relative_quadrature(s, model, m, lam_e, psi, cfg, singular: bool) -> complex:
    """Direct integral of G^m (Gamma+i0)^{m lam} against the correlation."""
    mu = m * lam_e
    psi_fn = _as_testfn(psi, s.d)
    if s.d == 1:
        factor = psi_fn.factors[0] if getattr(psi_fn, "is_product", False) else psi_fn
        lo, hi = factor.support()

        def f(w):
            return model.kernel(w * w, m, mu) * np.asarray(factor(w), dtype=complex)

        return integrate_1d(f, lo, hi, cfg, breakpoints=(0.0,) if singular else ())

    box = psi_fn.support_box()
    u_range = (box[0][0] + box[1][0], box[0][1] + box[1][1])
    v_range = (box[0][0] - box[1][1], box[0][1] - box[1][0])

    def f(pts):
        u, v = pts[:, 0], pts[:, 1]
        w = np.stack([(u + v) / 2.0, (u - v) / 2.0], axis=-1)
        vals = np.asarray(psi_fn.deriv_eval((0, 0), w), dtype=complex)
        return 0.5 * model.kernel(u * v, m, mu) * vals

    breaks = [(0.0,), (0.0,)] if singular else None
    return integrate_box(f, [u_range, v_range], cfg, breakpoints=breaks)


def _smooth_tensor_value(s, model, spec, lamv, phis, nodes: int = 48) -> complex:
    """Gauss-Legendre tensor quadrature for integrands smooth on the supports."""
    grids = []
    weights = []
    for phi in phis:
        for lo, hi in phi.support_box():
            x, w = gauss_legendre_on(lo, hi, nodes)
            grids.append(x)
            weights.append(w)
    mesh = np.meshgrid(*grids, indexing="ij")
    pts = np.stack([g.reshape(-1) for g in mesh], axis=-1)
    wgt = weights[0]
    for w in weights[1:]:
        wgt = np.multiply.outer(wgt, w)
    vals = _amplitude_integrand(s, model, spec, lamv, phis, pts)
    return complex(np.sum(wgt.reshape(-1) * vals))


def _amplitude_integrand(s, model, spec, lamv, phis, pts: np.ndarray) -> np.ndarray:
    d = s.d
    vertex_pts = [pts[:, i * d : (i + 1) * d] for i in range(spec.n)]
    out = np.ones(pts.shape[0], dtype=complex)
    for phi, xs in zip(phis, vertex_pts):
        out *= np.asarray(phi.deriv_eval((0,) * d, xs))
    for (i, j), m in spec.edges:
        gamma = s.gamma_values(vertex_pts[i - 1], vertex_pts[j - 1])
        out *= model.kernel(gamma, m, m * lamv[(i, j)])
    return out


def _monte_carlo_value(
    s, model, spec, lamv, phis, seed: int, batches: int, samples: int
) -> tuple[complex, float]:
    """Uniform Monte Carlo over the product of support boxes, batched.

    The batch means are combined in a fixed order and their spread gives the
    reported standard error; identical seeds reproduce identical values.
    """
    boxes = []
    for phi in phis:
        boxes.extend(phi.support_box())
    los = np.array([b[0] for b in boxes])
    his = np.array([b[1] for b in boxes])
    volume = float(np.prod(his - los))
    rng = np.random.default_rng(seed)
    means = []
    for _ in range(batches):
        pts = rng.uniform(los, his, size=(samples, los.size))
        vals = _amplitude_integrand(s, model, spec, lamv, phis, pts)
        means.append(np.mean(vals) * volume)
    means = np.asarray(means)
    value = complex(np.mean(means))
    stderr = float(np.std(means, ddof=1) / math.sqrt(batches)) if batches > 1 else float("inf")
    return value, stderr


def _single_edge(spec: AmplitudeSpec) -> tuple[tuple[int, int], int]:
    if spec.n != 2:
        raise ValidityRegionError("the chart route reduces exactly one two-point block")
    return spec.edges[0]


def _absolutely_integrable(s: Spacetime, spec: AmplitudeSpec, lamv) -> bool:
    """Every edge kernel is absolutely integrable across its cone.

    Near the cone the kernel scales like |Gamma|^{m (Re lam - 1)} and Gamma
    vanishes to first order on the plane but to second order on the line
    (there it is a perfect square), so the line doubles the exponent and
    tightens the bound from Re lam > 1 - 1/m to Re lam > 1 - 1/(2m).
    """
    order = 2 if s.d == 1 else 1
    return all(order * m * (lamv[e].real - 1.0) > -1.0 for e, m in spec.edges)


def regularized_amplitude(
    s: Spacetime,
    model: PropagatorModel,
    spec: AmplitudeSpec,
    lam,
    phis,
    cfg: QuadratureConfig = DEFAULT_CONFIG,
    route: str | None = None,
    seed: int = 0,
    mc_batches: int = 10,
    mc_samples: int = 20000,
) -> AmplitudeResult:
    """Value of the amplitude at explicit edge exponents.

    Three validity regions are supported, tried in this order when ``route``
    is not forced:

    - ``"chart"``: two vertices, V = 0; exact reduction to the relative
      coordinate and analytic continuation in the exponent (any lambda off
      the pole lattice).
    - ``"quadrature"``: every edge kernel absolutely integrable across its
      cone (Re lambda_e > 1 - 1/m_e on the plane, > 1 - 1/(2 m_e) on the
      line where the interval is a perfect square); two-vertex requests
      integrate the relative kernel with a breakpoint on the cone, larger
      graphs fall back to Monte Carlo with a reported standard error
      (route ``"montecarlo"``).
    - ``"direct"``: supports certified off every cone by interval
      arithmetic, so the integrand is smooth; deterministic tensor
      quadrature up to four total dimensions, Monte Carlo above.

    Anything else raises :class:`ValidityRegionError`.
    """
    phis = [_as_testfn(phi, s.d) for phi in phis]
    if len(phis) != spec.n:
        raise ValueError(f"need {spec.n} vertex test functions")
    lamv = _lambda_vector(spec, lam)

    chart_ok = spec.n == 2 and not model.has_log
    integrable = _absolutely_integrable(s, spec, lamv)
    off_cone = _edges_off_cone(s, spec, phis)

    if route is None:
        if chart_ok:
            route = "chart"
        elif integrable:
            route = "quadrature"
        elif off_cone:
            route = "direct"
        else:
            raise ValidityRegionError(
                "no evaluation route: not a two-point chart reduction, exponents "
                "outside the absolute-integrability region, and supports meet a cone"
            )

    meta = {"lambda": {f"{i}-{j}": [z.real, z.imag] for (i, j), z in lamv.items()}}
    if route == "chart":
        if spec.n != 2:
            raise ValidityRegionError("the chart route needs exactly two vertices")
        if model.has_log:
            raise ValidityRegionError("the chart route needs V = 0")
        (edge, m) = _single_edge(spec)
        psi = relative_test_function(s, phis[0], phis[1])
        value = _chart_value(s, model, m, lamv[edge], psi, cfg)
        return AmplitudeResult(value, "chart", (), None, meta)

    if route == "quadrature":
        if not integrable:
            raise ValidityRegionError(
                "quadrature route needs every edge kernel absolutely integrable: "
                "Re lambda_e > 1 - 1/m_e on the plane, > 1 - 1/(2 m_e) on the line"
            )
        if spec.n == 2:
            (edge, m) = _single_edge(spec)
            psi = relative_test_function(s, phis[0], phis[1])
            value = _relative_quadrature(s, model, m, lamv[edge], psi, cfg, singular=True)
            return AmplitudeResult(value, "quadrature", (), None, meta)
        value, stderr = _monte_carlo_value(s, model, spec, lamv, phis, seed, mc_batches, mc_samples)
        return AmplitudeResult(value, "montecarlo", (), stderr, meta)

    if route == "direct":
        if not off_cone:
            raise ValidityRegionError(
                "direct route needs supports certified off every cone"
            )
        if spec.n == 2:
            (edge, m) = _single_edge(spec)
            psi = relative_test_function(s, phis[0], phis[1])
            value = _relative_quadrature(s, model, m, lamv[edge], psi, cfg, singular=False)
            return AmplitudeResult(value, "direct", (), None, meta)
        if s.d * spec.n <= 4:
            value = _smooth_tensor_value(s, model, spec, lamv, phis)
            return AmplitudeResult(value, "direct", (), None, meta)
        value, stderr = _monte_carlo_value(s, model, spec, lamv, phis, seed, mc_batches, mc_samples)
        return AmplitudeResult(value, "montecarlo", (), stderr, meta)

    raise ValueError(f"unknown route {route!r}")


# --------------------------------------------------------------------------
# renormalization at lambda = 0


def _rescale_singular(terms, m: int, coeff: complex) -> list[SingularTerm]:
    """Singular terms of g(mu) at mu = -k, rewritten in lambda with mu = m lambda - k.

    A pole (mu + k)^{-s} becomes m^{-s} lambda^{-s} and a degree-e monomial
    picks up m^e; the linear forms keep unit coefficients in lambda.
    """
    out = []
    for t in terms:
        s_tot = sum(sk for _, sk in t.poles)
        deg = sum(e for _, e in t.monomial)
        scale = coeff * float(m) ** (deg - s_tot)
        out.append(SingularTerm(t.poles, t.monomial, scale * t.coeff, t.err))
    return out


def renormalize_amplitude(
    s: Spacetime,
    model: PropagatorModel,
    spec: AmplitudeSpec,
    phis,
    cfg: QuadratureConfig = DEFAULT_CONFIG,
    max_order: int = 0,
) -> AmplitudeResult:
    """Renormalized value of the amplitude at lambda = 0.

    Off every cone the amplitude is an ordinary integral and the
    renormalized value must coincide with it, so that is what is returned.
    On the cone the two-vertex block is reduced to the relative coordinate,
    the Laurent germ of each power term is extracted at its integer target,
    the polar part is projected away, and the finite parts are recombined;
    the discarded polar coefficients ride along in ``singular`` rewritten in
    the edge exponent lambda.  Larger graphs on the cone are outside the
    validity region: cover the configuration space with off-cone regions
    instead (:func:`cover_regions`).
    """
    phis = [_as_testfn(phi, s.d) for phi in phis]
    if len(phis) != spec.n:
        raise ValueError(f"need {spec.n} vertex test functions")

    if all(_is_zero_testfn(phi) for phi in phis):
        return AmplitudeResult(0.0 + 0.0j, "zero")

    lam0 = {e: 0.0 + 0.0j for e in spec.edge_list}
    if _edges_off_cone(s, spec, phis):
        res = regularized_amplitude(s, model, spec, lam0, phis, cfg, route="direct")
        return AmplitudeResult(res.value, "direct", (), res.stderr, res.meta)

    if spec.n != 2:
        raise ValidityRegionError(
            "renormalization on the cone is implemented for two-point blocks; "
            "cover larger configurations with off-cone regions"
        )
    if model.has_log:
        raise ValidityRegionError(
            "the logarithmic propagator term is outside the on-cone validity "
            "region; set V = 0 or move the supports off the cone"
        )

    (edge, m) = _single_edge(spec)
    psi = _as_testfn(relative_test_function(s, phis[0], phis[1]), s.d)
    entry = s.relative_entry()
    total = 0.0 + 0.0j
    singular: list[SingularTerm] = []
    meta = {"edge": list(edge), "multiplicity": m, "terms": []}
    for k, coeff in model.power_terms(m):
        if coeff == 0:
            continue
        if k == 0:
            term = coeff * _testfn_integral(psi, cfg)
            total += term
            meta["terms"].append({"k": 0, "value": [term.real, term.imag]})
            continue
        res = renormalize(RenormRequest.single(entry, -k, psi, cfg, max_order))
        total += coeff * res.value
        singular.extend(_rescale_singular(res.singular, m, coeff))
        meta["terms"].append(
            {"k": k, "value": [res.value.real, res.value.imag], "est_error": res.meta["est_error"]}
        )
    return AmplitudeResult(total, "chart-germ", tuple(singular), None, meta)


# --------------------------------------------------------------------------
# finite-part rule: the independent route through explicit Taylor subtraction


def _composite_gl(a: float, b: float, nodes: int, panels: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes/weights on equal panels of (a, b), concatenated."""
    edges = np.linspace(a, b, panels + 1)
    xs, ws = [], []
    for i in range(panels):
        x, w = gauss_legendre_on(edges[i], edges[i + 1], nodes)
        xs.append(x)
        ws.append(w)
    return np.concatenate(xs), np.concatenate(ws)


class _FinitePartRule:
    """Quadrature rule for FP integral |w|^{-2m} q(w) dw on smooth q.

    The rule is exact-by-construction as the analytic continuation of
    integral |w|^mu q(w) dw to mu = -2m: inside a symmetric window the
    Taylor polynomial of order 2m-1 is subtracted — written in integral
    remainder form q - T = w^{2m}/(2m-1)! int_0^1 (1-t)^{2m-1} q^(2m)(tw) dt
    so the quotient never suffers cancellation — the window's Taylor
    integrals are continued in closed form, and the tails integrate plainly.
    Applying the rule costs evaluations of q, of q^(2m) at scaled nodes, and
    of the even derivatives below 2m at zero.  Composite panels are used
    throughout: the integrands are smooth but only piecewise analytic (test
    function supports introduce seams), so single high-order panels stall.
    """

    def __init__(
        self,
        m: int,
        lo: float,
        hi: float,
        nodes: int = 32,
        panels: int = 6,
        t_nodes: int = 24,
        t_panels: int = 6,
    ):
        if lo >= hi:
            raise ValueError("empty support window")
        self.m = int(m)
        if self.m == 0:
            self.plain = _composite_gl(lo, hi, nodes, panels)
            self.zero: list[tuple[int, float]] = []
            self.rem = (np.empty(0), np.empty(0))
            return
        if not (lo < 0.0 < hi):
            # the kernel is smooth on the support: plain weighted panels
            x, w = _composite_gl(lo, hi, nodes, panels)
            self.plain = (x, w * np.abs(x) ** (-2.0 * self.m))
            self.zero = []
            self.rem = (np.empty(0), np.empty(0))
            return
        radius = min(1.0, -lo, hi)
        plain_x, plain_w = [], []
        for a, b in ((lo, -radius), (radius, hi)):
            if a < b:
                x, w = _composite_gl(a, b, nodes, panels)
                plain_x.append(x)
                plain_w.append(w * np.abs(x) ** (-2.0 * self.m))
        self.plain = (
            np.concatenate(plain_x) if plain_x else np.empty(0),
            np.concatenate(plain_w) if plain_w else np.empty(0),
        )
        # continued Taylor-window integrals: only even orders survive symmetry
        self.zero = [
            (j, 2.0 * radius ** (j + 1 - 2 * self.m) / ((j + 1 - 2 * self.m) * math.factorial(j)))
            for j in range(0, 2 * self.m, 2)
        ]
        # remainder form on the window: nodes t*w, weight (1-t)^{2m-1}/(2m-1)!
        xw, ww = _composite_gl(-radius, radius, nodes, panels)
        xt, wt = _composite_gl(0.0, 1.0, t_nodes, t_panels)
        nodes2 = (xt[None, :] * xw[:, None]).reshape(-1)
        weights2 = (
            (ww[:, None] * wt[None, :] * (1.0 - xt[None, :]) ** (2 * self.m - 1))
            / math.factorial(2 * self.m - 1)
        ).reshape(-1)
        self.rem = (nodes2, weights2)

    def apply_shifted(self, factor, u: np.ndarray) -> np.ndarray:
        """FP_w |w|^{-2m} factor(u - w), vectorized over the parameter u.

        This is the renormalized two-point kernel convolved with a 1-d
        factor: q_u(w) = factor(u - w), whose derivatives are signed
        derivatives of the factor.  The rule's window (lo, hi) must contain
        the w-support of q_u for every u used, i.e. min(u) - sup(supp f)
        through max(u) - inf(supp f); mass outside the window is missed.
        """
        u = np.asarray(u, dtype=float)
        out = np.zeros(u.shape, dtype=float)
        x, w = self.plain
        if x.size:
            out = out + self._contract(factor, 0, u, x, w)
        for j, wj in self.zero:
            out = out + wj * (-1.0) ** j * factor.deriv(j, u)
        rx, rw = self.rem
        if rx.size:
            out = out + self._contract(factor, 2 * self.m, u, rx, rw)
        return out

    @staticmethod
    def _contract(factor, order, u, x, w, block: int = 1024) -> np.ndarray:
        out = np.zeros(u.shape, dtype=float)
        for start in range(0, x.size, block):
            xs = x[start : start + block]
            ws = w[start : start + block]
            out = out + factor.deriv(order, u[:, None] - xs[None, :]) @ ws
        return out


# --------------------------------------------------------------------------
# factorization over a vertex partition


def _chebyshev_separation(fun, dom1, dom2, degree: int, rank_tol: float):
    """Low-rank split fun(x, y) ~ sum_r A_r(x) B_r(y) on a product of intervals.

    Tensor Chebyshev interpolation followed by an SVD of the coefficient
    matrix; the factors come back as Chebyshev coefficient vectors on their
    domain intervals together with the largest residual on a probe grid.
    """
    n = degree + 1
    t = np.cos(np.pi * (np.arange(n) + 0.5) / n)  # Chebyshev nodes on (-1, 1)
    x = 0.5 * (dom1[0] + dom1[1]) + 0.5 * (dom1[1] - dom1[0]) * t
    y = 0.5 * (dom2[0] + dom2[1]) + 0.5 * (dom2[1] - dom2[0]) * t
    vals = np.asarray(fun(x[:, None], y[None, :]))
    if np.iscomplexobj(vals):
        scale = max(1.0, float(np.max(np.abs(vals.real))))
        if float(np.max(np.abs(vals.imag))) <= 1e-13 * scale:
            vals = vals.real
    vander = np.polynomial.chebyshev.chebvander(t, degree)
    coef = np.linalg.solve(vander, np.linalg.solve(vander, vals).T).T
    u_mat, sing, vt_mat = np.linalg.svd(coef)
    keep = max(1, int(np.sum(sing > rank_tol * sing[0])))
    a_list = [u_mat[:, r] * math.sqrt(sing[r]) for r in range(keep)]
    b_list = [vt_mat[r] * math.sqrt(sing[r]) for r in range(keep)]

    probe = np.linspace(-0.97, 0.97, 23)
    px = 0.5 * (dom1[0] + dom1[1]) + 0.5 * (dom1[1] - dom1[0]) * probe
    py = 0.5 * (dom2[0] + dom2[1]) + 0.5 * (dom2[1] - dom2[0]) * probe
    approx = np.zeros((probe.size, probe.size), dtype=complex)
    for a, b in zip(a_list, b_list):
        fa = np.polynomial.chebyshev.chebval(probe, a)
        fb = np.polynomial.chebyshev.chebval(probe, b)
        approx += np.outer(fa, fb)
    residual = float(np.max(np.abs(approx - fun(px[:, None], py[None, :]))))
    return a_list, b_list, residual


def _block_edge(spec: AmplitudeSpec, block: tuple[int, ...]) -> int:
    """Multiplicity of the edge inside a 1- or 2-vertex block (0 if none)."""
    if len(block) == 1:
        return 0
    return spec.multiplicity(block[0], block[1])


def _factorization_deterministic(s, model, spec, block_a, block_b, cross, phis, cfg, tol, degree, rank_tol):
    """Joint-germ route against the nested finite-part route on the line."""
    (i1, i2), (j1, j2) = block_a, block_b
    f1 = _axis_factors(phis[i1 - 1], 1)[0]
    f2 = _axis_factors(phis[i2 - 1], 1)[0]
    f3 = _axis_factors(phis[j1 - 1], 1)[0]
    f4 = _axis_factors(phis[j2 - 1], 1)[0]
    m_a = _block_edge(spec, block_a)
    m_b = _block_edge(spec, block_b)
    (ci, cj), m_c = cross[0]
    if len(cross) != 1 or {ci, cj} != {i1, j1}:
        raise ValueError("the deterministic check couples the blocks through one edge (i1, j1)")

    dom1 = f1.support()
    dom3 = f3.support()

    def cross_fun(x1, x3):
        shape = np.broadcast_shapes(np.shape(x1), np.shape(x3))
        a = np.broadcast_to(np.asarray(x1, dtype=float), shape).reshape(-1, 1)
        b = np.broadcast_to(np.asarray(x3, dtype=float), shape).reshape(-1, 1)
        vals = np.asarray(model.propagator(s.gamma_values(a, b))) ** m_c
        return vals.reshape(shape)

    a_list, b_list, residual = _chebyshev_separation(cross_fun, dom1, dom3, degree, rank_tol)

    entry = s.relative_entry()
    terms_a = model.power_terms(m_a)
    terms_b = model.power_terms(m_b)

    lhs = 0.0 + 0.0j
    for r, (a_coef, b_coef) in enumerate(zip(a_list, b_list)):
        psi_r = ProductTestFunction([ModulatedConvolutionFactor(f2, f1, a_coef, dom1)])
        chi_r = ProductTestFunction([ModulatedConvolutionFactor(f4, f3, b_coef, dom3)])
        for k1, c1 in terms_a:
            for k2, c2 in terms_b:
                if c1 == 0 or c2 == 0:
                    continue
                req = RenormRequest(
                    ((entry,), (entry,)), (-k1, -k2), (psi_r, chi_r), cfg
                )
                lhs += c1 * c2 * renormalize(req).value

    # independent route: renormalize each block by the explicit finite-part
    # rule, then integrate the smooth cross factor over the free vertices
    w_a = _minus_interval(f1.support(), f2.support())
    w_b = _minus_interval(f3.support(), f4.support())
    u, wu = _composite_gl(dom1[0], dom1[1], 24, 8)
    v, wv = _composite_gl(dom3[0], dom3[1], 24, 8)
    d2 = np.zeros(u.shape, dtype=complex)
    for k1, c1 in terms_a:
        if c1 == 0:
            continue
        rule = _FinitePartRule(k1, w_a[0], w_a[1])
        d2 = d2 + c1 * rule.apply_shifted(f2, u)
    d4 = np.zeros(v.shape, dtype=complex)
    for k2, c2 in terms_b:
        if c2 == 0:
            continue
        rule = _FinitePartRule(k2, w_b[0], w_b[1])
        d4 = d4 + c2 * rule.apply_shifted(f4, v)
    core = np.asarray(
        model.propagator(s.gamma_values(
            np.repeat(u, v.size).reshape(-1, 1), np.tile(v, u.size).reshape(-1, 1)
        )) ** m_c
    ).reshape(u.size, v.size)
    rhs = complex((wu * f1(u) * d2) @ core @ (wv * f3(v) * d4))

    meta = {
        "blocks": [list(block_a), list(block_b)],
        "cross_edge": [ci, cj, m_c],
        "separation_rank": len(a_list),
        "separation_residual": residual,
    }
    return _report("qft-factorization-d1", lhs, rhs, tol, meta)


def _cheb2d_basis(pts: np.ndarray, box, degree: int) -> np.ndarray:
    """Chebyshev tensor basis values T_p(x0) T_q(x1) on planar points, flattened."""
    cols = []
    for axis in range(2):
        lo, hi = box[axis]
        t = (2.0 * pts[:, axis] - (lo + hi)) / (hi - lo)
        cols.append(np.polynomial.chebyshev.chebvander(t, degree))
    return np.einsum("np,nq->npq", cols[0], cols[1]).reshape(pts.shape[0], -1)


def _factorization_mc(s, model, spec, block_a, block_b, cross, phis, cfg, seed, batches, samples, degree):
    """Two-route Monte Carlo comparison on the plane, all supports off-cone."""
    boxes = [phi.support_box() for phi in phis]
    for (i, j), _ in spec.edges:
        lo, hi = _gamma_interval(s, boxes[i - 1], boxes[j - 1])
        if lo <= 0.0 <= hi:
            raise ValidityRegionError(
                "the Monte Carlo factorization check needs every edge off the cone"
            )
    (ci, cj), m_c = cross[0]
    if len(cross) != 1:
        raise ValueError("the Monte Carlo check couples the blocks through one edge")
    lam0 = {e: 0.0 + 0.0j for e in spec.edge_list}

    # full-graph route
    left, se_left = _monte_carlo_value(s, model, spec, lam0, phis, seed, batches, samples)

    # separated route: Chebyshev tensor fit of the cross kernel over the two
    # planar boxes, then independent block Monte Carlo runs contracted
    # through the coefficient matrix
    box_i = boxes[ci - 1]
    box_j = boxes[cj - 1]
    n = degree + 1
    t = np.cos(np.pi * (np.arange(n) + 0.5) / n)
    vander = np.polynomial.chebyshev.chebvander(t, degree)
    grids = []
    for box in (box_i, box_j):
        grids.append([0.5 * (lo + hi) + 0.5 * (hi - lo) * t for lo, hi in box])
    mesh = np.meshgrid(*grids[0], *grids[1], indexing="ij")
    pts = np.stack([g.reshape(-1) for g in mesh], axis=-1)
    vals = np.asarray(
        model.propagator(s.gamma_values(pts[:, :2], pts[:, 2:])) ** m_c
    ).reshape(n, n, n, n)
    coef = vals
    for axis in range(4):
        coef = np.moveaxis(
            np.linalg.solve(vander, np.moveaxis(coef, axis, 0).reshape(n, -1)).reshape(
                n, *[n] * 3
            ),
            0,
            axis,
        )
    coef_mat = coef.reshape(n * n, n * n)

    probe_rng = np.random.default_rng(seed + 7)
    probe_i = probe_rng.uniform(
        [b[0] for b in box_i], [b[1] for b in box_i], size=(256, 2)
    )
    probe_j = probe_rng.uniform(
        [b[0] for b in box_j], [b[1] for b in box_j], size=(256, 2)
    )
    exact = np.asarray(model.propagator(s.gamma_values(probe_i, probe_j)) ** m_c)
    approx = np.einsum(
        "np,pq,nq->n",
        _cheb2d_basis(probe_i, box_i, degree),
        coef_mat,
        _cheb2d_basis(probe_j, box_j, degree),
    )
    fit_residual = float(np.max(np.abs(exact - approx)))

    def _block(block, edge_m, rng_seed, box_free, free_vertex):
        sub_phis = [phis[v - 1] for v in block]
        sub_boxes = []
        for phi in sub_phis:
            sub_boxes.extend(phi.support_box())
        los = np.array([b[0] for b in sub_boxes])
        his = np.array([b[1] for b in sub_boxes])
        volume = float(np.prod(his - los))
        rng = np.random.default_rng(rng_seed)
        rows = []
        pos = block.index(free_vertex) * 2
        for _ in range(batches):
            pts_b = rng.uniform(los, his, size=(samples, los.size))
            f = np.ones(samples, dtype=complex)
            for idx, phi in enumerate(sub_phis):
                f *= np.asarray(phi.deriv_eval((0, 0), pts_b[:, 2 * idx : 2 * idx + 2]))
            if edge_m:
                gamma = s.gamma_values(pts_b[:, 0:2], pts_b[:, 2:4])
                f *= np.asarray(model.propagator(gamma)) ** edge_m
            basis = _cheb2d_basis(pts_b[:, pos : pos + 2], box_free, degree)
            rows.append(volume * (f @ basis) / samples)
        return np.asarray(rows)

    u_rows = _block(block_a, _block_edge(spec, block_a), seed + 1, box_i, ci)
    v_rows = _block(block_b, _block_edge(spec, block_b), seed + 2, box_j, cj)
    right_batches = np.einsum("bp,pq,bq->b", u_rows, coef_mat, v_rows)
    right = complex(np.mean(right_batches))
    se_right = float(np.std(right_batches, ddof=1) / math.sqrt(batches))

    spread = 3.0 * math.hypot(se_left, se_right)
    meta = {
        "blocks": [list(block_a), list(block_b)],
        "cross_edge": [ci, cj, m_c],
        "stderr_left": se_left,
        "stderr_right": se_right,
        "batches": batches,
        "samples": samples,
        "degree": degree,
        "fit_residual": fit_residual,
    }
    return CheckReport(
        "qft-factorization-d2-mc", abs(left - right) <= spread, left, right, spread, meta
    )


def check_qft_factorization(
    s: Spacetime,
    model: PropagatorModel,
    spec: AmplitudeSpec,
    partition,
    phis,
    cfg: QuadratureConfig = DEFAULT_CONFIG,
    tol: float = 1e-4,
    seed: int = 0,
    separation_degree: int = 32,
    rank_tol: float = 1e-11,
    mc_batches: int = 10,
    mc_samples: int = 40000,
    mc_degree: int = 8,
) -> CheckReport:
    """Renormalization factorizes over a vertex partition with off-cone coupling.

    The partition splits the vertices into two blocks of at most two.  Edges
    inside a block may sit on the cone (they are renormalized); edges across
    the partition must be certified off it by interval arithmetic.  The left
    route renormalizes the whole graph at once (joint germ, polar projection
    at the combined integer target); the right route renormalizes each block
    separately and couples them through the smooth cross kernel.  On the
    line both routes are deterministic: the left one separates the cross
    kernel into Chebyshev rank-one terms and pushes each through the germ
    machinery, the right one applies an explicit Taylor-subtraction
    finite-part rule — no machinery shared, which is the point.  On the
    plane all supports must be off-cone and both routes are Monte Carlo,
    compared within three combined standard errors.
    """
    phis = [_as_testfn(phi, s.d) for phi in phis]
    block_a = tuple(sorted(int(v) for v in partition))
    block_b = tuple(v for v in range(1, spec.n + 1) if v not in block_a)
    if not block_a or not block_b:
        raise ValueError("the partition must be a proper nonempty vertex subset")
    if len(block_a) > 2 or len(block_b) > 2:
        raise ValueError("blocks of more than two vertices are outside the validity region")

    cross = []
    for (i, j), m in spec.edges:
        if (i in block_a) != (j in block_a):
            lo, hi = _gamma_interval(s, phis[i - 1].support_box(), phis[j - 1].support_box())
            if lo <= 0.0 <= hi:
                raise ValidityRegionError(
                    f"cross edge ({i}, {j}) is not certified off the cone"
                )
            cross.append(((i, j), m))

    if not cross:
        # no coupling: the joint germ against the product of block germs
        entry = s.relative_entry()
        m_a = _block_edge(spec, block_a)
        m_b = _block_edge(spec, block_b)
        if not (m_a and m_b):
            raise ValueError("each block needs an interior edge when nothing couples them")
        psi_a = relative_test_function(s, phis[block_a[0] - 1], phis[block_a[1] - 1])
        psi_b = relative_test_function(s, phis[block_b[0] - 1], phis[block_b[1] - 1])
        lhs = 0.0 + 0.0j
        for k1, c1 in model.power_terms(m_a):
            for k2, c2 in model.power_terms(m_b):
                if c1 == 0 or c2 == 0:
                    continue
                if k1 == 0 and k2 == 0:
                    lhs += c1 * c2 * _testfn_integral(_as_testfn(psi_a, s.d), cfg) * _testfn_integral(_as_testfn(psi_b, s.d), cfg)
                    continue
                req = RenormRequest(
                    ((entry,), (entry,)), (-k1, -k2), (_as_testfn(psi_a, s.d), _as_testfn(psi_b, s.d)), cfg
                )
                lhs += c1 * c2 * renormalize(req).value
        ra = renormalize_amplitude(s, model, AmplitudeSpec(2, {(1, 2): m_a}), [phis[block_a[0] - 1], phis[block_a[1] - 1]], cfg)
        rb = renormalize_amplitude(s, model, AmplitudeSpec(2, {(1, 2): m_b}), [phis[block_b[0] - 1], phis[block_b[1] - 1]], cfg)
        rhs = ra.value * rb.value
        meta = {"blocks": [list(block_a), list(block_b)], "cross_edge": None}
        return _report("qft-factorization-tensor", lhs, rhs, tol, meta)

    if s.d == 1:
        return _factorization_deterministic(
            s, model, spec, block_a, block_b, cross, phis, cfg, tol, separation_degree, rank_tol
        )
    return _factorization_mc(
        s, model, spec, block_a, block_b, cross, phis, cfg, seed, mc_batches, mc_samples, mc_degree
    )


# --------------------------------------------------------------------------
# covariance under isometries


@dataclass(frozen=True)
class Isometry:
    """Translation, boost, or point reflection of the model spacetime."""

    kind: str
    shift: tuple = ()
    rapidity: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("translation", "boost", "reflection"):
            raise ValueError("kind must be translation, boost, or reflection")
        object.__setattr__(self, "shift", tuple(float(c) for c in self.shift))

    def matrix(self, d: int) -> np.ndarray:
        if self.kind == "translation":
            return np.eye(d)
        if self.kind == "reflection":
            return -np.eye(d)
        if d != 2:
            raise ValueError("the line admits no boosts")
        ch, sh = math.cosh(self.rapidity), math.sinh(self.rapidity)
        return np.array([[ch, sh], [sh, ch]])

    def offset(self, d: int) -> np.ndarray:
        if self.kind != "translation":
            return np.zeros(d)
        if len(self.shift) != d:
            raise ValueError(f"translation needs {d} components")
        return np.asarray(self.shift)

    def transform(self, phi, d: int):
        """Push the test function forward: (I phi)(x) = phi(map^{-1} x)."""
        if self.kind == "translation":
            off = self.offset(d)
            factors = _axis_factors(phi, d)
            if factors is not None and all(hasattr(f, "shifted") for f in factors):
                moved = [f.shifted(float(a)) for f, a in zip(factors, off)]
                return moved[0] if d == 1 and not hasattr(phi, "factors") else ProductTestFunction(moved)
            return LinearImageTestFn(_as_testfn(phi, d), np.eye(d), -off)
        if self.kind == "reflection":
            factors = _axis_factors(phi, d)
            if factors is not None and all(isinstance(f, BumpFactor) for f in factors):
                moved = [_reflect_factor(f) for f in factors]
                return moved[0] if d == 1 and not hasattr(phi, "factors") else ProductTestFunction(moved)
            return LinearImageTestFn(_as_testfn(phi, d), -np.eye(d))
        if self.rapidity == 0.0:
            return phi
        inv = self.matrix(d)
        inv = np.linalg.inv(inv)
        return LinearImageTestFn(_as_testfn(phi, d), inv)


def _reflect_factor(f: BumpFactor) -> BumpFactor:
    if isinstance(f, BumpFactor):
        signs = (-1.0) ** np.arange(f.poly.size)
        return BumpFactor(f.poly * signs, -f.center, f.width)
    raise ValueError("reflection of a non-polynomial factor needs the linear-image wrapper")


def check_covariance(
    s: Spacetime,
    model: PropagatorModel,
    spec: AmplitudeSpec,
    phis,
    isometry: Isometry,
    cfg: QuadratureConfig = DEFAULT_CONFIG,
    tol: float | None = None,
) -> CheckReport:
    """Renormalized amplitudes agree on a configuration and its isometric image.

    The interval is invariant under translations, reflections, and (on the
    plane) boosts, so pushing every vertex function forward must not change
    the renormalized value.  Translations and reflections permute the
    quadrature data exactly and are held to rounding accuracy; boosts
    produce genuinely non-product functions and are held to the requested
    tolerance.
    """
    if tol is None:
        tol = 1e-8 if isometry.kind == "boost" else 1e-12
    base = renormalize_amplitude(s, model, spec, phis, cfg)
    moved = [isometry.transform(phi, s.d) for phi in phis]
    other = renormalize_amplitude(s, model, spec, moved, cfg)
    meta = {
        "isometry": isometry.kind,
        "rapidity": isometry.rapidity,
        "shift": list(isometry.shift),
        "route": base.route,
    }
    return _report(f"covariance-{isometry.kind}", base.value, other.value, tol, meta)


# --------------------------------------------------------------------------
# holomorphy off the cones, two-route consistency


def check_holomorphy(
    s: Spacetime,
    model: PropagatorModel,
    spec: AmplitudeSpec,
    phis,
    cfg: QuadratureConfig = DEFAULT_CONFIG,
    tol: float = 1e-8,
    contour_radius: float = 0.25,
    contour_nodes: int = 16,
) -> CheckReport:
    """Off every cone the amplitude is holomorphic in the exponents.

    Two-point requests extract the full germ and bound its polar
    coefficients; larger graphs sample the amplitude on an exponent circle
    and bound the residue integral.  Either way the singular content must
    vanish up to quadrature noise, scaled by the amplitude's own size.
    """
    phis = [_as_testfn(phi, s.d) for phi in phis]
    if not _edges_off_cone(s, spec, phis):
        raise ValidityRegionError("holomorphy is asserted off the cones only")

    if spec.n == 2 and not model.has_log:
        res = renormalize_amplitude(s, model, spec, phis, cfg)
        # off the cone the renormalized value and the germ route agree; the
        # germ itself carries the (empty up to noise) polar part
        (edge, m) = _single_edge(spec)
        psi = _as_testfn(relative_test_function(s, phis[0], phis[1]), s.d)
        entry = s.relative_entry()
        worst = 0.0
        for k, coeff in model.power_terms(m):
            if coeff == 0 or k == 0:
                continue
            germ = renormalize(RenormRequest.single(entry, -k, psi, cfg))
            for term in germ.singular:
                worst = max(worst, abs(coeff * term.coeff))
        scale = 1.0 + abs(res.value)
        meta = {"route": "germ", "value": [res.value.real, res.value.imag]}
        return CheckReport("qft-holomorphy", worst <= tol * scale, worst, 0.0, tol, meta)

    theta = 2.0 * np.pi * np.arange(contour_nodes) / contour_nodes
    lam_ring = contour_radius * np.exp(1j * theta)
    vals = []
    for lam in lam_ring:
        res = regularized_amplitude(s, model, spec, lam, phis, cfg, route="direct")
        vals.append(res.value)
    vals = np.asarray(vals)
    residue = abs(np.mean(vals * lam_ring))
    scale = 1.0 + float(np.max(np.abs(vals)))
    meta = {"route": "contour", "radius": contour_radius, "nodes": contour_nodes}
    return CheckReport("qft-holomorphy", residue <= tol * scale, residue, 0.0, tol, meta)


def check_two_route(
    s: Spacetime,
    model: PropagatorModel,
    spec: AmplitudeSpec,
    lam,
    phis,
    cfg: QuadratureConfig = DEFAULT_CONFIG,
    tol: float = 1e-6,
) -> CheckReport:
    """Chart continuation and direct quadrature agree where both are valid."""
    ra = regularized_amplitude(s, model, spec, lam, phis, cfg, route="chart")
    rb = regularized_amplitude(s, model, spec, lam, phis, cfg, route="quadrature")
    lamv = _lambda_vector(spec, lam)
    meta = {"lambda": {f"{i}-{j}": [z.real, z.imag] for (i, j), z in lamv.items()}}
    return _report("qft-two-route", ra.value, rb.value, tol, meta)
