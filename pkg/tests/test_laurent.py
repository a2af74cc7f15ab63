"""Contour extraction of Laurent data and its failure modes."""

from math import factorial

import numpy as np
import pytest

from meropi.config import DEFAULT_CONFIG
from meropi.dist.hyper import OrthantPairing
from meropi.dist.laurent import NumericGerm, laurent_extract, residue
from meropi.dist.pairing import BlockPairing, ProductPairing
from meropi.dist.quadrature import gauss_legendre_on
from meropi.dist.testfn import BumpFactor, ProductTestFunction, bump
from meropi.errors import ExtractionError, PoleMismatchError
from meropi.germs.linform import LinearForm


PHI = bump(0.3, 1.0, poly=(1.0, 0.5))
PHI2 = ProductTestFunction(
    [BumpFactor((1.0, 0.4), 0.2, 1.0), BumpFactor((1.0,), -0.1, 0.9)]
)
L1 = LinearForm((1,))


def _phi1(x, d=0):
    return PHI.factors[0].deriv(d, np.asarray(x, dtype=float))


def _pv_oracle() -> float:
    """Principal value of phi(x)/x: odd subtraction leaves a smooth integrand."""
    x, w = gauss_legendre_on(0.0, 1.3, 400)
    return float(np.sum(w * (_phi1(x) - _phi1(-x)) / x))


def _fp_x2_oracle() -> float:
    """Continuation value of |x|^(2 nu) phi at nu = -1.

    Subtracting psi(0) (psi = even part) makes the integrand regular at 0
    but extends it by -psi(0)/x^2 beyond the support, whose tail integral
    -psi(0)/b must be added back.
    """
    b = 1.3
    x, w = gauss_legendre_on(0.0, b, 400)
    psi0 = 2.0 * float(_phi1([0.0])[0])
    sub = (_phi1(x) + _phi1(-x) - psi0) / x**2
    return float(np.sum(w * sub)) - psi0 / b


class TestKnownGerms:
    def test_simple_pole_coefficient(self):
        f = lambda lam: 1.0 / complex(lam[0])
        ng = laurent_extract(f, (0,), pole_forms={L1: 1}, max_order=2, clearance=1.0)
        assert abs(ng.coeff((0,)) - 1.0) < 1e-12
        assert abs(ng.coeff((1,))) < 1e-12
        assert abs(ng.coeff((2,))) < 1e-12

    def test_entire_function_taylor(self):
        f = lambda lam: np.exp(complex(lam[0]))
        ng = laurent_extract(f, (0,), pole_forms={}, max_order=8, clearance=4.0)
        for k in range(9):
            assert abs(ng.coeff((k,)) - 1.0 / factorial(k)) < 1e-10

    def test_shifted_center(self):
        f = lambda lam: 1.0 / (complex(lam[0]) - 2.0) + complex(lam[0])
        ng = laurent_extract(f, (2,), pole_forms={L1: 1}, max_order=1, clearance=2.0)
        assert abs(ng.coeff((0,)) - 1.0) < 1e-12  # residue
        assert abs(ng.finite_part() - 2.0) < 1e-11

    def test_two_variable_mixed_pole(self):
        f = lambda lam: np.exp(complex(lam[0] - lam[1])) / complex(lam[0] + lam[1])
        form = LinearForm((1, 1))
        ng = laurent_extract(f, (0, 0), pole_forms={form: 1}, max_order=2, clearance=1.0)
        # cleared numerator is exp(z1 - z2): Taylor (-1)^b2 / (b1! b2!)
        for b1 in range(3):
            for b2 in range(3 - b1):
                want = (-1.0) ** b2 / (factorial(b1) * factorial(b2))
                assert abs(ng.coeff((b1, b2)) - want) < 1e-10

    def test_germ_reproduces_pairing_locally(self):
        bp = ProductPairing([BlockPairing(["x"], PHI)])
        ng = laurent_extract(bp, (-1,), max_order=6)
        for z in (0.02, -0.013 + 0.011j, 0.02j):
            want = bp.value(np.array([-1.0 + z]))
            got = ng.germ.eval((-1.0 + z,))
            assert abs(got - want) < 1e-5 * (1 + abs(want))


class TestDistributionalValues:
    def test_x_is_regular_at_minus_one(self):
        # the two sign charts both have simple poles, but their residues
        # cancel: (x+i0)^lambda is entire through lambda = -1
        bp = ProductPairing([BlockPairing(["x"], PHI)])
        ng = laurent_extract(bp, (-1,), max_order=1)
        assert abs(ng.coeff((0,))) < 1e-10

    def test_value_at_minus_one_is_pv_minus_i_pi_delta(self):
        bp = ProductPairing([BlockPairing(["x"], PHI)])
        ng = laurent_extract(bp, (-1,), max_order=1)
        want = _pv_oracle() - 1j * np.pi * float(_phi1([0.0])[0])
        assert abs(ng.finite_part() - want) < 1e-9 * (1 + abs(want))

    @pytest.mark.parametrize("k", [1, 2, 3, 4])
    def test_one_sided_residue_ladder(self, k):
        # residues of the one-sided power: phi^(k-1)(0) / (k-1)!
        op = OrthantPairing(PHI)
        got = residue(op, (-k,), form=L1, clearance=1.0)
        want = float(_phi1([0.0], d=k - 1)[0]) / factorial(k - 1)
        assert abs(got - want) < 1e-6 * (1 + abs(want))

    def test_even_square_regular_at_minus_one(self):
        bp = ProductPairing([BlockPairing(["x2"], PHI)])
        ng = laurent_extract(bp, (-1,), max_order=1)
        assert abs(ng.coeff((0,))) < 1e-10
        want = _fp_x2_oracle()
        assert abs(ng.finite_part() - want) < 1e-8 * (1 + abs(want))

    def test_uv_double_pole_coefficient_cancels(self):
        # each quadrant contributes a double pole at lambda = -1, but the
        # phase weights sum the leading coefficients to zero, leaving a
        # simple pole
        bp = BlockPairing(["uv"], PHI2)
        ng = laurent_extract(bp, (-1,), max_order=1)
        assert bp.pole_forms((-1,)) == {L1: 2}  # a priori bound
        assert abs(ng.coeff((0,))) < 1e-10
        assert abs(ng.coeff((1,))) > 0.1  # genuine simple pole

    def test_uv_residue_against_limit_extrapolation(self):
        # independent route: Richardson extrapolation of z * F(-1 + z)
        # along the real direction, using only the direct continuation
        bp = BlockPairing(["uv"], PHI2)
        ng = laurent_extract(bp, (-1,), max_order=1)
        res = ng.coeff((1,))  # coefficient of z in z^2 * F
        eps = 0.02
        f1 = eps * bp.value([-1.0 + eps])
        f2 = (eps / 2) * bp.value([-1.0 + eps / 2])
        f4 = (eps / 4) * bp.value([-1.0 + eps / 4])
        want = (8 * f4 - 6 * f2 + f1) / 3  # removes the eps and eps^2 terms
        assert abs(res - want) < 1e-4 * (1 + abs(want))

    def test_minkowski_matches_lightcone_chart_of_uv(self):
        # Q = x0^2 - x1^2 factorizes through u = x0-x1, v = x0+x1 with
        # Jacobian 1/2; both pairings must agree as functions of lambda
        from meropi.dist.testfn import LinearImageTestFn

        a = np.array([[0.5, 0.5], [-0.5, 0.5]])
        psi = LinearImageTestFn(PHI2, a)
        bmk = BlockPairing(["minkowski"], PHI2)
        buv = BlockPairing(["uv"], psi)
        for lam in (1.3, 0.7 + 0.4j, -0.4):
            va, vb = bmk.value([lam]), 0.5 * buv.value([lam])
            assert abs(va - vb) < 1e-10 * (1 + abs(va))
        ra = laurent_extract(bmk, (-1,), max_order=1).coeff((1,))
        rb = 0.5 * laurent_extract(buv, (-1,), max_order=1).coeff((1,))
        assert abs(ra - rb) < 1e-9 * (1 + abs(ra))

    def test_product_block_germ(self):
        b1 = BlockPairing(["x"], bump(0.2, 1.0))
        b2 = BlockPairing(["x"], bump(-0.3, 0.8))
        pp = ProductPairing([b1, b2])
        ng = laurent_extract(pp, (-1, -1), max_order=0)
        assert set(ng.germ.pole_dict()) == {LinearForm((1, 0)), LinearForm((0, 1))}
        # both factors are regular at -1: the singular coefficients vanish
        # and the leading regular one factorizes over the blocks
        for beta in ((0, 0), (1, 0), (0, 1)):
            assert abs(ng.coeff(beta)) < 1e-10
        v1 = laurent_extract(b1, (-1,), max_order=0).coeff((1,))
        v2 = laurent_extract(b2, (-1,), max_order=0).coeff((1,))
        want = v1 * v2
        assert abs(ng.coeff((1, 1)) - want) < 1e-8 * (1 + abs(want))


class TestFailureModes:
    def test_missed_pole_raises_mismatch(self):
        op = OrthantPairing(PHI)
        with pytest.raises(PoleMismatchError):
            laurent_extract(op, (-1,), pole_forms={}, max_order=0, clearance=1.0)

    def test_missed_mixed_pole_raises_mismatch(self):
        # 1/(lam1+lam2) is singular on a diagonal; with no pole cleared the
        # torus coefficients never settle
        f = lambda lam: 1.0 / complex(lam[0] + lam[1])
        with pytest.raises(PoleMismatchError):
            laurent_extract(f, (0, 0), pole_forms={}, max_order=0, clearance=1.0)

    def test_budget_exhaustion_raises_extraction_error(self):
        # a pole just outside the contour slows Cauchy decay; with a single
        # doubling allowed the estimates improve but miss the tolerance
        f = lambda lam: 1.0 / (complex(lam[0]) - 0.26)
        cfg = DEFAULT_CONFIG.with_(max_contour_doublings=1, contour_nodes=16)
        with pytest.raises(ExtractionError) as err:
            laurent_extract(f, (0,), pole_forms={}, max_order=0, cfg=cfg, clearance=1.0)
        assert not isinstance(err.value, PoleMismatchError)
        assert err.value.last_two

    def test_overclaimed_pole_is_harmless(self):
        bp = ProductPairing([BlockPairing(["x"], PHI)])
        ng = laurent_extract(bp, (1,), pole_forms={L1: 1}, max_order=0, clearance=1.0)
        assert abs(ng.coeff((0,))) < 1e-12

    def test_zero_pole_power_rejected(self):
        f = lambda lam: complex(lam[0])
        with pytest.raises(ValueError):
            laurent_extract(f, (0,), pole_forms={L1: 0}, clearance=1.0)

    def test_form_dimension_checked(self):
        f = lambda lam: complex(lam[0])
        with pytest.raises(ValueError):
            laurent_extract(f, (0,), pole_forms={LinearForm((1, 1)): 1}, clearance=1.0)

    def test_callable_without_lattice_needs_explicit_poles(self):
        f = lambda lam: complex(lam[0])
        with pytest.raises(ValueError):
            laurent_extract(f, (0,))


class TestResultRecord:
    def test_metadata(self):
        f = lambda lam: np.exp(complex(lam[0]))
        ng = laurent_extract(f, (0,), pole_forms={}, max_order=2, clearance=2.0)
        assert isinstance(ng, NumericGerm)
        assert ng.center == (0,)
        assert ng.radius == pytest.approx(0.5)
        assert ng.nodes >= 16 and (ng.nodes & (ng.nodes - 1)) == 0
        assert ng.est_error < 1e-10

    def test_json_shape(self):
        f = lambda lam: 1.0 / complex(lam[0])
        ng = laurent_extract(f, (0,), pole_forms={L1: 1}, max_order=1, clearance=1.0)
        blob = ng.to_json()
        assert set(blob) == {"germ", "radius", "nodes", "est_error", "max_order"}
        assert blob["germ"]["p"] == 1

    def test_residue_requires_unambiguous_pole(self):
        f = lambda lam: 1.0 / complex(lam[0])
        with pytest.raises(AttributeError):
            residue(f, (0,))  # callable has no lattice to consult
