"""Test functions: bump factors, products, convolutions, linear images."""

import numpy as np
import pytest

from meropi.dist.quadrature import gauss_legendre_on
from meropi.dist.testfn import (
    MAX_DERIV,
    BumpFactor,
    LinearImageTestFn,
    NumericConvolutionFactor,
    ProductTestFunction,
    bump,
    bump_deriv,
    bump_nd,
)
from meropi.dist.testfn import testfn_eval as point_eval


def _fd(f, x, h=1e-5):
    return (f(x + h) - f(x - h)) / (2 * h)


class TestBumpDeriv:
    def test_value_inside_outside(self):
        t = np.array([0.0, 0.5, 0.999, 1.0, 1.5, -2.0])
        v = bump_deriv(t, 0)
        assert abs(v[0] - 1.0) < 1e-15  # normalized to B(0) = 1
        assert v[1] == pytest.approx(np.exp(1 - 1 / (1 - 0.25)), rel=1e-12)
        assert v[3] == 0.0 and v[4] == 0.0 and v[5] == 0.0

    @pytest.mark.parametrize("j", [1, 2, 3, 5])
    def test_against_finite_differences(self, j):
        t = np.linspace(-0.9, 0.9, 17)
        got = bump_deriv(t, j)
        want = _fd(lambda s: bump_deriv(s, j - 1), t)
        assert np.max(np.abs(got - want)) < 2e-5 * (1 + np.max(np.abs(got)))

    def test_first_derivative_formula(self):
        # B'(t) = -2t/(1-t^2)^2 * B(t)
        t = np.linspace(-0.8, 0.8, 9)
        want = -2 * t / (1 - t**2) ** 2 * bump_deriv(t, 0)
        assert np.max(np.abs(bump_deriv(t, 1) - want)) < 1e-13

    def test_smooth_at_support_edge(self):
        t = np.array([1 - 1e-6, 1 - 1e-9])
        for j in (1, 4, 8):
            assert np.all(np.isfinite(bump_deriv(t, j)))
            assert np.max(np.abs(bump_deriv(t, j))) < 1e-100

    def test_depth_cap(self):
        with pytest.raises(ValueError):
            bump_deriv(np.array([0.0]), MAX_DERIV + 1)


class TestBumpFactor:
    def test_polynomial_leibniz(self):
        f = BumpFactor((1.0, -0.5, 2.0), center=0.3, width=1.2)
        x = np.linspace(-0.8, 1.4, 11)
        for j in (1, 2, 3):
            lower = lambda s, jj=j - 1: f.deriv(jj, s)
            assert np.max(np.abs(f.deriv(j, x) - _fd(lower, x))) < 3e-5 * (
                1 + np.max(np.abs(f.deriv(j, x)))
            )

    def test_support(self):
        f = BumpFactor(center=-1.0, width=0.5)
        assert f.support() == (-1.5, -0.5)
        assert f.deriv(0, np.array([-1.6]))[0] == 0.0

    def test_width_validation(self):
        with pytest.raises(ValueError):
            BumpFactor(width=0.0)


class TestConvolutionFactor:
    def test_matches_direct_quadrature(self):
        f1 = BumpFactor((1.0, 0.3), 0.0, 1.0)
        f2 = BumpFactor((1.0,), 0.5, 0.8)
        conv = NumericConvolutionFactor(f1, f2)
        x, w = gauss_legendre_on(-1.0, 1.0, 400)
        for t in (-0.2, 0.4, 1.0):
            direct = np.sum(w * f1(x) * f2(x + t))
            # bump factors are smooth but not analytic, so Gauss grids
            # converge root-exponentially; 160 nodes give ~1e-8
            assert abs(conv(np.array([t]))[0] - direct) < 1e-7

    def test_derivative_passes_to_second_factor(self):
        f1 = BumpFactor((1.0,), 0.0, 1.0)
        f2 = BumpFactor((1.0,), 0.0, 1.0)
        conv = NumericConvolutionFactor(f1, f2)
        t = np.linspace(-0.5, 0.5, 7)
        got = conv.deriv(1, t)
        want = _fd(lambda s: conv.deriv(0, s), t)
        assert np.max(np.abs(got - want)) < 1e-6

    def test_support(self):
        f1 = BumpFactor((1.0,), 0.0, 1.0)
        f2 = BumpFactor((1.0,), 2.0, 0.5)
        assert NumericConvolutionFactor(f1, f2).support() == (0.5, 3.5)


class TestProductTestFunction:
    def test_factorizes(self):
        phi = bump_nd((0.0, 1.0), (1.0, 0.5))
        pts = np.array([[0.2, 0.9], [-0.5, 1.3]])
        vals = phi.deriv_eval((0, 0), pts)
        for k, (x, y) in enumerate(pts):
            want = phi.factors[0].deriv(0, np.array([x]))[0] * phi.factors[1].deriv(
                0, np.array([y])
            )[0]
            assert abs(vals[k] - want) < 1e-15

    def test_mixed_partial(self):
        phi = bump_nd((0.0, 0.0), (1.0, 1.0))
        pts = np.array([[0.3, -0.4]])
        got = phi.deriv_eval((1, 2), pts)[0]
        want = phi.factors[0].deriv(1, np.array([0.3]))[0] * phi.factors[1].deriv(
            2, np.array([-0.4])
        )[0]
        assert abs(got - want) < 1e-15

    def test_support_box(self):
        phi = bump_nd((0.0, 2.0), (1.0, 0.25))
        assert phi.support_box() == [(-1.0, 1.0), (1.75, 2.25)]


class TestLinearImage:
    def test_values_match_composition(self):
        phi = bump_nd((0.1, -0.2), (1.0, 0.8))
        a = np.array([[1.0, -1.0], [1.0, 1.0]])
        psi = LinearImageTestFn(phi, a)
        pts = np.array([[0.2, 0.1], [-0.3, 0.4]])
        got = psi.deriv_eval((0, 0), pts)
        want = phi.deriv_eval((0, 0), pts @ a.T)
        assert np.max(np.abs(got - want)) < 1e-15

    def test_chain_rule_vs_finite_differences(self):
        phi = bump_nd((0.0, 0.0), (1.0, 1.0))
        a = np.array([[2.0, 0.5], [-1.0, 1.5]])
        psi = LinearImageTestFn(phi, a)
        h = 1e-5
        pt = np.array([0.05, -0.1])
        got = psi.deriv_eval((1, 0), pt.reshape(1, -1))[0]
        want = (
            psi.deriv_eval((0, 0), (pt + [h, 0]).reshape(1, -1))[0]
            - psi.deriv_eval((0, 0), (pt - [h, 0]).reshape(1, -1))[0]
        ) / (2 * h)
        assert abs(got - want) < 1e-8

    def test_support_box_covers_image(self):
        phi = bump_nd((0.0, 0.0), (1.0, 1.0))
        a = np.array([[1.0, -1.0], [1.0, 1.0]])
        psi = LinearImageTestFn(phi, a)
        box = psi.support_box()
        # psi(x) = phi(Ax): support of psi is A^{-1}(box of phi)
        rng = np.random.default_rng(3)
        pts = rng.uniform(-3, 3, size=(500, 2))
        vals = psi.deriv_eval((0, 0), pts)
        inside = (
            (pts[:, 0] >= box[0][0])
            & (pts[:, 0] <= box[0][1])
            & (pts[:, 1] >= box[1][0])
            & (pts[:, 1] <= box[1][1])
        )
        assert np.all(vals[~inside] == 0.0)

    def test_rejects_dimension_mismatch(self):
        phi = bump_nd((0.0,), (1.0,))
        with pytest.raises(ValueError):
            LinearImageTestFn(phi, np.eye(2))


class TestEvalHelper:
    def test_point_eval(self):
        phi = bump(0.0, 1.0)
        assert point_eval(phi, [0.0]) == pytest.approx(1.0)
        assert point_eval(phi, [0.5], d=(1,)) == pytest.approx(
            float(bump_deriv(np.array([0.5]), 1)[0])
        )

    def test_depth_guard(self):
        phi = bump(0.0, 1.0)
        with pytest.raises(ValueError):
            point_eval(phi, [0.0], d=(MAX_DERIV + 1,))
