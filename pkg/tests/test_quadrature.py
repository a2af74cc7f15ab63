"""Quadrature backbone: double-exponential panels and Gauss-Legendre grids."""

import numpy as np
import pytest

from meropi.config import DEFAULT_CONFIG
from meropi.dist.quadrature import (
    gauss_legendre_on,
    integrate_1d,
    integrate_box,
    ts_nodes_from_left,
)


class TestIntegrate1d:
    def test_polynomial_exact(self):
        val = integrate_1d(lambda x: 3 * x**2 - 2 * x + 1, 0.0, 2.0, DEFAULT_CONFIG)
        assert abs(val - (8.0 - 4.0 + 2.0)) < 1e-12

    def test_exponential(self):
        val = integrate_1d(np.exp, -1.0, 1.0, DEFAULT_CONFIG)
        assert abs(val - (np.e - 1 / np.e)) < 1e-12

    def test_kink_needs_breakpoint(self):
        f = lambda x: np.abs(x - 0.3)
        exact = 0.3**2 / 2 + 0.7**2 / 2
        val = integrate_1d(f, 0.0, 1.0, DEFAULT_CONFIG, breakpoints=(0.3,))
        assert abs(val - exact) < 1e-12

    def test_breakpoints_outside_range_ignored(self):
        val = integrate_1d(np.cos, 0.0, 1.0, DEFAULT_CONFIG, breakpoints=(-5.0, 9.0))
        assert abs(val - np.sin(1.0)) < 1e-12

    def test_endpoint_singularity(self):
        # integral of x^(-1/2) over (0,1) = 2; the left-singular node set
        # resolves the algebraic endpoint blowup
        val = integrate_1d(lambda x: 1.0 / np.sqrt(x), 0.0, 1.0, DEFAULT_CONFIG)
        assert abs(val - 2.0) < 1e-10

    def test_complex_values(self):
        val = integrate_1d(lambda x: np.exp(1j * x), 0.0, np.pi, DEFAULT_CONFIG)
        assert abs(val - (np.sin(np.pi) + 1j * (1 - np.cos(np.pi)))) < 1e-12


class TestIntegrateBox:
    def test_separable_2d(self):
        f = lambda p: np.sin(p[..., 0]) * np.cos(p[..., 1])
        val = integrate_box(f, [(0.0, np.pi), (0.0, np.pi / 2)], DEFAULT_CONFIG)
        assert abs(val - 2.0 * 1.0) < 1e-10

    def test_coupled_3d(self):
        f = lambda p: np.exp(p[..., 0] * p[..., 1] - p[..., 2])
        val = integrate_box(f, [(0.0, 1.0)] * 3, DEFAULT_CONFIG)
        # Fubini oracle on a dense Gauss grid
        x, wx = gauss_legendre_on(0.0, 1.0, 48)
        inner = np.exp(np.outer(x, x))  # e^{x y}
        two_d = wx @ inner @ wx
        one_d = np.sum(wx * np.exp(-x))
        assert abs(val - two_d * one_d) < 1e-9


class TestNodes:
    def test_left_distances_positive_and_small(self):
        dist, pts, w = ts_nodes_from_left(0.0, 1.0, 6)
        assert np.all(dist > 0) and np.all(w > 0)
        assert dist.min() < 1e-10  # clusters far into the corner
        assert np.all(np.abs(dist - pts) < 1e-15)

    def test_gauss_legendre_degree(self):
        x, w = gauss_legendre_on(-1.0, 3.0, 8)
        # exact for degree <= 15
        val = np.sum(w * x**15)
        exact = (3.0**16 - (-1.0) ** 16) / 16
        assert abs(val - exact) < 1e-9 * abs(exact)
