from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from meropi.germs import (
    LinearForm,
    dependence_relation,
    form_rank,
    normalize_form,
    orth_complement,
    q_dot,
)
from meropi.germs.linform import invert_matrix


def form(*coeffs):
    return LinearForm(coeffs)


class TestNormalize:
    def test_gcd_and_sign(self):
        f, scale = normalize_form([2, 4])
        assert f.coeffs == (1, 2)
        assert scale == 2

        f, scale = normalize_form([-3, 6])
        assert f.coeffs == (1, -2)
        assert scale == -3

    def test_rational_input(self):
        f, scale = normalize_form([Fraction(1, 2), Fraction(1, 3)])
        assert f.coeffs == (3, 2)
        assert scale == Fraction(1, 6)
        assert [scale * c for c in f.coeffs] == [Fraction(1, 2), Fraction(1, 3)]

    def test_zero_rejected(self):
        with pytest.raises(ValueError):
            normalize_form([0, 0])

    def test_constructor_requires_normal_form(self):
        with pytest.raises(ValueError):
            LinearForm((2, 4))
        with pytest.raises(ValueError):
            LinearForm((-1, 2))


class TestQ:
    def test_standard_inner_product(self):
        assert q_dot((1, 1), (1, -1)) == 0
        assert q_dot((1, 2), (3, 4)) == 11

    def test_orthonormal_basis(self):
        e = [(1, 0, 0), (0, 1, 0), (0, 0, 1)]
        for i in range(3):
            for j in range(3):
                assert q_dot(e[i], e[j]) == (1 if i == j else 0)


class TestDependence:
    def test_independent_returns_none(self):
        assert dependence_relation([form(1, 0), form(0, 1)]) is None

    def test_simple_relation(self):
        rel = dependence_relation([form(1, 0), form(0, 1), form(1, 1)])
        assert rel is not None
        total = [Fraction(0), Fraction(0)]
        forms = [form(1, 0), form(0, 1), form(1, 1)]
        for i, c in rel.items():
            assert c != 0
            for j in range(2):
                total[j] += c * forms[i].coeffs[j]
        assert total == [0, 0]

    def test_duplicate_form(self):
        rel = dependence_relation([form(1, 1), form(1, 1)])
        assert rel == {0: Fraction(1), 1: Fraction(-1)} or set(rel) == {0, 1}


class TestOrthComplement:
    def test_axis_p2(self):
        out = orth_complement([form(1, 0)], 2)
        assert [f.coeffs for f in out] == [(0, 1)]

    def test_diagonal_p2(self):
        out = orth_complement([form(1, 1)], 2)
        assert [f.coeffs for f in out] == [(1, -1)]

    def test_pair_p3(self):
        # Oracle: solve the 2x3 orthogonality system by hand.
        # Q((1,0,0), v) = 0 and Q((1,1,0), v) = 0 force v1 = v2 = 0,
        # so the complement is spanned by (0,0,1).
        out = orth_complement([form(1, 0, 0), form(1, 1, 0)], 3)
        assert len(out) == 1
        assert out[0].coeffs == (0, 0, 1)

    def test_dependent_input_rejected(self):
        with pytest.raises(ValueError, match="dependent input"):
            orth_complement([form(1, 0), form(0, 1), form(1, 1)], 2)

    def test_full_rank_empty_complement(self):
        assert orth_complement([form(1, 0), form(0, 1)], 2) == []

    @given(
        st.lists(
            st.lists(st.integers(-4, 4), min_size=3, max_size=3),
            min_size=1,
            max_size=2,
        )
    )
    @settings(max_examples=60, deadline=None)
    def test_property_orthogonal_and_independent(self, rows):
        forms = []
        for row in rows:
            if all(x == 0 for x in row):
                continue
            f, _ = normalize_form(row)
            if f not in forms:
                forms.append(f)
        if not forms or form_rank(forms) < len(forms):
            return
        p = 3
        out = orth_complement(forms, p)
        assert len(out) == p - len(forms)
        for g in out:
            for f in forms:
                assert q_dot(g.coeffs, f.coeffs) == 0
        assert form_rank(forms + out) == p


class TestInvert:
    def test_round_trip(self):
        rows = [[1, 1, 0], [0, 1, 0], [2, 0, 1]]
        inv = invert_matrix(rows)
        n = 3
        for i in range(n):
            for j in range(n):
                acc = sum(Fraction(rows[i][k]) * inv[k][j] for k in range(n))
                assert acc == (1 if i == j else 0)

    def test_singular_rejected(self):
        with pytest.raises(ValueError, match="singular"):
            invert_matrix([[1, 1], [2, 2]])
