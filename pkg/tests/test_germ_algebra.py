from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _oracles import bounded_difference_along_rays, clear_denominators_equal
from meropi.errors import GermParseError, NonlinearPoleError, OnPoleHyperplaneError
from meropi.germs import (
    EXACT,
    GaussianRational,
    LinearForm,
    MeroGerm,
    Poly,
    decomposition_to_json,
    form_rank,
    germ_to_text,
    independent,
    parse_germ,
    project_pi,
    q_dot,
    reduce_dependent,
)

GQ = GaussianRational


def form(*coeffs):
    return LinearForm(coeffs)


# -- parsing -------------------------------------------------------------------


class TestParse:
    def test_identity_case(self):
        g = parse_germ("1/(l1)", 2)
        assert g.pole_dict() == {form(1, 0): 1}
        assert g.num == Poly.const(2, GQ(1))

    def test_repeated_factor(self):
        g = parse_germ("(l1+l2)/(l1*l1)", 2)
        assert g.pole_dict() == {form(1, 0): 2}
        assert g.num == Poly.from_form(form(1, 1))

    def test_two_forms(self):
        g = parse_germ("1/(l1*(l1+l2))", 2)
        assert g.pole_dict() == {form(1, 0): 1, form(1, 1): 1}

    def test_power_syntax(self):
        assert parse_germ("1/l1^2", 2) == parse_germ("1/(l1*l1)", 2)
        assert parse_germ("l1^-1", 2) == parse_germ("1/l1", 2)
        assert parse_germ("1/(l1+l2)**2", 2) == parse_germ("1/((l1+l2)*(l1+l2))", 2)

    def test_denominator_normalization(self):
        # 2*l1 - 2*l2 normalizes to the form l1 - l2 with the scale moved
        # into the numerator.
        g = parse_germ("1/(2*l1-2*l2)", 2)
        assert g.pole_dict() == {form(1, -1): 1}
        assert g.num == Poly.const(2, GQ(Fraction(1, 2)))

    def test_expanded_square_recognized(self):
        g = parse_germ("1/(l1^2 + 2*l1*l2 + l2^2)", 2)
        assert g.pole_dict() == {form(1, 1): 2}

    def test_imaginary_coefficient(self):
        g = parse_germ("i*l1/(l1+l2)", 2)
        assert g.num == Poly.from_form(form(1, 0)).scale(GQ(0, 1))

    def test_nested_quotient(self):
        assert parse_germ("1/(l1/l2)", 2) == parse_germ("l2/l1", 2)

    def test_nonlinear_pole(self):
        with pytest.raises(NonlinearPoleError):
            parse_germ("1/(l1*l2 + l2^2 + l1^2)", 2)
        with pytest.raises(NonlinearPoleError):
            parse_germ("1/(l1 + 1)", 2)

    def test_parse_error_has_position(self):
        with pytest.raises(GermParseError) as err:
            parse_germ("1/(l1", 2)
        assert err.value.position == 5
        with pytest.raises(GermParseError):
            parse_germ("1/l9", 2)

    def test_division_by_zero_constant(self):
        with pytest.raises(GermParseError, match="division by zero"):
            parse_germ("l1/0", 2)
        with pytest.raises(GermParseError, match="division by zero"):
            parse_germ("l1/(l2 - l2)", 2)

    def test_cancellation_to_canonical_form(self):
        g = parse_germ("(l1*l2)/l1", 2)
        assert g.is_holomorphic()
        assert g == parse_germ("l2", 2)


# -- ring operations -----------------------------------------------------------


class TestRing:
    def test_mul(self):
        g = parse_germ("1/l1", 2) * parse_germ("1/l2", 2)
        assert g == parse_germ("1/(l1*l2)", 2)

    def test_add_cancels(self):
        g = parse_germ("1/l1", 2) + parse_germ("-1/l1", 2)
        assert g.is_zero()
        assert g.pole_dict() == {}

    def test_independent(self):
        assert independent(parse_germ("1/l1", 2), parse_germ("1/l2", 2))
        assert not independent(parse_germ("1/l1", 2), parse_germ("1/(l1+l2)", 2))

    def test_add_common_denominator(self):
        g = parse_germ("1/l1", 2) + parse_germ("1/l2", 2)
        assert g == parse_germ("(l1+l2)/(l1*l2)", 2)

    def test_eval_simple(self):
        assert parse_germ("1/l1", 2).eval((2, 0)) == pytest.approx(0.5)

    def test_eval_on_pole(self):
        with pytest.raises(OnPoleHyperplaneError, match="on pole hyperplane"):
            parse_germ("1/l1", 2).eval((0, 1))

    def test_eval_exact(self):
        g = parse_germ("(l1+l2)/(l1*l1)", 2)
        v = g.eval_exact((Fraction(1, 2), Fraction(1, 3)))
        assert v == GQ(Fraction(10, 3))

    def test_embed(self):
        g = parse_germ("1/l1", 1).embed(3, offset=1)
        assert g == parse_germ("1/l2", 3)

    def test_center_translation(self):
        g = parse_germ("1/l1", 2, center=(1, 0))
        assert g.eval((3, 0)) == pytest.approx(0.5)
        with pytest.raises(OnPoleHyperplaneError):
            g.eval((1, 5))


# -- reduction to independent pole sets ------------------------------------------


class TestReduceDependent:
    def test_worked_example(self):
        g = parse_germ("1/(l1*l2*(l1+l2))", 2)
        out = reduce_dependent(g)
        expected = {
            parse_germ("1/(l1*(l1+l2)^2)", 2),
            parse_germ("1/(l2*(l1+l2)^2)", 2),
        }
        assert set(out) == expected
        assert clear_denominators_equal(out, g)

    def test_independent_passthrough(self):
        g = parse_germ("1/(l1*l2)", 2)
        assert reduce_dependent(g) == [g]

    def test_resums_exactly(self):
        g = parse_germ("l2/(l1*(l1+l2))", 2)
        out = reduce_dependent(g)
        assert clear_denominators_equal(out, g)
        for t in out:
            forms = [f for f, _ in t.poles]
            assert form_rank(forms) == len(forms)

    def test_zero_germ(self):
        g = MeroGerm.zero(2)
        assert reduce_dependent(g) == [g]

    @pytest.mark.parametrize(
        "text",
        [
            "1/(l1*l2*(l1+l2)^2)",
            "(l1+2*l2)/(l1*l2*(l1-l2))",
            "1/(l1*l2*l3*(l1+l2+l3))",
            "(l1*l1)/(l1*l2*(l1+l2)*(l1-l2))",
        ],
    )
    def test_clear_denominator_oracle(self, text):
        p = 3 if "l3" in text else 2
        g = parse_germ(text, p)
        out = reduce_dependent(g)
        assert clear_denominators_equal(out, g)
        for t in out:
            forms = [f for f, _ in t.poles]
            assert form_rank(forms) == len(forms)


# -- the projection ---------------------------------------------------------------


class TestProjectPi:
    def test_pure_pole(self):
        d = project_pi(parse_germ("1/l1", 2))
        assert d.holomorphic.is_zero()
        assert len(d.singular) == 1
        assert d.singular[0].poles == ((form(1, 0), 1),)
        bounded_difference_along_rays(parse_germ("1/l1", 2), d.singular, 0.0)

    def test_worked_example_one(self):
        g = parse_germ("(l1+l2)/l1", 2)
        d = project_pi(g)
        assert d.holomorphic == Poly.const(2, GQ(1))
        bounded_difference_along_rays(g, d.singular, 1.0)

    def test_worked_example_half(self):
        g = parse_germ("l1/(l1+l2)", 2)
        d = project_pi(g)
        assert d.holomorphic == Poly.const(2, GQ(Fraction(1, 2)))
        bounded_difference_along_rays(g, d.singular, 0.5)

    def test_identity_on_holomorphic(self):
        g = parse_germ("l1 + 3*l2^2", 2)
        d = project_pi(g)
        assert d.singular == ()
        assert d.holomorphic == g.num

    def test_idempotence(self):
        g = parse_germ("(l1^2+l2)/(l1*(l1+l2))", 2)
        d = project_pi(g)
        again = project_pi(d.holomorphic_germ())
        assert again.singular == ()
        assert again.holomorphic == d.holomorphic

    def test_linearity(self):
        f = parse_germ("(l1+l2)/l1", 2)
        g = parse_germ("l1/(l1+l2)", 2)
        a, b = Fraction(3, 2), Fraction(-2, 5)
        left = project_pi(f.scale(a) + g.scale(b))
        right_h = project_pi(f).holomorphic.scale(a) + project_pi(g).holomorphic.scale(b)
        assert left.holomorphic == right_h

    def test_factorization_on_independent(self):
        f = parse_germ("(2*l1+l1^2)/l1", 2)
        g = parse_germ("(l2+l2^2)/l2", 2)
        assert independent(f, g)
        d = project_pi(f * g)
        df, dg = project_pi(f), project_pi(g)
        assert d.holomorphic == df.holomorphic * dg.holomorphic

    def test_orthogonality_invariant(self):
        g = parse_germ("(l1^2 + l1*l2 + l2^2)/(l1^2*(l1+l2))", 2)
        d = project_pi(g)
        for term in d.singular:
            pole_forms = [f for f, _ in term.poles]
            used = term.num.variables_used()
            for j in used:
                ell = term.ell_basis[j]
                for f in pole_forms:
                    assert q_dot(ell.coeffs, f.coeffs) == 0

    def test_reassembly_exact(self):
        g = parse_germ("(l1^3 + 2*l2)/(l1*l2*(l1+l2))", 2)
        d = project_pi(g)
        parts = [t.as_germ() for t in d.singular] + [d.holomorphic_germ()]
        assert clear_denominators_equal(parts, g)

    def test_json_shape(self):
        d = project_pi(parse_germ("(l1+l2)/l1", 2))
        js = decomposition_to_json(d)
        assert set(js) >= {"singular", "holomorphic"}
        for entry in js["singular"]:
            assert set(entry) >= {"numerator", "poles"}
            for coeffs, power in entry["poles"]:
                assert isinstance(coeffs, list) and isinstance(power, int)


# -- randomized exact corpus -------------------------------------------------------


FORM_POOL_2 = [form(1, 0), form(0, 1), form(1, 1), form(1, -1), form(2, 1), form(1, 2)]
FORM_POOL_3 = [
    form(1, 0, 0),
    form(0, 1, 0),
    form(0, 0, 1),
    form(1, 1, 0),
    form(1, 0, 1),
    form(1, 1, 1),
    form(1, -1, 0),
]


def random_exact_germ(rnd, p):
    pool = FORM_POOL_2 if p == 2 else FORM_POOL_3
    n_poles = rnd.randint(0, 3)
    poles = {}
    for _ in range(n_poles):
        f = rnd.choice(pool)
        poles[f] = poles.get(f, 0) + rnd.randint(1, 2)
    terms = {}
    for _ in range(rnd.randint(1, 4)):
        e = tuple(rnd.randint(0, 2) for _ in range(p))
        c = GQ(Fraction(rnd.randint(-6, 6), rnd.randint(1, 4)))
        if c:
            terms[e] = terms.get(e, GQ(0)) + c
    num = Poly(p, {e: c for e, c in terms.items() if c}, EXACT)
    if num.is_zero():
        num = Poly.const(p, GQ(1))
    return MeroGerm(p, (0,) * p, num, poles)


class TestRandomCorpus:
    def test_reassembly_and_orthogonality(self, rng):
        for k in range(200):
            p = 2 if k % 2 == 0 else 3
            g = random_exact_germ(rng, p)
            d = project_pi(g)
            parts = [t.as_germ() for t in d.singular] + [d.holomorphic_germ()]
            assert clear_denominators_equal(parts, g), f"reassembly failed for {g!r}"
            for term in d.singular:
                pole_forms = [f for f, _ in term.poles]
                for j in term.num.variables_used():
                    for f in pole_forms:
                        assert q_dot(term.ell_basis[j].coeffs, f.coeffs) == 0
            again = project_pi(d.holomorphic_germ())
            assert again.singular == () and again.holomorphic == d.holomorphic

    def test_factorization_on_independent_pairs(self, rng):
        checked = 0
        while checked < 100:
            g1 = random_exact_germ(rng, 2).embed(4, offset=0)
            g2 = random_exact_germ(rng, 2).embed(4, offset=2)
            if not independent(g1, g2):
                continue
            checked += 1
            d = project_pi(g1 * g2)
            d1, d2 = project_pi(g1), project_pi(g2)
            assert d.holomorphic == d1.holomorphic * d2.holomorphic

    def test_reduce_oracle_random(self, rng):
        for _ in range(60):
            g = random_exact_germ(rng, 2)
            out = reduce_dependent(g)
            assert clear_denominators_equal(out, g)

    def test_evaluation_consistency_random(self, rng):
        for _ in range(30):
            g = random_exact_germ(rng, 2)
            d = project_pi(g)
            hits = 0
            while hits < 10:
                lam = (
                    complex(rng.uniform(-2, 2), rng.uniform(-2, 2)),
                    complex(rng.uniform(-2, 2), rng.uniform(-2, 2)),
                )
                try:
                    whole = g.eval(lam)
                    split = d.eval(lam)
                except OnPoleHyperplaneError:
                    continue
                hits += 1
                assert abs(whole - split) <= 1e-10 * (1 + abs(whole))


# -- approximate field ---------------------------------------------------------------


class TestApproxField:
    def test_projection_matches_exact(self):
        g = parse_germ("(l1^2 + l1*l2 + 3*l2^2)/(l1*(l1+l2))", 2)
        ga = MeroGerm(2, (0, 0), g.num.to_approx(), g.poles)
        d_exact = project_pi(g)
        d_approx = project_pi(ga)
        assert d_approx.kind == "approx"
        assert d_approx.holomorphic.p == 2
        diff = d_exact.holomorphic.to_approx() + (-d_approx.holomorphic)
        assert diff.max_abs_coeff() <= 1e-12

    def test_eval_consistency(self, rng):
        g = parse_germ("(l1^2 + 2*l2^2)/(l1*(l1+2*l2))", 2)
        ga = MeroGerm(2, (0, 0), g.num.to_approx(), g.poles)
        d = project_pi(ga)
        hits = 0
        while hits < 100:
            lam = (
                complex(rng.uniform(-2, 2), rng.uniform(-2, 2)),
                complex(rng.uniform(-2, 2), rng.uniform(-2, 2)),
            )
            try:
                whole = ga.eval(lam)
                split = d.eval(lam)
            except OnPoleHyperplaneError:
                continue
            hits += 1
            assert abs(whole - split) <= 1e-10 * (1 + abs(whole))

    def test_dependent_poles_rejected(self):
        g = parse_germ("1/(l1*l2*(l1+l2))", 2)
        ga = MeroGerm(2, (0, 0), g.num.to_approx(), g.poles)
        with pytest.raises(ValueError, match="independent"):
            project_pi(ga)


# -- text round-trip ------------------------------------------------------------------


class TestTextRoundTrip:
    @pytest.mark.parametrize(
        "text",
        [
            "1/(l1)",
            "(l1+l2)/(l1*l1)",
            "1/(l1*(l1+l2))",
            "(1/2*l1 - 3*l2 + i*l1*l2)/((l1-l2)^2*l2)",
            "l1 + 3/4*l2^2",
            "0",
        ],
    )
    def test_round_trip(self, text):
        g = parse_germ(text, 2)
        assert parse_germ(germ_to_text(g), 2) == g

    def test_random_round_trip(self, rng):
        for _ in range(100):
            g = random_exact_germ(rng, 2)
            assert parse_germ(germ_to_text(g), 2) == g

    @given(
        st.lists(
            st.tuples(
                st.tuples(st.integers(0, 2), st.integers(0, 2)),
                st.fractions(min_value=-5, max_value=5, max_denominator=6),
            ),
            min_size=1,
            max_size=4,
        ),
        st.integers(0, 2),
        st.integers(0, 2),
    )
    @settings(max_examples=60, deadline=None)
    def test_property_round_trip(self, terms, s1, s2):
        acc = {}
        for e, c in terms:
            acc[e] = acc.get(e, Fraction(0)) + c
        poly_terms = {e: GQ(c) for e, c in acc.items() if c}
        num = Poly(2, poly_terms, EXACT) if poly_terms else Poly.const(2, GQ(1))
        poles = {}
        if s1:
            poles[form(1, 0)] = s1
        if s2:
            poles[form(1, 1)] = s2
        g = MeroGerm(2, (0, 0), num, poles)
        assert parse_germ(germ_to_text(g), 2) == g
