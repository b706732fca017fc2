import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from apalg.appoly import (APPoly, discriminant, discriminant_at, discriminant_resultant,
                          evaluate_poly, numeric_discriminant, numeric_resultant, pdiv, prem,
                          resultant, resultant_at, squarefree_reduce)
from apalg.errors import InvalidInputError, ResourceError, SingularLeadingCoefficientError
from apalg.expsum import ExpSum

SQRT2 = math.sqrt(2.0)
E = ExpSum.exp(1.0)
ONE = ExpSum.constant(1.0)
ZERO = ExpSum.zero()


def disc_from_roots(coeffs):
    """a_m^(2m-2) * prod_{i<j} (r_i - r_j)^2 from numpy's roots."""
    c = np.asarray(coeffs, dtype=complex)
    r = np.roots(c[::-1])
    m = len(r)
    prod = 1.0 + 0j
    for i in range(m):
        for j in range(i + 1, m):
            prod *= (r[i] - r[j]) ** 2
    return c[-1] ** (2 * m - 2) * prod


def random_points(n, seed=0):
    rng = np.random.default_rng(seed)
    return rng.uniform(-10, 10, n) + 1j * rng.uniform(-0.5, 0.5, n)


class TestAPPoly:
    def test_zero_leading_rejected(self):
        with pytest.raises(InvalidInputError, match="a_m"):
            APPoly([ONE, ZERO])

    def test_evaluate(self):
        assert evaluate_poly(APPoly([-1, 0, 1]), 0.3).tolist() == [-1, 0, 1]
        assert np.allclose(evaluate_poly(APPoly([-E, ZERO, ONE]), 0.0), [-1, 0, 1])
        P = APPoly([-(5 + E), ZERO, ONE])
        assert np.allclose(evaluate_poly(P, math.pi), [-4, 0, 1], atol=1e-15)

    def test_call_and_dw(self):
        P = APPoly([-(5 + E), ZERO, ONE])
        z = 0.4 + 0.1j
        assert abs(P(z, 2.0) - (4 - 5 - cmath.exp(1j * z))) < 1e-14
        assert abs(P.dw()(z, 2.0) - 4.0) < 1e-14

    def test_json_round_trip(self):
        P = APPoly([-(5 + E), ExpSum.exp(SQRT2, 1j), ONE])
        Q = APPoly.from_json(P.to_json())
        assert Q == P
        with pytest.raises(InvalidInputError):
            APPoly.from_json_obj({"degree": 3, "coeffs": P.to_json_obj()["coeffs"]})


class TestResultant:
    def test_linear(self):
        assert resultant(APPoly([-2.0, 1.0]), APPoly([-5.0, 1.0])).isclose(ExpSum.constant(2.0 - 5.0))

    def test_quadratic_with_derivative(self):
        b = ExpSum([(0, 1.0), (SQRT2, 2.0)])
        c = ExpSum([(1.0, -3.0)])
        res = resultant(APPoly([c, b, ONE]), APPoly([b, 2 * ONE]))
        assert res.isclose(4 * c - b * b)

    def test_cubic_pointwise(self):
        p = ExpSum([(0.0, 1.0), (1.0, 0.5)])
        q = ExpSum([(SQRT2, 2.0), (0.0, -1.0)])
        P = APPoly([q, p, ZERO, ONE])
        res = discriminant_resultant(P)
        for z in random_points(10):
            expect = 4 * p(z) ** 3 + 27 * q(z) ** 2
            assert abs(res(z) - expect) <= 1e-9 * (1 + abs(expect))

    def test_pointwise_coherence(self):
        P = APPoly([ExpSum([(0, 2), (1, 1)]), ExpSum([(SQRT2, 1j)]), ExpSum([(0, 3), (-1, 1)])])
        Q = APPoly([ExpSum([(0.5, 1)]), ExpSum([(0, 1), (1, -2)])])
        res = resultant(P, Q)
        for z in random_points(20, seed=3):
            num = resultant_at(P, Q, z)
            assert abs(res(z) - num) <= 1e-8 * max(1.0, abs(num))

    def test_caps(self):
        with pytest.raises(ResourceError):
            resultant(APPoly([ONE] * 6), APPoly([ONE, ONE]))
        big = ExpSum([(float(k), 1.0) for k in range(40)])
        with pytest.raises(ResourceError):
            resultant(APPoly([big, ONE]), APPoly([ONE, ONE]))


class TestDiscriminant:
    def test_sign_convention(self):
        # b^2 - 4c
        assert numeric_discriminant([1.0, 2.0, 1.0]) == pytest.approx(0.0)
        assert numeric_discriminant([3.0, 1.0, 1.0]) == pytest.approx(1 - 12)

    def test_at_point(self):
        assert discriminant_at(APPoly([-E, ZERO, ONE]), 0.0) == pytest.approx(4.0)

    def test_cubic_closed_form(self):
        p = ExpSum([(0.0, 1.0), (1.0, 0.5)])
        q = ExpSum([(SQRT2, 2.0), (0.0, -1.0)])
        P = APPoly([q, p, ZERO, ONE])
        for z in random_points(10, seed=1):
            expect = -4 * p(z) ** 3 - 27 * q(z) ** 2
            assert abs(discriminant_at(P, z) - expect) <= 1e-9 * (1 + abs(expect))

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False),
                    min_size=3, max_size=6))
    def test_matches_root_product(self, c):
        if abs(c[-1]) < 0.1:
            c[-1] = 1.0
        got = numeric_discriminant(c)
        expect = disc_from_roots(c)
        scale = max(1.0, float(np.max(np.abs(c)))) ** (2 * len(c) - 4)
        assert abs(got - expect) <= 1e-7 * scale

    def test_double_root_small(self):
        r = 0.3 - 1.7j
        coeffs = 2.5 * np.polynomial.polynomial.polyfromroots([r, r, 1.0])
        scale = float(np.max(np.abs(coeffs))) ** 4
        assert abs(numeric_discriminant(coeffs)) <= 1e-8 * scale

    def test_singular_lead(self):
        P = APPoly([ONE, ZERO, E - 1])
        with pytest.raises(SingularLeadingCoefficientError):
            discriminant_at(P, 0.0)

    def test_symbolic_matches_pointwise(self):
        P = APPoly([-(E - 2) ** 2, ZERO, ONE])
        D = discriminant(P)
        assert D.isclose(4 * (E - 2) ** 2)
        for z in random_points(5):
            assert abs(D(z) - discriminant_at(P, z)) < 1e-9 * (1 + abs(D(z)))


class TestPseudoDivision:
    def test_prem_identity(self):
        A = [ExpSum([(0, 1), (1, 2)]), ExpSum.exp(SQRT2), ONE, E]
        B = [ONE, 2 * E]
        Q, R, e = pdiv(A, B)
        z = 0.3 + 0.05j
        w = 0.7 - 0.2j

        def ev(f):
            return sum(c(z) * w ** j for j, c in enumerate(f))

        lhs = B[-1](z) ** e * ev(A)
        assert abs(lhs - (ev(Q) * ev(B) + ev(R))) < 1e-12
        assert all(c.isclose(d) for c, d in zip(prem(A, B), R))


class TestSquarefree:
    def test_double_root_collapse(self):
        res = squarefree_reduce(APPoly([1.0, -2.0, 1.0]))
        assert res.reduced.degree == 1
        c = evaluate_poly(res.reduced, 0.0)
        assert abs(-c[0] / c[1] - 1.0) < 1e-12

    def test_already_squarefree(self):
        P = APPoly([-(5 + E), ZERO, ONE])
        res = squarefree_reduce(P)
        assert res.reduced.degree == 2
        assert res.removed_degree == 0

    def test_repeated_exponential_root(self):
        # (w - e^{iz})^2 (w + 1)
        P = APPoly([E * E, E * E - 2 * E, 1 - 2 * E, ONE])
        res = squarefree_reduce(P)
        R = res.reduced
        assert R.degree == 2
        assert not discriminant_resultant(R).is_zero
        for z in random_points(10, seed=2):
            got = np.sort_complex(np.roots(evaluate_poly(R, z)[::-1]))
            expect = np.sort_complex(np.array([cmath.exp(1j * z), -1.0]))
            assert np.max(np.abs(got - expect)) < 1e-8

    def test_reduced_roots_simple(self):
        P = APPoly([-(E - 2) ** 2, ZERO, ONE])
        res = squarefree_reduce(P)
        for z in random_points(10, seed=4):
            c = evaluate_poly(res.reduced, z)
            if abs(c[-1]) > 1e-6 and abs(numeric_discriminant(c)) > 1e-6:
                r = np.roots(c[::-1])
                assert len(r) < 2 or np.min(np.abs(r[0] - r[1:])) > 1e-6

    def test_linear_passthrough(self):
        P = APPoly([E, 3 + E])
        assert squarefree_reduce(P).reduced == P
