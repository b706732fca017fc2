import cmath
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from apalg.errors import InvalidInputError
from apalg.expsum import (AMP_TOL, FREQ_TOL, ExpSum, Strip, canonicalize, chop, divide_exact,
                          region_grid, sup_modulus_grid)

SQRT2 = math.sqrt(2.0)


def direct(terms, z):
    return sum(a * cmath.exp(1j * lam * z) for lam, a in terms)


freqs = st.floats(-5, 5, allow_nan=False)
amps = st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False)
term_lists = st.lists(st.tuples(freqs, amps), min_size=0, max_size=5)
points = st.complex_numbers(max_magnitude=2, allow_nan=False, allow_infinity=False)


class TestCanonicalForm:
    def test_sorted_and_merged(self):
        f = ExpSum([(2.0, 1.0), (1.0, 2.0), (2.0 + FREQ_TOL / 10, 3.0)])
        assert f.terms == ((1.0, 2 + 0j), (2.0, 4 + 0j))

    def test_tiny_amplitudes_dropped(self):
        f = ExpSum([(1.0, AMP_TOL / 2), (0.0, 1.0)])
        assert len(f) == 1 and f.is_constant

    def test_cancellation_gives_zero(self):
        f = ExpSum.exp(SQRT2, 2.0) - ExpSum.exp(SQRT2, 2.0)
        assert f.is_zero
        assert f(1.3 - 0.2j) == 0

    def test_canonicalize_is_idempotent(self):
        terms = canonicalize([(3.0, 1.0), (-1.0, 2j), (3.0, -1.0)])
        assert canonicalize(terms) == terms

    def test_immutable(self):
        f = ExpSum.exp(1.0)
        with pytest.raises(AttributeError):
            f.terms = ()
        with pytest.raises(ValueError):
            f.amps[0] = 2.0

    def test_nonfinite_rejected(self):
        with pytest.raises(InvalidInputError):
            ExpSum([(math.nan, 1.0)])
        with pytest.raises(InvalidInputError):
            ExpSum([(1.0, math.inf)])

    @settings(max_examples=60, deadline=None)
    @given(term_lists)
    def test_frequencies_strictly_increasing(self, terms):
        f = ExpSum(terms)
        assert np.all(np.diff(f.freqs) > FREQ_TOL)


class TestEvaluation:
    def test_matches_direct_sum(self):
        terms = [(0.0, 5.0), (1.0, 1.0), (SQRT2, 1.0)]
        f = ExpSum(terms)
        for z in (0.0, 1 + 0.2j, -3.7 - 0.25j):
            assert abs(f(z) - direct(terms, z)) < 1e-13

    def test_vectorized_shape(self):
        f = ExpSum([(1.0, 1.0), (-2.0, 0.5j)])
        z = np.linspace(0, 1, 12).reshape(3, 4) + 0.1j
        out = f(z)
        assert out.shape == (3, 4)
        assert abs(out[2, 1] - f(complex(z[2, 1]))) < 1e-15

    def test_zero_function(self):
        assert ExpSum.zero()(np.array([1j, 2.0])).tolist() == [0, 0]


class TestArithmetic:
    @settings(max_examples=60, deadline=None)
    @given(term_lists, term_lists, points)
    def test_product_pointwise(self, a, b, z):
        f, g = ExpSum(a), ExpSum(b)
        scale = (1 + abs(f(z))) * (1 + abs(g(z)))
        assert abs((f * g)(z) - f(z) * g(z)) <= 1e-10 * scale * (1 + len(a) * len(b))

    @settings(max_examples=60, deadline=None)
    @given(term_lists, term_lists, points)
    def test_sum_pointwise(self, a, b, z):
        f, g = ExpSum(a), ExpSum(b)
        assert abs((f + g)(z) - (f(z) + g(z))) <= 1e-10 * (1 + abs(f(z)) + abs(g(z)))

    def test_derivative(self):
        f = ExpSum([(0.0, 4.0), (SQRT2, 2.0 - 1j)])
        z, h = 0.3 + 0.1j, 1e-6
        fd = (f(z + h) - f(z - h)) / (2 * h)
        assert abs(f.derivative()(z) - fd) < 1e-8
        assert f.derivative().terms[0][0] == SQRT2

    def test_translate(self):
        f = ExpSum([(1.0, 1.0), (SQRT2, 3.0)])
        z = 0.7 - 0.1j
        assert abs(f.translate(2.5)(z) - f(z + 2.5)) < 1e-13

    def test_power_and_scalars(self):
        f = ExpSum.exp(1.0) - 2
        sq = f ** 2
        assert sq.isclose(ExpSum([(0, 4), (1, -4), (2, 1)]))
        assert (2 * f).isclose(f + f)
        assert (f - f).is_zero

    def test_isclose(self):
        f = ExpSum([(1.0, 1.0)])
        assert f.isclose(ExpSum([(1.0 + 1e-12, 1.0 + 1e-12)]))
        assert not f.isclose(ExpSum([(1.0, 1.1)]))


class TestExactDivision:
    def test_divides_product(self):
        g = ExpSum([(0.0, -2.0), (1.0, 1.0)])
        h = ExpSum([(0.0, 1.0), (SQRT2, 3.0)])
        assert divide_exact(g * h, g).isclose(h)

    def test_monomial_is_unit(self):
        f = ExpSum([(0.0, 1.0), (2.0, 5.0)])
        q = divide_exact(f, ExpSum.exp(1.0, 2.0))
        assert q.isclose(ExpSum([(-1.0, 0.5), (1.0, 2.5)]))

    def test_inexact_raises(self):
        with pytest.raises(ArithmeticError):
            divide_exact(ExpSum.constant(1.0), ExpSum([(0, 1), (1, 1)]))


class TestBounds:
    def test_sup_bound_dominates_grid(self):
        f = ExpSum([(0.0, 5.0), (1.0, 1.0), (SQRT2, 1.0)])
        s = Strip(-0.25, 0.25)
        grid_max = sup_modulus_grid(f, s, (0.0, 50.0), 8.0)
        assert grid_max <= f.sup_bound(s.lower, s.upper) + 1e-12
        assert f.sup_bound(s.lower, s.upper) == pytest.approx(5 + math.exp(0.25) + math.exp(0.25 * SQRT2))

    def test_grid_maxima_monotone_in_density(self):
        f = ExpSum([(1.0, 1.0), (SQRT2, 1.0)])
        s = Strip(-0.3, 0.3)
        vals = [sup_modulus_grid(f, s, (0.0, 20.0), d) for d in (1.0, 2.0, 4.0, 8.0)]
        assert all(b >= a for a, b in zip(vals, vals[1:]))

    def test_region_grid_nested(self):
        coarse = region_grid((0, 1), (0, 1), 2.0)
        fine = region_grid((0, 1), (0, 1), 4.0)
        assert set(np.round(coarse.ravel(), 12)) <= set(np.round(fine.ravel(), 12))

    def test_unbounded_strip_rejected(self):
        with pytest.raises(InvalidInputError):
            sup_modulus_grid(ExpSum.exp(1.0), Strip(-math.inf, 0.0), (0, 1), 2.0)


class TestStrip:
    def test_middle_and_nesting(self):
        s = Strip(-1.0, 1.0)
        m = s.middle(0.5)
        assert (m.lower, m.upper) == (-0.5, 0.5)
        assert m.is_compactly_inside(s)
        assert not s.is_compactly_inside(s)

    def test_empty_rejected(self):
        with pytest.raises(InvalidInputError):
            Strip(1.0, 1.0)


class TestSerialization:
    def test_json_round_trip_exact(self):
        f = ExpSum([(SQRT2, 1 / 3 + 2j), (-math.pi, 1e-7)])
        g = ExpSum.from_json(f.to_json())
        assert g.terms == f.terms

    def test_json_layout(self):
        obj = json.loads(ExpSum.exp(1.0, 2j).to_json())
        assert obj == [{"lambda": 1.0, "re": 0.0, "im": 2.0}]

    def test_chop(self):
        f = ExpSum([(0.0, 1.0), (1.0, 1e-9)])
        assert len(chop(f, 1e-6)) == 1
