import json
import math

import numpy as np
import pytest

from apalg.errors import (InconsistencyError, PreconditionError, RadiusTooLargeError,
                          ZeroOnBoundaryError)
from apalg.expsum import ExpSum, Strip
from apalg.stripgeo import (Rect, RectCover, build_cover, count_zeros_rect, locate_zeros,
                            min_modulus_outside, zero_density_bound, zeros_csv)

SQRT2 = math.sqrt(2.0)
E = ExpSum.exp(1.0)
LN2, LN3 = math.log(2.0), math.log(3.0)


def lattice(shift_im, freq, rect, pad=0.0):
    """Closed-form lattice z = (2 pi k - i c) / freq of e^{i freq z} = e^{c}."""
    out = []
    for k in range(-2000, 2001):
        z = (2 * math.pi * k - 1j * shift_im) / freq
        if rect.re_min - pad <= z.real <= rect.re_max + pad and rect.im_min - pad <= z.imag <= rect.im_max + pad:
            out.append(z)
    return out


def dense_boundary_distance(cover, zeros, step=2e-3):
    best = math.inf
    for a, b in cover.boundary_segments():
        n = max(2, int(abs(b - a) / step) + 1)
        pts = a + (b - a) * np.linspace(0, 1, n)
        for z in zeros:
            best = min(best, float(np.min(np.abs(pts - z))))
    return best


class TestCounting:
    def test_single_zero(self):
        assert count_zeros_rect(E - 1, Rect(-1, 1, -1, 1)) == 1

    def test_constant(self):
        assert count_zeros_rect(ExpSum.constant(1.0), Rect(-1, 1, -1, 1)) == 0

    def test_log_zero(self):
        assert count_zeros_rect(E - 2, Rect(-1, 1, -1, 0)) == 1

    def test_boundary_zero(self):
        with pytest.raises(ZeroOnBoundaryError):
            count_zeros_rect(E - 1, Rect(0, 1, -1, 1))

    def test_additivity(self):
        f = (E - 2) * (ExpSum.exp(SQRT2) - 3)
        R = Rect(-3.1, 9.2, -1.3, 0.4)
        parts = [Rect(-3.1, 3.05, -1.3, -0.45), Rect(3.05, 9.2, -1.3, -0.45),
                 Rect(-3.1, 3.05, -0.45, 0.4), Rect(3.05, 9.2, -0.45, 0.4)]
        assert count_zeros_rect(f, R) == sum(count_zeros_rect(f, p) for p in parts)

    def test_double_zero_counts_twice(self):
        f = (E - 2) ** 2
        assert count_zeros_rect(f, Rect(-1, 1, -1, 0)) == 2


class TestLocate:
    def test_two_zeros(self):
        zs = locate_zeros(E - 1, Rect(-1, 7, -1, 1))
        assert len(zs) == 2
        assert abs(zs[0]) < 1e-9 and abs(zs[1] - 2 * math.pi) < 1e-9

    def test_zero_free(self):
        assert locate_zeros(ExpSum.constant(5.0), Rect(0, 1, 0, 1)) == []

    def test_product_lattices(self):
        f = (E - 2) * (ExpSum.exp(SQRT2) - 3)
        R = Rect(-10.3, 20.1, -1.2, 0.3)
        want = lattice(LN2, 1.0, R) + lattice(LN3, SQRT2, R)
        got = locate_zeros(f, R)
        assert len(got) == len(want) == count_zeros_rect(f, R)
        for z in want:
            assert min(abs(z - g) for g in got) < 1e-8
        assert max(abs(f(z)) for z in got) <= 1e-10

    def test_multiplicity(self):
        zs = locate_zeros((E - 2) ** 2, Rect(-1, 1, -1, 0))
        assert len(zs) == 2
        assert all(abs(z + 1j * LN2) < 1e-6 for z in zs)

    def test_csv(self):
        text = zeros_csv([1 + 2j], ["a_m"])
        assert text.splitlines() == ["re,im,source", "1.0,2.0,a_m"]


class TestDensity:
    def test_periodic_lattice(self):
        assert zero_density_bound(E - 1, Strip(-1, 1), (0, 50)) == 1

    def test_constant(self):
        assert zero_density_bound(ExpSum.constant(2.0), Strip(-1, 1), (0, 10)) == 0

    def test_matches_location(self):
        f = E + ExpSum.exp(SQRT2)
        s = Strip(-0.5, 0.5)
        K = zero_density_bound(f, s, (0, 100))
        zs = np.array(locate_zeros(f, Rect(-1.5, 101.5, -0.5, 0.5)))
        counts = [int(np.sum(np.abs(zs.real - t) < 1.0)) for t in np.arange(0, 100.01, 0.5)]
        assert K == max(counts)


class TestMinModulus:
    def test_constant(self):
        assert min_modulus_outside(ExpSum.constant(3.0), Rect(0, 1, 0, 1), [], 0.1, 4.0) == pytest.approx(3.0)

    def test_grid_refinement(self):
        R = Rect(-2, 2, -1, 1)
        coarse = min_modulus_outside(E - 1, R, [0j], 0.5, 8.0)
        fine = min_modulus_outside(E - 1, R, [0j], 0.5, 32.0)
        assert coarse > 0
        assert abs(coarse - fine) / fine < 5e-2

    def test_monotone_in_r(self):
        R = Rect(-2, 2, -1.5, 0.5)
        z0 = -1j * LN2
        vals = [min_modulus_outside(E - 2, R, [z0], r, 16.0) for r in (0.1, 0.3, 0.6)]
        assert 0 < vals[0] <= vals[1] <= vals[2]

    def test_incomplete_zero_list(self):
        with pytest.raises(InconsistencyError):
            min_modulus_outside(E - 1, Rect(-1, 1, -1, 1), [], 0.1, 16.0)


class TestCover:
    def test_nothing_to_avoid(self):
        cov = build_cover(Rect(-1, 11, -1, 1), Rect(0, 10, -0.25, 0.25), [], 0.1)
        assert cov.K == 0
        assert cov.covers_inner() and cov.is_connected() and cov.inside_window()
        assert cov.boundary_distance() == math.inf

    def test_single_lattice(self):
        f = E - 2
        outer, inner = Rect(-1, 31, -1, 1), Rect(0, 30, -0.25, 0.25)
        # clearance 0.75 does not exceed 8 K r = 0.8 at r = 0.1
        with pytest.raises(PreconditionError):
            build_cover(outer, inner, [f], 0.1)
        cov = build_cover(outer, inner, [f], 0.09)
        zeros = lattice(LN2, 1.0, outer, pad=1.0)
        assert cov.K == 1
        assert dense_boundary_distance(cov, zeros) >= 0.09
        assert cov.covers_inner() and cov.is_connected() and cov.inside_window()

    def test_squared_discriminant(self):
        avoided = [ExpSum.constant(1.0), 4 * (E - 2) ** 2]
        outer, inner = Rect(-1, 30, -2, 2), Rect(0, 29, -0.25, 0.25)
        cov = build_cover(outer, inner, avoided, 0.1)
        assert cov.K == 2
        zeros = lattice(LN2, 1.0, outer, pad=1.0)
        assert dense_boundary_distance(cov, zeros) >= 0.1
        assert cov.covers_inner() and cov.is_connected()

    def test_radius_too_large(self):
        with pytest.raises(RadiusTooLargeError) as info:
            build_cover(Rect(-1, 31, -3, 3), Rect(0, 30, -0.25, 0.25), [E - 2], 0.3)
        assert info.value.K == 1

    def test_boundary_grid_tree(self):
        cov = build_cover(Rect(-1, 6, -1, 1), Rect(0, 5, -0.25, 0.25), [], 0.1)
        g = cov.boundary_grid()
        assert g.parent[g.order[0]] == -1
        pos = {int(i): k for k, i in enumerate(g.order)}
        for i in g.order[1:]:
            p = int(g.parent[i])
            assert pos[p] < pos[int(i)]
            assert abs(g.points[i] - g.points[p]) <= cov.r / 4 + 1e-12

    def test_json_round_trip(self):
        cov = build_cover(Rect(-1, 11, -2, 2), Rect(0, 10, -0.25, 0.25), [(E - 2) ** 2], 0.1)
        back = RectCover.from_json_obj(json.loads(cov.to_json()))
        assert back.rects == cov.rects and back.K == cov.K
