"""Zero geometry of exponential sums on strips.

Zero counts come from the argument principle, ``(1/2 pi i) \\oint f'/f dz``,
integrated with vectorized adaptive Gauss-Legendre panels on each edge.
Covers are chains of closed rectangles sharing vertical cut lines whose
boundaries keep a margin ``r`` from every located zero of the avoided
functions.
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (CoverError, InconsistencyError, InvalidInputError, PrecisionError,
                     PreconditionError, RadiusTooLargeError, ZeroOnBoundaryError)
from .expsum import ExpSum, Strip, region_grid

GUARD = 1e-4
WINDING_TOL = 1e-3
MAX_PANELS = 2_000_000
_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


@dataclass(frozen=True)
class Rect:
    """Closed rectangle ``re_min <= Re z <= re_max, im_min <= Im z <= im_max``."""

    re_min: float
    re_max: float
    im_min: float
    im_max: float

    def __post_init__(self):
        if not (self.re_min < self.re_max and self.im_min < self.im_max):
            raise InvalidInputError(f"degenerate rectangle {self}")

    @property
    def width(self) -> float:
        return self.re_max - self.re_min

    @property
    def height(self) -> float:
        return self.im_max - self.im_min

    @property
    def center(self) -> complex:
        return complex(0.5 * (self.re_min + self.re_max), 0.5 * (self.im_min + self.im_max))

    def corners(self):
        return (complex(self.re_min, self.im_min), complex(self.re_max, self.im_min),
                complex(self.re_max, self.im_max), complex(self.re_min, self.im_max))

    def edges(self):
        c = self.corners()
        return [(c[i], c[(i + 1) % 4]) for i in range(4)]

    def contains(self, z, slack: float = 0.0) -> bool:
        z = complex(z)
        return (self.re_min - slack <= z.real <= self.re_max + slack
                and self.im_min - slack <= z.imag <= self.im_max + slack)

    def contains_rect(self, other: "Rect", slack: float = 1e-12) -> bool:
        return (self.re_min - slack <= other.re_min and other.re_max <= self.re_max + slack
                and self.im_min - slack <= other.im_min and other.im_max <= self.im_max + slack)

    def expanded(self, pad: float) -> "Rect":
        return Rect(self.re_min - pad, self.re_max + pad, self.im_min - pad, self.im_max + pad)

    def split(self, frac: float = 0.5):
        """Halves across the longer side."""
        if self.width >= self.height:
            x = self.re_min + frac * self.width
            return (Rect(self.re_min, x, self.im_min, self.im_max),
                    Rect(x, self.re_max, self.im_min, self.im_max))
        y = self.im_min + frac * self.height
        return (Rect(self.re_min, self.re_max, self.im_min, y),
                Rect(self.re_min, self.re_max, y, self.im_max))

    def to_json_obj(self) -> dict:
        return {"re_min": self.re_min, "re_max": self.re_max,
                "im_min": self.im_min, "im_max": self.im_max}

    @classmethod
    def from_json_obj(cls, obj) -> "Rect":
        return cls(float(obj["re_min"]), float(obj["re_max"]),
                   float(obj["im_min"]), float(obj["im_max"]))


# -- argument principle ----------------------------------------------------------

def _panel_length(f: ExpSum) -> float:
    spread = (f.max_freq - f.min_freq) if len(f) else 0.0
    return min(0.5, math.pi / (spread + 1.0))


def _gl(g, a, b):
    """8-point Gauss-Legendre on segments ``a_i -> b_i`` (complex arrays)."""
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    nodes = mid[:, None] + half[:, None] * _GL_X[None, :]
    vals = g(nodes)
    return (vals @ _GL_W) * half, nodes


def _winding(f: ExpSum, df: ExpSum, rect: Rect, guard: float, tol: float = WINDING_TOL):
    """Return ``(winding, min |f/f'| on nodes)`` for the boundary of ``rect``."""
    scale = max(f.sup_bound(rect.im_min, rect.im_max), 1e-300)
    min_ratio = [math.inf]

    def g(z):
        fz = f(z)
        dz = df(z)
        af = np.abs(fz)
        ad = np.abs(dz)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(ad > 0, af / ad, np.inf)
        mr = float(np.min(ratio)) if ratio.size else math.inf
        if af.size and float(np.min(af)) <= 1e-15 * scale:
            mr = 0.0
        min_ratio[0] = min(min_ratio[0], mr)
        if min_ratio[0] < guard:
            k = np.unravel_index(np.argmin(ratio), ratio.shape)
            raise ZeroOnBoundaryError(
                f"zero of f within {guard:g} of the contour near z={complex(z[k])!r}",
                z=complex(z[k]))
        return dz / fz

    h0 = _panel_length(f)
    starts, ends = [], []
    for a, b in rect.edges():
        n = max(2, math.ceil(abs(b - a) / h0))
        t = np.linspace(0.0, 1.0, n + 1)
        pts = a + (b - a) * t
        starts.append(pts[:-1])
        ends.append(pts[1:])
    a = np.concatenate(starts)
    b = np.concatenate(ends)
    perimeter = 2 * (rect.width + rect.height)
    budget = tol * 2 * math.pi
    total = 0j
    while len(a):
        if len(a) > MAX_PANELS:
            raise PrecisionError("contour quadrature did not converge (panel budget exhausted)")
        mid = 0.5 * (a + b)
        whole, _ = _gl(g, a, b)
        left, _ = _gl(g, a, mid)
        right, _ = _gl(g, mid, b)
        fine = left + right
        err = np.abs(whole - fine)
        allow = 0.5 * budget * np.abs(b - a) / perimeter
        ok = err <= allow
        total += np.sum(fine[ok])
        bad = ~ok
        if not np.any(bad):
            break
        if np.min(np.abs(b[bad] - a[bad])) < 1e-13 * max(perimeter, 1.0):
            raise PrecisionError("contour quadrature did not converge (panel underflow)")
        a, b, mid = a[bad], b[bad], mid[bad]
        a, b = np.concatenate([a, mid]), np.concatenate([mid, b])
    return total / (2j * math.pi), min_ratio[0]


def count_zeros_rect(f: ExpSum, rect: Rect, guard: float = GUARD, tol: float = WINDING_TOL) -> int:
    """Number of zeros of ``f`` inside ``rect`` counted with multiplicity.

    Raises :class:`ZeroOnBoundaryError` when a zero lies within about
    ``guard`` of the boundary and :class:`PrecisionError` when the
    winding number misses an integer by ``0.25`` or more.
    """
    if f.is_zero:
        raise InvalidInputError("the zero function has no isolated zeros")
    if len(f) == 1:
        return 0
    W, _ = _winding(f, f.derivative(), rect, guard, tol)
    n = round(W.real)
    resid = abs(W - n)
    if resid >= 0.25:
        raise PrecisionError(f"winding number {W:.4f} is not near an integer; shrink or shift the rectangle")
    return int(n)


def _newton(f, df, z, tol, iters=60, mult=1):
    with np.errstate(all="ignore"):
        return _newton_raw(f, df, z, tol, iters, mult)


def _newton_raw(f, df, z, tol, iters, mult):
    for _ in range(iters):
        fz = f(z)
        if abs(fz) <= tol:
            return z, True
        d = df(z)
        if d == 0:
            return z, False
        z = z - mult * fz / d
        if not math.isfinite(abs(z)):
            return z, False
    return z, abs(f(z)) <= tol


_SPLITS = (0.5, 0.463, 0.537, 0.421, 0.579, 0.382, 0.618, 0.333, 0.667)


def locate_zeros(f: ExpSum, rect: Rect, tol: float = 1e-10, guard: float = GUARD,
                 max_depth: int = 80, cluster_size: float = 1e-7) -> list:
    """Zeros of ``f`` in ``rect`` by counting, bisection and Newton polish.

    Multiple zeros (clusters smaller than ``cluster_size``) are repeated
    according to their counted multiplicity.  Subdivision lines are
    jittered when they pass too close to a zero.
    """
    if f.is_zero:
        raise InvalidInputError("the zero function has no isolated zeros")
    if len(f) == 1:
        return []
    df = f.derivative()
    n_total = count_zeros_rect(f, rect, guard)
    found = []
    stack = [(rect, n_total, 0)]
    while stack:
        R, n, depth = stack.pop()
        if n <= 0:
            continue
        if n == 1 or max(R.width, R.height) < 1e-3:
            z, ok = _newton(f, df, R.center, tol, mult=1 if n == 1 else n)
            if ok and R.contains(z, slack=1e-9 * max(1.0, abs(z))):
                found.extend([z] * n)
                continue
        if max(R.width, R.height) < cluster_size:
            z, _ = _newton(f, df, R.center, tol, mult=n)
            if not R.contains(z, slack=cluster_size):
                z = R.center
            found.extend([z] * n)
            continue
        if depth > max_depth:
            raise PrecisionError("zero location exceeded the subdivision depth cap")
        for frac in _SPLITS:
            A, B = R.split(frac)
            g = min(guard, 0.02 * min(A.width, A.height, B.width, B.height))
            try:
                nA = count_zeros_rect(f, A, g)
                nB = count_zeros_rect(f, B, g)
            except (ZeroOnBoundaryError, PrecisionError):
                continue
            if nA + nB == n:
                stack.append((B, nB, depth + 1))
                stack.append((A, nA, depth + 1))
                break
        else:
            raise PrecisionError(f"could not subdivide {R} consistently")
    found.sort(key=lambda z: (round(z.real, 9), round(z.imag, 9)))
    return found


def _count_robust(f: ExpSum, rect: Rect, guard: float) -> int:
    pad = 0.0
    for _ in range(8):
        try:
            return count_zeros_rect(f, rect.expanded(pad) if pad else rect, guard)
        except ZeroOnBoundaryError:
            pad = pad * 2 if pad else 4 * guard
    raise PrecisionError(f"could not move the contour of {rect} off the zero set")


def zero_density_bound(f: ExpSum, strip: Strip, re_window: Sequence[float],
                       guard: float = GUARD) -> int:
    """Largest zero count over width-2 windows ``{|Re z - t| < 1}``.

    ``t`` steps by 0.5 across ``re_window``.  A window whose contour hits a
    zero is enlarged slightly, so the bound stays conservative.
    """
    if not strip.bounded:
        raise InvalidInputError("zero_density_bound needs a bounded substrip")
    if f.is_zero:
        raise InvalidInputError("the zero function has no isolated zeros")
    if len(f) == 1:
        return 0
    t0, t1 = map(float, re_window)
    K = 0
    for t in np.arange(t0, t1 + 1e-12, 0.5):
        rect = Rect(t - 1.0, t + 1.0, strip.lower, strip.upper)
        K = max(K, _count_robust(f, rect, guard))
    return K


def min_modulus_outside(f: ExpSum, region: Rect, avoided_zeros: Sequence[complex],
                        r: float, grid: float) -> float:
    """Grid minimum of ``|f|`` over ``region`` minus the ``r``-disks at the zeros."""
    zz = region_grid((region.re_min, region.re_max), (region.im_min, region.im_max), grid).ravel()
    keep = np.ones(zz.shape, dtype=bool)
    for z0 in avoided_zeros:
        keep &= np.abs(zz - complex(z0)) >= r
    if not np.any(keep):
        raise InvalidInputError("no grid point lies outside the excluded disks")
    vals = np.abs(f(zz[keep])) if not f.is_zero else np.zeros(int(keep.sum()))
    eta = float(np.min(vals))
    scale = max(f.sup_bound(region.im_min, region.im_max), 1e-300)
    if eta <= 1e-12 * scale:
        i = int(np.argmin(vals))
        raise InconsistencyError(
            f"|f| vanishes at z={complex(zz[keep][i])!r}, outside every listed zero's disk; "
            "zero list is incomplete")
    return eta


# -- rectangle covers ----------------------------------------------------------

def _segment_distance(p, a, b):
    """Distance from points ``p`` (array) to the segment ``a -> b``."""
    p = np.asarray(p, dtype=complex)
    ab = b - a
    L2 = abs(ab) ** 2
    if L2 == 0:
        return np.abs(p - a)
    t = np.clip(((p - a) * np.conj(ab)).real / L2, 0.0, 1.0)
    return np.abs(p - (a + t * ab))


@dataclass
class CoverGrid:
    points: np.ndarray
    parent: np.ndarray
    order: np.ndarray

    def __len__(self):
        return len(self.points)


@dataclass
class RectCover:
    rects: list
    r: float
    avoided: list
    K: int
    window: Rect
    inner: Rect
    zeros: list = field(default_factory=list)

    @property
    def cuts(self):
        return [self.rects[0].re_min] + [R.re_max for R in self.rects]

    def boundary_segments(self):
        segs = []
        for R in self.rects:
            segs.extend(R.edges())
        return segs

    def boundary_distance(self, zeros=None) -> float:
        """Smallest distance from a rectangle boundary to a zero."""
        zs = np.array(self.zeros if zeros is None else zeros, dtype=complex)
        if zs.size == 0:
            return math.inf
        return float(min(np.min(_segment_distance(zs, a, b)) for a, b in self.boundary_segments()))

    def is_connected(self) -> bool:
        for A, B in zip(self.rects[:-1], self.rects[1:]):
            if A.re_max != B.re_min:
                return False
            if max(A.im_min, B.im_min) > min(A.im_max, B.im_max):
                return False
        return True

    def covers_inner(self) -> bool:
        if self.rects[0].re_min > self.inner.re_min or self.rects[-1].re_max < self.inner.re_max:
            return False
        return all(R.im_min <= self.inner.im_min and R.im_max >= self.inner.im_max for R in self.rects)

    def inside_window(self) -> bool:
        return all(self.window.contains_rect(R) for R in self.rects)

    def boundary_grid(self, step: float = None) -> CoverGrid:
        """Points on the union of rectangle boundaries with a BFS spanning tree.

        ``order`` lists nodes so that each node's ``parent`` comes first; the
        root is the lower-left corner of the first rectangle.
        """
        step = step or self.r / 4
        nodes = {}
        pts = []
        adj = []

        def node(z):
            key = (round(z.real, 10), round(z.imag, 10))
            if key not in nodes:
                nodes[key] = len(pts)
                pts.append(z)
                adj.append([])
            return nodes[key]

        def polyline(a, b, breaks=()):
            ts = sorted({0.0, 1.0, *breaks})
            seq = []
            L = abs(b - a)
            for t0, t1 in zip(ts[:-1], ts[1:]):
                n = max(1, math.ceil((t1 - t0) * L / step))
                for i in range(n):
                    seq.append(a + (b - a) * (t0 + (t1 - t0) * i / n))
            seq.append(b)
            ids = [node(z) for z in seq]
            for i, j in zip(ids[:-1], ids[1:]):
                if i != j:
                    adj[i].append(j)
                    adj[j].append(i)

        cuts = self.cuts
        node(complex(cuts[0], self.rects[0].im_min))
        for l, c in enumerate(cuts):
            touching = [R for R in self.rects[max(0, l - 1):l + 1]]
            hs = sorted({h for R in touching for h in (R.im_min, R.im_max)})
            lo, hi = hs[0], hs[-1]
            brk = [(h - lo) / (hi - lo) for h in hs]
            polyline(complex(c, lo), complex(c, hi), brk)
        for R in self.rects:
            polyline(complex(R.re_min, R.im_min), complex(R.re_max, R.im_min))
            polyline(complex(R.re_min, R.im_max), complex(R.re_max, R.im_max))
        parent = np.full(len(pts), -1, dtype=np.intp)
        seen = np.zeros(len(pts), dtype=bool)
        order = []
        q = deque([0])
        seen[0] = True
        while q:
            i = q.popleft()
            order.append(i)
            for j in sorted(adj[i]):
                if not seen[j]:
                    seen[j] = True
                    parent[j] = i
                    q.append(j)
        if len(order) != len(pts):
            raise CoverError("cover boundary is not connected")
        return CoverGrid(np.array(pts, dtype=complex), parent, np.array(order, dtype=np.intp))

    def to_json_obj(self) -> dict:
        return {
            "r": self.r,
            "K": self.K,
            "rects": [R.to_json_obj() for R in self.rects],
            "zeros": [[z.real, z.imag] for z in self.zeros],
            "window": self.window.to_json_obj(),
            "inner": self.inner.to_json_obj(),
            "avoided": [f.to_json_obj() for f in self.avoided],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), indent=2)

    @classmethod
    def from_json_obj(cls, obj) -> "RectCover":
        return cls([Rect.from_json_obj(x) for x in obj["rects"]], float(obj["r"]),
                   [ExpSum.from_json_obj(f) for f in obj.get("avoided", [])], int(obj["K"]),
                   Rect.from_json_obj(obj["window"]), Rect.from_json_obj(obj["inner"]),
                   [complex(a, b) for a, b in obj["zeros"]])


def zeros_csv(zeros: Sequence[complex], labels: Sequence = None) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["re", "im", "source"])
    for i, z in enumerate(zeros):
        wr.writerow([repr(float(z.real)), repr(float(z.imag)), "" if labels is None else labels[i]])
    return buf.getvalue()


def _locate_padded(f: ExpSum, rect: Rect, pad: float, tol: float) -> list:
    p = pad
    for _ in range(8):
        try:
            return locate_zeros(f, rect.expanded(p), tol)
        except ZeroOnBoundaryError:
            p *= 1.0 + 0.13
    raise PrecisionError("could not place the search contour off the zero set")


def _best_candidate(cands: np.ndarray, margin_fn, prefer: float, cap: float):
    margins = np.array([margin_fn(c) for c in cands])
    score = np.minimum(margins, cap)
    best = score.max()
    tied = np.flatnonzero(score >= best - 1e-15)
    pick = tied[np.argmin(np.abs(cands[tied] - prefer))]
    return float(cands[pick]), float(margins[pick])


def _scan(lo: float, hi: float, res: float) -> np.ndarray:
    if hi <= lo:
        return np.array([lo])
    n = max(1, math.ceil((hi - lo) / res))
    return np.linspace(lo, hi, n + 1)


def build_cover(outer: Rect, inner: Rect, avoided: Sequence[ExpSum], r: float,
                tol: float = 1e-10) -> RectCover:
    """Rectangles covering ``inner`` inside ``outer`` whose boundaries avoid ``U_r``.

    ``K`` is the largest number of zeros of the avoided functions (with
    multiplicity) in a window ``{|Re z - t| < 1}`` of ``outer``; the
    construction needs ``r < 1/(4K)`` and vertical clearance ``> 8 K r``.
    """
    if r <= 0:
        raise InvalidInputError("cover margin r must be positive")
    if not (outer.re_min < inner.re_min and inner.re_max < outer.re_max
            and outer.im_min < inner.im_min and inner.im_max < outer.im_max):
        raise PreconditionError("inner window must lie strictly inside the outer window")
    avoided = list(avoided)
    zeros = []
    for f in avoided:
        if f.is_zero:
            raise InvalidInputError("cannot avoid the zeros of the zero function")
        if len(f) > 1:
            zeros.extend(_locate_padded(f, outer, r, tol))
    zs = np.array(zeros, dtype=complex)
    inside = zs[(zs.imag >= outer.im_min) & (zs.imag <= outer.im_max)] if zs.size else zs
    K = 0
    for t in np.arange(outer.re_min, outer.re_max + 1e-12, 0.5):
        K = max(K, int(np.sum(np.abs(inside.real - t) < 1.0)) if inside.size else 0)
    if K > 0 and r >= 1.0 / (4 * K):
        raise RadiusTooLargeError(f"r={r:g} must be below 1/(4K) = {1 / (4 * K):g} with K={K}",
                                  K=K, r=r)
    clearance = min(inner.im_min - outer.im_min, outer.im_max - inner.im_max)
    if clearance <= 8 * K * r:
        raise PreconditionError(
            f"vertical clearance {clearance:g} must exceed 8 K r = {8 * K * r:g}")

    res = r / 2
    cap = 4 * r

    def vmargin(c):
        return float(np.min(np.abs(zs.real - c))) if zs.size else math.inf

    cuts = []
    t0 = inner.re_min
    c, mg = _best_candidate(_scan(max(outer.re_min, t0 - 1.0), t0, res)[::-1], vmargin, t0, cap)
    cuts.append((c, mg))
    n_st = math.ceil(inner.re_max - t0)
    for l in range(1, n_st):
        t = t0 + l
        lo = max(t - 0.5, cuts[-1][0] + res)
        hi = min(t + 0.5, inner.re_max - res)
        if hi <= lo:
            continue
        cuts.append(_best_candidate(_scan(lo, hi, res), vmargin, t, cap))
    lo = max(inner.re_max, cuts[-1][0] + res)
    cuts.append(_best_candidate(_scan(lo, min(outer.re_max, inner.re_max + 1.0), res),
                                vmargin, inner.re_max, cap))
    for c, mg in cuts:
        if mg < r:
            raise PreconditionError(f"no cut line with margin {r:g} near Re z = {c:g}")
    xs = [c for c, _ in cuts]

    rects = []
    for a, b in zip(xs[:-1], xs[1:]):
        def hmargin(d, a=a, b=b):
            if not zs.size:
                return math.inf
            return float(np.min(_segment_distance(zs, complex(a, d), complex(b, d))))
        d0, m0 = _best_candidate(_scan(outer.im_min, inner.im_min, res)[::-1], hmargin,
                                 inner.im_min, cap)
        d1, m1 = _best_candidate(_scan(inner.im_max, outer.im_max, res), hmargin,
                                 inner.im_max, cap)
        if min(m0, m1) < r:
            raise PreconditionError(f"no horizontal segment with margin {r:g} over [{a:g}, {b:g}]")
        rects.append(Rect(a, b, d0, d1))

    cover = RectCover(rects, r, avoided, K, outer, inner, list(zeros))
    if cover.boundary_distance() < r * (1 - 1e-12):
        raise CoverError("cover boundary comes closer than r to a zero")
    if not (cover.is_connected() and cover.covers_inner() and cover.inside_window()):
        raise CoverError("cover failed its structural invariants")
    return cover
