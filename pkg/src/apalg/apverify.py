"""Finite-evidence checks of almost periodicity for solution branches.

All sups here are either rigorous upper bounds (almost-period deviations
of exponential sums) or grid maxima, which are lower bounds on the true
sups; reports say which.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .appoly import APPoly, evaluate_poly, numeric_discriminant
from .errors import (DichotomyViolationError, InsufficientDataError, InvalidInputError,
                     LimitMismatchError, PreconditionError, PrecisionError, ZeroOnBoundaryError)
from .expsum import ExpSum, Strip, region_grid
from .rootkit import (BranchOptions, RootBranch, Tracker, estimate_nu, match_roots,
                      min_separation)
from .stripgeo import Rect, RectCover, count_zeros_rect, locate_zeros

_INV_PHI = (math.sqrt(5) - 1) / 2


# -- almost periods -------------------------------------------------------------

def _spectral_terms(fs: Sequence[ExpSum], y_lo: float, y_hi: float):
    """Per-function arrays of nonzero frequencies and their sup weights."""
    out = []
    for f in fs:
        if f.is_zero:
            out.append((np.zeros(0), np.zeros(0)))
            continue
        w = np.abs(f.amps) * f.modulus_weights(y_lo, y_hi)
        nz = f.freqs != 0
        out.append((f.freqs[nz], w[nz]))
    return out


def deviation_bound(fs: Sequence[ExpSum], tau, substrip: Optional[Strip] = None) -> np.ndarray:
    """Upper bound of ``max_j sup |f_j(z + tau) - f_j(z)|`` over the substrip.

    Uses ``|sum a_n (e^{i l_n tau} - 1) e^{i l_n z}| <= sum |a_n| e^{-l_n y}
    |e^{i l_n tau} - 1|`` maximized term by term over ``Im z``.
    """
    y_lo, y_hi = (0.0, 0.0) if substrip is None else (substrip.lower, substrip.upper)
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    best = np.zeros(tau.shape)
    for lam, w in _spectral_terms(fs, y_lo, y_hi):
        if lam.size:
            dev = np.abs(np.exp(1j * np.multiply.outer(tau, lam)) - 1.0) @ w
            best = np.maximum(best, dev)
    return best


def grid_deviation(f: ExpSum, tau: float, substrip: Strip, re_range, density: float) -> float:
    """Grid maximum of ``|f(z + tau) - f(z)|`` (a lower bound of the sup)."""
    zz = region_grid(re_range, (substrip.lower, substrip.upper), density)
    diff = f.translate(tau) - f
    if diff.is_zero:
        return 0.0
    return float(max(np.max(np.abs(diff(row))) for row in zz))


@dataclass
class AlmostPeriodSearch:
    eps: float
    taus: list
    deviations: list
    near_misses: list = field(default_factory=list)
    substrip: Optional[Strip] = None
    tau_range: tuple = (0.0, 0.0)


def _golden_min(fn, a, b, iters=60):
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(iters):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = fn(d)
        if b - a <= 1e-15 * max(1.0, abs(a)):
            break
    return (c, fc) if fc <= fd else (d, fd)


def almost_period_search(fs: Sequence[ExpSum], eps: float, tau_range=(0.0, 1e5),
                         count: Optional[int] = None, substrip: Optional[Strip] = None,
                         chunk: int = 200_000) -> AlmostPeriodSearch:
    """Common eps-almost-periods of several exponential sums.

    Every candidate is anchored at a period of the most constraining
    ("pivot") term: a common almost-period must put that term's phase within
    ``2 arcsin(eps / 2c)`` of a multiple of ``2 pi``.  Windows surviving a
    Lipschitz prefilter are refined by a local scan plus golden-section
    search on the deviation bound.  One representative per window.
    """
    if eps <= 0:
        raise InvalidInputError("eps must be positive")
    lo, hi = map(float, tau_range)
    if not hi > lo:
        raise InvalidInputError("empty tau range")
    fs = list(fs)
    y_lo, y_hi = (0.0, 0.0) if substrip is None else (substrip.lower, substrip.upper)
    terms = _spectral_terms(fs, y_lo, y_hi)
    out = AlmostPeriodSearch(eps, [], [], [], substrip, (lo, hi))
    lam_all = np.concatenate([t[0] for t in terms]) if terms else np.zeros(0)
    w_all = np.concatenate([t[1] for t in terms]) if terms else np.zeros(0)
    lip = max([float(np.sum(w * np.abs(lam))) for lam, w in terms] + [0.0])
    step = eps / (2 * lip + 1)
    if lam_all.size == 0:
        n = count or 10
        out.taus = [lo + step * (k + 1) for k in range(n) if lo + step * (k + 1) <= hi]
        out.deviations = [0.0] * len(out.taus)
        return out
    constrained = w_all > eps / 2
    if not np.any(constrained):
        # every term alone is harmless; fall back to a uniform scan
        taus = np.arange(lo + step, hi + step / 2, step)
        dev = deviation_bound(fs, taus, substrip)
        ok = np.flatnonzero(dev <= eps)[: (count or 10)]
        out.taus = taus[ok].tolist()
        out.deviations = dev[ok].tolist()
        return out
    cand = np.flatnonzero(constrained)
    # pivot: narrowest admissible phase window, then smallest frequency
    order = sorted(cand, key=lambda i: (-w_all[i], abs(lam_all[i])))
    p = order[0]
    lam_p = abs(float(lam_all[p]))
    half = 2 * math.asin(min(1.0, eps / (2 * w_all[p]))) / lam_p
    period = 2 * math.pi / lam_p
    k_lo = math.ceil((lo - half) / period)
    k_hi = math.floor((hi + half) / period)
    def refine(c):
        a, b = max(lo, c - half), min(hi, c + half)
        if not b > a:
            return None
        xs = np.linspace(a, b, 65)
        if a < c < b:
            xs = np.append(xs, c)
        dv = deviation_bound(fs, xs, substrip)
        j = int(np.argmin(dv))
        best_t, best_v = float(xs[j]), float(dv[j])
        step_x = (b - a) / 64
        ga, gb = max(a, best_t - step_x), min(b, best_t + step_x)
        if gb > ga:
            t2, v2 = _golden_min(lambda t: float(deviation_bound(fs, t, substrip)[0]), ga, gb)
            if v2 < best_v:
                best_t, best_v = t2, v2
        return None if best_t <= lo else (best_t, best_v)

    found = []
    misses = []
    closest = []
    for k0 in range(k_lo, k_hi + 1, chunk):
        ks = np.arange(k0, min(k0 + chunk, k_hi + 1))
        ks = ks[ks != 0]
        centers = ks * period
        dev_c = deviation_bound(fs, centers, substrip)
        order_c = np.argsort(dev_c)[:5]
        closest = sorted(closest + [(float(dev_c[i]), float(centers[i])) for i in order_c])[:5]
        keep = np.flatnonzero(dev_c - lip * half <= eps)
        for i in keep:
            got = refine(float(centers[i]))
            if got is None:
                continue
            if got[1] <= eps:
                found.append(got)
                if count is not None and len(found) >= count:
                    break
            else:
                misses.append(got)
        if count is not None and len(found) >= count:
            break
    if not found and not misses:
        misses = [got for got in (refine(c) for _, c in closest) if got is not None]
    found.sort()
    out.taus = [t for t, _ in found]
    out.deviations = [v for _, v in found]
    if not found:
        misses.sort(key=lambda tv: tv[1])
        out.near_misses = misses[:5]
    return out


def find_almost_periods(f: ExpSum, eps: float, tau_range=(0.0, 1e5), count: Optional[int] = None,
                        substrip: Optional[Strip] = None) -> list:
    """Ascending eps-almost-periods of ``f`` in ``tau_range`` (at most ``count``)."""
    return almost_period_search([f], eps, tau_range, count, substrip).taus


def find_common_almost_periods(fs: Sequence[ExpSum], eps: float, tau_range=(0.0, 1e5),
                               count: Optional[int] = None,
                               substrip: Optional[Strip] = None) -> list:
    return almost_period_search(fs, eps, tau_range, count, substrip).taus


# -- Bohr-Fourier coefficients ----------------------------------------------------

def bohr_fourier_coefficient(f: ExpSum, lam: float, T: float, y0: float = 0.0,
                             chunk: int = 50_000) -> complex:
    """``(1/2T) \\int_{-T}^{T} f(t + i y0) e^{-i lam t} dt`` by composite Gauss-Legendre."""
    if T <= 0:
        raise InvalidInputError("T must be positive")
    if f.is_zero:
        return 0j
    g = ExpSum([(l - lam, a * math.exp(-l * y0)) for l, a in f.terms])
    spread = float(np.max(np.abs(g.freqs)))
    h = min(1.0, math.pi / (2 * spread + 1.0))
    n = max(1, math.ceil(2 * T / h))
    edges = np.linspace(-T, T, n + 1)
    x, wts = np.polynomial.legendre.leggauss(10)
    total = 0j
    for i in range(0, n, chunk):
        j = min(i + chunk, n)
        a = edges[i:j]
        b = edges[i + 1:j + 1]
        half = 0.5 * (b - a)
        nodes = (0.5 * (a + b))[:, None] + half[:, None] * x[None, :]
        total += np.sum((g(nodes) @ wts) * half)
    return complex(total / (2 * T))


# -- branch verification -----------------------------------------------------------

@dataclass
class APReport:
    epsilon: float
    almost_periods: list
    sup_deviation: list
    coefficient_deviation: list
    tol_w: float
    grid: dict
    verdict: str
    eta: float
    gamma: float
    substrip: tuple
    nu_estimate: Optional[float] = None
    monic_coefficient_eps: Optional[float] = None
    near_misses: list = field(default_factory=list)
    count_requested: int = 0
    solve_continue_gap: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_json(self) -> str:
        return json.dumps(_jsonable(asdict(self)), sort_keys=True, indent=2)

    def deviation_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["tau", "sup_deviation", "coefficient_deviation"])
        for t, d, c in zip(self.almost_periods, self.sup_deviation, self.coefficient_deviation):
            wr.writerow([repr(float(t)), repr(float(d)), repr(float(c))])
        return buf.getvalue()


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else None
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, Strip):
        return [x.lower, x.upper]
    return x


def _check_horizontal(branch: RootBranch):
    if len(branch) < 2:
        raise InsufficientDataError("branch has fewer than two samples")
    y = branch.z.imag
    if np.max(np.abs(y - y[0])) > 1e-12:
        raise InvalidInputError("verify_branch_ap expects a branch along a horizontal segment")
    if np.ptp(branch.z.real) <= 0:
        raise InsufficientDataError("branch has zero length")


def _first_order_tol(P: APPoly, z: np.ndarray, w: np.ndarray, eps: float) -> float:
    """Root shift for coefficient changes of size eps (first order, doubled)."""
    moving = [j for j, c in enumerate(P.coeffs) if not c.is_constant]
    dP = P.dw()
    worst = 0.0
    for zi, wi in zip(z, w):
        num = sum(abs(wi) ** j for j in moving)
        den = abs(dP(zi, wi))
        worst = max(worst, num / den if den > 0 else math.inf)
    return 2.0 * eps * worst + 1e-8


def verify_branch_ap(branch: RootBranch, P: APPoly, eps: float, count: int, *,
                     substrip: Strip, tau_range=(0.0, 1e5), tol_w: Optional[float] = None,
                     seed: int = 0, nu_trials: int = 100, grid_density: float = 2.0) -> APReport:
    """Check ``|w(z + tau) - w(z)| <= tol_w`` at common eps-almost-periods ``tau``.

    ``w(z + tau)`` is the branch continued along its line by ``tau``; the
    report also carries, per ``tau``, the gap to the root that re-solving
    and min-max matching would pick (zero unless the shift permutes roots,
    as ``tau = pi`` does for ``w^2 = e^{2iz}``).  The coefficient almost-periods are
    searched on ``substrip``; the verdict passes iff ``count`` of them are
    found and every branch deviation is within ``tol_w`` (default: twice the
    first-order root sensitivity times eps).
    """
    _check_horizontal(branch)
    y0 = float(branch.z[0].imag)
    if not substrip.lower <= y0 <= substrip.upper:
        raise InvalidInputError("branch line lies outside the verification substrip")
    moving = [c for c in P.coeffs if not c.is_constant]
    search = almost_period_search(moving, eps, tau_range, count, substrip)
    taus = search.taus[:count]
    if tol_w is None:
        tol_w = _first_order_tol(P, branch.z, branch.w, eps)
    devs, gaps = [], []
    for tau in taus:
        dev, gap = _translate_deviation(P, branch, tau)
        devs.append(float(dev))
        gaps.append(float(gap))
    coeff_dev = deviation_bound(moving, taus, substrip).tolist() if taus else []

    lead = np.array([P.lead(z) for z in branch.z])
    disc = np.array([numeric_discriminant(evaluate_poly(P, z)) for z in branch.z])
    eta = float(min(np.min(np.abs(lead)), np.min(np.abs(disc))))
    x0, x1 = float(branch.z.real.min()), float(branch.z.real.max())
    zz = region_grid((x0, x1), (substrip.lower, substrip.upper), grid_density).ravel()
    gamma = float(min(abs(numeric_discriminant(evaluate_poly(P, z))) for z in zz))

    nu = None
    monic_eps = None
    if P.degree >= 1 and nu_trials > 0:
        bs = np.array([evaluate_poly(P, z) for z in branch.z])
        bs = bs[:, :-1] / bs[:, -1:]
        N = float(np.max(np.abs(bs))) if bs.size else 1.0
        N = max(N, 1e-6)
        nu = estimate_nu(N, tol_w, P.degree, trials=nu_trials, seed=seed).nu
        min_lead = float(np.min(np.abs(lead)))
        monic_eps = eps * (1.0 + N) / min_lead
    verdict = "pass" if len(taus) >= count and all(d <= tol_w for d in devs) else "fail"
    return APReport(
        epsilon=eps, almost_periods=list(map(float, taus)), sup_deviation=devs,
        coefficient_deviation=coeff_dev, tol_w=float(tol_w),
        grid={"samples": len(branch), "line_im": y0, "re_range": [x0, x1],
              "kind": "branch samples (grid sup, lower bound)"},
        verdict=verdict, eta=eta, gamma=gamma, substrip=(substrip.lower, substrip.upper),
        nu_estimate=nu, monic_coefficient_eps=monic_eps, near_misses=search.near_misses,
        count_requested=count, solve_continue_gap=gaps)


def _translate_deviation(P: APPoly, branch: RootBranch, tau: float,
                         opts: BranchOptions = None):
    """Sup over samples of ``|w(z + tau) - w(z)|`` for the continued branch.

    ``w(z + tau)`` is the branch continued along the line from its first
    sample.  The second value is the largest gap between that continued
    root and the root picked by re-solving at ``z + tau`` and min-max
    matching against the roots at ``z``; the two agree unless the
    translate permutes the roots.
    """
    tr = Tracker(P, opts or BranchOptions(max_step=1.0))
    z0 = complex(branch.z[0])
    roots, k = tr.seed(z0, complex(branch.w[0]))
    roots, k, h, _ = tr.follow(z0, roots, k, z0 + tau)
    prev = z0 + tau
    worst = gap = 0.0
    for z, w in zip(branch.z, branch.w):
        zt = complex(z) + tau
        roots, k, h, _ = tr.follow(prev, roots, k, zt, h)
        prev = zt
        worst = max(worst, abs(roots[k] - w))
        base = tr.solve(complex(z))
        sigma, _ = match_roots(base, roots)
        j = int(np.argmin([abs(b - w) for b in base]))
        gap = max(gap, abs(roots[sigma[j]] - roots[k]))
    return worst, gap


def continued_translate(branch: RootBranch, P: APPoly, index: int, tau: float,
                        opts: BranchOptions = None) -> complex:
    """``w(z + tau)`` by continuing the branch from sample ``index`` along its line."""
    tr = Tracker(P, opts or BranchOptions(max_step=1.0))
    z = complex(branch.z[index])
    roots, k = tr.seed(z, complex(branch.w[index]))
    roots, k, _, _ = tr.follow(z, roots, k, z + tau)
    return roots[k]


# -- translates on cover boundaries ------------------------------------------------

def translate_on_grid(P: APPoly, branch: RootBranch, grid, h: float,
                      opts: BranchOptions = None):
    """Branch values ``w(z + h)`` on the cover boundary grid.

    The branch is continued from its first sample to the translated grid
    root, then along the grid's spanning tree.  Returns ``(values, roots)``.
    """
    opts = opts or BranchOptions(max_step=1.0)
    tr = Tracker(P, opts)
    zb = complex(branch.z[0])
    roots, k = tr.seed(zb, complex(branch.w[0]))
    pts = grid.points + h
    root = int(grid.order[0])
    target = complex(pts[root])
    elbow = complex(target.real, zb.imag)
    roots, k, hstep, _ = tr.follow(zb, roots, k, elbow)
    roots, k, _, _ = tr.follow(elbow, roots, k, target, hstep)
    n = len(pts)
    all_roots = [None] * n
    idx = np.zeros(n, dtype=np.intp)
    all_roots[root] = roots
    idx[root] = k
    for i in grid.order[1:]:
        p = grid.parent[i]
        r, kk, _, _ = tr.follow(complex(pts[p]), all_roots[p], int(idx[p]), complex(pts[i]))
        all_roots[i] = r
        idx[i] = kk
    R = np.array(all_roots, dtype=complex)
    return R[np.arange(n), idx], R


@dataclass
class PairResult:
    h_n: float
    h_k: float
    n_close: int
    n_far: int
    n_middle: int
    max_close_gap: float
    min_far_gap: float
    klass: str
    constant: bool
    matched_dist: float
    coefficient_gap: float


@dataclass
class DichotomyReport:
    tau: float
    n_points: int
    measured_separation: float
    pairs: list
    middle_band_empty: bool
    step: float
    nu: float

    def to_json(self) -> str:
        return json.dumps(_jsonable(asdict(self)), sort_keys=True, indent=2)


def translate_gap_test(P: APPoly, cover: RectCover, h_pairs: Sequence, tau: Optional[float] = None,
                       *, branch: RootBranch, step: Optional[float] = None,
                       opts: BranchOptions = None, check_preconditions: bool = True,
                       nu_trials: int = 200) -> DichotomyReport:
    """Classify ``|w(z + h_k) - w(z + h_n)|`` on the cover boundary.

    Each gap must be ``<= tau/3`` or ``>= 2 tau/3``; the class (threshold
    ``tau/2``) must be constant along the connected boundary.  ``tau``
    defaults to the smallest root separation measured on the translated
    grids.  Raises :class:`PreconditionError` when ``tau`` exceeds that
    separation, when a pair's monic coefficients differ by more than the
    estimated continuity modulus for ``eps = tau/3``, or when its root sets
    are not within ``tau/3`` everywhere,
    and :class:`DichotomyViolationError` when a gap lands in the middle band.
    With ``check_preconditions=False`` the gaps are classified regardless.
    """
    step = step or cover.r / 4
    grid = cover.boundary_grid(step)
    shifts = sorted({float(h) for pair in h_pairs for h in pair})
    vals, roots = {}, {}
    for h in shifts:
        vals[h], roots[h] = translate_on_grid(P, branch, grid, h, opts)
    sep = min(_min_sep_rows(roots[h]) for h in shifts)
    if tau is None:
        tau = sep
    if check_preconditions and tau > sep * (1 + 1e-12):
        raise PreconditionError(f"tau={tau:g} exceeds the measured root separation {sep:g}")
    monic = {h: _monic_on_grid(P, grid.points + h) for h in shifts}
    N = max(float(np.max(np.abs(b))) for b in monic.values())
    nu = estimate_nu(max(N, 1e-6), tau / 3, P.degree, trials=nu_trials, seed=0).nu
    results = []
    witness = None
    for hn, hk in h_pairs:
        hn, hk = float(hn), float(hk)
        coeff_gap = float(np.max(np.abs(monic[hk] - monic[hn])))
        if check_preconditions and coeff_gap > nu:
            raise PreconditionError(
                f"pair ({hn:g}, {hk:g}): monic coefficients differ by {coeff_gap:.3g} on the "
                f"boundary grid, above the estimated modulus nu={nu:.3g} for eps=tau/3")
        matched = _rowwise_match(roots[hn], roots[hk])
        if check_preconditions and np.max(matched) >= tau / 3:
            i = int(np.argmax(matched))
            raise PreconditionError(
                f"pair ({hn:g}, {hk:g}): root sets differ by {matched[i]:.3g} >= tau/3 at "
                f"z={complex(grid.points[i])!r}; coefficient translates are not close enough")
        gaps = np.abs(vals[hk] - vals[hn])
        middle = (gaps > tau / 3) & (gaps < 2 * tau / 3)
        close = gaps <= tau / 2
        n_close = int(np.sum(close))
        n_mid = int(np.sum(middle))
        if n_mid and witness is None:
            witness = complex(grid.points[int(np.flatnonzero(middle)[0])])
        results.append(PairResult(
            hn, hk, n_close, int(len(gaps) - n_close), n_mid,
            float(np.max(gaps[close])) if n_close else 0.0,
            float(np.min(gaps[~close])) if n_close < len(gaps) else math.inf,
            "close" if n_close == len(gaps) else ("far" if n_close == 0 else "mixed"),
            n_close in (0, len(gaps)), float(np.max(matched)), coeff_gap))
    report = DichotomyReport(float(tau), len(grid), float(sep), results,
                             all(p.n_middle == 0 for p in results), float(step), float(nu))
    if not report.middle_band_empty:
        raise DichotomyViolationError(
            f"gap inside (tau/3, 2 tau/3) at z={witness!r}", report=report, z=witness)
    return report


def _monic_on_grid(P: APPoly, pts: np.ndarray) -> np.ndarray:
    c = np.array([f(pts) for f in P.coeffs])
    return (c[:-1] / c[-1]).T


def _min_sep_rows(R: np.ndarray) -> float:
    if R.shape[1] < 2:
        return math.inf
    d = np.abs(R[:, :, None] - R[:, None, :])
    m = R.shape[1]
    d[:, np.arange(m), np.arange(m)] = np.inf
    return float(d.min())


def _rowwise_match(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    from .rootkit import batch_match_maxdist
    return batch_match_maxdist(A, B)


# -- round trip (two-sided translate limits) ---------------------------------------------

@dataclass
class RoundTripReport:
    h_list: list
    coefficient_deviation: list
    residuals: list
    cauchy_gaps: list
    forward_gap: float
    limit_gap: float
    tau: float
    tol: float
    monotone: bool
    passed: bool
    n_points: int

    def to_json(self) -> str:
        return json.dumps(_jsonable(asdict(self)), sort_keys=True, indent=2)


def _tree_walk(tr: Tracker, grid, pts, roots, k):
    n = len(pts)
    all_roots = [None] * n
    idx = np.zeros(n, dtype=np.intp)
    r0 = int(grid.order[0])
    all_roots[r0] = roots
    idx[r0] = k
    for i in grid.order[1:]:
        p = grid.parent[i]
        r, kk, _, _ = tr.follow(complex(pts[p]), all_roots[p], int(idx[p]), complex(pts[i]))
        all_roots[i] = r
        idx[i] = kk
    R = np.array(all_roots, dtype=complex)
    return R[np.arange(n), idx], R


def round_trip_check(P: APPoly, h_list: Sequence[float], branch: RootBranch, tol: float, *,
                     cover: RectCover, step: Optional[float] = None,
                     opts: BranchOptions = None) -> RoundTripReport:
    """Forward-translate limit on the cover boundary, then translate back.

    The shifts must be increasingly good common almost-periods of the
    coefficients, so the limit equation is ``P`` itself.  The limit branch
    on the boundary is the root of ``P`` nearest ``w(z + h_N)``; it is then
    continued to the boundary translated by ``-h_n`` and compared with the
    original branch there.  A residual stuck at ``>= 2 tau/3`` would mean a
    second, distinct limit solution and raises :class:`LimitMismatchError`.
    """
    if not h_list:
        raise InvalidInputError("h_list is empty")
    opts = opts or BranchOptions(max_step=1.0)
    step = step or cover.r / 4
    grid = cover.boundary_grid(step)
    pts = grid.points
    moving = [c for c in P.coeffs if not c.is_constant]
    coeff_dev = []
    for h in h_list:
        dev = 0.0
        for c in moving:
            dev = max(dev, float(np.max(np.abs(c.translate(h)(pts) - c(pts)))))
        coeff_dev.append(dev)
    if any(b > a * (1 + 1e-9) + 1e-15 for a, b in zip(coeff_dev[:-1], coeff_dev[1:])):
        raise PreconditionError(f"coefficient translates are not Cauchy along h_list: {coeff_dev}")
    w0, R0 = translate_on_grid(P, branch, grid, 0.0, opts)
    tau = _min_sep_rows(R0)
    forward = [translate_on_grid(P, branch, grid, float(h), opts)[0] for h in h_list]
    cauchy = [float(np.max(np.abs(b - a))) for a, b in zip(forward[:-1], forward[1:])]
    wN = forward[-1]
    pick = np.argmin(np.abs(R0 - wN[:, None]), axis=1)
    wbar = R0[np.arange(len(pts)), pick]
    limit_gap = float(np.max(np.abs(wbar - wN)))
    forward_gap = float(np.max(np.abs(wN - w0)))

    tr = Tracker(P, opts)
    r0 = int(grid.order[0])
    z0 = complex(pts[r0])
    residuals = []
    for h in h_list:
        roots, k = tr.seed(z0, complex(wbar[r0]))
        target = z0 - float(h)
        roots, k, _, _ = tr.follow(z0, roots, k, target)
        back, _ = _tree_walk(tr, grid, pts - float(h), roots, k)
        residuals.append(float(np.max(np.abs(back - w0))))
    monotone = all(b < a for a, b in zip(residuals[:-1], residuals[1:]))
    if math.isfinite(tau) and residuals[-1] >= 2 * tau / 3:
        raise LimitMismatchError(
            f"round-trip residual {residuals[-1]:.3g} >= 2 tau/3 = {2 * tau / 3:.3g}")
    passed = monotone and residuals[-1] <= tol
    return RoundTripReport([float(h) for h in h_list], coeff_dev, residuals, cauchy, forward_gap,
                           limit_gap, float(tau), float(tol), monotone, passed, len(pts))


# -- pole census --------------------------------------------------------------------

@dataclass
class PoleCensus:
    t_values: list
    counts: list
    densities: list
    hypothesis_fail: bool
    poles: list
    pole_free_center: float
    pole_free_halfwidth: float
    strip: tuple

    def to_json(self) -> str:
        return json.dumps(_jsonable(asdict(self)), sort_keys=True, indent=2)


def _locate_in(f: ExpSum, rect: Rect) -> list:
    pad = 0.0
    for _ in range(10):
        try:
            R = Rect(rect.re_min - pad, rect.re_max + pad, rect.im_min + pad, rect.im_max - pad)
            return locate_zeros(f, R)
        except ZeroOnBoundaryError:
            pad = pad * 1.7 if pad else 1e-3
    raise PrecisionError("could not place the census contour off the zero set")


def pole_census(a_m: ExpSum, strip: Strip, t: float, ladder: Optional[Sequence[float]] = None,
                decay_ratio: float = 0.5) -> PoleCensus:
    """Candidate poles (zeros of ``a_m``) with ``|Re z| < t`` on a bounded strip.

    Reports ``count/t`` along a ladder of ``t`` values.  The flag
    ``hypothesis_fail`` is raised when the density at the largest ``t`` is
    positive and has not dropped below ``decay_ratio`` times the ladder
    maximum, i.e. the count does not look like ``o(t)``.
    """
    if not strip.bounded:
        raise InvalidInputError("pole_census needs a bounded strip")
    if t <= 0:
        raise InvalidInputError("t must be positive")
    ladder = sorted(ladder) if ladder is not None else [t / 8, t / 4, t / 2, t]
    T = max(ladder)
    if a_m.is_zero:
        raise InvalidInputError("a_m is identically zero")
    zeros = [] if len(a_m) == 1 else _locate_in(a_m, Rect(-T, T, strip.lower, strip.upper))
    zs = np.array(zeros, dtype=complex)
    zs = zs[(zs.imag > strip.lower) & (zs.imag < strip.upper)] if zs.size else zs
    counts = [int(np.sum(np.abs(zs.real) < ti)) if zs.size else 0 for ti in ladder]
    for ti, c in zip(ladder, counts):
        if len(a_m) > 1:
            try:
                n = count_zeros_rect(a_m, Rect(-ti, ti, strip.lower, strip.upper))
            except (ZeroOnBoundaryError, PrecisionError):
                continue
            if n != c:
                raise PrecisionError(f"census count {c} disagrees with contour count {n} at t={ti:g}")
    dens = [c / ti for c, ti in zip(counts, ladder)]
    flag = dens[-1] > 0 and dens[-1] >= decay_ratio * max(dens)
    xs = np.sort(np.concatenate([[-T, T], zs.real])) if zs.size else np.array([-T, T])
    gaps = np.diff(xs)
    i = int(np.argmax(gaps))
    return PoleCensus(list(map(float, ladder)), counts, dens, bool(flag), zs.tolist(),
                      float(0.5 * (xs[i] + xs[i + 1])), float(0.5 * gaps[i]),
                      (strip.lower, strip.upper))
