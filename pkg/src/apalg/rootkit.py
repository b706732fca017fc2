"""Pointwise roots, min-max root matching, separation floors, continuation.

Numeric polynomials are coefficient sequences ordered low-to-high, the
same order :func:`apalg.appoly.evaluate_poly` produces.
"""

from __future__ import annotations

import cmath
import csv
import io
import itertools
import json
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np

from .appoly import APPoly, discriminant_resultant
from .errors import (AmbiguousBranchError, ContinuationError, InvalidInputError,
                     PreconditionError, ResourceError, SingularLeadingCoefficientError,
                     SolverFailureError)

LEAD_FLOOR = 1e-10
ROOT_TOL = 1e-12
MAX_ITER = 200
MAX_MATCH_DEGREE = 8


@dataclass(frozen=True)
class RootSet:
    roots: tuple
    source_z: complex = None
    cond: float = 0.0

    def __len__(self):
        return len(self.roots)

    def as_array(self) -> np.ndarray:
        return np.array(self.roots, dtype=complex)


def _monic(coeffs):
    c = [complex(x) for x in coeffs]
    if len(c) < 2:
        raise InvalidInputError("need a polynomial of degree >= 1")
    lead = c[-1]
    scale = max(abs(x) for x in c)
    if abs(lead) <= LEAD_FLOOR * scale:
        raise SingularLeadingCoefficientError(
            f"|leading coefficient| = {abs(lead):.3g} below floor {LEAD_FLOOR:g} (relative)")
    return [x / lead for x in c[:-1]]


def _horner(b, w):
    p = 1.0 + 0j
    dp = 0j
    for j in range(len(b) - 1, -1, -1):
        dp = dp * w + p
        p = p * w + b[j]
    return p, dp


def _rel_residual(b, w) -> float:
    p, _ = _horner(b, w)
    aw = abs(w)
    s = aw ** len(b)
    acc = 1.0
    for j in range(len(b) - 1, -1, -1):
        acc = acc * aw + abs(b[j])
    return abs(p) / max(acc, s, 1e-300)


def _initial_guesses(b):
    m = len(b)
    center = -b[-1] / m
    radius = max(abs(b[j]) ** (1.0 / (m - j)) for j in range(m)) if any(b) else 1.0
    radius = max(radius, 1e-3)
    return [center + radius * cmath.exp(1j * (2 * math.pi * k / m + 0.4)) for k in range(m)]


def _aberth(b, w, max_iter):
    m = len(b)
    w = list(w)
    for _ in range(max_iter):
        done = True
        for k in range(m):
            wk = w[k]
            p, dp = _horner(b, wk)
            if p == 0:
                continue
            s = 0j
            for j in range(m):
                if j != k:
                    d = wk - w[j]
                    if d != 0:
                        s += 1.0 / d
            if dp == 0:
                corr = p * 1e-3 + 1e-8
            else:
                ratio = p / dp
                denom = 1.0 - ratio * s
                corr = ratio / denom if denom != 0 else ratio
            w[k] = wk - corr
            if abs(corr) > 4e-16 * max(abs(wk), 1.0):
                done = False
        if done:
            break
    return w


def _newton_polish(b, w, iters=3):
    out = []
    for x in w:
        for _ in range(iters):
            p, dp = _horner(b, x)
            if dp == 0 or p == 0:
                break
            x = x - p / dp
        out.append(x)
    return out


def roots_at(coeffs: Sequence, tol: float = ROOT_TOL, init: Optional[Sequence] = None,
             max_iter: int = MAX_ITER, source_z=None) -> RootSet:
    """All roots of a numeric polynomial (coefficients low-to-high).

    Aberth simultaneous iteration, warm-started from ``init`` when given;
    falls back to companion-matrix eigenvalues.  ``tol`` bounds the
    relative residual ``|Q(w)| / sum |b_j| |w|^j`` of the monic form.
    Raises :class:`SingularLeadingCoefficientError` when the leading
    coefficient is below ``LEAD_FLOOR`` relative to the largest one.
    """
    b = _monic(coeffs)
    m = len(b)
    if m == 1:
        roots = [-b[0]]
    else:
        start = list(init) if init is not None and len(init) == m else _initial_guesses(b)
        roots = _aberth(b, start, max_iter)
        if max(_rel_residual(b, x) for x in roots) > tol or _has_duplicates(roots):
            comp = np.roots(np.array([1.0] + b[::-1], dtype=complex))
            roots = _newton_polish(b, [complex(x) for x in comp])
    res = max(_rel_residual(b, x) for x in roots)
    if not all(math.isfinite(abs(x)) for x in roots) or res > max(tol, 64 * m * 2.2e-16):
        raise SolverFailureError(f"root solver did not converge (relative residual {res:.3g})")
    cond = max(abs(_horner(b, x)[0]) for x in roots)
    return RootSet(tuple(roots), source_z, cond)


def _has_duplicates(roots) -> bool:
    for i in range(len(roots)):
        for j in range(i):
            if roots[i] == roots[j]:
                return True
    return False


def roots_batch(coeffs: np.ndarray) -> np.ndarray:
    """Roots of many monic polynomials at once via companion eigenvalues.

    ``coeffs`` has shape ``(n, m)`` holding ``b_0 .. b_{m-1}``.
    """
    coeffs = np.asarray(coeffs, dtype=complex)
    n, m = coeffs.shape
    comp = np.zeros((n, m, m), dtype=complex)
    if m > 1:
        idx = np.arange(m - 1)
        comp[:, idx + 1, idx] = 1.0
    comp[:, :, m - 1] = -coeffs
    return np.linalg.eigvals(comp)


def min_separation(roots) -> float:
    r = np.asarray(roots, dtype=complex)
    if len(r) < 2:
        return math.inf
    d = np.abs(r[:, None] - r[None, :])
    d[np.diag_indices(len(r))] = np.inf
    return float(d.min())


def _gap_of(roots, k) -> float:
    wk = roots[k]
    best = math.inf
    for j, x in enumerate(roots):
        if j != k:
            d = abs(x - wk)
            if d < best:
                best = d
    return best


# -- matching -----------------------------------------------------------------

@lru_cache(maxsize=None)
def _perms(m: int) -> np.ndarray:
    return np.array(list(itertools.permutations(range(m))), dtype=np.intp)


def match_roots(ws, vs, max_degree: int = MAX_MATCH_DEGREE):
    """Exact min-max assignment between two root multisets.

    Returns ``(sigma, max_dist)`` where ``ws[j]`` pairs with
    ``vs[sigma[j]]`` and ``max_dist`` is the smallest achievable largest
    pair distance.  Ties are broken by total distance, then by the first
    permutation in lexicographic order.
    """
    a = np.asarray(ws.roots if isinstance(ws, RootSet) else ws, dtype=complex)
    b = np.asarray(vs.roots if isinstance(vs, RootSet) else vs, dtype=complex)
    if a.shape != b.shape:
        raise InvalidInputError(f"cardinality mismatch: {len(a)} vs {len(b)}")
    m = len(a)
    if m > max_degree:
        raise InvalidInputError(f"exact matching limited to degree <= {max_degree}")
    if m == 0:
        return (), 0.0
    if m == 1:
        return (0,), float(abs(a[0] - b[0]))
    if m <= 3:
        return _match_small(a.tolist(), b.tolist())
    D = np.abs(a[:, None] - b[None, :])
    P = _perms(m)
    vals = D[np.arange(m)[None, :], P]
    mx = vals.max(axis=1)
    best = mx.min()
    cand = np.flatnonzero(mx == best)
    if len(cand) > 1:
        sums = vals[cand].sum(axis=1)
        cand = cand[sums == sums.min()]
    return tuple(int(i) for i in P[cand[0]]), float(best)


def _match_small(a, b):
    m = len(a)
    D = [[abs(x - y) for y in b] for x in a]
    best = None
    for perm in itertools.permutations(range(m)):
        vals = [D[j][perm[j]] for j in range(m)]
        key = (max(vals), sum(vals))
        if best is None or key < best[0]:
            best = (key, perm)
    return tuple(best[1]), float(best[0][0])


def batch_match_maxdist(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Min-max matching distance for stacks of root sets, shape ``(n, m)``."""
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    n, m = A.shape
    if m > MAX_MATCH_DEGREE:
        raise InvalidInputError(f"exact matching limited to degree <= {MAX_MATCH_DEGREE}")
    D = np.abs(A[:, :, None] - B[:, None, :])
    P = _perms(m)
    vals = D[:, np.arange(m)[None, :], P]
    return vals.max(axis=2).min(axis=1)


# -- root continuity modulus probe ---------------------------------------------

@dataclass
class NuEstimate:
    nu: float
    eps: float
    N: float
    m: int
    trials: int
    witness_base: list = field(default_factory=list)
    witness_perturbed: list = field(default_factory=list)
    witness_dist: float = 0.0
    witness_nu: float = 0.0

    def __float__(self):
        return float(self.nu)


def _disk_samples(rng, shape, radius):
    r = radius * np.sqrt(rng.random(shape))
    t = 2 * np.pi * rng.random(shape)
    return r * np.exp(1j * t)


def nu_grid(N: float, per_decade: int = 8, lowest: float = 1e-14) -> np.ndarray:
    top = math.log10(2 * N)
    k_lo = math.floor(math.log10(lowest) * per_decade)
    k_hi = math.floor(top * per_decade)
    return 10.0 ** (np.arange(k_lo, k_hi + 1) / per_decade)


def perturb(base: np.ndarray, direction: np.ndarray, nu: float, N: float) -> np.ndarray:
    """``base + nu * direction`` projected back to ``|b_j| <= N``."""
    out = base + nu * direction
    mag = np.abs(out)
    over = mag > N
    out[over] *= N / mag[over]
    return out


def sample_pairs(N: float, m: int, trials: int, seed: int = 0, base=None):
    """Seeded base coefficients and unit-sup perturbation directions."""
    rng = np.random.default_rng(seed)
    if base is None:
        b = _disk_samples(rng, (trials, m), N)
    else:
        rows = [np.asarray(x, dtype=complex) for x in base]
        rows = [r[:-1] / r[-1] if len(r) == m + 1 else r for r in rows]
        b = np.array([rows[i % len(rows)] for i in range(trials)], dtype=complex)
    u = _disk_samples(rng, (trials, m), 1.0)
    u /= np.max(np.abs(u), axis=1, keepdims=True)
    return b, u


def estimate_nu(N: float, eps: float, m: int, trials: int = 200, seed: int = 0,
                base=None, per_decade: int = 8) -> NuEstimate:
    """Empirical coefficient modulus for root continuity.

    Scans perturbation sizes upward on a log grid and returns the largest
    size for which every sampled pair (and every smaller grid size) keeps
    the matched root distance below ``eps``.  The sample set depends only on
    ``seed``, so estimates for different ``eps`` are comparable.
    """
    if N <= 0 or eps <= 0 or trials < 1 or m < 1:
        raise InvalidInputError("estimate_nu needs N > 0, eps > 0, m >= 1, trials >= 1")
    b, u = sample_pairs(N, m, trials, seed, base)
    r0 = roots_batch(b)
    out = NuEstimate(0.0, eps, N, m, trials)
    for nu in nu_grid(N, per_decade):
        bt = perturb(b, u, float(nu), N)
        d = batch_match_maxdist(r0, roots_batch(bt))
        worst = int(np.argmax(d))
        if d[worst] >= eps:
            out.witness_base = b[worst].tolist()
            out.witness_perturbed = bt[worst].tolist()
            out.witness_dist = float(d[worst])
            out.witness_nu = float(nu)
            return out
        out.nu = float(nu)
        out.witness_base = b[worst].tolist()
        out.witness_perturbed = bt[worst].tolist()
        out.witness_dist = float(d[worst])
        out.witness_nu = float(nu)
    return out


# -- separation floor from the discriminant ----------------------------------------

def lemma2_floor(N: float, m: int) -> Callable[[float], float]:
    """Provable lower bound on root separation of monic polynomials.

    With ``|b_j| <= N`` all roots lie in ``|w| <= 1 + N``, so every factor of
    ``|disc| = prod_{i<j} |w_i - w_j|^2`` other than the closest pair is at
    most ``(2 + 2N)^2``.
    """
    if N <= 0 or m < 2:
        raise InvalidInputError("lemma2_floor needs N > 0 and m >= 2")
    pairs = m * (m - 1) // 2
    factor = (2.0 + 2.0 * N) ** (1 - pairs)

    def floor(delta: float) -> float:
        return math.sqrt(max(delta, 0.0)) * factor

    return floor


@dataclass
class SeparationReport:
    N: float
    delta: float
    observed_tau: float
    analytic_floor: float
    samples: int
    violations: int


def separation_report(N: float, m: int, delta: float, samples: int = 1000,
                      seed: int = 0, batch: int = 4096) -> SeparationReport:
    """Sample monic polynomials with ``|disc| >= delta`` and compare separations."""
    from .appoly import numeric_discriminant
    rng = np.random.default_rng(seed)
    floor = lemma2_floor(N, m)(delta)
    seps = []
    while len(seps) < samples:
        b = _disk_samples(rng, (batch, m), N)
        roots = roots_batch(b)
        diff = roots[:, :, None] - roots[:, None, :]
        iu = np.triu_indices(m, 1)
        prod = np.prod(diff[:, iu[0], iu[1]] ** 2, axis=1)
        for i in np.flatnonzero(np.abs(prod) >= delta):
            # cross-check the root-product discriminant with the resultant one
            coeffs = np.concatenate([b[i], [1.0]])
            if abs(numeric_discriminant(coeffs)) < delta:
                continue
            seps.append(min_separation(roots[i]))
            if len(seps) == samples:
                break
    seps = np.array(seps)
    return SeparationReport(N, delta, float(seps.min()), floor, samples,
                            int(np.sum(seps < floor)))


# -- continuation ----------------------------------------------------------------

@dataclass
class BranchOptions:
    max_step: float = 0.5
    min_step: float = 1e-9
    initial_step: Optional[float] = None
    residual_tol: float = 1e-8
    root_tol: float = ROOT_TOL
    guard_r: float = 0.05
    check_guard: bool = True
    grow_after: int = 3
    ratio: float = 1.0 / 3.0


class Tracker:
    """Fast pointwise evaluation and single-root stepping for one APPoly."""

    def __init__(self, P: APPoly, opts: BranchOptions = None):
        self.P = P
        self.m = P.degree
        self.opts = opts or BranchOptions()
        self._terms = [(c.freqs.tolist(), c.amps.tolist()) for c in P.coeffs]

    def coeffs_at(self, z: complex):
        out = []
        for lam, amp in self._terms:
            acc = 0j
            for l, a in zip(lam, amp):
                acc += a * cmath.exp(1j * l * z)
            out.append(acc)
        return out

    def solve(self, z: complex, init=None) -> list:
        return list(roots_at(self.coeffs_at(z), self.opts.root_tol, init=init).roots)

    def residual(self, z: complex, w: complex) -> float:
        c = self.coeffs_at(z)
        val = 0j
        scale = 0.0
        aw = abs(w)
        for x in reversed(c):
            val = val * w + x
            scale = scale * aw + abs(x)
        return abs(val) / max(scale, 1e-300)

    def try_step(self, roots0, k0, z1):
        """Return ``(roots1, k1, move, gap)`` or ``None`` when the step is rejected."""
        roots1 = self.solve(z1, init=roots0)
        if self.m == 1:
            return roots1, 0, abs(roots1[0] - roots0[0]), math.inf
        sigma, _ = _match_small(roots0, roots1) if self.m <= 3 else match_roots(roots0, roots1)
        k1 = sigma[k0]
        move = abs(roots1[k1] - roots0[k0])
        gap = min(_gap_of(roots0, k0), _gap_of(roots1, k1))
        if move < self.opts.ratio * gap:
            return roots1, k1, move, gap
        return None

    def follow(self, z0: complex, roots0, k0: int, z1: complex, h: float = None,
               record: Callable = None):
        """Track root ``k0`` along the segment ``z0 -> z1``.

        Returns ``(roots, k, h, rejected)`` at ``z1``.  ``record`` is called
        as ``record(z, w, step, gap)`` for each accepted point.
        """
        o = self.opts
        length = abs(z1 - z0)
        if length == 0:
            return roots0, k0, h or o.max_step, 0
        direction = (z1 - z0) / length
        h = min(h or o.initial_step or o.max_step / 4, o.max_step)
        s = 0.0
        roots, k = roots0, k0
        rejected = 0
        streak = 0
        while s < length:
            step = min(h, length - s)
            last = step >= length - s
            zt = z1 if last else z0 + direction * (s + step)
            got = self.try_step(roots, k, zt)
            if got is None:
                rejected += 1
                streak = 0
                h = step / 2
                if h < o.min_step:
                    raise ContinuationError(
                        f"step underflow near z={complex(zt)!r}: roots too close to separate")
                continue
            roots, k, _, gap = got
            s = length if last else s + step
            if record is not None:
                record(zt, roots[k], step, gap)
            streak += 1
            if streak >= o.grow_after:
                h = min(2 * h, o.max_step)
                streak = 0
        return roots, k, h, rejected

    def seed(self, z: complex, w0: complex):
        """Roots at ``z`` and the index of the one closest to ``w0``."""
        roots = self.solve(z)
        k = int(np.argmin([abs(x - w0) for x in roots]))
        return roots, k


@dataclass
class RootBranch:
    z: np.ndarray
    w: np.ndarray
    step: np.ndarray
    local_gap: np.ndarray
    path: tuple
    min_gap_seen: float
    steps_rejected: int
    options: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.z)

    @property
    def samples(self):
        return list(zip(self.z.tolist(), self.w.tolist()))

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["re_z", "im_z", "re_w", "im_w", "step", "local_gap"])
        for z, w, s, g in zip(self.z, self.w, self.step, self.local_gap):
            wr.writerow([repr(float(z.real)), repr(float(z.imag)), repr(float(w.real)),
                         repr(float(w.imag)), repr(float(s)), repr(float(g))])
        return buf.getvalue()

    def metadata(self) -> dict:
        return {
            "path": [[float(p.real), float(p.imag)] for p in self.path],
            "samples": len(self),
            "min_gap_seen": self.min_gap_seen if math.isfinite(self.min_gap_seen) else None,
            "steps_rejected": self.steps_rejected,
            "options": self.options,
        }

    @classmethod
    def from_csv(cls, text: str, meta: dict = None) -> "RootBranch":
        rows = list(csv.DictReader(io.StringIO(text)))
        z = np.array([complex(float(r["re_z"]), float(r["im_z"])) for r in rows])
        w = np.array([complex(float(r["re_w"]), float(r["im_w"])) for r in rows])
        step = np.array([float(r["step"]) for r in rows])
        gap = np.array([float(r["local_gap"]) for r in rows])
        meta = meta or {}
        path = tuple(complex(a, b) for a, b in meta.get("path", [])) or (z[0], z[-1])
        mg = meta.get("min_gap_seen", float(np.min(gap)))
        return cls(z, w, step, gap, path, math.inf if mg is None else mg,
                   meta.get("steps_rejected", 0), meta.get("options", {}))


def _segment_distance(p: complex, a: complex, b: complex) -> float:
    ab = b - a
    L2 = abs(ab) ** 2
    if L2 == 0:
        return abs(p - a)
    t = ((p - a) * ab.conjugate()).real / L2
    t = min(1.0, max(0.0, t))
    return abs(p - (a + t * ab))


def guard_zeros(P: APPoly, region, tol: float = 1e-10) -> list:
    """Zeros of ``a_m`` and ``Res(P, P')`` inside ``region`` (a Rect)."""
    from .stripgeo import locate_zeros
    funcs = []
    if not P.lead.is_constant:
        funcs.append(P.lead)
    if P.degree >= 2:
        funcs.append(discriminant_resultant(P))
    out = []
    for f in funcs:
        if f.is_constant:
            continue
        out.extend(locate_zeros(f, region, tol))
    return out


def check_path_guard(P: APPoly, path: Sequence[complex], r: float) -> list:
    """Raise :class:`AmbiguousBranchError` if the path comes within ``r`` of a guard zero."""
    from .stripgeo import Rect
    xs = [p.real for p in path]
    ys = [p.imag for p in path]
    pad = 1.37 * r + 1e-3
    region = Rect(min(xs) - pad, max(xs) + pad, min(ys) - pad, max(ys) + pad)
    zeros = guard_zeros(P, region)
    for z0 in zeros:
        for a, b in zip(path[:-1], path[1:]):
            if _segment_distance(z0, a, b) < r:
                raise AmbiguousBranchError(
                    f"path passes within {r:g} of a zero of a_m or the discriminant at z={z0!r}",
                    z=z0)
    return zeros


def continue_branch(P: APPoly, path: Sequence[complex], w0: complex,
                    opts: BranchOptions = None) -> RootBranch:
    """Continue the root ``w0`` of ``P(path[0], .)`` along a polyline.

    Every accepted step moves the tracked root by less than a third of its
    distance to the other roots at both ends of the step.
    """
    opts = opts or BranchOptions()
    path = tuple(complex(p) for p in path)
    if len(path) < 2:
        raise InvalidInputError("path needs at least two vertices")
    if P.degree < 1:
        raise InvalidInputError("continuation needs degree >= 1")
    tr = Tracker(P, opts)
    if tr.residual(path[0], complex(w0)) > opts.residual_tol:
        raise PreconditionError(f"w0={w0!r} is not a root of P at z={path[0]!r}")
    guard_mode = "off"
    if opts.check_guard:
        try:
            check_path_guard(P, path, opts.guard_r)
            guard_mode = "located"
        except ResourceError:
            guard_mode = "pointwise"
    roots, k = tr.seed(path[0], complex(w0))
    zs = [path[0]]
    ws = [roots[k]]
    steps = [0.0]
    gaps = [_gap_of(roots, k) if tr.m > 1 else math.inf]

    def record(z, w, step, gap):
        zs.append(z)
        ws.append(w)
        steps.append(step)
        gaps.append(gap)

    h = None
    rejected = 0
    for a, b in zip(path[:-1], path[1:]):
        roots, k, h, rej = tr.follow(a, roots, k, b, h, record)
        rejected += rej
    meta = asdict(opts)
    meta["guard_mode"] = guard_mode
    gaps_arr = np.array(gaps, dtype=float)
    return RootBranch(np.array(zs), np.array(ws), np.array(steps), gaps_arr, path,
                      float(np.min(gaps_arr)), rejected, meta)


def branch_value(branch: RootBranch, P: APPoly, z: complex, opts: BranchOptions = None) -> complex:
    """Value of the branch at ``z`` by continuing from the nearest sample."""
    tr = Tracker(P, opts or BranchOptions(**{k: v for k, v in branch.options.items()
                                             if k in BranchOptions.__dataclass_fields__}))
    i = int(np.argmin(np.abs(branch.z - z)))
    roots, k = tr.seed(complex(branch.z[i]), complex(branch.w[i]))
    roots, k, _, _ = tr.follow(complex(branch.z[i]), roots, k, complex(z))
    return roots[k]


def branch_to_json(branch: RootBranch) -> str:
    return json.dumps(branch.metadata(), sort_keys=True, indent=2)
