"""Polynomials in ``w`` whose coefficients are exponential sums.

Coefficients are stored low-to-high: ``coeffs[j]`` multiplies ``w**j``.
Numeric specializations returned by :func:`evaluate_poly` use the same
order.  Sylvester matrices follow the usual highest-degree-first layout,
which gives ``Res(w^2 + b w + c, 2 w + b) = 4 c - b^2``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (InvalidInputError, NumericalDegeneracyError, ResourceError,
                     SingularLeadingCoefficientError)
from .expsum import ExpSum, chop, divide_exact

MAX_SYMBOLIC_DEGREE = 4
MAX_ENTRY_TERMS = 32
MAX_PRODUCT_TERMS = 4096

# relative thresholds for ring zero tests in the remainder sequence
NEGLIGIBLE_REL = 1e-11
AMBIGUOUS_REL = 1e-7


class APPoly:
    """``a_m(z) w^m + ... + a_1(z) w + a_0(z)`` with ExpSum coefficients."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Sequence):
        cs = tuple(c if isinstance(c, ExpSum) else ExpSum.constant(c) for c in coeffs)
        if not cs:
            raise InvalidInputError("APPoly needs at least one coefficient")
        if cs[-1].is_zero:
            raise InvalidInputError("leading coefficient a_m is identically zero")
        object.__setattr__(self, "coeffs", cs)

    def __setattr__(self, name, value):
        raise AttributeError("APPoly is immutable")

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def lead(self) -> ExpSum:
        return self.coeffs[-1]

    def __eq__(self, other):
        return isinstance(other, APPoly) and self.coeffs == other.coeffs

    def __hash__(self):
        return hash(self.coeffs)

    def __repr__(self):
        return f"APPoly(degree={self.degree}, coeffs={list(self.coeffs)!r})"

    def __call__(self, z, w):
        """Value ``P(z, w)``."""
        acc = 0j
        for c in reversed(self.coeffs):
            acc = acc * w + c(z)
        return acc

    def dw(self) -> "APPoly":
        """Partial derivative in ``w``."""
        if self.degree == 0:
            raise InvalidInputError("derivative of a degree-0 polynomial")
        return APPoly([c * j for j, c in enumerate(self.coeffs) if j > 0])

    def translate(self, h: float) -> "APPoly":
        return APPoly([c.translate(h) for c in self.coeffs])

    def max_terms(self) -> int:
        return max(len(c) for c in self.coeffs)

    def to_json_obj(self) -> dict:
        return {"degree": self.degree, "coeffs": [c.to_json_obj() for c in self.coeffs]}

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj())

    @classmethod
    def from_json_obj(cls, obj) -> "APPoly":
        try:
            deg = int(obj["degree"])
            coeffs = [ExpSum.from_json_obj(c) for c in obj["coeffs"]]
        except (KeyError, TypeError) as exc:
            raise InvalidInputError("APPoly JSON needs 'degree' and 'coeffs'") from exc
        if len(coeffs) != deg + 1:
            raise InvalidInputError(f"degree {deg} but {len(coeffs)} coefficients")
        return cls(coeffs)

    @classmethod
    def from_json(cls, text: str) -> "APPoly":
        return cls.from_json_obj(json.loads(text))


def evaluate_poly(P: APPoly, z) -> np.ndarray:
    return np.array([c(z) for c in P.coeffs], dtype=complex)


# -- numeric resultants ---------------------------------------------------------

def sylvester_matrix(p: Sequence, q: Sequence) -> np.ndarray:
    """Numeric Sylvester matrix of low-to-high coefficient arrays."""
    p = np.asarray(p, dtype=complex)[::-1]
    q = np.asarray(q, dtype=complex)[::-1]
    m, n = len(p) - 1, len(q) - 1
    size = m + n
    if size == 0:
        return np.ones((0, 0), dtype=complex)
    S = np.zeros((size, size), dtype=complex)
    for i in range(n):
        S[i, i:i + m + 1] = p
    for i in range(m):
        S[n + i, i:i + n + 1] = q
    return S


def numeric_resultant(p: Sequence, q: Sequence) -> complex:
    S = sylvester_matrix(p, q)
    if S.shape[0] == 0:
        return 1.0 + 0j
    return complex(np.linalg.det(S))


def _disc_sign(m: int) -> int:
    return -1 if (m * (m - 1) // 2) % 2 else 1


def numeric_discriminant(coeffs: Sequence, lead_floor: float = 0.0) -> complex:
    """Discriminant of a numeric polynomial given low-to-high."""
    c = np.asarray(coeffs, dtype=complex)
    m = len(c) - 1
    if abs(c[-1]) <= lead_floor:
        raise SingularLeadingCoefficientError("leading coefficient vanishes at this point")
    if m < 1:
        raise InvalidInputError("discriminant needs degree >= 1")
    dc = c[1:] * np.arange(1, m + 1)
    return _disc_sign(m) * numeric_resultant(c, dc) / c[-1]


def discriminant_at(P: APPoly, z) -> complex:
    """``D(z) = (-1)^(m(m-1)/2) Res(P, P') / a_m`` at a point."""
    c = evaluate_poly(P, z)
    scale = max(float(np.max(np.abs(c))), 1e-300)
    if abs(c[-1]) <= 1e-14 * scale:
        raise SingularLeadingCoefficientError(f"a_m vanishes at z={complex(z)!r}")
    return numeric_discriminant(c)


# -- symbolic resultants ------------------------------------------------------

def _ring_sylvester(P: APPoly, Q: APPoly):
    p = P.coeffs[::-1]
    q = Q.coeffs[::-1]
    m, n = P.degree, Q.degree
    size = m + n
    zero = ExpSum.zero()
    S = [[zero] * size for _ in range(size)]
    for i in range(n):
        for k, c in enumerate(p):
            S[i][i + k] = c
    for i in range(m):
        for k, c in enumerate(q):
            S[n + i][i + k] = c
    return S


def _ring_det(S) -> ExpSum:
    """Division-free determinant by Laplace expansion with minor memoization."""
    size = len(S)
    if size == 0:
        return ExpSum.constant(1.0)
    memo = {}

    def minor(row: int, used: int) -> ExpSum:
        if row == size:
            return ExpSum.constant(1.0)
        key = used
        if key in memo:
            return memo[key]
        acc = []
        free_before = 0
        for col in range(size):
            if used >> col & 1:
                continue
            entry = S[row][col]
            if not entry.is_zero:
                sub = minor(row + 1, used | (1 << col))
                if not sub.is_zero:
                    if len(entry) * len(sub) > MAX_PRODUCT_TERMS:
                        raise ResourceError("determinant term count exceeds cap; use pointwise mode")
                    prod = entry * sub
                    if free_before % 2:
                        prod = -prod
                    acc.extend(prod.terms)
            free_before += 1
        out = ExpSum(acc)
        if len(out) > MAX_PRODUCT_TERMS:
            raise ResourceError("determinant term count exceeds cap; use pointwise mode")
        memo[key] = out
        return out

    return minor(0, 0)


def resultant(P: APPoly, Q: APPoly) -> ExpSum:
    """Symbolic ``Res_w(P, Q)`` over the exponential-sum ring.

    Raises :class:`ResourceError` beyond the symbolic caps; use
    :func:`resultant_at` pointwise instead.
    """
    if max(P.degree, Q.degree) > MAX_SYMBOLIC_DEGREE:
        raise ResourceError(f"degree above {MAX_SYMBOLIC_DEGREE}; use pointwise mode")
    if max(P.max_terms(), Q.max_terms()) > MAX_ENTRY_TERMS:
        raise ResourceError(f"coefficient with more than {MAX_ENTRY_TERMS} terms; use pointwise mode")
    return _ring_det(_ring_sylvester(P, Q))


def resultant_at(P: APPoly, Q: APPoly, z) -> complex:
    return numeric_resultant(evaluate_poly(P, z), evaluate_poly(Q, z))


def discriminant_resultant(P: APPoly) -> ExpSum:
    """``Res(P, dP/dw)``; its zeros off ``Z(a_m)`` are the zeros of ``D``."""
    return resultant(P, P.dw())


def discriminant(P: APPoly) -> ExpSum:
    """Symbolic discriminant when ``a_m`` divides the resultant exactly."""
    res = discriminant_resultant(P)
    try:
        return divide_exact(res, P.lead) * _disc_sign(P.degree)
    except ArithmeticError as exc:
        raise ResourceError("a_m does not divide Res(P, P') in the ring") from exc


# -- remainder sequences -------------------------------------------------------

def _deg(f: list) -> int:
    for j in range(len(f) - 1, -1, -1):
        if not f[j].is_zero:
            return j
    return -1


def _trim(f: list) -> list:
    return f[:_deg(f) + 1]


def _clean(coeffs: list, scale: float) -> list:
    """Relative zero test for freshly computed coefficients."""
    out = []
    for c in coeffs:
        c = chop(c, NEGLIGIBLE_REL * scale)
        if not c.is_zero and c.scale() <= AMBIGUOUS_REL * scale:
            raise NumericalDegeneracyError(
                f"coefficient with all amplitudes <= {AMBIGUOUS_REL:g} x scale; zero test undecidable")
        out.append(c)
    return _trim(out)


def _scale(*polys) -> float:
    return max([c.scale() for f in polys for c in f] + [1e-300])


def prem(A: list, B: list) -> list:
    """Pseudo-remainder ``lc(B)^(deg A - deg B + 1) A mod B``."""
    dB = _deg(B)
    if dB < 0:
        raise ZeroDivisionError("pseudo-division by zero polynomial")
    lc = B[dB]
    r = _trim(list(A))
    e = _deg(r) - dB + 1
    if e <= 0:
        return r
    while _deg(r) >= dB:
        dr = _deg(r)
        j = dr - dB
        lr = r[dr]
        new = [c * lc for c in r]
        for k in range(dB + 1):
            new[k + j] = new[k + j] - lr * B[k]
        scale = _scale([c * lc for c in r], [lr * b for b in B])
        new[dr] = ExpSum.zero()
        r = _clean(new, scale)
        e -= 1
    if e:
        f = lc ** e
        r = [c * f for c in r]
    return r


def pdiv(A: list, B: list):
    """Pseudo-division: ``lc(B)^e A = Q B + R`` with ``e = deg A - deg B + 1``."""
    dA, dB = _deg(A), _deg(B)
    lc = B[dB]
    e = dA - dB + 1
    q = [ExpSum.zero()] * max(e, 1)
    r = _trim(list(A))
    if e <= 0:
        return [ExpSum.zero()], r, 0
    n = e
    while _deg(r) >= dB:
        dr = _deg(r)
        j = dr - dB
        lr = r[dr]
        q = [c * lc for c in q]
        q[j] = q[j] + lr
        new = [c * lc for c in r]
        for k in range(dB + 1):
            new[k + j] = new[k + j] - lr * B[k]
        scale = _scale([c * lc for c in r], [lr * b for b in B])
        new[dr] = ExpSum.zero()
        r = _clean(new, scale)
        n -= 1
    f = lc ** n
    return [c * f for c in q], [c * f for c in r], e


def _exquo_poly(f: list, d: ExpSum) -> list:
    try:
        return [divide_exact(c, d) for c in f]
    except ArithmeticError as exc:
        raise NumericalDegeneracyError("subresultant division was not exact") from exc


def _exquo(f: ExpSum, d: ExpSum) -> ExpSum:
    try:
        return divide_exact(f, d)
    except ArithmeticError as exc:
        raise NumericalDegeneracyError("subresultant division was not exact") from exc


def subresultant_prs(f: list, g: list):
    """Subresultant remainder sequence of two ring polynomials.

    Returns the sequence and the number of pseudo-remainder steps.
    """
    n, m = _deg(f), _deg(g)
    if n < m:
        f, g = g, f
        n, m = m, n
    R = [f, g]
    d = n - m
    b = -1.0 if (d + 1) % 2 else 1.0
    h = [c * b for c in prem(f, g)]
    steps = 1
    lc = g[m]
    c = lc ** d
    c = -c
    while _deg(h) >= 0:
        k = _deg(h)
        R.append(h)
        f, g, m, d = g, h, k, m - k
        b = -lc * c ** d
        h = prem(f, g)
        steps += 1
        h = _exquo_poly(_trim(h), b)
        lc = g[k]
        if d > 1:
            c = _exquo((-lc) ** d, c ** (d - 1))
        else:
            c = -lc
    return R, steps


@dataclass(frozen=True)
class SquarefreeResult:
    reduced: APPoly
    cleared_factor: ExpSum
    prs_depth: int
    gcd: APPoly = field(default=None)

    @property
    def removed_degree(self) -> int:
        return 0 if self.gcd is None else self.gcd.degree


def _try_make_monic(f: list):
    lc = f[-1]
    try:
        return [divide_exact(c, lc) for c in f], lc
    except ArithmeticError:
        return None, None


def squarefree_reduce(P: APPoly) -> SquarefreeResult:
    """Remove ``gcd(P, dP/dw)`` by a subresultant remainder sequence.

    The result has ExpSum coefficients; where the gcd cannot be divided out
    exactly, denominators are cleared by the power of its leading
    coefficient reported as ``cleared_factor``.
    """
    if P.degree < 1:
        raise InvalidInputError("squarefree_reduce needs degree >= 1")
    one = ExpSum.constant(1.0)
    if P.degree == 1:
        return SquarefreeResult(P, one, 0, None)
    f = list(P.coeffs)
    g = list(P.dw().coeffs)
    seq, steps = subresultant_prs(f, g)
    G = _trim(seq[-1])
    if _deg(G) < 1:
        return SquarefreeResult(P, one, steps, None)
    monic, _ = _try_make_monic(G)
    if monic is not None:
        G = monic
    Q, Rm, e = pdiv(f, G)
    if _deg(Rm) >= 0:
        raise NumericalDegeneracyError("gcd does not divide P; remainder is nonzero")
    cleared = G[-1] ** e if e > 0 else one
    Q = _trim(Q)
    lc = Q[-1]
    try:
        Q2 = [divide_exact(c, lc) for c in Q]
        cleared = divide_exact(cleared, lc)
        Q = Q2
    except ArithmeticError:
        pass
    reduced = APPoly(Q)
    return SquarefreeResult(reduced, cleared, steps, APPoly(G))


def pointwise_function(fn: Callable) -> Callable:
    """Vectorize a scalar function of ``z`` (used for pointwise fallbacks)."""
    def call(z):
        arr = np.asarray(z, dtype=complex)
        if arr.ndim == 0:
            return fn(complex(arr))
        return np.array([fn(complex(x)) for x in arr.ravel()]).reshape(arr.shape)
    return call
