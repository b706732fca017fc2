"""Finite exponential sums ``sum_n a_n exp(i lambda_n z)`` and strips.

An :class:`ExpSum` is the concrete stand-in for an analytic almost periodic
function on a horizontal strip.  Values are immutable and always held in
canonical form: frequencies strictly increasing, frequencies closer than
``FREQ_TOL`` merged, amplitudes of modulus ``<= AMP_TOL`` dropped.  The empty
sum is the zero function.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidInputError

FREQ_TOL = 1e-9
AMP_TOL = 1e-14


def _canonical_terms(raw, freq_tol=FREQ_TOL, amp_tol=AMP_TOL):
    items = []
    for t in raw:
        lam, amp = t
        lam = float(lam)
        amp = complex(amp)
        if not (math.isfinite(lam) and math.isfinite(amp.real) and math.isfinite(amp.imag)):
            raise InvalidInputError(f"non-finite term ({lam!r}, {amp!r})")
        items.append((lam, amp))
    # stable sort keeps the merge order deterministic for equal frequencies
    items.sort(key=lambda t: t[0])
    out = []
    i = 0
    while i < len(items):
        lam0, acc = items[i]
        j = i + 1
        while j < len(items) and items[j][0] - lam0 <= freq_tol:
            acc += items[j][1]
            j += 1
        if abs(acc) > amp_tol:
            out.append((lam0, acc))
        i = j
    return tuple(out)


class ExpSum:
    """Canonical finite exponential sum.

    Parameters
    ----------
    terms : iterable of (frequency, amplitude)
        Raw terms; they are canonicalized on construction.
    """

    __slots__ = ("terms", "freqs", "amps")

    def __init__(self, terms: Iterable = (), *, freq_tol: float = FREQ_TOL,
                 amp_tol: float = AMP_TOL):
        terms = _canonical_terms(terms, freq_tol, amp_tol)
        object.__setattr__(self, "terms", terms)
        lam = np.array([t[0] for t in terms], dtype=float)
        amp = np.array([t[1] for t in terms], dtype=complex)
        lam.flags.writeable = False
        amp.flags.writeable = False
        object.__setattr__(self, "freqs", lam)
        object.__setattr__(self, "amps", amp)

    def __setattr__(self, name, value):
        raise AttributeError("ExpSum is immutable")

    # -- constructors -----------------------------------------------------
    @classmethod
    def zero(cls) -> "ExpSum":
        return cls(())

    @classmethod
    def constant(cls, c) -> "ExpSum":
        return cls([(0.0, c)])

    @classmethod
    def exp(cls, lam: float, amp=1.0) -> "ExpSum":
        """``amp * exp(i lam z)``."""
        return cls([(lam, amp)])

    # -- basic protocol ---------------------------------------------------
    def __len__(self):
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms)

    def __eq__(self, other):
        if not isinstance(other, ExpSum):
            return NotImplemented
        return self.terms == other.terms

    def __hash__(self):
        return hash(self.terms)

    def __repr__(self):
        if not self.terms:
            return "ExpSum(0)"
        parts = [f"({a.real:.6g}{a.imag:+.6g}j)e^(i{lam:.6g}z)" for lam, a in self.terms]
        return "ExpSum(" + " + ".join(parts) + ")"

    def __bool__(self):
        return bool(self.terms)

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def is_constant(self) -> bool:
        return all(lam == 0.0 for lam, _ in self.terms)

    @property
    def max_freq(self) -> float:
        return self.terms[-1][0]

    @property
    def min_freq(self) -> float:
        return self.terms[0][0]

    @property
    def lead(self):
        """Highest-frequency term ``(lambda, amplitude)``."""
        return self.terms[-1]

    def scale(self) -> float:
        """Largest amplitude modulus (0 for the zero function)."""
        return float(np.max(np.abs(self.amps))) if self.terms else 0.0

    # -- evaluation -------------------------------------------------------
    def __call__(self, z):
        z_arr = np.asarray(z, dtype=complex)
        if not self.terms:
            return np.zeros_like(z_arr) if z_arr.ndim else 0j
        flat = z_arr.reshape(-1)
        vals = np.exp(1j * np.multiply.outer(flat, self.freqs)) @ self.amps
        if z_arr.ndim == 0:
            return complex(vals[0])
        return vals.reshape(z_arr.shape)

    def modulus_weights(self, y_lo: float, y_hi: float) -> np.ndarray:
        """Per-term ``max |exp(i lambda z)|`` over ``y_lo <= Im z <= y_hi``."""
        lam = self.freqs
        y = np.where(lam > 0, y_lo, y_hi)
        with np.errstate(invalid="ignore"):
            w = np.exp(-lam * y)
        w[lam == 0] = 1.0
        return w

    def sup_bound(self, y_lo: float, y_hi: float) -> float:
        """Triangle-inequality upper bound of ``sup |f|`` on a closed strip."""
        if not self.terms:
            return 0.0
        return float(np.sum(np.abs(self.amps) * self.modulus_weights(y_lo, y_hi)))

    # -- ring operations --------------------------------------------------
    def __add__(self, other):
        other = _coerce(other)
        if other is None:
            return NotImplemented
        return ExpSum(self.terms + other.terms)

    __radd__ = __add__

    def __neg__(self):
        return ExpSum([(lam, -a) for lam, a in self.terms])

    def __sub__(self, other):
        other = _coerce(other)
        if other is None:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        other = _coerce(other)
        if other is None:
            return NotImplemented
        return other + (-self)

    def __mul__(self, other):
        if isinstance(other, ExpSum):
            return multiply(self, other)
        if isinstance(other, (int, float, complex, np.number)):
            return ExpSum([(lam, a * other) for lam, a in self.terms])
        return NotImplemented

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            return NotImplemented
        out = ExpSum.constant(1.0)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def shift_freq(self, mu: float) -> "ExpSum":
        """Multiply by ``exp(i mu z)``."""
        return ExpSum([(lam + mu, a) for lam, a in self.terms])

    def translate(self, h: float) -> "ExpSum":
        return translate(self, h)

    def derivative(self) -> "ExpSum":
        return differentiate(self)

    def isclose(self, other: "ExpSum", rtol: float = 1e-12, atol: float = 1e-14) -> bool:
        """Term-by-term comparison of two canonical sums up to rounding."""
        a = chop(self, atol)
        b = chop(other, atol)
        if len(a) != len(b):
            return False
        scale = max(a.scale(), b.scale(), 1.0)
        for (l1, a1), (l2, a2) in zip(a.terms, b.terms):
            if abs(l1 - l2) > FREQ_TOL:
                return False
            if abs(a1 - a2) > atol + rtol * scale:
                return False
        return True

    # -- serialization ----------------------------------------------------
    def to_json_obj(self) -> list:
        return [{"lambda": lam, "re": a.real, "im": a.imag} for lam, a in self.terms]

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj())

    @classmethod
    def from_json_obj(cls, obj) -> "ExpSum":
        if not isinstance(obj, list):
            raise InvalidInputError("ExpSum JSON must be an array")
        terms = []
        for item in obj:
            try:
                terms.append((float(item["lambda"]), complex(float(item["re"]), float(item["im"]))))
            except (KeyError, TypeError, ValueError) as exc:
                raise InvalidInputError(f"bad ExpSum term {item!r}") from exc
        return cls(terms)

    @classmethod
    def from_json(cls, text: str) -> "ExpSum":
        return cls.from_json_obj(json.loads(text))


def _coerce(x):
    if isinstance(x, ExpSum):
        return x
    if isinstance(x, (int, float, complex, np.number)):
        return ExpSum.constant(x)
    return None


@dataclass(frozen=True)
class Strip:
    """Horizontal strip ``{lower < Im z < upper}``; bounds may be infinite."""

    lower: float
    upper: float

    def __post_init__(self):
        if math.isnan(self.lower) or math.isnan(self.upper) or not self.lower < self.upper:
            raise InvalidInputError(f"strip needs lower < upper, got ({self.lower}, {self.upper})")

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.lower) and math.isfinite(self.upper)

    @property
    def height(self) -> float:
        return self.upper - self.lower

    def contains(self, z) -> bool:
        return self.lower < complex(z).imag < self.upper

    def is_compactly_inside(self, other: "Strip") -> bool:
        """``self ⊂⊂ other``."""
        return other.lower < self.lower and self.upper < other.upper

    def middle(self, fraction: float = 0.5) -> "Strip":
        """Centered substrip holding ``fraction`` of the height."""
        if not self.bounded:
            raise InvalidInputError("middle() needs a bounded strip")
        c = 0.5 * (self.lower + self.upper)
        half = 0.5 * fraction * self.height
        return Strip(c - half, c + half)


# -- module-level operations --------------------------------------------------

def canonicalize(raw: Iterable, freq_tol: float = FREQ_TOL, amp_tol: float = AMP_TOL) -> ExpSum:
    return ExpSum(raw, freq_tol=freq_tol, amp_tol=amp_tol)


def evaluate(f: ExpSum, z):
    return f(z)


def linear_combine(alpha, f: ExpSum, beta, g: ExpSum) -> ExpSum:
    terms = [(lam, alpha * a) for lam, a in f.terms]
    terms += [(lam, beta * a) for lam, a in g.terms]
    return ExpSum(terms)


def multiply(f: ExpSum, g: ExpSum) -> ExpSum:
    if not f.terms or not g.terms:
        return ExpSum.zero()
    lam = np.add.outer(f.freqs, g.freqs).ravel()
    amp = np.multiply.outer(f.amps, g.amps).ravel()
    return ExpSum(zip(lam.tolist(), amp.tolist()))


def translate(f: ExpSum, h: float) -> ExpSum:
    """``z -> f(z + h)`` for real ``h``."""
    h = float(h)
    return ExpSum([(lam, a * np.exp(1j * lam * h)) for lam, a in f.terms])


def differentiate(f: ExpSum) -> ExpSum:
    return ExpSum([(lam, 1j * lam * a) for lam, a in f.terms])


def is_zero_fn(f: ExpSum) -> bool:
    return not f.terms


def chop(f: ExpSum, threshold: float) -> ExpSum:
    """Drop terms whose amplitude modulus is ``<= threshold``."""
    return ExpSum([t for t in f.terms if abs(t[1]) > threshold])


def _dyadic_count(length: float, density: float) -> int:
    if length <= 0:
        return 1
    need = max(1, math.ceil(length * density))
    k = max(0, math.ceil(math.log2(need)))
    return 2 ** k + 1


def region_grid(re_range: Sequence[float], im_range: Sequence[float], density: float) -> np.ndarray:
    """Closed rectangular grid with dyadic point counts.

    Dyadic counts make grids for increasing densities nested, so grid
    maxima are monotone in density.
    """
    if density <= 0:
        raise InvalidInputError("grid density must be positive")
    x0, x1 = map(float, re_range)
    y0, y1 = map(float, im_range)
    xs = np.linspace(x0, x1, _dyadic_count(x1 - x0, density))
    ys = np.linspace(y0, y1, _dyadic_count(y1 - y0, density))
    return xs[None, :] + 1j * ys[:, None]


def sup_modulus_grid(f: ExpSum, s: Strip, re_range: Sequence[float], grid: float) -> float:
    """Grid maximum of ``|f|`` over ``re_range x [s.lower, s.upper]``."""
    if not s.bounded:
        raise InvalidInputError("sup_modulus_grid needs a bounded strip")
    zz = region_grid(re_range, (s.lower, s.upper), grid)
    if not f.terms:
        return 0.0
    best = 0.0
    # row-wise keeps memory flat on long windows
    for row in zz:
        best = max(best, float(np.max(np.abs(f(row)))))
    return best


def divide_exact(f: ExpSum, g: ExpSum, rel_tol: float = 1e-9) -> ExpSum:
    """Quotient ``q`` with ``f = q * g`` in the exponential-sum ring.

    Long division by highest-frequency terms; the frequency group is
    totally ordered, so the leading term of an exact quotient is forced.
    Raises :class:`ArithmeticError` when ``g`` does not divide ``f`` to
    within ``rel_tol`` relative to the operand scale.
    """
    if g.is_zero:
        raise ZeroDivisionError("division by the zero function")
    if f.is_zero:
        return ExpSum.zero()
    scale = max(f.scale(), 1e-300)
    noise = rel_tol * scale
    lo_bound = f.min_freq - g.min_freq - FREQ_TOL
    g_lam, g_lead = g.lead
    rem = f
    q_terms = []
    for _ in range(4 * (len(f) + 1) * (len(g) + 1) + 16):
        rem = chop(rem, noise)
        if rem.is_zero:
            return ExpSum(q_terms)
        lam, a = rem.lead
        mu = lam - g_lam
        if mu < lo_bound:
            break
        c = a / g_lead
        q_terms.append((mu, c))
        prod = g.shift_freq(mu) * c
        # the leading term cancels by construction; drop it explicitly
        rem = ExpSum(list(rem.terms[:-1]) + [(l, -b) for l, b in prod.terms[:-1]])
    raise ArithmeticError("exponential sum division is not exact")
