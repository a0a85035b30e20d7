"""Real polynomials: evaluation, dyadic rescaling and monotone inversion.

Coefficients are stored in ascending order, ``coeffs[r]`` multiplying ``t**r``.
Rescalings by powers of two go through ``math.ldexp`` so they are exact.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, PreconditionError

TINY_COEFF = 2.0 ** -900


def _falling(n: int, k: int) -> int:
    out = 1
    for i in range(k):
        out *= n - i
    return out


def _horner(coeffs: Sequence[float], t):
    arr = np.asarray(t, dtype=float)
    acc = np.zeros_like(arr)
    for c in reversed(coeffs):
        acc = acc * arr + c
    if acc.ndim == 0:
        return float(acc)
    return acc


@dataclass(frozen=True)
class RealPoly:
    """Polynomial with arbitrary real coefficients (constant term allowed)."""

    coeffs: tuple

    def __post_init__(self):
        c = tuple(float(x) for x in self.coeffs)
        if not c:
            c = (0.0,)
        if not all(math.isfinite(x) for x in c):
            raise PreconditionError("polynomial coefficients must be finite")
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        for r in range(len(self.coeffs) - 1, -1, -1):
            if self.coeffs[r] != 0.0:
                return r
        return 0

    def derivative_coeffs(self, k: int = 1) -> tuple:
        c = self.coeffs
        return tuple(c[i + k] * _falling(i + k, k) for i in range(len(c) - k))

    def derivative(self, k: int = 1) -> "RealPoly":
        return RealPoly(self.derivative_coeffs(k) or (0.0,))

    def __call__(self, t, order: int = 0):
        return evaluate(self, t, order)

    def __sub__(self, other: "RealPoly") -> "RealPoly":
        n = max(len(self.coeffs), len(other.coeffs))
        a = self.coeffs + (0.0,) * (n - len(self.coeffs))
        b = other.coeffs + (0.0,) * (n - len(other.coeffs))
        return RealPoly(tuple(x - y for x, y in zip(a, b)))


@dataclass(frozen=True)
class Polynomial(RealPoly):
    """Monic polynomial of degree d >= 2 with zero constant term.

    Build with ``Polynomial.from_list([a1, ..., ad])`` or
    ``Polynomial.from_dict({r: a_r})``.
    """

    def __post_init__(self):
        super().__post_init__()
        c = self.coeffs
        while len(c) > 1 and c[-1] == 0.0:
            c = c[:-1]
        object.__setattr__(self, "coeffs", c)
        if c[0] != 0.0:
            raise PreconditionError("constant term must be zero")
        if len(c) - 1 < 2:
            raise PreconditionError(f"degree must be >= 2, got {len(c) - 1}")
        if c[-1] != 1.0:
            raise PreconditionError(f"leading coefficient must be 1, got {c[-1]!r}")
        for r, a in enumerate(c):
            if a != 0.0 and abs(a) < TINY_COEFF:
                warnings.warn(f"|a_{r}| < 2^-900; its dyadic exponent leaves the safe range",
                              RuntimeWarning, stacklevel=3)

    @classmethod
    def from_list(cls, a: Sequence[float]) -> "Polynomial":
        return cls((0.0,) + tuple(a))

    @classmethod
    def from_dict(cls, a: dict) -> "Polynomial":
        d = max(int(r) for r in a)
        c = [0.0] * (d + 1)
        for r, v in a.items():
            c[int(r)] = float(v)
        return cls(tuple(c))

    @property
    def d(self) -> int:
        return len(self.coeffs) - 1

    def a(self, r: int) -> float:
        return self.coeffs[r] if 0 <= r < len(self.coeffs) else 0.0

    @property
    def support(self) -> list:
        """Indices r with a_r != 0."""
        return [r for r in range(1, self.d + 1) if self.coeffs[r] != 0.0]

    @property
    def zero_terms(self) -> list:
        return [r for r in range(1, self.d + 1) if self.coeffs[r] == 0.0]

    @property
    def l1_norm(self) -> float:
        return math.fsum(abs(x) for x in self.coeffs)

    def __str__(self):
        parts = []
        for r in range(self.d, 0, -1):
            a = self.coeffs[r]
            if a == 0.0:
                continue
            mono = "t" if r == 1 else f"t^{r}"
            parts.append(mono if a == 1.0 else f"{a!r}*{mono}")
        return " + ".join(parts)


@dataclass(frozen=True)
class RescaledPolynomial:
    """The polynomial t -> 2^(-d s) P(2^s t)."""

    base: Polynomial
    shift: int

    @property
    def coeffs(self) -> tuple:
        d, s = self.base.d, int(self.shift)
        return tuple(math.ldexp(a, (r - d) * s) for r, a in enumerate(self.base.coeffs))

    @property
    def degree(self) -> int:
        return self.base.d

    def as_poly(self) -> RealPoly:
        return RealPoly(self.coeffs)

    def derivative_coeffs(self, k: int = 1) -> tuple:
        return self.as_poly().derivative_coeffs(k)

    def __call__(self, t, order: int = 0):
        return evaluate(self, t, order)


def evaluate(p, t, order: int = 0):
    """Value of the ``order``-th derivative of ``p`` at ``t`` (scalar or array)."""
    if order < 0:
        raise PreconditionError("derivative order must be >= 0")
    if order > len(p.coeffs) - 1:
        z = np.zeros_like(np.asarray(t, dtype=float))
        return float(z) if z.ndim == 0 else z
    coeffs = p.coeffs if order == 0 else p.derivative_coeffs(order)
    return _horner(coeffs, t)


def normalize_Q(p: Polynomial, j: int, ell: int, m0: int) -> RealPoly:
    """Coefficients of Q(t) = 2^(-m0+ell-j) P(2^(j-ell) t).

    The r-th coefficient is a_r * 2^(-m0 + (r-1)(j-ell)), applied with ldexp.
    """
    out = [0.0]
    for r in range(1, p.d + 1):
        a = p.coeffs[r]
        e = -m0 + (r - 1) * (j - ell)
        if a == 0.0:
            out.append(0.0)
            continue
        try:
            v = math.ldexp(a, e)
        except OverflowError:
            raise OverflowError(f"coefficient {r}: scaling by 2^{e} overflows") from None
        if v == 0.0 or abs(v) < 2.0 ** -1022:
            raise OverflowError(f"coefficient {r}: scaling by 2^{e} underflows")
        out.append(v)
    return RealPoly(tuple(out))


def invert_monotone(q, y: float, bracket, tol: float = 1e-12, scan: int = 64) -> float:
    """Solve q(t) = y on a bracket where q is monotone.

    Bisection narrows the bracket first; safeguarded Newton then finishes.
    After 60 Newton steps we fall back to plain bisection.
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if not lo < hi:
        raise PreconditionError(f"empty bracket [{lo}, {hi}]")
    slopes = evaluate(q, np.linspace(lo, hi, scan), 1)
    if np.any(slopes > 0) and np.any(slopes < 0):
        raise PreconditionError("q' changes sign on the bracket")
    flo, fhi = evaluate(q, lo) - y, evaluate(q, hi) - y
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise DomainError(f"y={y!r} lies outside q([{lo}, {hi}]) = "
                          f"[{min(flo, fhi) + y!r}, {max(flo, fhi) + y!r}]")
    target = tol * max(1.0, abs(y))
    increasing = fhi > 0

    def shrink(t, f):
        nonlocal lo, hi
        if (f > 0) == increasing:
            hi = t
        else:
            lo = t

    for _ in range(8):
        mid = 0.5 * (lo + hi)
        shrink(mid, evaluate(q, mid) - y)
    t = 0.5 * (lo + hi)
    for _ in range(60):
        f = evaluate(q, t) - y
        if abs(f) <= target:
            return t
        shrink(t, f)
        df = evaluate(q, t, 1)
        nt = t - f / df if df != 0.0 else math.nan
        t = nt if lo < nt < hi else 0.5 * (lo + hi)
    best, best_f = t, abs(evaluate(q, t) - y)
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        f = evaluate(q, mid) - y
        if abs(f) < best_f:
            best, best_f = mid, abs(f)
        if abs(f) <= target:
            return mid
        shrink(mid, f)
    return best
