"""Bump functions, grid functions, dyadic averages and frequency projections.

Grid convention: a GridFunction of resolution n holds one sample per cell of
the uniform partition of [0, 1] into N = 2^n cells, taken at the midpoint
(i + 1/2)/N. Integrals are Riemann sums. Frequency operations treat the grid
as periodic with integer frequencies.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate

from .errors import DomainError, PreconditionError


def _psi(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    pos = s > 0
    out[pos] = np.exp(-1.0 / s[pos])
    return out


def _tau_raw(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = (x > 0.5) & (x < 2.0)
    xi = x[inside]
    out[inside] = np.exp(-1.0 / ((xi - 0.5) * (2.0 - xi)))
    return out


def _smoothstep_down(u):
    """1 on (-inf, 1], 0 on [2, inf), smooth and decreasing in between."""
    a, b = _psi(2.0 - u), _psi(u - 1.0)
    with np.errstate(invalid="ignore"):
        out = np.where(u <= 1.0, 1.0, np.where(u >= 2.0, 0.0, a / np.where(a + b > 0, a + b, 1.0)))
    return out


@lru_cache(maxsize=None)
def tau_constant() -> float:
    val, _ = integrate.quad(lambda x: float(_tau_raw(x)), 0.5, 2.0, epsabs=0.0, epsrel=1e-12, limit=200)
    return 1.0 / val


# The raw plateau bump integrates to exactly 3: on [1, 2] the smoothstep
# satisfies S(1 + s) + S(2 - s) = 1, so it contributes 1/2 on each side.
VARTHETA_MASS = 3.0


def tau(x):
    """Nonnegative smooth bump on (1/2, 2) with unit integral."""
    return tau_constant() * _tau_raw(x)


def vartheta(x):
    """Even smooth bump, constant 1/3 on [-1, 1], zero outside (-2, 2), unit integral."""
    return _smoothstep_down(np.abs(np.asarray(x, dtype=float))) / VARTHETA_MASS


@dataclass(frozen=True)
class Bump:
    """Dilate b_l(x) = 2^l b(2^l x) of tau or vartheta."""

    kind: str
    level: int = 0

    def __post_init__(self):
        if self.kind not in ("tau", "vartheta"):
            raise PreconditionError(f"unknown bump kind {self.kind!r}")
        object.__setattr__(self, "level", int(self.level))

    @property
    def support(self) -> tuple:
        lo, hi = (0.5, 2.0) if self.kind == "tau" else (-2.0, 2.0)
        return (math.ldexp(lo, -self.level), math.ldexp(hi, -self.level))

    def __call__(self, x):
        base = tau if self.kind == "tau" else vartheta
        x = np.asarray(x, dtype=float)
        r = math.ldexp(1.0, self.level) * base(np.ldexp(x, self.level))
        return float(r) if r.ndim == 0 else r

    def kernel(self, n: int) -> np.ndarray:
        """Periodized samples at integer offsets o/N, o = 0..N-1, summing to 1."""
        if self.level > n:
            raise DomainError(f"bump at level {self.level} needs resolution n >= {self.level}, got {n}")
        N = 1 << n
        o = np.arange(N, dtype=float)
        k = np.zeros(N)
        lo, hi = self.support
        for wrap in range(int(math.floor(lo)) - 1, int(math.ceil(hi)) + 1):
            k += self((o + wrap * N) / N)
        s = k.sum()
        if s <= 0:
            raise DomainError(f"bump at level {self.level} has no samples at resolution {n}")
        return k / s


@dataclass(frozen=True, eq=False)
class GridFunction:
    n: int
    values: np.ndarray
    periodic: bool = True

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.dtype.kind not in "fc":
            v = v.astype(float)
        if v.shape != (1 << self.n,):
            raise PreconditionError(f"expected {1 << self.n} values for n={self.n}, got shape {v.shape}")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def N(self) -> int:
        return 1 << self.n

    @property
    def x(self) -> np.ndarray:
        return (np.arange(self.N) + 0.5) / self.N

    @classmethod
    def from_function(cls, fn, n: int, periodic: bool = True) -> "GridFunction":
        N = 1 << n
        return cls(n, fn((np.arange(N) + 0.5) / N), periodic)

    @classmethod
    def indicator(cls, intervals, n: int, periodic: bool = True) -> "GridFunction":
        x = (np.arange(1 << n) + 0.5) / (1 << n)
        v = np.zeros(1 << n)
        for a, b in intervals:
            v[(x >= a) & (x <= b)] = 1.0
        return cls(n, v, periodic)

    def integral(self):
        return np.sum(self.values) / self.N

    def norm(self, p=2) -> float:
        a = np.abs(self.values)
        if p == np.inf:
            return float(a.max())
        return float((np.sum(a ** p) / self.N) ** (1.0 / p))

    def inner(self, other: "GridFunction"):
        return np.sum(self.values * np.conj(other.values)) / self.N

    def resample(self, n: int) -> "GridFunction":
        if n == self.n:
            return self
        if n > self.n:
            return GridFunction(n, np.repeat(self.values, 1 << (n - self.n)), self.periodic)
        return GridFunction(n, self.values.reshape(1 << n, -1).mean(axis=1), self.periodic)

    def shifted(self, s: int) -> np.ndarray:
        """Values of x -> f(x + s/N) on the grid; zero outside [0,1] unless periodic."""
        if self.periodic:
            return np.roll(self.values, -s)
        out = np.zeros_like(self.values)
        N = self.N
        if abs(s) >= N:
            return out
        if s >= 0:
            out[: N - s] = self.values[s:]
        else:
            out[-s:] = self.values[: N + s]
        return out

    def _new(self, v) -> "GridFunction":
        return GridFunction(self.n, v, self.periodic)

    def __add__(self, o):
        return self._new(self.values + (o.values if isinstance(o, GridFunction) else o))

    def __sub__(self, o):
        return self._new(self.values - (o.values if isinstance(o, GridFunction) else o))

    def __mul__(self, o):
        return self._new(self.values * (o.values if isinstance(o, GridFunction) else o))

    __rmul__ = __mul__


def martingale_average(f: GridFunction, k: int) -> GridFunction:
    """E_k f: average over dyadic intervals of length 2^-k."""
    if not 0 <= k <= f.n:
        raise DomainError(f"k={k} outside [0, {f.n}]")
    blocks = f.values.reshape(1 << k, -1)
    return f._new(np.repeat(blocks.mean(axis=1), blocks.shape[1]))


def mollify_convolve(f: GridFunction, b: Bump) -> GridFunction:
    """Periodic convolution of f with the discrete, mass-one kernel of b."""
    ker = b.kernel(f.n)
    out = np.fft.ifft(np.fft.fft(f.values) * np.fft.fft(ker))
    if np.isrealobj(f.values):
        out = out.real
    return f._new(out)


def lp_project(f: GridFunction, m: int) -> GridFunction:
    """Keep integer frequencies with |xi| in [2^m, 2^(m+1))."""
    if m < 0 or m > f.n - 2:
        raise DomainError(f"band m={m} needs 2^(m+1) <= 2^(n-1); n={f.n} allows m <= {f.n - 2}")
    freq = np.fft.fftfreq(f.N, 1.0 / f.N)
    mask = (np.abs(freq) >= 2 ** m) & (np.abs(freq) < 2 ** (m + 1))
    out = np.fft.ifft(np.fft.fft(f.values) * mask)
    if np.isrealobj(f.values):
        out = out.real
    return f._new(out)


def residual_parts(f: GridFunction) -> GridFunction:
    """The mean and Nyquist components left out by every band projection."""
    freq = np.fft.fftfreq(f.N, 1.0 / f.N)
    mask = (freq == 0) | (np.abs(freq) == f.N // 2)
    out = np.fft.ifft(np.fft.fft(f.values) * mask)
    return f._new(out.real if np.isrealobj(f.values) else out)


@lru_cache(maxsize=None)
def domination_constant(n: int) -> float:
    """Smallest C with E_k f <= C (f * vartheta_k) for all f >= 0 and k <= n - 2.

    On a dyadic cell I of length 2^-k every point is within 2^-k of x, so
    f * vartheta_k(x) >= (min plateau weight) * sum_I f. The continuous
    value is 3.
    """
    N = 1 << n
    worst = 0.0
    for k in range(0, n - 1):
        ker = Bump("vartheta", k).kernel(n)
        w = N >> k
        near = np.concatenate([ker[:w], ker[N - w + 1:]])
        worst = max(worst, (1.0 / w) / near.min())
    return worst


def c0_constant(n: int) -> float:
    return domination_constant(n) ** -2


def bourgain_lower_bound(f: GridFunction, k: int, ell: int, mode: str = "dyadic"):
    """(lhs, rhs) of the cubic lower bound for a nonnegative f."""
    if np.iscomplexobj(f.values) or np.any(f.values < 0):
        raise PreconditionError("f must be real and nonnegative")
    if k > ell:
        raise PreconditionError("need k <= ell")
    mass = math.fsum(f.values) / f.N
    if mode == "dyadic":
        prod = f.values * martingale_average(f, k).values * martingale_average(f, ell).values
        return math.fsum(prod) / f.N, mass ** 3
    if mode == "smooth":
        a = mollify_convolve(f, Bump("vartheta", k)).values
        b = mollify_convolve(f, Bump("vartheta", ell)).values
        return math.fsum(f.values * a * b) / f.N, c0_constant(f.n) * mass ** 3
    raise PreconditionError(f"unknown mode {mode!r}")


@lru_cache(maxsize=None)
def almost_orthogonality_constant(n: int) -> float:
    """A C0 with sum_k ||f*v_{l_k} - f*v_{l_(k+1)}||^2 <= C0 ||f||^2 for every chain in [0, n-2].

    Bounds the sum of squared multiplier differences by the squared total
    variation of the multipliers along the full chain 0..n-2.
    """
    mult = [np.fft.fft(Bump("vartheta", l).kernel(n)) for l in range(0, n - 1)]
    tv = np.zeros(1 << n)
    for a, b in zip(mult, mult[1:]):
        tv += np.abs(a - b)
    return float(tv.max() ** 2)


def orthogonality_sum(f: GridFunction, levels) -> float:
    conv = [mollify_convolve(f, Bump("vartheta", l)) for l in levels]
    return sum((a - b).norm(2) ** 2 for a, b in zip(conv, conv[1:]))
