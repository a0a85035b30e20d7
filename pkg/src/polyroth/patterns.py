"""Interval sets and the search for patterns x, x + t, x + P(t) in a set.

The search quantizes only t. For each grid value of t a float pass flags
candidates, and every flagged t is settled with exact rational arithmetic,
so a reported instance is always an exact member triple.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import NotFound, PreconditionError
from .poly import Polynomial, RescaledPolynomial

DELTA_FLOOR = 1e-4


@dataclass(frozen=True)
class IntervalSet:
    """Union of closed intervals inside [0, N], kept sorted and merged."""

    intervals: tuple
    N: float = 1.0

    def __post_init__(self):
        if not self.N >= 1:
            raise PreconditionError("horizon N must be >= 1")
        ivs = []
        for a, b in self.intervals:
            a, b = max(float(a), 0.0), min(float(b), float(self.N))
            if a <= b:
                ivs.append((a, b))
        ivs.sort()
        merged = []
        for a, b in ivs:
            if merged and a <= merged[-1][1]:
                merged[-1] = (merged[-1][0], max(merged[-1][1], b))
            else:
                merged.append((a, b))
        object.__setattr__(self, "intervals", tuple(merged))
        object.__setattr__(self, "N", float(self.N))

    @property
    def measure(self) -> float:
        return math.fsum(b - a for a, b in self.intervals)

    @property
    def density(self) -> float:
        return self.measure / self.N

    @property
    def left(self) -> np.ndarray:
        return np.array([a for a, _ in self.intervals])

    @property
    def right(self) -> np.ndarray:
        return np.array([b for _, b in self.intervals])

    def contains(self, x) -> bool:
        """Exact membership; x may be a float or a Fraction."""
        for a, b in self.intervals:
            if a <= x <= b:
                return True
        return False

    def exact(self) -> list:
        return [(Fraction(a), Fraction(b)) for a, b in self.intervals]

    def subset_of(self, other: "IntervalSet") -> bool:
        return all(any(c <= a and b <= d for c, d in other.intervals) for a, b in self.intervals)

    def to_dict(self) -> dict:
        return {"N": self.N, "intervals": [list(iv) for iv in self.intervals]}


@dataclass(frozen=True)
class PatternInstance:
    x: Fraction
    t: Fraction
    px: Fraction   # P(t) exactly
    N: float
    d: int

    @property
    def points(self) -> tuple:
        return (self.x, self.x + self.t, self.x + self.px)

    @property
    def gap_ratio(self) -> float:
        return float(self.t) / self.N ** (1.0 / self.d)

    def verify(self, S: IntervalSet) -> bool:
        return self.t > 0 and all(S.contains(q) for q in self.points)

    def to_dict(self) -> dict:
        return {"x": float(self.x), "t": float(self.t), "points": [float(q) for q in self.points],
                "gap_ratio": self.gap_ratio, "exact": {"x": str(self.x), "t": str(self.t)}}


def exact_poly(p, t: Fraction) -> Fraction:
    acc = Fraction(0)
    for c in reversed(p.coeffs):
        acc = acc * t + Fraction(c)
    return acc


def _intersect(A: list, B: list) -> list:
    out, i, j = [], 0, 0
    while i < len(A) and j < len(B):
        lo, hi = max(A[i][0], B[j][0]), min(A[i][1], B[j][1])
        if lo <= hi:
            out.append((lo, hi))
        if A[i][1] < B[j][1]:
            i += 1
        else:
            j += 1
    return out


def triple_intersection(S: IntervalSet, t: Fraction, pt: Fraction) -> list:
    """S, S - t and S - P(t) intersected in exact arithmetic."""
    E = S.exact()
    return _intersect(_intersect(E, [(a - t, b - t) for a, b in E]), [(a - pt, b - pt) for a, b in E])


def _flag(S: IntervalSet, p, t: np.ndarray, tol: float) -> np.ndarray:
    """Float pre-screen: True where some candidate x passes with tolerance tol."""
    a, b = S.left, S.right
    pt = p(t)
    cand = np.concatenate([np.broadcast_to(a, (len(t), len(a))),
                           a[None, :] - t[:, None], a[None, :] - pt[:, None]], axis=1)

    def member(y):
        idx = np.searchsorted(a, y + tol, side="right") - 1
        ok = idx >= 0
        return ok & (y <= b[np.clip(idx, 0, None)] + tol)

    hit = member(cand) & member(cand + t[:, None]) & member(cand + pt[:, None])
    return hit.any(axis=1)


def _pick_x(L: Fraction, R: Fraction):
    xf = float(L)
    for cand in (xf, math.nextafter(xf, math.inf), math.nextafter(xf, -math.inf)):
        if L <= Fraction(cand) <= R:
            return Fraction(cand)
    return L


def _scan(S: IntervalSet, p, k_hi: int, k_lo: int, grid: int, chunk: int = 4096):
    """Largest k in (k_lo, k_hi] with a pattern at t = k / grid, plus its witness."""
    tol = 1e-9 * max(S.N, 1.0)
    k = k_hi
    while k > k_lo:
        ks = np.arange(k, max(k - chunk, k_lo), -1)
        flags = _flag(S, p, ks / grid, tol)
        for kk in ks[flags].tolist():
            t = Fraction(kk, grid)
            pt = exact_poly(p, t)
            inter = triple_intersection(S, t, pt)
            if inter:
                return kk, _pick_x(*inter[0]), t, pt
        k = int(ks[-1]) - 1
    return None


def find_pattern(S: IntervalSet, p: Polynomial, delta: float = 0.0, grid: int = 1 << 20) -> PatternInstance:
    """Largest-gap pattern with t = k/grid > delta * N^(1/d); raises NotFound otherwise.

    ``NotFound.best`` holds the largest working grid t at or below the
    threshold, or None.
    """
    if delta < 0:
        raise PreconditionError("delta must be >= 0")
    if grid < 1 << 10:
        raise PreconditionError("grid must have at least 2^10 points per unit")
    if not S.intervals:
        raise NotFound("empty set", best=None)
    scale = S.N ** (1.0 / p.d)
    k_hi = int(math.floor(scale * grid))
    k_lo = int(math.floor(delta * scale * grid))
    hit = _scan(S, p, k_hi, k_lo, grid)
    if hit is not None:
        _, x, t, pt = hit
        inst = PatternInstance(x, t, pt, S.N, p.d)
        if not inst.verify(S):
            raise AssertionError("pattern failed exact re-verification")
        return inst
    below = _scan(S, p, k_lo, 0, grid)
    best = float(below[2]) if below else None
    raise NotFound(f"no pattern with t > {delta} * N^(1/d)", best=best)


def max_gap(S: IntervalSet, p: Polynomial, grid: int = 1 << 20) -> float:
    """Largest working grid t divided by N^(1/d); 0.0 when no t works."""
    try:
        return find_pattern(S, p, 0.0, grid).gap_ratio
    except NotFound:
        return 0.0


def rescale_instance(S: IntervalSet, p: Polynomial):
    """Pad the horizon to 2^(jd) and map to [0, 1].

    Returns (S', j, t -> 2^(-dj) P(2^j t), density of S').
    """
    d = p.d
    j = 0
    while 2.0 ** (j * d) < S.N:
        j += 1
    Np = 2.0 ** (j * d)
    Sp = IntervalSet(tuple((math.ldexp(a, -j * d), math.ldexp(b, -j * d)) for a, b in S.intervals), 1.0)
    return Sp, j, RescaledPolynomial(p, j), S.measure / Np


def pattern_measure(S: IntervalSet, p: Polynomial, nt: int = 4096) -> float:
    """Midpoint-rule value of the integral over t in [0, N^(1/d)] of |S ∩ (S-t) ∩ (S-P(t))|."""
    T = S.N ** (1.0 / p.d)
    ivs = list(S.intervals)
    total = 0.0
    for k in range(nt):
        t = (k + 0.5) * T / nt
        pt = float(p(t))
        inter = _intersect(_intersect(ivs, [(a - t, b - t) for a, b in ivs]),
                           [(a - pt, b - pt) for a, b in ivs])
        total += math.fsum(b - a for a, b in inter)
    return total * T / nt


def adversarial_sets(kind: str, epsilon: float, N: float = 1.0, seed: int = 0,
                     pieces: int | None = None, levels: int | None = None) -> IntervalSet:
    """Deterministic test sets of density epsilon in [0, N].

    random: Dirichlet interval lengths and gaps. cantor: each level replaces an
    interval by two children of relative length eps^(1/L)/2 at seeded offsets.
    shifted-blocks: equal blocks, one per cell of a uniform partition, at
    seeded offsets inside their cell.
    """
    if not 0 < epsilon <= 1:
        raise PreconditionError("epsilon must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    N = float(N)
    if epsilon == 1:
        return IntervalSet(((0.0, N),), N)
    if kind == "random":
        K = pieces or int(rng.integers(1, 17))
        lengths = rng.dirichlet(np.ones(K)) * epsilon * N
        gaps = rng.dirichlet(np.ones(K + 1)) * (1 - epsilon) * N
        ivs, pos = [], 0.0
        for L, g in zip(lengths, gaps):
            pos += g
            ivs.append((pos, pos + L))
            pos += L
        S = IntervalSet(tuple(ivs), N)
    elif kind == "cantor":
        L = levels if levels is not None else max(1, math.ceil(math.log2(1 / epsilon)))
        r = epsilon ** (1.0 / L) / 2.0
        # each leaf has length eps * 2^-L * N; refuse before building 2^L pieces
        if epsilon * 2.0 ** -L < 1e-9 or L > 20:
            raise PreconditionError(f"{L} cantor levels make intervals below resolution; use fewer levels")
        ivs = [(0.0, N)]
        for _ in range(L):
            nxt = []
            for a, b in ivs:
                span = b - a
                free = (1 - 2 * r) * span
                u, v = rng.uniform(0, 0.45, size=2)
                nxt.append((a + u * free, a + u * free + r * span))
                nxt.append((b - v * free - r * span, b - v * free))
            ivs = nxt
        S = IntervalSet(tuple(ivs), N)
    elif kind == "shifted-blocks":
        K = pieces or int(rng.integers(2, 9))
        cell = N / K
        blen = epsilon * cell
        ivs = []
        for i in range(K):
            off = rng.uniform(0, cell - blen)
            ivs.append((i * cell + off, i * cell + off + blen))
        S = IntervalSet(tuple(ivs), N)
    else:
        raise PreconditionError(f"unknown kind {kind!r}")
    if abs(S.density - epsilon) > 1e-6:
        raise PreconditionError(f"density {S.density} misses target {epsilon}")
    return S
