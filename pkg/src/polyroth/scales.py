"""Dyadic scale classification and construction of admissible index sets.

A monomial a_r t^r dominates at scale k when |a_r 2^(rk)| exceeds every other
nonzero monomial by a factor Gamma0 = 2^g0. All such comparisons are made on
(mantissa, exponent) pairs so that they are exact.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

from .errors import ConstructionExhausted, PreconditionError
from .poly import Polynomial, RealPoly, normalize_Q


def dyadic_exponent(a: float) -> int:
    """The integer b with |a| in [2^b, 2^(b+1))."""
    if a == 0 or not math.isfinite(a):
        raise PreconditionError(f"no dyadic exponent for {a!r}")
    return math.frexp(abs(a))[1] - 1


@dataclass(frozen=True)
class ScaleParams:
    g0: int = 10
    theta: int = 30

    def __post_init__(self):
        if self.g0 < 0:
            raise PreconditionError("g0 must be >= 0")
        if self.theta < 1:
            raise PreconditionError("theta must be >= 1")

    @property
    def gamma0(self) -> int:
        return 2 ** self.g0

    def gamma_d(self, d: int) -> int:
        return 4 * d * d * 2 ** self.g0


def _compare(p: Polynomial, r: int, k: int, rp: int, shift: int) -> int:
    """Sign of |a_r| 2^(rk) - 2^shift |a_rp| 2^(rp k), computed exactly."""
    m1, e1 = math.frexp(abs(p.coeffs[r]))
    m2, e2 = math.frexp(abs(p.coeffs[rp]))
    x1, x2 = e1 + r * k, e2 + rp * k + shift
    if x1 != x2:
        return 1 if x1 > x2 else -1
    return (m1 > m2) - (m1 < m2)


def dominates(p: Polynomial, r: int, k: int, g0: int, exclude=()) -> bool:
    """True when a_r t^r beats every other nonzero monomial at 2^k by 2^g0."""
    if p.coeffs[r] == 0.0:
        return False
    for rp in p.support:
        if rp == r or rp in exclude:
            continue
        if _compare(p, r, k, rp, g0) <= 0:
            return False
    return True


def default_window(p: Polynomial, params: ScaleParams) -> tuple:
    """Symmetric window that contains every scale where two monomials compete.

    Two monomials are comparable only when |(b_r - b_r') + (r - r')k| <= g0 + 1,
    and |b_r - b_r'| can reach 2 max|b|, hence the factor 2.
    """
    bmax = max(abs(dyadic_exponent(p.coeffs[r])) for r in p.support)
    w = params.g0 + 2 * bmax + p.d + 1
    return (-w, w)


@dataclass(frozen=True)
class ScaleRecord:
    k: int
    J: tuple   # r >= 1 with k in J_r (at most one)
    J1: tuple  # r >= 2 with k in J_{1,r}
    good: bool


@dataclass
class ScaleClassification:
    window: tuple
    records: list
    J: dict = field(default_factory=dict)
    J1: dict = field(default_factory=dict)
    good: list = field(default_factory=list)
    bad: list = field(default_factory=list)

    def record(self, k: int) -> ScaleRecord:
        if not self.window[0] <= k <= self.window[1]:
            raise KeyError(f"scale {k} outside window {self.window}")
        return self.records[k - self.window[0]]

    def dominating(self, k: int):
        rec = self.record(k)
        return rec.J[0] if rec.J else None


def classify_scale(p: Polynomial, k: int, g0: int) -> ScaleRecord:
    in_j = tuple(r for r in p.support if dominates(p, r, k, g0))
    in_j1 = ()
    if 1 in in_j:
        in_j1 = tuple(r for r in p.support if r >= 2 and dominates(p, r, k, g0, exclude=(1,)))
    return ScaleRecord(k, in_j, in_j1, any(r >= 2 for r in in_j) or bool(in_j1))


def classify_scales(p: Polynomial, params: ScaleParams = ScaleParams(), window=None) -> ScaleClassification:
    if window is None:
        window = default_window(p, params)
    kmin, kmax = int(window[0]), int(window[1])
    if kmin > kmax:
        raise PreconditionError(f"empty window [{kmin}, {kmax}]")
    J = {r: [] for r in range(1, p.d + 1)}
    J1 = {r: [] for r in range(2, p.d + 1)}
    records, good, bad = [], [], []
    for k in range(kmin, kmax + 1):
        rec = classify_scale(p, k, params.g0)
        for r in rec.J:
            J[r].append(k)
        for r in rec.J1:
            J1[r].append(k)
        (good if rec.good else bad).append(k)
        records.append(rec)
    return ScaleClassification((kmin, kmax), records, J, J1, good, bad)


def pair_sets(r1: int, r2: int, p: Polynomial, params: ScaleParams = ScaleParams(), window=None):
    """Scales where monomials r1 and r2 are within a factor Gamma0 (inclusive).

    Returns (scales, flagged); ``flagged`` is True when a coefficient is zero.
    """
    if r1 == r2:
        raise PreconditionError("r1 and r2 must differ")
    if p.a(r1) == 0.0 or p.a(r2) == 0.0:
        warnings.warn(f"pair ({r1}, {r2}) involves a zero coefficient", RuntimeWarning, stacklevel=2)
        return [], True
    if window is None:
        window = default_window(p, params)
    g0 = params.g0
    out = [k for k in range(window[0], window[1] + 1)
           if _compare(p, r2, k, r1, g0) <= 0 and _compare(p, r2, k, r1, -g0) >= 0]
    return out, False


@dataclass(frozen=True)
class AdmissiblePair:
    j: int
    ell: int
    d: int
    d0: int
    m0: int
    d1: int | None = None
    b1: int | None = None
    q0: int | None = None

    @property
    def k(self) -> int:
        return self.j - self.ell

    def lambda_exponent(self, m: int) -> int:
        """log2 of the oscillation parameter: m + m0 - (d-1)j - ell."""
        return m + self.m0 - (self.d - 1) * self.j - self.ell

    def Q(self, p: Polynomial) -> RealPoly:
        return normalize_Q(p, self.j, self.ell, self.m0)

    def to_dict(self) -> dict:
        out = {"j": self.j, "ell": self.ell, "d0": self.d0, "m0": self.m0}
        if self.d0 == 1:
            out.update(d1=self.d1, b1=self.b1, q0=self.q0)
        return out


def make_pair(p: Polynomial, j: int, ell: int, params: ScaleParams = ScaleParams()) -> AdmissiblePair:
    k = j - ell
    rec = classify_scale(p, k, params.g0)
    if not rec.good:
        raise PreconditionError(f"scale {k} is bad; ({j}, {ell}) is not admissible")
    big = [r for r in rec.J if r >= 2]
    b = {r: dyadic_exponent(p.coeffs[r]) for r in p.support}
    if big:
        d0 = big[0]
        return AdmissiblePair(j, ell, p.d, d0, b[d0] + (d0 - 1) * k)
    d1 = rec.J1[0]
    q0 = b[d1] + (d1 - 1) * k - b[1]
    return AdmissiblePair(j, ell, p.d, 1, b[1], d1=d1, b1=b[1], q0=q0)


def largeness_ok(p: Polynomial, j: int, ell: int, theta: int) -> bool:
    k = j - ell
    return all(abs(dyadic_exponent(p.coeffs[r]) + (r - 1) * k) >= theta
               for r in p.support if r >= 2)


@dataclass
class Admissible:
    E: list
    Lambda: list
    pairs: list
    gamma_d: int
    checks: dict

    @property
    def ok(self) -> bool:
        return all(self.checks.values())


def admissibility_report(seq, bound: int) -> dict:
    gaps = [b - a for a, b in zip(seq, seq[1:])]
    return {"first": seq[0] if seq else None, "max_gap": max(gaps) if gaps else None,
            "ok": bool(seq) and seq[0] <= bound and all(g <= bound for g in gaps)}


def build_admissible(p: Polynomial, params: ScaleParams = ScaleParams(), count: int = 8) -> Admissible:
    """Greedy interlaced choice 0 = j_0 < l_0 < j_1 < l_1 < ...

    j runs over multiples of 2*Gamma_d; l is the least integer past j that
    avoids every shifted bad set and satisfies the largeness condition
    |b_r + (r-1)(j-l)| >= theta. The admissibility bounds are checked after
    the fact and reported in ``checks``; they are not forced.
    """
    if count < 1:
        raise PreconditionError("count must be >= 1")
    cls = classify_scales(p, params)
    bad = set(cls.bad)
    W = max(-cls.window[0], cls.window[1])
    gd = params.gamma_d(p.d)
    step = 2 * gd
    sweep = step * (params.theta + p.d)

    def in_lambda0(ell):
        lo = max(0, -((W - ell) // step))
        hi = (ell + W) // step
        return all(i * step - ell not in bad for i in range(lo, hi + 1))

    E, Lam, pairs = [], [], []
    j = 0
    for _ in range(count):
        ell = None
        for cand in range(j + 1, j + sweep + 1):
            if in_lambda0(cand) and largeness_ok(p, j, cand, params.theta):
                ell = cand
                break
        if ell is None:
            blocking = sorted({(-k) % step for k in bad})
            raise ConstructionExhausted(
                f"no admissible l in ({j}, {j + sweep}]; bad residues mod {step}: {blocking[:20]}")
        E.append(j)
        Lam.append(ell)
        pairs.append(make_pair(p, j, ell, params))
        j = (ell // step + 1) * step

    checks = {
        "zero_in_E": E[0] == 0,
        "E_admissible": admissibility_report(E, gd)["ok"],
        "Lambda_admissible": admissibility_report(Lam, gd)["ok"],
        "interlaced": all(a < b for a, b in zip(_interlace(E, Lam), _interlace(E, Lam)[1:])),
        "largeness": all(largeness_ok(p, q.j, q.ell, params.theta) for q in pairs),
        "m0_lower_bound": all(q.m0 >= (p.d - 1) * q.k for q in pairs if q.d0 >= 2),
        "q0_negative": all(q.q0 < 0 for q in pairs if q.d0 == 1),
    }
    return Admissible(E, Lam, pairs, gd, checks)


def _interlace(E, Lam):
    out = []
    for a, b in zip(E, Lam):
        out += [a, b]
    return out
