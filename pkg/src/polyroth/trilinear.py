"""The trilinear pattern functional, its localized pieces, and the bilinear decay probe.

Everything reduces to sums of the form

    sum_t w_t * (1/N) sum_x f(x) g(x + a(t)) h(x + b(t)),

with a(t) = 2^(-(d-1)j) t and b(t) = 2^(-dj) P(2^j t). On a grid of N cells the
shifted samples are read from cell i + floor(a N + 1/2), so each t only needs
the integer pair (s_a, s_b). Equal pairs are merged before any array work.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import PreconditionError
from .fitting import DecayFit, fit_decay
from .mollify import (Bump, GridFunction, almost_orthogonality_constant, c0_constant,
                      mollify_convolve, tau)
from .poly import Polynomial, RescaledPolynomial
from .scales import AdmissiblePair, ScaleParams, classify_scales

MAX_T_POINTS = 1 << 22


@dataclass(frozen=True)
class ShiftPlan:
    sa: np.ndarray
    sb: np.ndarray
    w: np.ndarray

    def __len__(self):
        return len(self.w)


def _plan(p: Polynomial, j: int, t: np.ndarray, w: np.ndarray, n: int) -> ShiftPlan:
    N = 1 << n
    a = np.ldexp(t, -(p.d - 1) * j)
    b = RescaledPolynomial(p, j)(t)
    sa = np.floor(a * N + 0.5).astype(np.int64)
    sb = np.floor(b * N + 0.5).astype(np.int64)
    keys, inv = np.unique(np.stack([sa, sb], axis=1), axis=0, return_inverse=True)
    weights = np.bincount(inv.ravel(), weights=w, minlength=len(keys))
    keep = weights != 0
    return ShiftPlan(keys[keep, 0], keys[keep, 1], weights[keep])


@lru_cache(maxsize=64)
def uniform_plan(p: Polynomial, j: int, n: int) -> ShiftPlan:
    """Midpoint rule in t over [0, 1] with 2^n nodes."""
    T = 1 << n
    t = (np.arange(T) + 0.5) / T
    return _plan(p, j, t, np.full(T, 1.0 / T), n)


@lru_cache(maxsize=64)
def localized_plan(p: Polynomial, j: int, ell: int, n: int) -> ShiftPlan:
    """Midpoint rule in t against tau_ell on its support [2^(-ell-1), 2^(1-ell)]."""
    T = min(1 << max(n, ell + 8), MAX_T_POINTS)
    lo, hi = math.ldexp(0.5, -ell), math.ldexp(2.0, -ell)
    t = lo + (hi - lo) * (np.arange(T) + 0.5) / T
    w = Bump("tau", ell)(t) * ((hi - lo) / T)
    return _plan(p, j, t, w, n)


def _sample(f, n: int) -> np.ndarray:
    if isinstance(f, GridFunction):
        return f.resample(n).values
    N = 1 << n
    return np.asarray(f((np.arange(N) + 0.5) / N))


def form_sum(f: np.ndarray, g: np.ndarray, h: np.ndarray, plan: ShiftPlan, periodic: bool = False):
    """sum over the plan of w * (1/N) sum_x f(x) g(x + s_a) h(x + s_b)."""
    N = len(f)
    total = 0.0
    if periodic:
        gg, hh = np.concatenate([g, g]), np.concatenate([h, h])
        for sa, sb, w in zip(plan.sa.tolist(), plan.sb.tolist(), plan.w.tolist()):
            sa %= N
            sb %= N
            total += w * np.dot(f * gg[sa:sa + N], hh[sb:sb + N])
        return float(total / N)
    for sa, sb, w in zip(plan.sa.tolist(), plan.sb.tolist(), plan.w.tolist()):
        lo = max(0, -sa, -sb)
        hi = min(N, N - sa, N - sb)
        if hi > lo:
            total += w * np.dot(f[lo:hi] * g[lo + sa:hi + sa], h[lo + sb:hi + sb])
    return float(total / N)


def bilinear_field(g: np.ndarray, h: np.ndarray, plan: ShiftPlan, periodic: bool = True) -> np.ndarray:
    """x -> sum over the plan of w * g(x + s_a) h(x + s_b)."""
    N = len(g)
    out = np.zeros(N, dtype=np.result_type(g, h, float))
    if periodic:
        gg, hh = np.concatenate([g, g]), np.concatenate([h, h])
        for sa, sb, w in zip(plan.sa.tolist(), plan.sb.tolist(), plan.w.tolist()):
            sa %= N
            sb %= N
            out += w * gg[sa:sa + N] * hh[sb:sb + N]
        return out
    for sa, sb, w in zip(plan.sa.tolist(), plan.sb.tolist(), plan.w.tolist()):
        lo = max(0, -sa, -sb)
        hi = min(N, N - sa, N - sb)
        if hi > lo:
            out[lo:hi] += w * g[lo + sa:hi + sa] * h[lo + sb:hi + sb]
    return out


@dataclass
class TrilinearResult:
    value: float
    n: int
    value_fine: float
    gap: float
    unresolved: bool
    j: int
    poly: str

    @property
    def extrapolated(self) -> float:
        return 2.0 * self.value_fine - self.value


def _check_unit_range(v: np.ndarray):
    if np.iscomplexobj(v) or np.any(v < 0) or np.any(v > 1):
        raise PreconditionError("f must take values in [0, 1]")


def trilinear_form(f, p: Polynomial, j: int, n: int) -> TrilinearResult:
    """Midpoint-rule value of the double integral of f(x) f(x + a(t)) f(x + b(t)) over [0,1]^2.

    ``f`` is a GridFunction (resampled to 2^n cells) or a vectorized callable.
    The value at n + 1 is computed as well; a relative gap above 1e-3 sets
    ``unresolved``.
    """
    vals = []
    for m in (n, n + 1):
        v = _sample(f, m).astype(float)
        _check_unit_range(v)
        vals.append(form_sum(v, v, v, uniform_plan(p, j, m)))
    gap = abs(vals[1] - vals[0])
    return TrilinearResult(vals[0], n, vals[1], gap, gap > 1e-3 * max(abs(vals[0]), 1e-6), j, str(p))


def localized_form(f, g, h, p: Polynomial, j: int, ell: int, n: int | None = None):
    """Double integral of f(x) g(x + a(t)) h(x + b(t)) tau_ell(t), zero outside [0, 1]."""
    if n is None:
        ns = [u.n for u in (f, g, h) if isinstance(u, GridFunction)]
        if not ns:
            raise PreconditionError("resolution n required when no GridFunction is given")
        n = max(ns)
    plan = localized_plan(p, j, ell, n)
    return form_sum(_sample(f, n), _sample(g, n), _sample(h, n), plan)


def decompose_I(f: GridFunction, p: Polynomial, j: int, ell1: int, ell: int, ell2: int) -> dict:
    """Split the localized form at levels ell1 <= ell <= ell2 into I1 + I2 + I3, plus I4.

    I1 uses f * vartheta_ell1 in the third slot, I2 the difference between the
    ell2 and ell1 mollifications, I3 the remainder f - f * vartheta_ell2. I4 is
    I1 with the third slot read at x instead of x + b(t).
    """
    if not 1 <= ell1 <= ell <= ell2:
        raise PreconditionError("need 1 <= ell1 <= ell <= ell2")
    n = f.n
    if ell2 > n:
        raise PreconditionError(f"vartheta at level {ell2} needs n >= {ell2}")
    v = f.values.astype(float)
    _check_unit_range(v)
    m1 = mollify_convolve(f, Bump("vartheta", ell1)).values
    m2 = mollify_convolve(f, Bump("vartheta", ell2)).values
    plan = localized_plan(p, j, ell, n)
    I1 = form_sum(v, v, m1, plan)
    I2 = form_sum(v, v, m2 - m1, plan)
    I3 = form_sum(v, v, v - m2, plan)
    loc = form_sum(v, v, v, plan)
    g_part = bilinear_field(v, np.ones_like(v), plan, periodic=False)
    I4 = float(np.sum(v * m1 * g_part) / f.N)
    tri = trilinear_form(f, p, j, n)
    tau_max = float(np.max(tau(np.linspace(0.5, 2.0, 20001))))
    return {
        "I": tri.value, "localized": loc, "I1": I1, "I2": I2, "I3": I3, "I4": I4,
        "split_error": abs(I1 + I2 + I3 - loc),
        "I2_bound": float(np.sqrt(np.sum((m2 - m1) ** 2) / f.N)),
        "I41_bound": p.d * p.l1_norm * 2.0 ** (ell1 - ell + 1),
        "I41": abs(I4 - I1),
        "chain_lhs": 2.0 ** ell * tri.value,
        "chain_lhs_scaled": 2.0 ** ell * tau_max * tri.value,
        "tau_max": tau_max,
    }


def random_band_function(rng: np.random.Generator, n: int, m: int) -> np.ndarray:
    """Real samples with random complex Fourier coefficients on |xi| in [2^m, 2^(m+1))."""
    N = 1 << n
    spec = np.zeros(N, dtype=complex)
    k = np.arange(2 ** m, 2 ** (m + 1))
    spec[k] = rng.standard_normal(len(k)) + 1j * rng.standard_normal(len(k))
    spec[N - k] = np.conj(spec[k])
    return np.fft.ifft(spec).real


def bilinear_decay_probe(p: Polynomial, pair: AdmissiblePair, m_list, trials: int = 64, seed: int = 0,
                         n: int | None = None) -> DecayFit:
    """Random-sampling lower estimate of the bilinear norm at each frequency band m.

    For each m and trial: f is real white noise with unit L2 norm, g has random
    Fourier coefficients on [2^m, 2^(m+1)). The recorded quantity is the max
    over trials of ||B(f, g)||_1 / (||f||_2 ||g||_2), where B(f, g)(x) is the
    tau_ell average of f(x + a(t)) g(x + b(t)). The fit is log2(max) against m.
    """
    if trials < 16:
        raise PreconditionError("trials must be >= 16")
    m_list = [int(m) for m in m_list]
    if n is None:
        n = max(m_list) + 3
    bad = [m for m in m_list if m > n - 2]
    if bad:
        raise PreconditionError(f"bands {bad} exceed Nyquist at resolution n={n}")
    N = 1 << n
    plan = localized_plan(p, pair.j, pair.ell, n)
    maxima = []
    for m in m_list:
        best = 0.0
        for trial in range(trials):
            rng = np.random.default_rng([seed, m, trial])
            f = rng.standard_normal(N)
            f /= np.sqrt(np.mean(f ** 2))
            g = random_band_function(rng, n, m)
            g /= np.sqrt(np.mean(g ** 2))
            B = bilinear_field(f, g, plan, periodic=True)
            best = max(best, float(np.mean(np.abs(B))))
        maxima.append(best)
    fit = fit_decay(m_list, maxima)
    bounded = all(m <= 100 * p.d * pair.ell for m in m_list)
    fit.notes.update(maxima=maxima, trials=trials, seed=seed, n=n, plan_size=len(plan),
                     regime="bounded" if bounded else "decay",
                     bounded_ok=all(v <= 1.0 + 1e-12 for v in maxima))
    return fit


def lambda0_levels(p: Polynomial, j: int, count: int, start: int = 1,
                   params: ScaleParams = ScaleParams()) -> list:
    """First ``count`` levels ell >= start whose scale j - ell avoids every shifted bad set."""
    cls = classify_scales(p, params)
    bad = set(cls.bad)
    step = 2 * params.gamma_d(p.d)
    W = max(-cls.window[0], cls.window[1])
    out, ell = [], start
    while len(out) < count:
        lo = max(0, -((W - ell) // step))
        if all(i * step - ell not in bad for i in range(lo, (ell + W) // step + 1)):
            out.append(ell)
        ell += 1
    return out


def pigeonhole_demo(f: GridFunction, p: Polynomial, j: int, K: int, levels=None,
                    params: ScaleParams = ScaleParams()) -> dict:
    """Walk a level sequence and test the two alternatives at each step.

    Alternative A: I > 2^(-l_(k+1) - 10) c0 eps^3.
    Alternative B: the two mollifier increments sum to more than 2^-10 c0 eps^3.
    """
    v = f.values.astype(float)
    _check_unit_range(v)
    eps = float(np.sum(v) / f.N)
    n = f.n
    shift = (p.d - 1) * j
    if levels is None:
        levels = lambda0_levels(p, j, K + 2, params=params)
    levels = list(levels)[: K + 2]
    if levels[-1] + shift > n:
        raise PreconditionError(f"level {levels[-1]} + {shift} exceeds resolution n={n}")
    c0 = c0_constant(n)
    C0 = 2.0 * almost_orthogonality_constant(n)
    I = trilinear_form(f, p, j, n).value
    conv = {l: mollify_convolve(f, Bump("vartheta", l)).values
            for l in set(levels) | {l + shift for l in levels}}
    steps, energy, fired = [], 0.0, None
    for k in range(K + 1):
        a, b = levels[k], levels[k + 1]
        d1 = float(np.sqrt(np.mean((conv[a] - conv[b]) ** 2)))
        d2 = float(np.sqrt(np.mean((conv[a + shift] - conv[b + shift]) ** 2)))
        energy += d1 ** 2 + d2 ** 2
        thresh_a = 2.0 ** (-b - 10) * c0 * eps ** 3
        alt_a = I > thresh_a
        alt_b = d1 + d2 > 2.0 ** -10 * c0 * eps ** 3
        steps.append({"k": k, "ell": a, "ell_next": b, "A": alt_a, "B": alt_b,
                      "threshold_A": thresh_a, "increment": d1 + d2})
        if alt_a and fired is None:
            fired = k
    out = {"I": I, "eps": eps, "c0": c0, "C0": C0, "energy": energy,
           "energy_bound": C0 * float(np.mean(v ** 2)), "levels": levels, "steps": steps,
           "fired": fired, "certified_lower_bound": steps[fired]["threshold_A"] if fired is not None else None}
    if fired is None:
        out["diagnostic"] = (f"no step fired in K={K}; energy {energy:.3g} against "
                             f"K * (2^-10 c0 eps^3)^2 = {(K + 1) * (2.0 ** -10 * c0 * eps ** 3) ** 2:.3g}")
    return out
