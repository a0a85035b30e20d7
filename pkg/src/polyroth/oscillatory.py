"""Phases t*xi + eta*Q(t), their critical points, and the dual phase.

Also hosts the oscillatory quadrature, the stationary-phase comparison and
the decay probes built on the dual phase Psi(xi, eta) = t_c xi + eta Q(t_c).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath
import numpy as np
from scipy import optimize

from .errors import PreconditionError, UnresolvedError
from .fitting import DecayFit, fit_decay
from .mollify import Bump, _smoothstep_down, tau
from .poly import Polynomial, RealPoly, evaluate, invert_monotone, normalize_Q
from .scales import AdmissiblePair

CRIT_INTERVAL = (0.5, 2.0)
GL_ORDER = 16
PANEL_BUDGET = 1 << 22
TWO_PI_LD = np.longdouble("6.283185307179586476925286766559")


def phase_poly(Q: RealPoly, xi: float, eta: float) -> RealPoly:
    c = [eta * q for q in Q.coeffs] + [0.0] * max(0, 2 - len(Q.coeffs))
    c[1] += xi
    return RealPoly(tuple(c))


@dataclass(frozen=True)
class CriticalPoint:
    t: float
    phi2: float
    degenerate: bool


def critical_points(Q: RealPoly, xi: float, eta: float, interval=CRIT_INTERVAL, scan: int = 1024) -> list:
    """Real roots of xi + eta Q'(t) on the closed interval, by scan and bracketing."""
    if eta == 0:
        raise PreconditionError("eta must be nonzero")
    phi = phase_poly(Q, xi, eta)
    lo, hi = interval
    ts = np.linspace(lo, hi, scan + 1)
    d1 = evaluate(phi, ts, 1)
    scale = abs(xi) + abs(eta) * sum(abs(c) for c in Q.coeffs)
    tol = 1e-10 * scale
    out = []

    def add(t):
        t = float(t)
        if any(abs(t - c.t) < 1e-12 for c in out):
            return
        p2 = float(evaluate(phi, t, 2))
        out.append(CriticalPoint(t, p2, abs(p2) <= 1e-9 * max(scale, 1.0)))

    for i in range(scan + 1):
        if d1[i] == 0.0:
            add(ts[i])
    for i in range(scan):
        a, b = d1[i], d1[i + 1]
        if a * b < 0:
            add(optimize.brentq(lambda t: evaluate(phi, t, 1), ts[i], ts[i + 1], xtol=1e-15, rtol=1e-15))
    # touching roots: local minima of |phi'| that reach zero without a sign change
    mag = np.abs(d1)
    for i in range(1, scan):
        if mag[i] <= mag[i - 1] and mag[i] <= mag[i + 1] and d1[i - 1] * d1[i + 1] > 0:
            res = optimize.minimize_scalar(lambda t: abs(evaluate(phi, t, 1)), bounds=(ts[i - 1], ts[i + 1]),
                                           method="bounded", options={"xatol": 1e-14})
            if abs(evaluate(phi, res.x, 1)) <= tol:
                add(res.x)
    out.sort(key=lambda c: c.t)
    return out


@dataclass(frozen=True)
class DualPhase:
    psi: float
    t_c: float          # equals d Psi / d xi
    H: float            # d^2 Psi / d xi d eta
    dH_dxi: float
    dH_deta: float
    ratio: float        # Q' Q''' / Q''^2 at t_c

    @property
    def dpsi_dxi(self) -> float:
        return self.t_c


def dual_from_tc(Q: RealPoly, xi: float, eta: float, t: float) -> DualPhase:
    q1, q2, q3 = (float(evaluate(Q, t, k)) for k in (1, 2, 3))
    r = q1 * q3 / (q2 * q2)
    return DualPhase(
        psi=t * xi + eta * float(evaluate(Q, t)),
        t_c=t,
        H=-q1 / (eta * q2),
        dH_dxi=(1.0 - r) / (eta * eta * q2),
        dH_deta=q1 / (eta * eta * q2) * (2.0 - r),
        ratio=r,
    )


def dual_phase(Q: RealPoly, xi: float, eta: float, interval=CRIT_INTERVAL):
    """Closed-form Psi, dPsi/dxi = t_c and H = -Q'(t_c) / (eta Q''(t_c)).

    Returns None when there is no critical point; raises PreconditionError
    when the critical point is degenerate or not unique.
    """
    cps = critical_points(Q, xi, eta, interval)
    if not cps:
        return None
    if len(cps) > 1:
        raise PreconditionError(f"{len(cps)} critical points at xi={xi}, eta={eta}")
    if cps[0].degenerate:
        raise PreconditionError(f"degenerate critical point at t={cps[0].t}")
    return dual_from_tc(Q, xi, eta, cps[0].t)


def psi_value(Q: RealPoly, xi: float, eta: float, interval=CRIT_INTERVAL) -> float:
    dp = dual_phase(Q, xi, eta, interval)
    if dp is None:
        raise UnresolvedError(f"no critical point at xi={xi}, eta={eta}")
    return dp.psi


def _psi_near(Q: RealPoly, xi: float, eta: float, t0: float, interval=CRIT_INTERVAL) -> float:
    """Psi with t_c refined by Newton from a nearby critical point t0."""
    t = t0
    for _ in range(50):
        step = (xi + eta * evaluate(Q, t, 1)) / (eta * evaluate(Q, t, 2))
        t -= step
        if abs(step) <= 1e-15 * max(1.0, abs(t)):
            break
    else:
        raise UnresolvedError(f"Newton did not settle at xi={xi}, eta={eta}")
    lo, hi = interval
    if not lo - 1e-12 <= t <= hi + 1e-12:
        raise UnresolvedError(f"critical point left the interval at xi={xi}, eta={eta}")
    return t * xi + eta * float(evaluate(Q, t))


def fd_dual_derivatives(Q: RealPoly, xi: float, eta: float, h: float | None = None,
                        interval=CRIT_INTERVAL) -> tuple:
    """(dPsi/dxi, d^2Psi/dxi deta) by central differences with one Richardson step."""
    if h is None:
        h = 1e-4 * max(1.0, abs(xi), abs(eta))
    base = dual_phase(Q, xi, eta, interval)
    if base is None:
        raise UnresolvedError(f"no critical point at xi={xi}, eta={eta}")

    def psi(a, b):
        return _psi_near(Q, a, b, base.t_c, interval)

    def grad(s):
        return (psi(xi + s, eta) - psi(xi - s, eta)) / (2 * s)

    def mixed(s):
        return (psi(xi + s, eta + s) - psi(xi + s, eta - s) - psi(xi - s, eta + s) + psi(xi - s, eta - s)) / (4 * s * s)

    g = (4 * grad(h / 2) - grad(h)) / 3
    m = (4 * mixed(h / 2) - mixed(h)) / 3
    return g, m


# ---------------------------------------------------------------- quadrature

@dataclass
class OscResult:
    value: complex      # the full integral
    reduced: complex    # integral of exp(i lam (Phi - Phi(center))) * amplitude
    phase0: float       # lam * Phi(center), unreduced
    error: float
    panels: int


def _taylor(phi: RealPoly, t0: float) -> list:
    """Coefficients of Phi(t0 + u) - Phi(t0) in powers of u."""
    d = len(phi.coeffs) - 1
    return [0.0] + [float(evaluate(phi, t0, k)) / math.factorial(k) for k in range(1, d + 1)]


def _gl_sum(coef, lam: float, amp, lo: float, hi: float, panels: int, t0: float) -> complex:
    x, w = np.polynomial.legendre.leggauss(GL_ORDER)
    width = (hi - lo) / panels
    total = 0j
    lam_ld = np.longdouble(lam)
    chunk = max(1, (1 << 20) // GL_ORDER)
    coef_ld = [np.longdouble(c) for c in coef]
    for start in range(0, panels, chunk):
        stop = min(panels, start + chunk)
        left = lo + width * np.arange(start, stop)
        t = (left[:, None] + width * (x[None, :] + 1) / 2).ravel()
        u = t.astype(np.longdouble) - np.longdouble(t0)
        acc = np.zeros_like(u)
        for c in reversed(coef_ld):
            acc = acc * u + c
        theta = np.fmod(lam_ld * acc, TWO_PI_LD).astype(float)
        vals = amp(t) * np.exp(1j * theta)
        total += np.sum(vals * np.tile(w, stop - start)) * (width / 2)
    return total


def oscillatory_integral(Q: RealPoly, xi: float, eta: float, lam: float, bump=None,
                         tol: float | None = None, center: float | None = None,
                         support=CRIT_INTERVAL) -> OscResult:
    """Integral of exp(i lam Phi(t)) b(t) over the support of b, by panel-doubling Gauss-Legendre.

    Panels start no wider than 2 pi / (lam max|Phi'| + 1) and are doubled until
    two successive values agree to tol (default 1e-8 / sqrt(lam)). The phase
    is expanded around ``center`` and reduced mod 2 pi in extended precision.
    """
    if lam < 0:
        raise PreconditionError("lambda must be >= 0")
    amp = bump if bump is not None else Bump("tau")
    lo, hi = support
    if tol is None:
        tol = 1e-8 / math.sqrt(max(lam, 1.0))
    phi = phase_poly(Q, xi, eta)
    if center is None:
        center = 0.5 * (lo + hi)
    coef = _taylor(phi, center)
    grid = np.linspace(lo, hi, 257)
    slope = float(np.max(np.abs(evaluate(phi, grid, 1))))
    width = 2 * math.pi / (lam * slope + 1.0)
    panels = max(2, math.ceil((hi - lo) / width))
    prev = _gl_sum(coef, lam, amp, lo, hi, panels, center)
    while True:
        if 2 * panels > PANEL_BUDGET:
            raise UnresolvedError(f"panel budget exhausted at lambda={lam}", estimate=prev)
        panels *= 2
        cur = _gl_sum(coef, lam, amp, lo, hi, panels, center)
        err = abs(cur - prev)
        if err <= tol:
            break
        prev = cur
    phase0 = lam * float(evaluate(phi, center))
    return OscResult(cur * complex(np.exp(1j * phase0)), cur, phase0, err, panels)


def partition_of_unity(points, support=CRIT_INTERVAL) -> list:
    """Smooth functions summing to 1 on the support, each equal to 1 near one point."""
    pts = sorted(points)
    if len(pts) <= 1:
        return [lambda t: np.ones_like(np.asarray(t, dtype=float))]
    cuts = [(a + b) / 2 for a, b in zip(pts, pts[1:])]
    width = min(b - a for a, b in zip(pts, pts[1:])) / 4

    def down(c):
        return lambda t: _smoothstep_down(1.0 + (np.asarray(t, dtype=float) - (c - width / 2)) / width)

    steps = [down(c) for c in cuts]
    parts = []
    for i in range(len(pts)):
        left = steps[i - 1] if i > 0 else None
        right = steps[i] if i < len(steps) else None

        def chi(t, left=left, right=right):
            v = np.ones_like(np.asarray(t, dtype=float))
            if right is not None:
                v = v * right(t)
            if left is not None:
                v = v * (1.0 - left(t))
            return v
        parts.append(chi)
    return parts


@dataclass
class StationaryComparison:
    lam: float
    quad: complex
    main: complex
    remainder: complex          # quad - main
    remainder_scaled: float     # |lam^(1/2) e^(-i lam Psi) quad - main amplitude|
    quad_error: float

    @property
    def ratio(self) -> float:
        """|quad - main| / lam^-1."""
        return abs(self.remainder) * self.lam


def main_amplitude(cp: CriticalPoint, bump=None) -> complex:
    amp = bump if bump is not None else Bump("tau")
    c = math.sqrt(2 * math.pi) * complex(np.exp(1j * math.copysign(math.pi / 4, cp.phi2)))
    return c * abs(cp.phi2) ** -0.5 * float(amp(cp.t))


def stationary_compare(Q: RealPoly, xi: float, eta: float, lambda_list, bump=None, noise_factor: float = 10.0):
    """Quadrature against the leading stationary-phase term for each lambda.

    The fitted quantity is the scaled remainder lam^(1/2) e^(-i lam Psi) quad
    minus the amplitude c |Phi''|^(-1/2) tau(t_c), summed over critical
    points. Without critical points the main term is zero. Values within
    ``noise_factor`` times the quadrature error are left out of the fit, and
    two resolved points then suffice.
    """
    amp = bump if bump is not None else Bump("tau")
    cps = critical_points(Q, xi, eta)
    bad = [c for c in cps if c.degenerate]
    if bad:
        raise PreconditionError(f"degenerate critical point at t={bad[0].t}; stationary phase does not apply")
    pieces = partition_of_unity([c.t for c in cps])
    rows = []
    for lam in lambda_list:
        lam = float(lam)
        quad, main, err, scaled = 0j, 0j, 0.0, 0.0
        if not cps:
            res = oscillatory_integral(Q, xi, eta, lam, amp)
            quad, err = res.value, res.error
            scaled = math.sqrt(lam) * abs(res.reduced)
        for cp, chi in zip(cps, pieces):
            res = oscillatory_integral(Q, xi, eta, lam, lambda t, chi=chi: amp(t) * chi(t), center=cp.t)
            a = main_amplitude(cp, amp)
            quad += res.value
            main += lam ** -0.5 * complex(np.exp(1j * res.phase0)) * a
            err += res.error
            scaled += abs(math.sqrt(lam) * res.reduced - a)
        rows.append(StationaryComparison(lam, quad, main, quad - main, scaled, err))
    lams = np.array([r.lam for r in rows])
    vals = np.array([r.remainder_scaled for r in rows])
    resolved = vals > noise_factor * np.sqrt(lams) * np.array([r.quad_error for r in rows])
    # without critical points the integral falls under the rounding floor within a few octaves
    fit = fit_decay(np.log2(lams), vals, mask=resolved, min_points=3 if cps else 2)
    fit.notes.update(critical_points=[c.t for c in cps], censored=int((~resolved).sum()),
                     abs_fit=_safe_fit(np.log2(lams), np.abs([r.remainder for r in rows]), resolved),
                     R_cap=float(max(r.ratio for r in rows)))
    return rows, fit


def _safe_fit(x, v, mask):
    try:
        f = fit_decay(x, v, mask=mask)
        return {"slope": f.slope, "max_residual": f.max_residual}
    except PreconditionError:
        return None


def stationary_law(rows, bump=None, Q=None, xi=None, eta=None):
    """Fit of | |quad| lam^(1/2) - sqrt(2 pi / |Phi''|) tau(t_c) | against log2 lam."""
    amp = bump if bump is not None else Bump("tau")
    cp = critical_points(Q, xi, eta)[0]
    target = math.sqrt(2 * math.pi / abs(cp.phi2)) * float(amp(cp.t))
    lams = np.array([r.lam for r in rows])
    dev = np.abs(np.abs([r.quad for r in rows]) * np.sqrt(lams) - target)
    return fit_decay(np.log2(lams), dev)


# ---------------------------------------------------------------- sampling helpers

def _annulus(rng, lo, hi, size):
    return rng.uniform(lo, hi, size) * rng.choice([-1.0, 1.0], size)


@dataclass
class HBoundReport:
    d0: int
    samples: int
    used: int
    skipped: int
    threshold: float
    min_ratio_gap: float     # min of 1 - Q'Q'''/Q''^2
    min_abs_dH_dxi: float
    max_abs_dH_dxi: float
    min_abs_dH_deta: float
    max_abs_dH_deta: float
    below_threshold: int
    ok: bool


def hbound_check(Q: RealPoly, d0: int, samples: int = 1000, seed: int = 0, slack: float = 0.0,
                 xi_range=(1.0, 2.0), eta_range=(1.0, 2.0)) -> HBoundReport:
    """Sample (xi, eta) in the annuli and bound the gradient of H at each critical point.

    Every sample must keep 1 - Q'Q'''/Q''^2 above half of
    (99/100)/(d0 - 1) * (1 - slack).
    """
    if d0 < 2:
        raise PreconditionError("hbound_check needs d0 >= 2")
    rng = np.random.default_rng(seed)
    xs = _annulus(rng, *xi_range, samples)
    es = _annulus(rng, *eta_range, samples)
    gaps, dx, de = [], [], []
    skipped = 0
    for xi, eta in zip(xs, es):
        cps = [c for c in critical_points(Q, xi, eta) if not c.degenerate]
        if not cps:
            skipped += 1
            continue
        for c in cps:
            dp = dual_from_tc(Q, xi, eta, c.t)
            gaps.append(1.0 - dp.ratio)
            dx.append(abs(dp.dH_dxi))
            de.append(abs(dp.dH_deta))
    thr = 0.99 / (d0 - 1) * (1.0 - slack)
    if not gaps:
        return HBoundReport(d0, samples, 0, skipped, thr, math.nan, math.nan, math.nan,
                            math.nan, math.nan, 0, False)
    gaps = np.array(gaps)
    return HBoundReport(d0, samples, len(gaps), skipped, thr, float(gaps.min()), float(min(dx)),
                        float(max(dx)), float(min(de)), float(max(de)), int((gaps < thr).sum()),
                        bool(np.all(gaps > thr / 2)))


def mixed_derivative_probe(Q: RealPoly, pair: AdmissiblePair | None, alpha_list, samples: int = 200,
                           seed: int = 0, m0: int | None = None, xi_range=(1.0, 2.0), eta_range=(1.0, 2.0)) -> dict:
    """Finite-difference mixed derivative of Psi(xi, eta) - Psi(xi + 2^-m0 alpha, eta - alpha).

    Samples whose shifted point or stencil has no unique critical point are
    skipped and counted. The closed-form value H(xi, eta) - H(shifted) is
    reported alongside.
    """
    if pair is not None and pair.d0 < 2:
        raise PreconditionError("mixed_derivative_probe needs d0 >= 2")
    if m0 is None:
        if pair is None:
            raise PreconditionError("need a pair or an explicit m0")
        m0 = pair.m0
    shift = math.ldexp(1.0, -m0)
    rng = np.random.default_rng(seed)
    xs = _annulus(rng, *xi_range, samples)
    es = _annulus(rng, *eta_range, samples)
    rows = []
    for alpha in alpha_list:
        vals, closed, skipped = [], [], 0
        for xi, eta in zip(xs, es):
            xi2, eta2 = xi + shift * alpha, eta - alpha
            try:
                a = dual_phase(Q, xi, eta)
                b = dual_phase(Q, xi2, eta2)
                if a is None or b is None:
                    raise UnresolvedError("no critical point")
                m_a = fd_dual_derivatives(Q, xi, eta)[1]
                m_b = fd_dual_derivatives(Q, xi2, eta2)[1] if alpha != 0 else m_a
            except (UnresolvedError, PreconditionError):
                skipped += 1
                continue
            vals.append(abs(m_a - m_b))
            closed.append(abs(a.H - b.H))
        row = {"alpha": float(alpha), "used": len(vals), "skipped": skipped,
               "min": float(min(vals)) if vals else math.nan,
               "min_closed_form": float(min(closed)) if closed else math.nan,
               "max_fd_vs_closed": float(max(abs(u - v) for u, v in zip(vals, closed))) if vals else math.nan}
        row["c_probe"] = row["min"] / alpha if alpha else math.nan
        rows.append(row)
    pos = [r for r in rows if r["alpha"] > 0 and r["used"] and r["min"] > 0]
    trend = None
    if len(pos) >= 3:
        trend = fit_decay(np.log2([r["alpha"] for r in pos]), [r["min"] for r in pos]).slope
    return {"m0": m0, "rows": rows, "loglog_slope": trend}


# ---------------------------------------------------------------- Hormander probe

class Phase2D:
    """A real phase phi(x, y) on a rectangle, with its mixed derivative."""

    def value(self, x, y):
        raise NotImplementedError

    def mixed(self, x, y):
        h = 1e-4
        return (self.value(x + h, y + h) - self.value(x + h, y - h) - self.value(x - h, y + h)
                + self.value(x - h, y - h)) / (4 * h * h)


class ProductPhase(Phase2D):
    """phi(x, y) = x y."""

    def value(self, x, y):
        return x * y

    def mixed(self, x, y):
        return np.ones(np.broadcast(x, y).shape)


class DualPhaseField(Phase2D):
    """Psi(xi, eta) evaluated on arrays through a table of t_c against r = -xi/eta.

    t_c solves Q'(t) = r, so one monotone inversion per table node suffices.
    Linear interpolation is enough because Psi is stationary in t_c.
    """

    def __init__(self, Q: RealPoly, bracket, r_range, nodes: int = 1 << 14):
        self.Q = Q
        dQ = Q.derivative()
        lo, hi = r_range
        self.r = np.linspace(lo, hi, nodes)
        self.t = np.array([invert_monotone(dQ, float(r), bracket) for r in self.r])

    def tc(self, xi, eta):
        return np.interp(-xi / eta, self.r, self.t)

    def value(self, xi, eta):
        t = self.tc(xi, eta)
        return t * xi + eta * evaluate(self.Q, t)

    def mixed(self, xi, eta):
        t = self.tc(xi, eta)
        return -evaluate(self.Q, t, 1) / (eta * evaluate(self.Q, t, 2))


def dual_phase_field(Q: RealPoly, rect, bracket=CRIT_INTERVAL) -> DualPhaseField:
    (x0, x1), (y0, y1) = rect
    corners = [-x / y for x in (x0, x1) for y in (y0, y1)]
    return DualPhaseField(Q, bracket, (min(corners), max(corners)))


def _bump01(u):
    """exp(1 - 1/(1 - s^2)) with s = 2u - 1, zero outside (0, 1); peak value 1."""
    s = 2 * np.asarray(u, dtype=float) - 1
    out = np.zeros_like(s)
    inside = np.abs(s) < 1
    out[inside] = np.exp(1 - 1 / (1 - s[inside] ** 2))
    return out


def _operator(phase: Phase2D, rect, lam: float, ppw: float):
    (x0, x1), (y0, y1) = rect
    gx = np.linspace(x0, x1, 65)
    gy = np.linspace(y0, y1, 65)
    X, Y = np.meshgrid(gx, gy, indexing="ij")
    h = 1e-6
    dx = np.abs((phase.value(X + h, Y) - phase.value(X - h, Y)) / (2 * h)).max()
    dy = np.abs((phase.value(X, Y + h) - phase.value(X, Y - h)) / (2 * h)).max()
    nx = max(32, math.ceil(ppw * lam * dx * (x1 - x0) / (2 * math.pi)))
    ny = max(32, math.ceil(ppw * lam * dy * (y1 - y0) / (2 * math.pi)))
    hx, hy = (x1 - x0) / nx, (y1 - y0) / ny
    xs = x0 + hx * (np.arange(nx) + 0.5)
    ys = y0 + hy * (np.arange(ny) + 0.5)
    ax = _bump01((xs - x0) / (x1 - x0))
    ay = _bump01((ys - y0) / (y1 - y0))
    A = np.empty((nx, ny), dtype=np.complex64)
    block = max(1, (1 << 22) // ny)
    for s in range(0, nx, block):
        e = min(nx, s + block)
        ph = phase.value(xs[s:e, None], ys[None, :])
        A[s:e] = (np.exp(1j * np.fmod(lam * ph, 2 * np.pi)) * (ax[s:e, None] * ay[None, :] * math.sqrt(hx * hy)))
    return A


def hormander_decay_probe(phase: Phase2D, rect, lambda_list, trials: int = 4, seed: int = 0,
                          power_iters: int = 20, ppw: float = 3.0) -> DecayFit:
    """Lower estimate of the norm of T_lam f(x) = int exp(i lam phi(x, y)) a(x, y) f(y) dy.

    For each trial a random unit f is refined by ``power_iters`` steps of
    power iteration on T*T; the trial value is |<T f, g>| with g = Tf/|Tf|.
    The max over trials per lambda is fitted against log2 lambda.
    """
    (x0, x1), (y0, y1) = rect
    gx, gy = np.meshgrid(np.linspace(x0, x1, 33), np.linspace(y0, y1, 33), indexing="ij")
    H = phase.mixed(gx, gy)
    if not (np.all(H > 0) or np.all(H < 0)):
        raise PreconditionError("mixed derivative of the phase vanishes or changes sign on the rectangle")
    maxima, sizes = [], []
    for lam in lambda_list:
        A = _operator(phase, rect, float(lam), ppw)
        sizes.append(A.shape)
        best = 0.0
        for trial in range(trials):
            rng = np.random.default_rng([seed, int(lam), trial])
            f = (rng.standard_normal(A.shape[1]) + 1j * rng.standard_normal(A.shape[1])).astype(np.complex64)
            f /= np.linalg.norm(f)
            for _ in range(power_iters):
                f = A.conj().T @ (A @ f)
                f /= np.linalg.norm(f)
            best = max(best, float(np.linalg.norm(A @ f)))
        maxima.append(best)
        del A
    fit = fit_decay(np.log2(np.asarray(lambda_list, dtype=float)), maxima)
    fit.notes.update(maxima=maxima, grid=sizes, trials=trials, power_iters=power_iters,
                     H_range=(float(H.min()), float(H.max())))
    return fit


# ---------------------------------------------------------------- Case III structure

def _fpoly_mul(a, b):
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] += x * y
    return out


def _fpoly_add(a, b):
    n = max(len(a), len(b))
    return [(a[i] if i < len(a) else 0) + (b[i] if i < len(b) else 0) for i in range(n)]


def _fpoly_deriv(a):
    return [a[i] * i for i in range(1, len(a))] or [Fraction(0)]


def _fdegree(a):
    for i in range(len(a) - 1, -1, -1):
        if a[i] != 0:
            return i
    return -1


def _feval(a, t):
    acc = Fraction(0)
    for c in reversed(a):
        acc = acc * t + c
    return acc


def case3_polynomial(Q: RealPoly, b1: int) -> tuple:
    """Exact coefficients of the Case III expression as a polynomial in t_c.

    With Q = kappa t + R and B = 2^-b1, rho = R'(t_c):
        -2 (rho + kappa - B/2) R''^2 + (rho + kappa)(rho + kappa - B) R'''.
    For kappa = 1 this is the expression in the structure claim.
    """
    kappa = Fraction(Q.coeffs[1])
    B = Fraction(1, 2 ** b1) if b1 >= 0 else Fraction(2 ** -b1)
    R = [Fraction(c) for c in Q.coeffs]
    R[1] = Fraction(0)
    rho = _fpoly_deriv(R)
    r2 = _fpoly_deriv(rho)
    r3 = _fpoly_deriv(r2)
    term1 = _fpoly_mul([-2 * x for x in _fpoly_add(rho, [kappa - B / 2])], _fpoly_mul(r2, r2))
    rk = _fpoly_add(rho, [kappa])
    term2 = _fpoly_mul(_fpoly_mul(rk, _fpoly_add(rho, [kappa - B])), r3)
    return _fpoly_add(term1, term2), kappa, B, R


def _mp_psi(Rc, kappa, xi, eta, t0, eps):
    """Psi at (xi, eta) for Q = kappa t + R, with t_c found by Newton from t0."""
    r1 = [Rc[i] * i for i in range(1, len(Rc))]
    r2 = [r1[i] * i for i in range(1, len(r1))]

    def ev(c, t):
        acc = mpmath.mpf(0)
        for x in reversed(c):
            acc = acc * t + x
        return acc

    target = -xi / eta - kappa
    t = t0
    for _ in range(200):
        step = (ev(r1, t) - target) / ev(r2, t)
        t -= step
        if abs(step) < eps:
            break
    else:
        raise UnresolvedError("Newton failed for t_c")
    return t * xi + eta * (kappa * t + ev(Rc, t))


@dataclass
class Claim45Report:
    d: int
    degree: int
    expected_degree: int
    leading: float
    leading_predicted: float
    leading_ratio: float
    exact_sign_changes: int
    numeric_sign_changes: int
    real_roots_in_interval: int
    neighborhoods: list
    floor: float
    max_rel_mismatch: float
    grid: int
    annulus_offset: tuple
    ok: bool
    notes: dict = field(default_factory=dict)


def claim45_check(p: Polynomial, pair: AdmissiblePair, grid: int = 256, eta: float = 1.0,
                  max_refine: int = 4) -> Claim45Report:
    """Degree, leading coefficient and sign structure of the Case III expression.

    The symbolic part is exact. The numeric part evaluates
    2^-b1 Psi_xixieta - Psi_xietaeta by finite differences in high precision
    at points whose critical point runs over a grid of (1/2, 2), then counts
    sign changes.
    """
    if pair.d0 != 1:
        raise PreconditionError("claim45_check needs a pair with d0 = 1")
    Q = normalize_Q(p, pair.j, pair.ell, pair.b1)
    d = p.d
    poly, kappa, B, R = case3_polynomial(Q, pair.b1)
    deg = _fdegree(poly)
    c = R[d]
    pred = -Fraction(d ** 4 * (d - 1)) * c ** 3
    lead = poly[deg] if deg >= 0 else Fraction(0)
    ratio = float(abs(lead / pred)) if pred != 0 else math.inf
    fl = np.array([float(x / lead) for x in poly[: deg + 1]]) if deg > 0 else np.array([1.0])
    roots = np.roots(fl[::-1]) if deg > 0 else np.array([])
    real_in = int(sum(1 for z in roots if abs(z.imag) <= 1e-9 * max(1, abs(z)) and 0.5 < z.real < 2.0))

    q0 = pair.q0 if pair.q0 is not None else 0
    dps = 40 + math.ceil(0.302 * 3 * abs(q0))
    r2 = _fpoly_deriv(_fpoly_deriv(R))
    for attempt in range(max_refine + 1):
        ts = [Fraction(1, 2) + Fraction(3 * (2 * k + 1), 4 * grid) for k in range(grid)]
        exact_vals = [_feval(poly, t) for t in ts]
        with mpmath.workdps(dps):
            Rc = [mpmath.mpf(x.numerator) / x.denominator for x in R]
            kap = mpmath.mpf(kappa.numerator) / kappa.denominator
            Bm = mpmath.mpf(B.numerator) / B.denominator
            et = mpmath.mpf(eta)
            eps = mpmath.mpf(10) ** (-dps + 8)
            num, off = [], []
            for t in ts:
                tm = mpmath.mpf(t.numerator) / t.denominator
                r2v = mpmath.mpf(_feval(r2, t).numerator) / _feval(r2, t).denominator
                rho = sum(Rc[i] * i * tm ** (i - 1) for i in range(1, len(Rc)))
                xi = -et * (kap + rho)
                h = mpmath.mpf("1e-6") * abs(et * r2v)
                P = {(a, b): _mp_psi(Rc, kap, xi + a * h, et + b * h, tm, eps)
                     for a in (-1, 0, 1) for b in (-1, 0, 1)}
                dxx = [(P[(1, b)] - 2 * P[(0, b)] + P[(-1, b)]) / h ** 2 for b in (-1, 0, 1)]
                dyy = [(P[(a, 1)] - 2 * P[(a, 0)] + P[(a, -1)]) / h ** 2 for a in (-1, 0, 1)]
                E = Bm * (dxx[2] - dxx[0]) / (2 * h) - (dyy[2] - dyy[0]) / (2 * h)
                num.append(E * et ** 2 * r2v ** 3)
                off.append(float(mpmath.log(abs(xi + kap * et), 2)) - q0)
        signs = [mpmath.sign(v) for v in num]
        changes = [k for k in range(grid - 1) if signs[k] * signs[k + 1] < 0]
        if any(b - a == 1 for a, b in zip(changes, changes[1:])):
            grid *= 2
            continue
        break
    else:
        raise UnresolvedError(f"sign changes not isolated after {max_refine} refinements")
    exact_changes = sum(1 for k in range(grid - 1) if exact_vals[k] * exact_vals[k + 1] < 0)
    near = set()
    hoods = []
    for k in changes:
        lo_i, hi_i = max(0, k - 1), min(grid - 1, k + 2)
        near.update(range(lo_i, hi_i + 1))
        t_lo, t_hi = float(ts[lo_i]), float(ts[hi_i])
        ratios = sorted(-(float(kappa) + float(evaluate(RealPoly(tuple(float(x) for x in R)), t, 1)))
                        for t in (t_lo, t_hi))
        hoods.append({"t": (t_lo, t_hi), "xi_over_eta": tuple(ratios)})
    off_vals = [abs(float(num[k])) for k in range(grid) if k not in near]
    floor = min(off_vals) if off_vals else math.nan
    mism = 0.0
    scale = max(abs(float(v)) for v in exact_vals) or 1.0
    for v_num, v_ex in zip(num, exact_vals):
        mism = max(mism, abs(float(v_num) - float(v_ex)) / scale)
    expected = 3 * d - 5
    ok = (deg == expected and 2 ** -4 <= ratio <= 2 ** 4 and len(changes) <= expected
          and exact_changes <= expected and (floor > 0 if off_vals else True))
    return Claim45Report(d, deg, expected, float(lead), float(pred), ratio, exact_changes, len(changes),
                         real_in, hoods, floor, mism, grid, (min(off), max(off)), ok,
                         {"kappa": float(kappa), "q0": q0, "dps": dps})
