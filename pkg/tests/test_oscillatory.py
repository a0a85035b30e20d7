import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polyroth.errors import PreconditionError, UnresolvedError
from polyroth.mollify import Bump
from polyroth.oscillatory import (ProductPhase, claim45_check, critical_points, dual_phase, fd_dual_derivatives,
                                  hbound_check, hormander_decay_probe, main_amplitude, mixed_derivative_probe,
                                  oscillatory_integral, partition_of_unity, psi_value, stationary_compare)
from polyroth.poly import Polynomial, RealPoly
from polyroth.scales import AdmissiblePair, ScaleParams, build_admissible

SQ = RealPoly((0.0, 0.0, 1.0))
TAU1 = 1.04525534187930747   # tau(1), mpmath oracle
# mpmath.quad at 30 digits of exp(i 1e4 (t^2 - 2t)) tau(t) over (1/2, 2), split at t = 1
MP_VALUE = complex(-0.0164788960233790679, -0.00846660637128071096)


def test_critical_point_examples():
    assert [c.t for c in critical_points(SQ, -2, 1)] == [pytest.approx(1.0, abs=1e-14)]
    assert critical_points(SQ, 1, 1) == []
    Q = RealPoly((0.0, 0.125, 0.0, 1.0))
    cps = critical_points(Q, -4, 1)
    assert len(cps) == 1 and cps[0].t == pytest.approx(math.sqrt(31 / 24), abs=1e-13)
    with pytest.raises(PreconditionError):
        critical_points(SQ, 1, 0)


def test_degenerate_point_flagged_and_refused():
    # Q' = 3(t - 1)^2 + 3 vanishes to second order in xi + Q'(t) at t = 1 when xi = -3
    Q = RealPoly((0.0, 6.0, -3.0, 1.0))
    cps = critical_points(Q, -3, 1)
    assert any(c.degenerate and abs(c.t - 1) < 1e-6 for c in cps)
    with pytest.raises(PreconditionError):
        dual_phase(Q, -3, 1)
    with pytest.raises(PreconditionError):
        stationary_compare(Q, -3, 1, [16.0, 32.0, 64.0])


def test_dual_phase_quadratic_closed_forms():
    dp = dual_phase(SQ, -2, 1)
    assert (dp.psi, dp.dpsi_dxi, dp.H) == (pytest.approx(-1), pytest.approx(1), pytest.approx(-1))
    dp = dual_phase(SQ, -2, 2)
    assert dp.t_c == pytest.approx(0.5)
    assert dp.psi == pytest.approx(-0.5) and dp.H == pytest.approx(-0.25)
    assert dual_phase(SQ, 1, 1) is None
    with pytest.raises(UnresolvedError):
        psi_value(SQ, 1, 1)


@st.composite
def configs(draw):
    d = draw(st.integers(2, 5))
    co = [draw(st.floats(-1, 1)) for _ in range(d - 1)] + [1.0]
    Q = RealPoly(tuple([0.0] + co))
    t = draw(st.floats(0.6, 1.9))
    eta = draw(st.floats(0.5, 2)) * draw(st.sampled_from([-1, 1]))
    return Q, -eta * float(Q.derivative()(t)), eta


@settings(max_examples=200, deadline=None)
@given(configs())
def test_closed_forms_match_finite_differences(cfg):
    Q, xi, eta = cfg
    try:
        dp = dual_phase(Q, xi, eta)
    except PreconditionError:
        return
    if dp is None or abs(eta * float(Q.derivative().derivative()(dp.t_c))) < 1e-3:
        return
    if not 0.55 < dp.t_c < 1.95:
        return
    g, m = fd_dual_derivatives(Q, xi, eta)
    assert g == pytest.approx(dp.t_c, rel=1e-6, abs=1e-9)
    assert m == pytest.approx(dp.H, rel=1e-6, abs=1e-9)


@settings(max_examples=50, deadline=None)
@given(configs(), st.integers(256, 4096))
def test_psi_stable_under_bracket_choice(cfg, scan):
    Q, xi, eta = cfg
    base = critical_points(Q, xi, eta)
    if len(base) != 1 or base[0].degenerate or not 0.6 < base[0].t < 1.9:
        return
    other = critical_points(Q, xi, eta, (0.5 - 1e-3, 2.0 + 1e-3), scan=scan)
    assert len(other) == 1
    psi = lambda t: t * xi + eta * float(Q(t))
    assert abs(psi(other[0].t) - psi(base[0].t)) <= 1e-9


def test_integral_matches_mpmath_oracle():
    r = oscillatory_integral(SQ, -2, 1, 1e4)
    assert abs(r.value - MP_VALUE) <= 1e-8 / math.sqrt(1e4)
    assert abs(r.value) == pytest.approx(0.0185266682810361, rel=1e-9)


def test_integral_at_zero_frequency_is_kernel_mass():
    assert oscillatory_integral(SQ, -2, 1, 0.0).value == pytest.approx(1.0, abs=1e-10)
    with pytest.raises(PreconditionError):
        oscillatory_integral(SQ, -2, 1, -1.0)


def test_nonstationary_integral_is_tiny():
    assert abs(oscillatory_integral(SQ, 0, 1, 1e4).value) <= 1e-6


def test_main_term_relative_deviation():
    lam = 1e4
    cp = critical_points(SQ, -2, 1)[0]
    main = lam ** -0.5 * abs(main_amplitude(cp))
    assert abs(abs(oscillatory_integral(SQ, -2, 1, lam).value) - main) <= 0.05 * main


def test_main_term_at_two_to_sixteen():
    cp = critical_points(SQ, -2, 1)[0]
    val = 2.0 ** -8 * abs(main_amplitude(cp))
    assert val == pytest.approx(2.0 ** -8 * math.sqrt(math.pi) * TAU1, rel=1e-14)
    assert val == pytest.approx(0.00723697990583414, rel=1e-12)


def test_stationary_remainder_decays_like_inverse_lambda():
    rows, fit = stationary_compare(SQ, -2, 1, [2.0 ** k for k in range(8, 15)])
    assert -1.3 <= fit.slope <= -0.9
    assert fit.notes["critical_points"] == [pytest.approx(1.0)]
    for r in rows:
        assert abs(r.remainder) <= fit.notes["R_cap"] / r.lam * (1 + 1e-12)


def test_nonstationary_decay_is_fast():
    _, fit = stationary_compare(SQ, 0, 1, [2.0 ** k for k in range(2, 12)])
    assert fit.slope <= -2


def test_partition_of_unity_sums_to_one():
    t = np.linspace(0.5, 2, 2001)
    for pts in ([1.0], [0.7, 1.6], [0.6, 1.0, 1.1, 1.9]):
        parts = partition_of_unity(pts)
        total = sum(chi(t) for chi in parts)
        assert np.allclose(total, 1.0, atol=1e-14)
        for p, chi in zip(pts, parts):
            assert chi(p) == pytest.approx(1.0)


def test_hbound_examples():
    rep = hbound_check(SQ, 2, samples=200)
    assert rep.min_ratio_gap == pytest.approx(1.0) and rep.ok
    rep = hbound_check(RealPoly((0.0, 0.0, 0.0, 1.0)), 3, samples=400)
    # Q'Q'''/Q''^2 = (3t^2)(6)/(6t)^2 = 1/2 for every t
    assert rep.used > 0 and rep.min_ratio_gap == pytest.approx(0.5, abs=1e-12)
    assert rep.ok and rep.below_threshold == 0
    with pytest.raises(PreconditionError):
        hbound_check(SQ, 1)


def test_hbound_eta_derivative_positive_over_many_samples():
    rep = hbound_check(RealPoly((0.0, 2.0 ** -9, 1.0)), 2, samples=10_000, seed=7)
    assert rep.used > 0 and rep.min_abs_dH_deta > 0


def test_mixed_probe_zero_alpha_and_linear_trend():
    out = mixed_derivative_probe(SQ, None, [0.0], samples=20, m0=31)
    assert out["rows"][0]["min"] == 0.0
    out = mixed_derivative_probe(SQ, None, [0.05, 0.1, 0.2, 0.4], samples=40, m0=31)
    assert 0.8 <= out["loglog_slope"] <= 1.2
    for r in out["rows"]:
        assert r["max_fd_vs_closed"] <= 1e-5
    pair = build_admissible(Polynomial.from_list([1, 1]), ScaleParams(), count=1).pairs[0]
    with pytest.raises(PreconditionError):
        mixed_derivative_probe(SQ, pair, [0.1])


def test_hormander_trivial_bound_and_sign_check():
    fit = hormander_decay_probe(ProductPhase(), ((0, 1), (0, 1)), [1, 2, 4], trials=2)
    assert max(fit.notes["maxima"]) <= 1.0
    with pytest.raises(PreconditionError):
        hormander_decay_probe(ProductPhase(), ((-1, 1), (-1, 1)), [1, 2], trials=1)


def test_claim45_symbolic_on_built_pairs():
    for co in ([1, 1], [1, 0, 1], [1, 0, 0, 1]):
        p = Polynomial.from_list(co)
        pairs = [q for q in build_admissible(p, ScaleParams(), count=2).pairs if q.d0 == 1]
        rep = claim45_check(p, pairs[0], grid=128)
        assert rep.degree == rep.expected_degree == 3 * p.d - 5
        assert 2.0 ** -4 <= rep.leading_ratio <= 2.0 ** 4
        assert rep.real_roots_in_interval <= 3 * p.d - 5
        assert rep.ok


def test_claim45_locates_the_linear_root():
    # here Q = -1.5 t + t^2 / 2 and the expression is -2 (t - 7/4), one root at t = 7/4
    pair = AdmissiblePair(j=0, ell=0, d=2, d0=1, m0=1, d1=2, b1=1, q0=-1)
    rep = claim45_check(Polynomial.from_list([-3, 1]), pair)
    assert rep.leading == -2.0 and rep.exact_sign_changes == 1 == rep.numeric_sign_changes
    lo, hi = rep.neighborhoods[0]["t"]
    assert lo <= 1.75 <= hi
    assert rep.floor > 0 and rep.ok
    with pytest.raises(PreconditionError):
        claim45_check(Polynomial.from_list([0, 1]), AdmissiblePair(0, 30, 2, 2, 30))
