import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polyroth.errors import PreconditionError
from polyroth.mollify import GridFunction
from polyroth.patterns import adversarial_sets, pattern_measure, rescale_instance
from polyroth.poly import Polynomial
from polyroth.scales import ScaleParams, build_admissible
from polyroth.trilinear import (bilinear_decay_probe, decompose_I, lambda0_levels, localized_form,
                                pigeonhole_demo, trilinear_form)

SQ = Polynomial.from_list([0, 1])


def random_f(rng, n=10, cells=64, lo=0.0, hi=1.0):
    v = np.repeat(rng.uniform(0, 1, cells), (1 << n) // cells)
    x = (np.arange(1 << n) + 0.5) / (1 << n)
    v[(x < lo) | (x > hi)] = 0
    return GridFunction(n, v)


def test_closed_forms_at_n12():
    # oracles: int_0^1 (1 - t) dt = 1/2 and int_0^(1/2) (1/2 - t) dt = 1/8
    assert trilinear_form(GridFunction(12, np.ones(4096)), SQ, 0, 12).value == pytest.approx(0.5, abs=1e-3)
    half = GridFunction.indicator([(0, 0.5)], 12)
    assert trilinear_form(half, SQ, 0, 12).value == pytest.approx(0.125, abs=1e-3)
    assert trilinear_form(GridFunction(10, np.zeros(1024)), SQ, 0, 10).value == 0.0


def test_callable_input_and_range_check():
    r = trilinear_form(lambda x: np.ones_like(x), SQ, 0, 10)
    assert 0 <= r.value <= 1 and not r.unresolved
    with pytest.raises(PreconditionError):
        trilinear_form(GridFunction(8, np.full(256, 2.0)), SQ, 0, 8)


def test_monotone_under_pointwise_increase():
    prev = -1.0
    for b in (0.2, 0.4, 0.6, 0.8, 1.0):
        v = trilinear_form(GridFunction.indicator([(0.1, b)], 11), SQ, 0, 11).value
        assert v >= prev
        prev = v


def test_localized_kernel_mass():
    rng = np.random.default_rng(3)
    one = lambda x: np.ones_like(x)
    for _ in range(5):
        f = random_f(rng, lo=0.125, hi=0.875)
        assert localized_form(f, one, one, SQ, 0, 4) == pytest.approx(f.integral(), rel=1e-6)


def test_localized_tends_to_one():
    one = GridFunction(14, np.ones(1 << 14))
    vals = [localized_form(one, one, one, SQ, 0, ell) for ell in (4, 8, 12)]
    assert vals[0] < vals[1] < vals[2] and vals[2] == pytest.approx(1.0, abs=1e-3)


def test_lower_bound_chain():
    # tau peaks above 1, so the chain carries a factor max(tau)
    rng = np.random.default_rng(4)
    for _ in range(5):
        f = random_f(rng)
        for ell in (1, 3, 5):
            d = decompose_I(f, SQ, 0, 1, ell, ell)
            assert d["chain_lhs_scaled"] >= d["localized"]


def test_decompose_split_identity_for_constant():
    one = GridFunction(10, np.ones(1024))
    d = decompose_I(one, SQ, 0, 2, 4, 6)
    assert d["split_error"] <= 1e-6
    assert d["I1"] + d["I2"] + d["I3"] == pytest.approx(d["localized"], abs=1e-6)


def test_decompose_bounds_on_random_f():
    rng = np.random.default_rng(6)
    for _ in range(50):
        f = random_f(rng)
        l1 = int(rng.integers(1, 4))
        ell = l1 + int(rng.integers(0, 3))
        l2 = ell + int(rng.integers(0, 3))
        d = decompose_I(f, SQ, 0, l1, ell, l2)
        assert d["split_error"] <= 1e-9
        assert abs(d["I2"]) <= d["I2_bound"] + 1e-12
        assert d["I41"] <= d["I41_bound"]


def test_scaling_reduction_matches_pattern_measure():
    for j in (0, 1, 2):
        N = 2.0 ** (2 * j)
        S = adversarial_sets("random", 0.5, N, seed=j)
        Sp, jj, _, _ = rescale_instance(S, SQ)
        assert jj == j
        f = GridFunction.indicator(Sp.intervals, 13)
        lhs = pattern_measure(S, SQ, nt=1 << 14)
        rhs = N ** 1.5 * trilinear_form(f, SQ, j, 13).value
        assert lhs == pytest.approx(rhs, rel=1e-3)


def first_pair():
    return build_admissible(SQ, ScaleParams(), count=1).pairs[0]


def test_bilinear_probe_deterministic_and_bounded():
    pair = first_pair()
    a = bilinear_decay_probe(SQ, pair, [4, 5, 6], trials=16, seed=3)
    b = bilinear_decay_probe(SQ, pair, [4, 5, 6], trials=16, seed=3)
    assert a.notes["maxima"] == b.notes["maxima"]
    assert a.notes["regime"] == "bounded" and a.notes["bounded_ok"]
    assert max(a.notes["maxima"]) <= 1.0


def test_bilinear_probe_preconditions():
    pair = first_pair()
    with pytest.raises(PreconditionError):
        bilinear_decay_probe(SQ, pair, [4, 5, 6], trials=8)
    with pytest.raises(PreconditionError):
        bilinear_decay_probe(SQ, pair, [4, 5, 9], trials=16, n=10)
    with pytest.raises(PreconditionError):
        bilinear_decay_probe(SQ, pair, [4, 5], trials=16)


def test_lambda0_levels_avoid_bad_scales():
    p = Polynomial.from_list([1, 1])
    levels = lambda0_levels(p, 0, 5)
    assert levels == sorted(levels) and all(l >= 11 for l in levels)


def test_pigeonhole_constant_fires_first_step():
    d = pigeonhole_demo(GridFunction(12, np.ones(4096)), SQ, 0, K=4)
    assert d["fired"] == 0
    assert d["I"] >= d["certified_lower_bound"]
    assert d["energy"] <= d["energy_bound"]


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_pigeonhole_random_quarter_density(seed):
    rng = np.random.default_rng(seed)
    v = np.zeros(4096)
    cells = rng.choice(64, 16, replace=False)
    for c in cells:
        v[c * 64:(c + 1) * 64] = 1.0
    d = pigeonhole_demo(GridFunction(12, v), SQ, 0, K=6)
    assert d["eps"] == pytest.approx(0.25)
    assert d["fired"] is not None
    assert d["energy"] <= d["energy_bound"]
