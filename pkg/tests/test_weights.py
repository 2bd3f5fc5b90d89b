import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.polynomial import Polynomial

from carleman_lab.errors import ConfigurationError, ConstructionError, DomainError
from carleman_lab.grid import SpatialGrid, SubIntervalSet, TimeGrid
from carleman_lab.weights import (BetaProfile, CarlemanConfig, WeightSet, build_beta,
                                  build_cutoff, check_weight_bounds, eval_eta, eval_phi,
                                  eval_weighted, export_weights_csv, validate_beta)

from oracles import bisect_root, eta_decimal, phi_decimal, phi_direct, eta_direct

G = SpatialGrid(1.0, 201)
SUB = SubIntervalSet.from_tuples((0.3, 0.7), (0.45, 0.55), (0.4, 0.6))
SUB_WIDE = SubIntervalSet.from_tuples((0.2, 0.8), (0.35, 0.65), (0.3, 0.7))


def symmetric(m=2.0):
    return build_beta(G, SUB, 0.5, m)


def test_symmetric_profile():
    b = symmetric()
    x = G.x
    np.testing.assert_allclose(b.tilde(x), x * (1 - x), atol=1e-15)
    assert b.max_value == pytest.approx(0.25, abs=1e-15)
    assert b.K == pytest.approx(0.5, abs=1e-15)
    assert b.gradient(0.0) == pytest.approx(1.0) and b.gradient(1.0) == pytest.approx(-1.0)


def test_off_center_critical_point_by_bisection():
    b = build_beta(G, SUB_WIDE, 0.4, 1.5)
    root = bisect_root(lambda x: float(b.gradient(x)), 0.05, 0.95)
    assert abs(root - 0.4) <= 1e-10


def test_far_off_center_needs_recentering():
    sub = SubIntervalSet.from_tuples((0.1, 0.5), (0.2, 0.3), (0.15, 0.4))
    with pytest.raises(ConstructionError, match="recenter"):
        build_beta(G, sub, 0.25, 2.0)


def test_config_invariants():
    with pytest.raises(ConfigurationError):
        CarlemanConfig(0.5, 2.0, 2.0, SUB, 0.5)
    with pytest.raises(ConfigurationError):
        CarlemanConfig(1.0, 1.0, 2.0, SUB, 0.5)
    with pytest.raises(ConfigurationError):
        CarlemanConfig(1.0, 2.0, 1.0, SUB, 0.5)
    with pytest.raises(ConfigurationError):
        CarlemanConfig(1.0, 2.0, 2.0, SUB, 0.6)


def test_validate_symmetric_passes():
    sub = SubIntervalSet.from_tuples((0.2, 0.8), (0.4, 0.6), (0.3, 0.7))
    rep = validate_beta(build_beta(G, sub, 0.5, 2.0), sub, G)
    assert rep.passed
    assert rep.min_gradient_outside == pytest.approx(0.2, abs=1e-12)


def test_validate_off_center_passes():
    rep = validate_beta(build_beta(G, SUB_WIDE, 0.4, 2.0), SUB_WIDE, G)
    assert rep.passed


def test_validate_critical_point_outside_fails():
    sub = SubIntervalSet.from_tuples((0.6, 0.95), (0.7, 0.9), (0.65, 0.92))
    b = BetaProfile(Polynomial([0.0, 1.0, -1.0]), 1.0, 2.0)
    rep = validate_beta(b, sub, G)
    assert not rep.gradient_bounded_below and not rep.passed


def test_validate_zero_profile_fails():
    rep = validate_beta(BetaProfile(Polynomial([0.0]), 1.0, 2.0), SUB, G)
    assert not rep.interior_positive and not rep.passed


def test_lambda_zero_limits():
    w = WeightSet(symmetric(), 0.0, 3.0, 0.0, 1.0)
    x = G.x
    assert np.all(w.eta(x, 0.3) == 0.0)
    np.testing.assert_allclose(w.phi(x, 0.3), 1 / (0.3 * 0.7), rtol=1e-15)


def test_phi_unit_denominator():
    b = symmetric()
    w = WeightSet(b, 1.0, 2.0, 0.0, 2.0)
    assert eval_phi(0.0, 1.0, w) == pytest.approx(np.exp(b.K), rel=1e-15)


def test_high_precision_oracle():
    w = WeightSet(symmetric(), 2.0, 5.0, 0.0, 2.0)
    assert float(eval_eta(0.5, 0.5, w)) == pytest.approx(float(eta_decimal(0.5, 0.5, 2, 2, 0, 2)),
                                                         rel=1e-14)
    assert float(eval_phi(0.5, 0.5, w)) == pytest.approx(float(phi_decimal(0.5, 0.5, 2, 2, 0, 2)),
                                                         rel=1e-14)


def test_endpoints_infinite_and_outside_rejected():
    w = WeightSet(symmetric(), 1.0, 2.0, 0.0, 1.0)
    assert np.isinf(eval_phi(0.5, 0.0, w)) and np.isinf(eval_eta(0.5, 1.0, w))
    with pytest.raises(DomainError):
        eval_phi(0.5, 1.5, w)


@pytest.mark.parametrize("k", [-1, 0, 1, 3, 5, 7])
def test_weighted_vanishes_at_endpoints(k):
    w = WeightSet(symmetric(), 2.0, 8.0, 0.0, 1.0)
    assert eval_weighted(0.3, 0.0, k, 8.0, w) == 0.0
    assert eval_weighted(0.3, 1.0, k, 8.0, w) == 0.0


def test_weighted_rejects_unsupported_power():
    w = WeightSet(symmetric(), 2.0, 8.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        eval_weighted(0.3, 0.5, 2, 8.0, w)


def test_weighted_s_zero_k_zero_is_one():
    w = WeightSet(symmetric(), 2.0, 0.0, 0.0, 1.0)
    tt, xx = np.meshgrid(np.linspace(0.01, 0.99, 9), G.x)
    np.testing.assert_array_equal(w.weighted(xx, tt, 0), 1.0)


def test_weighted_matches_direct_product():
    b = symmetric()
    w = WeightSet(b, 1.0, 2.0, 0.0, 1.0)
    for x, t in [(0.2, 0.3), (0.5, 0.5), (0.9, 0.7)]:
        direct = np.exp(-2 * 2.0 * eta_direct(x, t, 1.0, b, b.K, 0, 1)) \
            * phi_direct(x, t, 1.0, b, 0, 1) ** 3
        assert float(eval_weighted(x, t, 3, 2.0, w)) == pytest.approx(direct, rel=1e-12)


@given(st.floats(0.0, 30.0), st.floats(0.0, 30.0), st.floats(0.01, 0.99), st.floats(0.0, 1.0))
def test_weighted_decreasing_in_s(s1, s2, t, x):
    w = WeightSet(symmetric(), 2.0, 1.0, 0.0, 1.0)
    lo, hi = min(s1, s2), max(s1, s2)
    assert eval_weighted(x, t, 3, hi, w) <= eval_weighted(x, t, 3, lo, w)


configs = st.fixed_dictionaries({
    "x0": st.floats(0.46, 0.54), "m": st.floats(1.05, 4.0), "lam": st.floats(1.0, 5.0),
    "s": st.floats(1.01, 40.0), "t0": st.floats(0.0, 1.0), "width": st.floats(0.2, 2.0),
})


@given(configs)
def test_random_configs_eta_positive_and_midpoint_bound(c):
    sg, tg = SpatialGrid(1.0, 41), TimeGrid(c["t0"], c["t0"] + c["width"], 40)
    cfg = CarlemanConfig(c["lam"], c["s"], c["m"], SUB, c["x0"])
    w = WeightSet.from_config(cfg, sg, tg)
    xx, tt = w.interior_mesh(sg, tg)
    eta = w.eta(xx, tt)
    assert np.all(eta > 0)
    e_mid = -2 * w.s * w.eta(sg.x, tg.t[tg.prime_index])
    # e^{-2 s eta(t, x)} <= e^{-2 s eta(T', x)}, compared in log space
    assert np.all(-2 * w.s * eta <= e_mid[None, :] * (1 - 1e-14) + 1e-12)


def test_cutoff_plateau_support_midpoint():
    xi = build_cutoff(SUB)
    assert np.all(xi(np.linspace(0.45, 0.55, 11)) == 1.0)
    assert np.all(xi(np.array([0.0, 0.2, 0.39, 0.61, 1.0])) == 0.0)
    assert xi(0.425) == pytest.approx(0.5, abs=1e-12)
    assert xi(0.575) == pytest.approx(0.5, abs=1e-12)


def test_cutoff_is_c2():
    xi = build_cutoff(SUB)
    # a jump would not shrink with the probe width; O(h) variation does
    for knot in (0.4, 0.45, 0.55, 0.6):
        for f in (xi, xi.derivative, xi.second_derivative):
            wide = abs(f(knot + 1e-6) - f(knot - 1e-6))
            narrow = abs(f(knot + 1e-8) - f(knot - 1e-8))
            assert narrow <= 0.02 * wide + 1e-12
    x = np.linspace(0.41, 0.44, 7)
    fd2 = (xi(x + 1e-4) - 2 * xi(x) + xi(x - 1e-4)) / 1e-8
    np.testing.assert_allclose(fd2, xi.second_derivative(x), rtol=1e-3, atol=1e-2)


def test_cutoff_requires_nesting():
    class Fake:
        omega_prime = SUB.omega
        omega_second = SUB.omega_prime
    with pytest.raises(ConfigurationError):
        build_cutoff(Fake())


def test_bounds_lambda_zero():
    tg = TimeGrid(0.0, 1.0, 400)
    rep = check_weight_bounds(WeightSet(symmetric(), 0.0, 8.0, 0.0, 1.0), G, tg)
    assert rep.dt_eta == 0.0 and rep.passed


def test_bounds_phi_constant_matches_scan():
    tg = TimeGrid(0.0, 1.0, 400)
    w = WeightSet(symmetric(), 2.0, 8.0, 0.0, 1.0)
    xx, tt = w.interior_mesh(G, tg)
    phi_min = np.min(phi_direct(xx, tt, 2.0, w.beta, 0, 1))
    rep = check_weight_bounds(w, G, tg)
    assert rep.phi_phi3 == pytest.approx(1 / (1.0**4 * phi_min**2), rel=1e-12)


def test_bounds_stable_under_time_refinement():
    w = WeightSet(symmetric(), 2.0, 8.0, 0.0, 1.0)
    a = check_weight_bounds(w, G, TimeGrid(0.0, 1.0, 400)).as_dict()
    b = check_weight_bounds(w, G, TimeGrid(0.0, 1.0, 800)).as_dict()
    for key in a:
        assert b[key] == pytest.approx(a[key], rel=0.05)


def test_export_csv(tmp_path):
    sg, tg = SpatialGrid(1.0, 5), TimeGrid(0.0, 1.0, 4)
    export_weights_csv(tmp_path / "w.csv", WeightSet(build_beta(sg, SUB, 0.5, 2.0), 1, 2, 0, 1),
                       sg, tg)
    lines = (tmp_path / "w.csv").read_text().splitlines()
    assert lines[0] == "x,t,phi,eta,w_3" and len(lines) == 26
