import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from carleman_lab.errors import PreconditionError
from carleman_lab.grid import SpaceTimeField, SpatialGrid, SubIntervalSet, TimeGrid
from carleman_lab.operators import (FunctionalBreakdown, apply_M1, apply_M2, conjugate,
                                    discrete_laplacian, eval_I, interior_laplacian,
                                    time_derivative, weighted_integral)
from carleman_lab.weights import WeightSet, build_beta

SUB = SubIntervalSet.from_tuples((0.3, 0.7), (0.45, 0.55), (0.4, 0.6))


def weights(sg, lam, s, t0=0.0, T=1.0):
    return WeightSet(build_beta(sg, SUB, 0.5, 2.0), lam, s, t0, T)


def test_laplacian_stencil():
    g = SpatialGrid(1.0, 201)
    x = g.x
    assert np.all(np.abs(discrete_laplacian(3 - 2 * x, g)[1:-1]) < 1e-9)
    np.testing.assert_allclose(discrete_laplacian(x**2, g)[1:-1], 2.0, rtol=1e-8)
    lap = discrete_laplacian(np.sin(np.pi * x), g)[1:-1]
    np.testing.assert_allclose(lap, -np.pi**2 * np.sin(np.pi * x[1:-1]), rtol=1e-3)


def test_laplacian_boundary_rows():
    g = SpatialGrid(1.0, 11)
    f = np.linspace(2, 5, 11) ** 2
    lap = discrete_laplacian(f, g)
    assert lap[0] == f[0] and lap[-1] == f[-1]
    assert interior_laplacian(f, g)[0] == 0.0


def test_time_derivative_exact_on_quadratics():
    sg, tg = SpatialGrid(1.0, 3), TimeGrid(0.0, 1.0, 10)
    f = SpaceTimeField.from_function(sg, tg, lambda x, t: t**2 + 0 * x)
    np.testing.assert_allclose(time_derivative(f).values[:, 1], 2 * tg.t, atol=1e-12)


def test_time_derivative_exponential():
    sg, tg = SpatialGrid(1.0, 3), TimeGrid(0.0, 1.0, 400)
    f = SpaceTimeField.from_function(sg, tg, lambda x, t: np.exp(t) + 0 * x)
    assert np.max(np.abs(time_derivative(f).values[:, 0] - np.exp(tg.t))) <= 1e-4


def manufactured_psi(n, nt):
    sg, tg = SpatialGrid(1.0, n), TimeGrid(0.0, 1.0, nt)
    return SpaceTimeField.from_function(sg, tg, lambda x, t: np.sin(np.pi * x) * t**2 * (1 - t)**2)


def test_zero_maps_to_zero():
    psi = manufactured_psi(21, 20).with_values(np.zeros((21, 21)))
    w = weights(psi.sgrid, 1.0, 2.0)
    assert np.all(apply_M1(psi, w).values == 0) and np.all(apply_M2(psi, w).values == 0)


def test_s_zero_limits_exact():
    psi = manufactured_psi(41, 40)
    w = weights(psi.sgrid, 3.0, 0.0)
    np.testing.assert_array_equal(apply_M1(psi, w).values,
                                  -interior_laplacian(psi.values, psi.sgrid))
    np.testing.assert_array_equal(apply_M2(psi, w).values, time_derivative(psi).values)


@given(st.floats(-10, 10), st.integers(0, 2**31 - 1))
def test_linearity(alpha, seed):
    psi1 = manufactured_psi(21, 20)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(psi1.values.shape)
    v[:, 0] = v[:, -1] = 0.0
    psi2 = psi1.with_values(v)
    w = weights(psi1.sgrid, 2.0, 4.0)
    comb = psi1.with_values(alpha * psi1.values + psi2.values)
    for op in (apply_M1, apply_M2):
        lhs = op(comb, w).values
        rhs = alpha * op(psi1, w).values + op(psi2, w).values
        scale = np.max(np.abs(op(psi1, w).values)) * (1 + abs(alpha)) + np.max(np.abs(rhs))
        assert np.max(np.abs(lhs - rhs)) <= 1e-13 * scale


def test_boundary_precondition():
    sg, tg = SpatialGrid(1.0, 11), TimeGrid(0.0, 1.0, 10)
    q = SpaceTimeField.from_function(sg, tg, lambda x, t: t + 0 * x)
    with pytest.raises(PreconditionError):
        eval_I(q, weights(sg, 1.0, 2.0))
    with pytest.raises(PreconditionError):
        apply_M1(q, weights(sg, 1.0, 2.0))


def test_refinement_oracle_M1_M2():
    # values at shared nodes converge at second order
    levels = [manufactured_psi(101, 200), manufactured_psi(201, 400), manufactured_psi(401, 800)]
    out = []
    for psi in levels:
        w = weights(psi.sgrid, 1.0, 2.0)
        fs, ft = (psi.sgrid.n - 1) // 100, psi.tgrid.nt // 200
        out.append([apply_M1(psi, w).values[::ft, ::fs], apply_M2(psi, w).values[::ft, ::fs]])
    for j in range(2):
        d1 = np.max(np.abs(out[0][j] - out[1][j]))
        d2 = np.max(np.abs(out[1][j] - out[2][j]))
        assert d2 <= d1 / 3
        assert d1 <= 1e-2 * np.max(np.abs(out[2][j]))


def test_psi_vanishes_at_window_ends():
    psi0 = manufactured_psi(21, 20)
    q = psi0.with_values(np.sin(np.pi * psi0.sgrid.x)[None, :] * np.ones((21, 1)))
    psi = conjugate(q, weights(q.sgrid, 2.0, 8.0))
    assert np.all(psi.values[0] == 0) and np.all(psi.values[-1] == 0)


def q_field(n=201, nt=400):
    sg, tg = SpatialGrid(1.0, n), TimeGrid(0.0, 1.0, nt)
    return SpaceTimeField.from_function(sg, tg, lambda x, t: np.sin(np.pi * x) * t * (1 - t))


def test_I_of_zero():
    sg, tg = SpatialGrid(1.0, 21), TimeGrid(0.0, 1.0, 20)
    I = eval_I(SpaceTimeField.zeros(sg, tg), weights(sg, 2.0, 8.0))
    assert I.term_dtlap == I.term_grad == I.term_zero == 0.0


@given(st.floats(-1e3, 1e3).filter(lambda a: abs(a) > 1e-3))
def test_I_quadratic(alpha):
    q = q_field(41, 40)
    w = weights(q.sgrid, 2.0, 8.0)
    base = eval_I(q, w)
    scaled = eval_I(q.with_values(alpha * q.values), w)
    assert scaled.total == pytest.approx(alpha**2 * base.total, rel=1e-13)


@given(st.integers(0, 2**31 - 1), st.floats(1.0, 6.0), st.floats(1.5, 40.0))
def test_I_terms_nonnegative(seed, lam, s):
    sg, tg = SpatialGrid(1.0, 21), TimeGrid(0.0, 1.0, 20)
    v = np.random.default_rng(seed).standard_normal((21, 21))
    v[:, 0] = v[:, -1] = 0.0
    I = eval_I(SpaceTimeField(sg, tg, v), weights(sg, lam, s))
    assert I.term_dtlap >= 0 and I.term_grad >= 0 and I.term_zero >= 0
    assert I.total == I.term_dtlap + I.term_grad + I.term_zero


def test_I_refinement_within_two_percent():
    for s, lam in [(2.0, 1.0), (8.0, 2.0)]:
        a = eval_I(q_field(201, 400), weights(SpatialGrid(1.0, 201), lam, s))
        b = eval_I(q_field(401, 800), weights(SpatialGrid(1.0, 401), lam, s))
        for name in ("term_dtlap", "term_grad", "term_zero"):
            assert getattr(b, name) == pytest.approx(getattr(a, name), rel=0.02)


def test_zero_term_lambda_prefactor():
    # the weight decay dominates lambda^4 here, so only the prefactor is pinned
    q = q_field(101, 200)
    sg, tg = q.sgrid, q.tgrid
    for lam in (1.0, 2.0, 4.0, 8.0):
        w = weights(sg, lam, 8.0)
        I = eval_I(q, w)
        frozen = weighted_integral(q.values**2, w, 3, sg, tg, I.log_scale)
        assert I.term_zero == pytest.approx(8.0**3 * lam**4 * frozen, rel=1e-14)


def test_breakdown_csv():
    fb = FunctionalBreakdown(2.0, 1.0, 0.5, 0.25, 0.125)
    assert FunctionalBreakdown.CSV_HEADER == "s,lambda,term_dtlap,term_grad,term_zero,total"
    assert fb.csv_row() == "2,1,0.5,0.25,0.125,0.875"
