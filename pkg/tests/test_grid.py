import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from carleman_lab.errors import ConfigurationError
from carleman_lab.grid import (Interval, ScalarField, SpaceTimeField, SpatialGrid, SubIntervalSet,
                               TimeGrid, build_spatial_grid, build_time_grid, integrate_space,
                               integrate_spacetime, read_field_csv, space_weights)


def test_three_node_grid():
    g = build_spatial_grid(1.0, 3)
    assert g.h == 0.5
    np.testing.assert_array_equal(g.x, [0.0, 0.5, 1.0])


def test_node_spacing_from_length():
    g = build_spatial_grid(2.0, 5)
    assert g.h == 0.5 and g.x[3] == 1.5


@pytest.mark.parametrize("L, n", [(1.0, 2), (0.0, 10), (-1.0, 10)])
def test_bad_spatial_grid(L, n):
    with pytest.raises(ConfigurationError):
        build_spatial_grid(L, n)


def test_nodes_read_only():
    g = SpatialGrid(1.0, 11)
    with pytest.raises(ValueError):
        g.x[0] = 1.0


def test_time_grid_midpoint():
    tg = build_time_grid(0.0, 2.0, 4)
    np.testing.assert_array_equal(tg.t, [0.0, 0.5, 1.0, 1.5, 2.0])
    assert tg.prime_index == 2 and tg.t_prime == 1.0
    assert build_time_grid(0.5, 1.5, 100).t_prime == 1.0


def test_odd_steps_rejected():
    with pytest.raises(ConfigurationError, match="T' must be a grid node"):
        build_time_grid(0.0, 1.0, 5)


def test_reversed_window_rejected():
    with pytest.raises(ConfigurationError):
        build_time_grid(1.0, 1.0, 4)


@given(st.floats(-5, 5), st.floats(0.1, 5), st.integers(2, 200))
def test_phi_time_minimum_at_midpoint(t0, width, half):
    tg = TimeGrid(t0, t0 + width, 2 * half)
    phi = tg.phi_time()
    k = tg.prime_index
    assert phi[k] == pytest.approx(4.0 / width**2, rel=1e-12)
    interior = phi[1:-1]
    assert np.all(interior >= phi[k] * (1 - 1e-12))


def test_refinement_nests():
    g = SpatialGrid(1.0, 11)
    np.testing.assert_allclose(g.refine().x[::2], g.x, atol=1e-15)
    tg = TimeGrid(0.0, 1.0, 10)
    assert tg.refine().t_prime == tg.t_prime


def test_nesting_rule_named():
    with pytest.raises(ConfigurationError, match="omega'' << omega"):
        SubIntervalSet.from_tuples((0.3, 0.7), (0.45, 0.55), (0.2, 0.6))
    with pytest.raises(ConfigurationError, match="omega' << omega''"):
        SubIntervalSet.from_tuples((0.3, 0.7), (0.35, 0.55), (0.4, 0.6))
    with pytest.raises(ConfigurationError, match="omega << Omega"):
        SubIntervalSet.from_tuples((0.0, 0.7), (0.45, 0.55), (0.4, 0.6))


def test_fields_reject_nonfinite():
    g = SpatialGrid(1.0, 5)
    with pytest.raises(ValueError):
        ScalarField(g, [0, 1, np.nan, 0, 0])
    with pytest.raises(ValueError):
        ScalarField(g, np.zeros(4))


def test_integrate_constants_and_sine():
    g = SpatialGrid(1.0, 201)
    one = ScalarField.constant(g, 1.0)
    assert integrate_space(one) == pytest.approx(1.0, abs=1e-14)
    assert integrate_space(one, (0.25, 0.75)) == pytest.approx(0.5, abs=1e-14)
    s = ScalarField.from_function(g, lambda x: np.sin(np.pi * x))
    assert abs(integrate_space(s) - 2 / np.pi) <= 1e-4


def test_empty_region_is_zero():
    g = SpatialGrid(1.0, 11)
    assert integrate_space(ScalarField.constant(g, 1.0), (0.4, 0.4)) == 0.0


@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.floats(-3, 3), st.floats(-3, 3))
def test_affine_exact_on_cut_regions(a, b, c0, c1):
    lo, hi = min(a, b), max(a, b)
    g = SpatialGrid(1.0, 17)
    f = c0 + c1 * g.x
    exact = c0 * (hi - lo) + 0.5 * c1 * (hi**2 - lo**2)
    assert float(space_weights(g, (lo, hi)) @ f) == pytest.approx(exact, abs=1e-12)


def test_sine_quadrature_second_order():
    errs = []
    g = SpatialGrid(1.0, 21)
    for _ in range(3):
        errs.append(abs(integrate_space(np.sin(np.pi * g.x), None, g) - 2 / np.pi))
        g = g.refine()
    assert errs[0] / errs[1] >= 3.5 and errs[1] / errs[2] >= 3.5


def test_spacetime_integrals():
    sg, tg = SpatialGrid(1.0, 201), TimeGrid(0.0, 2.0, 400)
    one = SpaceTimeField.from_function(sg, tg, lambda x, t: np.ones_like(x))
    assert integrate_spacetime(one) == pytest.approx(2.0, abs=1e-13)
    f = SpaceTimeField.from_function(sg, tg, lambda x, t: np.sin(np.pi * x) * t)
    assert abs(integrate_spacetime(f) - 4 / np.pi) <= 1e-3
    assert integrate_spacetime(SpaceTimeField.zeros(sg, tg)) == 0.0


def test_affine_in_t_exact():
    sg, tg = SpatialGrid(1.0, 9), TimeGrid(0.0, 1.0, 8)
    f = SpaceTimeField.from_function(sg, tg, lambda x, t: 1 + 2 * x + 3 * t)
    assert integrate_spacetime(f) == pytest.approx(1 + 1 + 1.5, abs=1e-13)


def test_csv_roundtrip(tmp_path):
    sg, tg = SpatialGrid(1.0, 5), TimeGrid(0.0, 1.0, 4)
    f = SpaceTimeField.from_function(sg, tg, lambda x, t: np.exp(x) * np.cos(t) / 3)
    f.to_csv(tmp_path / "f.csv", name="q")
    data = read_field_csv(tmp_path / "f.csv")
    assert (tmp_path / "f.csv").read_text().splitlines()[0] == "x,t,q"
    np.testing.assert_array_equal(data["q"], f.values.ravel())


def test_interval_compact_containment():
    assert Interval(0, 1).compactly_contains(Interval(0.1, 0.9))
    assert not Interval(0, 1).compactly_contains(Interval(0.0, 0.9))
