import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pccal.errors import DomainError
from pccal.parameters import ParameterSpace, ParameterSpec


def test_spec_rejects_degenerate_bounds():
    with pytest.raises(DomainError):
        ParameterSpec("a", 1.0, 1.0)
    with pytest.raises(DomainError):
        ParameterSpec("a", 2.0, 1.0)


def test_spec_rejects_default_outside_bounds():
    with pytest.raises(DomainError):
        ParameterSpec("a", 0.0, 1.0, default=1.5)


def test_space_rejects_duplicate_names():
    with pytest.raises(DomainError, match="duplicate"):
        ParameterSpace([ParameterSpec("a", 0, 1), ParameterSpec("a", 0, 2)])


def test_to_canonical_endpoints_descending(table1_space):
    # The map has a_i - b_i in the denominator: p = a maps to +1, p = b to -1.
    xi_low = table1_space.to_canonical(table1_space.lower)
    xi_high = table1_space.to_canonical(table1_space.upper)
    np.testing.assert_allclose(xi_low, np.ones(5), atol=1e-15)
    np.testing.assert_allclose(xi_high, -np.ones(5), atol=1e-15)


def test_to_canonical_midpoint_is_zero(table1_space):
    mid = 0.5 * (table1_space.lower + table1_space.upper)
    np.testing.assert_allclose(table1_space.to_canonical(mid), np.zeros(5), atol=1e-15)


def test_to_canonical_table1_value(table1_space):
    # Ri_c = 0.3 on [0.1, 1.0]: (0.6 - 1.1) / (0.1 - 1.0) = 5/9
    p = table1_space.defaults()
    xi = table1_space.to_canonical(p)
    assert xi[0] == pytest.approx(5.0 / 9.0, abs=1e-15)


def test_out_of_bounds_names_parameter(table1_space):
    p = table1_space.defaults()
    p[2] = 1000.0
    with pytest.raises(DomainError, match="phi_m"):
        table1_space.to_canonical(p)


def test_from_canonical_endpoints(table1_space):
    np.testing.assert_allclose(
        table1_space.from_canonical(-np.ones(5)), table1_space.upper, rtol=1e-15)
    np.testing.assert_allclose(
        table1_space.from_canonical(np.zeros(5)),
        0.5 * (table1_space.lower + table1_space.upper), rtol=1e-15)


def test_from_canonical_rejects_outside_unit_cube(table1_space):
    xi = np.zeros(5)
    xi[4] = 1.0001
    with pytest.raises(DomainError, match="c_star"):
        table1_space.from_canonical(xi)


def test_round_trip_1000_points(table1_space):
    rng = np.random.default_rng(0)
    width = table1_space.upper - table1_space.lower
    p = table1_space.lower + width * rng.random((1000, 5))
    back = table1_space.from_canonical(table1_space.to_canonical(p))
    assert np.all(np.abs(back - p) <= 1e-12 * width)


def test_monotone_decreasing_in_each_axis(table1_space):
    rng = np.random.default_rng(1)
    width = table1_space.upper - table1_space.lower
    for _ in range(50):
        p = table1_space.lower + width * rng.random(5)
        step = 1e-3 * width
        p2 = np.minimum(p + step, table1_space.upper)
        xi, xi2 = table1_space.to_canonical(p), table1_space.to_canonical(p2)
        assert np.all(xi2 <= xi)


def test_log_prior_unit_widths():
    space = ParameterSpace([ParameterSpec("a", 0, 1), ParameterSpec("b", 2, 3)])
    assert space.log_prior(np.array([0.5, 2.5])) == pytest.approx(0.0, abs=1e-15)


def test_log_prior_outside_is_minus_inf(table1_space):
    p = table1_space.defaults()
    p[0] = -5.0
    assert table1_space.log_prior(p) == -math.inf


def test_log_prior_table1_value(table1_space):
    # -ln(0.9 * 0.9 * 327.46 * 59.25 * 10), evaluated directly
    expected = -sum(math.log(w) for w in (0.9, 0.9, 327.46, 59.25, 10.0))
    assert expected == pytest.approx(-11.96499575190498, abs=1e-10)
    assert table1_space.log_prior(table1_space.defaults()) == pytest.approx(expected, rel=1e-14)


def test_log_prior_constant_over_box(table1_space):
    rng = np.random.default_rng(2)
    width = table1_space.upper - table1_space.lower
    vals = {table1_space.log_prior(table1_space.lower + width * rng.random(5))
            for _ in range(20)}
    assert len(vals) == 1


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 1.0, allow_nan=False))
def test_round_trip_hypothesis(u):
    space = ParameterSpace([ParameterSpec("x", -2.0, 7.0)])
    p = np.array([-2.0 + 9.0 * u])
    back = space.from_canonical(space.to_canonical(p))
    assert abs(back[0] - p[0]) <= 1e-12 * 9.0


def test_config_block_round_trip(table1_space):
    block = table1_space.to_block()
    items = []
    for line in block.strip().splitlines():
        name, _, value = line.partition("=")
        items.append((name.strip(), value.strip()))
    space2 = ParameterSpace.from_items(items)
    assert space2 == table1_space
