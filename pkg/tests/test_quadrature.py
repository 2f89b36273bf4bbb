import numpy as np
import pytest

from pccal.basis import build_basis
from pccal.errors import ConfigError, DomainError
from pccal.quadrature import (build_1d_rule, build_smolyak, read_design,
                              subset_levels, uniform_random_design, write_design)


def test_1d_level0_midpoint():
    rule = build_1d_rule(0)
    np.testing.assert_array_equal(rule.nodes, [0.0])
    np.testing.assert_array_equal(rule.weights, [1.0])


def test_1d_level1_three_points():
    rule = build_1d_rule(1)
    assert rule.nodes.shape == (3,)
    assert rule.nodes[1] == 0.0
    assert rule.nodes[2] == -rule.nodes[0] > 0
    assert rule.nodes[2] == pytest.approx(np.sqrt(0.6), rel=1e-15)


def test_1d_weights_sum_to_one():
    for level in range(6):
        rule = build_1d_rule(level)
        assert abs(rule.weights.sum() - 1.0) <= 1e-14
        assert np.all(rule.nodes > -1) and np.all(rule.nodes < 1)
        assert np.all(np.diff(rule.nodes) > 0)
        np.testing.assert_allclose(rule.nodes, -rule.nodes[::-1], atol=0)


def test_1d_nesting():
    for low, high in [(0, 1), (1, 2), (1, 3), (2, 3), (3, 4), (3, 5)]:
        small = set(build_1d_rule(low).nodes.tolist())
        big = set(build_1d_rule(high).nodes.tolist())
        assert small <= big


def test_1d_unsupported_level():
    with pytest.raises(DomainError):
        build_1d_rule(6)
    with pytest.raises(DomainError):
        build_1d_rule(-1)


def test_1d_polynomial_exactness():
    # level l must integrate degrees up to 2l+1 exactly (uniform density)
    for level in range(6):
        rule = build_1d_rule(level)
        for deg in range(2 * level + 2):
            q = float(rule.weights @ rule.nodes**deg)
            exact = 1.0 / (deg + 1) if deg % 2 == 0 else 0.0
            assert abs(q - exact) <= 1e-14, (level, deg)


def test_smolyak_node_counts_5d(grid55):
    expected = {1: 11, 2: 51, 3: 151, 4: 391, 5: 903}
    assert grid55.n_nodes == 903
    for level, count in expected.items():
        assert build_smolyak(5, level).n_nodes == count


def test_smolyak_1d_level0():
    grid = build_smolyak(1, 0)
    np.testing.assert_array_equal(grid.nodes, [[0.0]])
    np.testing.assert_array_equal(grid.weights, [1.0])


def test_smolyak_weights_sum_to_one(grid55):
    for level in range(6):
        grid = build_smolyak(5, level)
        assert abs(grid.weights.sum() - 1.0) <= 1e-12


def test_smolyak_no_duplicate_nodes(grid55):
    assert np.unique(grid55.nodes, axis=0).shape[0] == grid55.n_nodes


def test_smolyak_lexicographic_order(grid55):
    rows = [tuple(r) for r in grid55.nodes]
    assert rows == sorted(rows)


def test_smolyak_symmetry(grid55):
    # node set invariant under xi -> -xi with equal weights on mirrored nodes
    index = {tuple(r): w for r, w in zip(grid55.nodes, grid55.weights)}
    for row, w in index.items():
        mirrored = tuple(-x for x in row)
        assert mirrored in index
        assert index[mirrored] == pytest.approx(w, rel=1e-13, abs=1e-16)


def test_subset_levels_nested(grid55):
    for level, count in [(2, 51), (4, 391)]:
        sub = subset_levels(grid55, level)
        assert sub.n_nodes == count
        big = {tuple(r) for r in grid55.nodes}
        assert all(tuple(r) in big for r in sub.nodes)


def test_subset_same_level_identical(grid55):
    sub = subset_levels(grid55, 5)
    np.testing.assert_array_equal(sub.nodes, grid55.nodes)
    np.testing.assert_array_equal(sub.weights, grid55.weights)


def test_subset_above_level_rejected(grid55):
    with pytest.raises(DomainError):
        subset_levels(build_smolyak(5, 2), 3)


def test_quadrature_exactness_all_basis_functions(basis55, grid55):
    # integrates every order-<=5 basis function to delta_k0 within 1e-10
    vals = basis55.eval_many(grid55.nodes)
    integrals = grid55.weights @ vals
    target = np.zeros(252)
    target[0] = 1.0
    np.testing.assert_allclose(integrals, target, atol=1e-10)


def test_quadrature_product_exactness(basis55, grid55):
    # products psi_j psi_k (degree <= 10) are within the level-5 exactness
    rng = np.random.default_rng(7)
    vals = basis55.eval_many(grid55.nodes)
    for _ in range(100):
        j, k = rng.integers(0, 252, size=2)
        q = float(grid55.weights @ (vals[:, j] * vals[:, k]))
        target = basis55.norms_sq[k] if j == k else 0.0
        assert abs(q - target) <= 1e-10


def test_random_design_unique_and_seeded():
    a = uniform_random_design(5, 954, seed=3)
    b = uniform_random_design(5, 954, seed=3)
    c = uniform_random_design(5, 954, seed=4)
    assert a.shape == (954, 5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert np.unique(a, axis=0).shape[0] == 954
    assert np.all(np.abs(a) <= 1.0)


def test_design_file_round_trip(tmp_path, grid55):
    path = tmp_path / "design.txt"
    write_design(path, grid55)
    loaded = read_design(path)
    assert loaded.kind == "smolyak"
    assert loaded.level == 5
    np.testing.assert_array_equal(loaded.nodes, grid55.nodes)
    np.testing.assert_array_equal(loaded.weights, grid55.weights)


def test_design_file_random_round_trip(tmp_path):
    nodes = uniform_random_design(3, 20, seed=9)
    path = tmp_path / "design.txt"
    write_design(path, nodes, kind="random", seed=9)
    loaded = read_design(path)
    assert loaded.kind == "random"
    assert loaded.weights is None
    assert loaded.seed == 9
    np.testing.assert_array_equal(loaded.nodes, nodes)


def test_design_file_rejects_empty(tmp_path):
    path = tmp_path / "empty.txt"
    path.write_text("# pccal design\n# dim = 2\n")
    with pytest.raises(ConfigError):
        read_design(path)
