import numpy as np
import pytest

from pccal.basis import build_basis, legendre_table, total_degree_indices
from pccal.errors import CapacityError, DomainError, ShapeError


def test_term_count_5_5(basis55):
    assert basis55.n_terms == 252


def test_term_count_constant_only():
    assert build_basis(5, 0).n_terms == 1


def test_term_count_2_3():
    # (2+3)! / (2! 3!) = 10
    assert build_basis(2, 3).n_terms == 10


def test_zero_index_first_and_norm_one(basis55):
    assert tuple(basis55.indices[0]) == (0, 0, 0, 0, 0)
    assert basis55.norms_sq[0] == 1.0


def test_graded_then_lexicographic_ordering():
    basis = build_basis(2, 2)
    expected = [(0, 0), (0, 1), (1, 0), (0, 2), (1, 1), (2, 0)]
    assert [tuple(a) for a in basis.indices] == expected


def test_ordering_deterministic():
    a = build_basis(4, 5)
    b = build_basis(4, 5)
    assert np.array_equal(a.indices, b.indices)


def test_capacity_guard():
    with pytest.raises(CapacityError):
        build_basis(40, 12)


def test_invalid_dims():
    with pytest.raises(DomainError):
        build_basis(0, 3)
    with pytest.raises(DomainError):
        build_basis(2, -1)


def test_legendre_recurrence_values():
    x = np.array([-1.0, -0.5, 0.0, 0.5, 1.0])
    table = legendre_table(x, 3)
    np.testing.assert_allclose(table[0], 1.0)
    np.testing.assert_allclose(table[1], x)
    np.testing.assert_allclose(table[2], 0.5 * (3 * x**2 - 1), atol=1e-15)
    np.testing.assert_allclose(table[3], 0.5 * (5 * x**3 - 3 * x), atol=1e-15)


def test_legendre_at_one_is_one():
    table = legendre_table(np.array([1.0]), 8)
    np.testing.assert_allclose(table[:, 0], 1.0, atol=1e-14)


def test_eval_at_origin_parity(basis55):
    vals = basis55.eval_at(np.zeros(5))
    odd = basis55.indices.sum(axis=1) % 2 == 1
    assert vals[0] == 1.0
    assert np.all(vals[odd] == 0.0)
    # any index with at least one odd degree vanishes at the origin
    has_odd_component = (basis55.indices % 2 == 1).any(axis=1)
    assert np.all(vals[has_odd_component] == 0.0)


def test_eval_product_structure():
    basis = build_basis(2, 2)
    vals = basis.eval_at(np.array([0.5, -0.5]))
    k = [tuple(a) for a in basis.indices].index((1, 1))
    assert vals[k] == pytest.approx(0.5 * -0.5, abs=1e-15)


def test_eval_many_matches_eval_at(basis55):
    rng = np.random.default_rng(3)
    pts = rng.uniform(-1, 1, size=(7, 5))
    big = basis55.eval_many(pts)
    for i in range(7):
        np.testing.assert_allclose(big[i], basis55.eval_at(pts[i]), rtol=1e-13)


def test_eval_shape_errors(basis55):
    with pytest.raises(ShapeError):
        basis55.eval_at(np.zeros(4))
    with pytest.raises(ShapeError):
        basis55.eval_many(np.zeros((3, 4)))


def test_norms_sq_values():
    basis = build_basis(2, 2)
    lookup = {tuple(a): n for a, n in zip(map(tuple, basis.indices), basis.norms_sq)}
    assert lookup[(0, 0)] == 1.0
    assert lookup[(1, 0)] == pytest.approx(1 / 3)
    assert lookup[(1, 1)] == pytest.approx(1 / 9)
    b2 = build_basis(2, 3)
    lk2 = {tuple(a): n for a, n in zip(map(tuple, b2.indices), b2.norms_sq)}
    assert lk2[(1, 2)] == pytest.approx(1 / 15)


def test_norm_sq_bounds(basis55):
    assert basis55.norm_sq(0) == 1.0
    with pytest.raises(DomainError):
        basis55.norm_sq(252)
    with pytest.raises(DomainError):
        basis55.norm_sq(-1)


def test_orthogonality_monte_carlo():
    # <psi_j psi_k> over uniform samples within 3 standard errors of delta_jk norm
    basis = build_basis(3, 4)
    rng = np.random.default_rng(12345)
    xi = rng.uniform(-1, 1, size=(1_000_000, 3))
    vals = basis.eval_many(xi)
    pairs = [(0, 1), (2, 2), (5, 9), (13, 13), (20, 33), (34, 34), (7, 7)]
    for j, k in pairs:
        prod = vals[:, j] * vals[:, k]
        est = prod.mean()
        se = prod.std(ddof=1) / np.sqrt(len(prod))
        target = basis.norms_sq[k] if j == k else 0.0
        assert abs(est - target) <= 3 * se, (j, k, est, target, se)


def test_orthogonality_tensor_quadrature():
    # exact Gauss-Legendre tensor rule: quadrature orthogonality to 1e-12
    basis = build_basis(2, 4)
    nodes, weights = np.polynomial.legendre.leggauss(9)
    gx, gy = np.meshgrid(nodes, nodes, indexing="ij")
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    w = np.outer(weights, weights).ravel() / 4.0  # density 1/2 per axis
    vals = basis.eval_many(pts)
    gram = (vals * w[:, None]).T @ vals
    np.testing.assert_allclose(gram, np.diag(basis.norms_sq), atol=1e-12)


def test_total_degree_indices_count():
    assert total_degree_indices(5, 5).shape == (252, 5)
