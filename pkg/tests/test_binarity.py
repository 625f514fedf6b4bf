import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lfmhop.binarity import (
    build_geometry,
    defect,
    defect_column,
    defect_columns,
    defect_via_sphere,
)
from lfmhop.errors import DomainError, RankError


@st.composite
def full_rank_z(draw, max_n=12, max_k=4):
    K = draw(st.integers(1, max_k))
    N = draw(st.integers(K, max_n))
    Z = draw(arrays(np.int64, (N, K), elements=st.integers(0, 1)))
    Z[:K] = np.tril(Z[:K])
    Z[:K] |= np.eye(K, dtype=np.int64)  # unit lower-triangular block: full column rank
    return Z


def test_defect_examples():
    assert defect(np.array([[0, 1], [1, 0]])) == 0
    assert defect(np.array([2])) == 1
    assert defect(np.array([-1])) == 1
    assert defect(np.array([[3, -2]])) == 3 + 3


def test_defect_rejects_non_integer():
    with pytest.raises(DomainError):
        defect(np.array([0.5]))


@given(arrays(np.int64, st.integers(1, 20), elements=st.integers(-5, 5)))
def test_defect_nonnegative_and_zero_iff_binary(m):
    f = defect(m)
    assert f >= 0
    assert (f == 0) == bool(np.all((m == 0) | (m == 1)))


@given(full_rank_z(), st.data())
def test_gram_form_matches_direct(Z, data):
    K = Z.shape[1]
    u = data.draw(arrays(np.int64, K, elements=st.integers(-3, 3)))
    gram, colsum = Z.T @ Z, Z.sum(axis=0)
    assert defect_column(gram, colsum, u) == defect(Z @ u)


@given(full_rank_z(), st.data())
def test_vectorized_matches_scalar(Z, data):
    K = Z.shape[1]
    U = data.draw(arrays(np.int64, (5, K), elements=st.integers(-3, 3)))
    gram, colsum = Z.T @ Z, Z.sum(axis=0)
    assert list(defect_columns(gram, colsum, U)) == [defect_column(gram, colsum, u) for u in U]


@given(full_rank_z(), st.data())
def test_sphere_identity(Z, data):
    K = Z.shape[1]
    u = data.draw(arrays(np.int64, K, elements=st.integers(-3, 3)))
    g = build_geometry(Z)
    assert defect_via_sphere(g, u) == pytest.approx(defect(Z @ u), abs=1e-7 * (1 + np.abs(u).sum() ** 2))


@given(full_rank_z())
def test_lambda_factorizes_inverse_gram(Z):
    g = build_geometry(Z)
    inv = np.linalg.inv((Z.T @ Z).astype(float))
    assert np.allclose(g.Lambda @ g.Lambda.T, inv, atol=1e-8)


def test_unit_columns_lie_on_zero_defect_sphere():
    Z = np.array([[1, 0], [0, 1], [1, 1]])
    g = build_geometry(Z)
    for u in np.eye(2, dtype=np.int64):
        s = g.to_sphere(u)
        assert np.sum((s - g.mu) ** 2) == pytest.approx(g.mu_norm_sq)


def test_rank_error_names_singular_values():
    with pytest.raises(RankError, match="deficient singular values"):
        build_geometry(np.array([[1, 1], [1, 1], [0, 0]]))


def test_rank_error_when_too_few_rows():
    with pytest.raises(RankError):
        build_geometry(np.array([[1, 0, 1]]))
