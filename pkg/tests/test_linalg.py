import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from psksdr.errors import ParameterError
from psksdr.linalg import real_embedding, smat, svec, symmetric_eig_min, symmetric_eigvals


def test_svec_identity():
    assert np.allclose(svec(np.eye(2)), [1, 0, 1])


def test_svec_inner_product_example():
    A = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert np.isclose(svec(A) @ svec(A), 2.0)


def _sym(a):
    return 0.5 * (a + a.T)


@given(arrays(float, (5, 5), elements=st.floats(-10, 10)), arrays(float, (5, 5), elements=st.floats(-10, 10)))
def test_svec_preserves_inner_products(a, b):
    A, B = _sym(a), _sym(b)
    assert abs(svec(A) @ svec(B) - np.sum(A * B)) <= 1e-12 * (1 + np.abs(A).sum() * np.abs(B).sum())
    back = smat(svec(A))
    assert np.array_equal(np.diag(back), np.diag(A))
    assert np.all(np.abs(back - A) <= np.spacing(np.abs(A)))


def test_smat_rejects_non_triangular():
    with pytest.raises(ParameterError):
        smat(np.zeros(4))


def test_eig_min_examples():
    assert symmetric_eig_min(np.eye(3)) == pytest.approx(1.0)
    assert symmetric_eig_min(np.diag([3.0, -2.0, 5.0])) == pytest.approx(-2.0)
    Q = np.array([[125, 4 + 103j], [4 - 103j, 125]])
    assert abs(symmetric_eig_min(Q) - (125 - math.sqrt(10625))) <= 1e-9 * (1 + 250)


def test_eig_rejects_non_square_and_asymmetric():
    with pytest.raises(ParameterError):
        symmetric_eig_min(np.zeros((2, 3)))
    with pytest.raises(ParameterError):
        symmetric_eig_min(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_real_embedding_doubles_spectrum(rng):
    A = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    A = A + A.conj().T
    w = np.linalg.eigvalsh(A)
    we = np.linalg.eigvalsh(real_embedding(A))
    assert np.allclose(np.repeat(w, 2), we)
    assert np.allclose(symmetric_eigvals(A), w)
