"""Symmetric-matrix helpers: svec/smat vectorization and extreme eigenvalues."""

from __future__ import annotations

import math

import numpy as np

from .errors import ParameterError

_SQRT2 = math.sqrt(2.0)


def _triu(d: int):
    return np.triu_indices(d)


def svec(A: np.ndarray) -> np.ndarray:
    """Stack the upper triangle of a symmetric matrix, off-diagonals scaled by sqrt(2).

    Works on a single ``(d, d)`` matrix or a stack ``(..., d, d)``; with this
    scaling ``svec(A) @ svec(B) == trace(A @ B)``.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim < 2 or A.shape[-1] != A.shape[-2]:
        raise ParameterError(f"svec needs square matrices, got shape {A.shape}")
    d = A.shape[-1]
    iu, ju = _triu(d)
    scale = np.where(iu == ju, 1.0, _SQRT2)
    return A[..., iu, ju] * scale


def smat(v: np.ndarray) -> np.ndarray:
    """Inverse of :func:`svec`.

    Diagonal entries round-trip exactly; off-diagonal ones to within one ulp,
    since the sqrt(2) scaling cannot be undone exactly in binary floating point.
    """
    v = np.asarray(v, dtype=float)
    s = v.shape[-1]
    d = int(round((math.sqrt(8 * s + 1) - 1) / 2))
    if d * (d + 1) // 2 != s:
        raise ParameterError(f"length {s} is not a triangular number")
    iu, ju = _triu(d)
    scale = np.where(iu == ju, 1.0, _SQRT2)
    out = np.zeros(v.shape[:-1] + (d, d))
    vals = v / scale
    out[..., iu, ju] = vals
    out[..., ju, iu] = vals
    return out


def real_embedding(A: np.ndarray) -> np.ndarray:
    """``[[Re A, -Im A], [Im A, Re A]]``; its spectrum is that of ``A`` doubled."""
    A = np.asarray(A)
    return np.block([[A.real, -A.imag], [A.imag, A.real]])


def _check_square(A: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ParameterError(f"expected a square matrix, got shape {A.shape}")
    scale = 1.0 + (np.abs(A).max() if A.size else 0.0)
    if np.abs(A - A.conj().T).max(initial=0.0) > tol * scale:
        raise ParameterError("matrix is not (conjugate-)symmetric")
    return A


def symmetric_eigvals(A: np.ndarray) -> np.ndarray:
    """Ascending eigenvalues of a real symmetric or complex Hermitian matrix.

    Hermitian input goes through :func:`real_embedding`, and every other
    eigenvalue of the doubled spectrum is returned.
    """
    A = _check_square(A)
    if np.iscomplexobj(A):
        w = np.linalg.eigvalsh(real_embedding(A))
        return w[::2]
    return np.linalg.eigvalsh(0.5 * (A + A.T))


def symmetric_eig_min(A: np.ndarray) -> float:
    A = np.asarray(A)
    if A.size == 0:
        raise ParameterError("empty matrix has no eigenvalues")
    return float(symmetric_eigvals(A)[0])
