"""Exhaustive ML detection over the M-PSK lattice for small n."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EnumerationLimitError, ParameterError
from .instance import QuadraticForm
from .rounding import project_psk

ENUMERATION_LIMIT = 2 ** 24
_CHUNK = 2 ** 16


@dataclass
class OracleResult:
    x_opt: np.ndarray
    value: float
    enumerated: int
    index: int = 0  # position of x_opt in enumeration order


def candidate_indices(start: int, stop: int, M: int, n: int) -> np.ndarray:
    """Mixed-radix digits of ``start..stop-1``; the last coordinate varies fastest."""
    k = np.arange(start, stop, dtype=np.int64)
    digits = np.empty((k.size, n), dtype=np.int64)
    for pos in range(n - 1, -1, -1):
        digits[:, pos] = k % M
        k = k // M
    return digits


def brute_force(q: QuadraticForm, M: int, n: int | None = None,
                limit: int = ENUMERATION_LIMIT) -> OracleResult:
    """Minimize ``x^H Q x + 2 Re(c^H x)`` over all ``M**n`` PSK vectors.

    Plain evaluation of every candidate, no incremental updates. The first
    candidate in enumeration order wins ties.
    """
    n = q.n if n is None else int(n)
    if n != q.n or n < 1:
        raise ParameterError(f"n={n} does not match the quadratic form (n={q.n})")
    if int(M) != M or M < 2:
        raise ParameterError(f"need M >= 2, got {M}")
    total = int(M) ** n
    if total > limit:
        raise EnumerationLimitError(
            f"M**n = {M}**{n} = {total} candidates exceeds the enumeration limit {limit}")
    # exact axis symbols, identical to the projection output
    symbols = project_psk(np.exp(2j * np.pi * np.arange(M) / M), M)
    best_val, best_idx = np.inf, -1
    for start in range(0, total, _CHUNK):
        stop = min(total, start + _CHUNK)
        X = symbols[candidate_indices(start, stop, M, n)]
        vals = q.values(X)
        k = int(np.argmin(vals))
        if vals[k] < best_val:
            best_val, best_idx = float(vals[k]), start + k
    x_opt = symbols[candidate_indices(best_idx, best_idx + 1, M, n)[0]]
    return OracleResult(x_opt=x_opt, value=q.value(x_opt), enumerated=total, index=best_idx)
