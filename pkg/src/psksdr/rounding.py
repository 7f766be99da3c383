"""Feasible PSK points (upper bounds) from relaxation solutions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .instance import QuadraticForm

DEFAULT_TRIALS = 100


@dataclass
class RoundedSolution:
    x_hat: np.ndarray
    objective: float
    trials_used: int
    source: str  # "direct", "eigen" or "randomized"


def psk_indices(x, M: int) -> np.ndarray:
    """Index of the nearest M-PSK symbol by argument.

    An entry exactly halfway between two symbols goes to the smaller index;
    a zero entry maps to symbol 0.
    """
    x = np.asarray(x, dtype=complex)
    ang = np.mod(np.angle(x), 2 * np.pi)
    grid = 2 * np.pi * np.arange(M) / M
    diff = np.abs(ang[..., None] - grid)
    dist = np.minimum(diff, 2 * np.pi - diff)
    return np.argmin(dist, axis=-1)


def project_psk(x, M: int) -> np.ndarray:
    j = psk_indices(x, M)
    out = np.exp(2j * np.pi * j / M)
    # exact unit-modulus symbols for the axis points
    out[j == 0] = 1.0
    if M % 2 == 0:
        out[j == M // 2] = -1.0
    if M % 4 == 0:
        out[j == M // 4] = 1j
        out[j == 3 * M // 4] = -1j
    return out


def _leading_eigvec(X: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(0.5 * (X + X.conj().T))
    return V[:, -1] * np.sqrt(max(w[-1], 0.0))


def randomized_round(sol, q: QuadraticForm, M: int, trials: int = DEFAULT_TRIALS,
                     rng: np.random.Generator | int | None = None) -> RoundedSolution:
    """Best of Gaussian randomization plus two deterministic candidates.

    Samples ``xi ~ CN(0, [[1, x^H], [x, X]])``, rotates each so its first
    coordinate is real positive, and projects the remaining coordinates onto
    the alphabet. The projections of the first-order part ``x`` and of the
    leading eigenvector of ``X`` (in every global PSK rotation) are always
    evaluated too. Ties keep the earliest candidate.
    """
    if int(trials) != trials or trials < 1:
        raise ParameterError(f"trials must be a positive integer, got {trials}")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    x = np.asarray(sol.x_complex)
    X = np.asarray(sol.X_complex)
    n = x.shape[0]

    best_x = project_psk(x, M)
    best_val = q.value(best_x)
    source, used = "direct", 0

    u = _leading_eigvec(X)
    if abs(np.vdot(u, x)) > 0:
        u = u * np.exp(1j * np.angle(np.vdot(u, x)))
    u_proj = project_psk(u, M)
    rotations = np.exp(2j * np.pi * np.arange(M) / M)[:, None] * u_proj[None, :]
    rot_vals = q.values(rotations)
    k = int(np.argmin(rot_vals))
    if rot_vals[k] < best_val:
        best_x, best_val, source = project_psk(rotations[k], M), float(rot_vals[k]), "eigen"

    P = np.empty((n + 1, n + 1), dtype=complex)
    P[0, 0] = 1.0
    P[0, 1:] = x.conj()
    P[1:, 0] = x
    P[1:, 1:] = X
    P = 0.5 * (P + P.conj().T)
    jitter = 1e-9 * np.trace(P).real
    try:
        L = np.linalg.cholesky(P + jitter * np.eye(n + 1))
    except np.linalg.LinAlgError:
        # slightly indefinite solver output: clipped eigen-factor instead
        w, V = np.linalg.eigh(P)
        L = V * np.sqrt(np.clip(w, 0.0, None) + jitter)
    g = (rng.standard_normal((trials, n + 1)) + 1j * rng.standard_normal((trials, n + 1))) / np.sqrt(2)
    xi = g @ L.T
    xi = xi[:, 1:] * np.exp(-1j * np.angle(xi[:, :1]))
    cands = project_psk(xi, M)
    vals = q.values(cands)
    k = int(np.argmin(vals))
    if vals[k] < best_val:
        best_x, best_val, source, used = cands[k], float(vals[k]), "randomized", k + 1
    return RoundedSolution(x_hat=best_x, objective=q.value(best_x), trials_used=used or trials,
                           source=source)
