"""Dense primal-dual interior-point solver for one PSD block plus a nonnegative block.

Primal::

    min  C . X + c_l' x
    s.t. A_k . X + a_k' x = b_k,   k = 1..m
         X psd (d x d),  x >= 0 (length p)

Dual::

    max  b' y
    s.t. C - sum_k y_k A_k = Z psd,   c_l - sum_k y_k a_k = z >= 0

Infeasible-start path following with Nesterov-Todd scaling and a Mehrotra
predictor-corrector step. The Schur complement is factored with a dense
Cholesky, retried with growing diagonal regularization on breakdown.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import ParameterError
from .linalg import smat, svec

log = logging.getLogger(__name__)

_REGULARIZATION = (1e-12, 1e-10, 1e-8)
_STEP_FRACTION = 0.98
_REFINE_STEPS = 6
_CORRECTOR_GUARD = 0.5


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    MAX_ITER = "max_iter"
    NUMERICAL_FAILURE = "numerical_failure"


@dataclass(frozen=True)
class SolverOptions:
    tol_gap: float = 1e-8
    tol_feas: float = 1e-8
    max_iter: int = 100
    psd_shift: float = 1e-12

    def __post_init__(self):
        if not (self.tol_gap > 0 and self.tol_feas > 0 and self.psd_shift >= 0):
            raise ParameterError("solver tolerances must be positive")
        if self.max_iter < 1:
            raise ParameterError("max_iter must be >= 1")


@dataclass
class SdpSolution:
    X_psd: np.ndarray
    x_nonneg: np.ndarray
    dual_y: np.ndarray
    Z_psd: np.ndarray
    z_nonneg: np.ndarray
    primal_obj: float
    dual_obj: float
    status: Status
    residuals: tuple[float, float, float]
    iterations: int
    history: list = field(default_factory=list, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


class _Problem:
    """Dense operator view of a conic program."""

    def __init__(self, C, c_lin, A_psd, A_lin, b):
        self.C = np.asarray(C, dtype=float)
        self.c_lin = np.asarray(c_lin, dtype=float)
        self.A = np.asarray(A_psd, dtype=float)
        self.Al = np.asarray(A_lin, dtype=float)
        self.b = np.asarray(b, dtype=float)
        self.m = self.b.shape[0]
        self.d = self.C.shape[0]
        self.p = self.c_lin.shape[0]
        self.As = svec(self.A)  # (m, d(d+1)/2)
        self.normb = np.linalg.norm(self.b)
        self.normC = math.sqrt(np.sum(self.C ** 2) + np.sum(self.c_lin ** 2))

    def op(self, X, x):
        return self.As @ svec(X) + self.Al @ x

    def adj(self, y):
        return smat(self.As.T @ y), self.Al.T @ y


def _max_step(L: np.ndarray, D: np.ndarray, x: np.ndarray, dx: np.ndarray) -> float:
    """Largest alpha with ``L L' + alpha D`` psd and ``x + alpha dx >= 0``."""
    alpha = np.inf
    if L.shape[0]:
        T = sla.solve_triangular(L, D, lower=True)
        T = sla.solve_triangular(L, T.T, lower=True)
        lam = np.linalg.eigvalsh(0.5 * (T + T.T))[0]
        if lam < 0:
            alpha = -1.0 / lam
    neg = dx < 0
    if np.any(neg):
        alpha = min(alpha, float(np.min(-x[neg] / dx[neg])))
    return alpha


def _chol(A: np.ndarray, shift: float):
    try:
        return np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        pass
    try:
        return np.linalg.cholesky(A + shift * (1.0 + np.max(np.diag(A))) * np.eye(A.shape[0]))
    except np.linalg.LinAlgError:
        return None


def _factor_schur(S: np.ndarray):
    scale = max(float(np.max(np.abs(np.diag(S)))), 1.0)
    try:
        return sla.cho_factor(S, lower=True, check_finite=False)
    except (np.linalg.LinAlgError, ValueError):
        pass
    for reg in _REGULARIZATION:
        try:
            return sla.cho_factor(S + reg * scale * np.eye(S.shape[0]), lower=True, check_finite=False)
        except (np.linalg.LinAlgError, ValueError):
            continue
    return None


def _initial_point(P: _Problem):
    d, p = P.d, P.p
    n_cone = d + p
    normA = np.sqrt(np.sum(P.A ** 2, axis=(1, 2)) + np.sum(P.Al ** 2, axis=1))
    xi = max(10.0, math.sqrt(n_cone), n_cone * float(np.max((1 + np.abs(P.b)) / (1 + normA))))
    eta = max(10.0, math.sqrt(n_cone), float(np.max(normA)), P.normC)
    return (xi * np.eye(d), xi * np.ones(p), np.zeros(P.m), eta * np.eye(d), eta * np.ones(p))


def solve_standard(C, c_lin, A_psd, A_lin, b, opts: SolverOptions | None = None) -> SdpSolution:
    """Solve the primal-dual pair described in the module docstring."""
    opts = opts or SolverOptions()
    P = _Problem(C, c_lin, A_psd, A_lin, b)
    d, p, m = P.d, P.p, P.m
    n_cone = d + p
    X, x, y, Z, z = _initial_point(P)
    status = Status.MAX_ITER
    history = []
    best = None
    it = 0

    for it in range(opts.max_iter + 1):
        AX = P.op(X, x)
        ATy, ATy_l = P.adj(y)
        rp = P.b - AX
        Rd = P.C - ATy - Z
        rd_l = P.c_lin - ATy_l - z
        pobj = float(np.sum(P.C * X) + P.c_lin @ x)
        dobj = float(P.b @ y)
        mu = (float(np.sum(X * Z)) + float(x @ z)) / n_cone
        pinf = np.linalg.norm(rp) / (1.0 + P.normb)
        dinf = math.sqrt(np.sum(Rd ** 2) + np.sum(rd_l ** 2)) / (1.0 + P.normC)
        gap = abs(pobj - dobj) / (1.0 + abs(pobj))
        history.append((it, pobj, dobj, pinf, dinf, gap, mu))
        log.debug("it=%d pobj=%.10g dobj=%.10g pinf=%.2e dinf=%.2e gap=%.2e mu=%.2e",
                  it, pobj, dobj, pinf, dinf, gap, mu)
        merit = max(pinf, dinf, gap)
        if best is None or merit < best[0]:
            best = (merit, X, x, y, Z, z, pobj, dobj, (pinf, dinf, gap), it)
        if gap <= opts.tol_gap and pinf <= opts.tol_feas and dinf <= opts.tol_feas:
            status = Status.OPTIMAL
            break
        if it == opts.max_iter:
            break

        LX = _chol(X, opts.psd_shift)
        LZ = _chol(Z, opts.psd_shift)
        if LX is None or LZ is None:
            status = Status.NUMERICAL_FAILURE
            break
        # NT scaling: W = G G', G' Z G = G^{-1} X G^{-T} = diag(lam)
        U, sv, Vt = np.linalg.svd(LZ.T @ LX)
        G = LX @ Vt.T / np.sqrt(sv)
        Ginv = (U.T / np.sqrt(sv)[:, None]) @ LZ.T
        W = G @ G.T
        lam = sv
        lam_sum = lam[:, None] + lam[None, :]

        WAW = W @ P.A @ W
        schur = P.As @ svec(WAW).T
        if p:
            ratio = x / z
            schur += (P.Al * ratio) @ P.Al.T
        schur = 0.5 * (schur + schur.T)
        fac = _factor_schur(schur)
        if fac is None:
            status = Status.NUMERICAL_FAILURE
            break

        WRdW = W @ Rd @ W
        A_WRdW = P.As @ svec(WRdW)
        ratio = x / z if p else np.zeros(0)

        def direction(Rc, rc_l):
            Qt = 2.0 * Rc / lam_sum
            GQG = G @ Qt @ G.T
            rhs = rp - P.As @ svec(GQG) + A_WRdW
            if p:
                rhs = rhs - P.Al @ (rc_l / z) + P.Al @ (ratio * rd_l)
            dy = sla.cho_solve(fac, rhs, check_finite=False)
            for step in range(_REFINE_STEPS + 1):
                ATdy, ATdy_l = P.adj(dy)
                dZ = Rd - ATdy
                dX = GQG - W @ dZ @ W
                dX = 0.5 * (dX + dX.T)
                dz = rd_l - ATdy_l
                dx = rc_l / z - ratio * dz if p else np.zeros(0)
                if step == _REFINE_STEPS:
                    break
                # refine against the primal equation A(dX) + Al dx = rp
                res = rp - P.op(dX, dx)
                if np.linalg.norm(res) <= 1e-15 * (1.0 + P.normb):
                    break
                dy = dy + sla.cho_solve(fac, res, check_finite=False)
            return dX, dx, dy, dZ, dz

        # predictor
        dXa, dxa, dya, dZa, dza = direction(-np.diag(lam ** 2), -x * z)
        ap_aff = min(1.0, _max_step(LX, dXa, x, dxa))
        ad_aff = min(1.0, _max_step(LZ, dZa, z, dza))
        mu_aff = (float(np.sum((X + ap_aff * dXa) * (Z + ad_aff * dZa)))
                  + float((x + ap_aff * dxa) @ (z + ad_aff * dza))) / n_cone
        sigma = min(1.0, max(0.0, mu_aff / mu)) ** 3

        # corrector
        dXt = Ginv @ dXa @ Ginv.T
        dZt = G.T @ dZa @ G
        cross = 0.5 * (dXt @ dZt + dZt @ dXt)
        Rc = sigma * mu * np.eye(d) - np.diag(lam ** 2) - cross
        rc_l = sigma * mu - x * z - dxa * dza
        dX, dx, dy, dZ, dz = direction(Rc, rc_l)

        ap = min(1.0, _STEP_FRACTION * _max_step(LX, dX, x, dx))
        ad = min(1.0, _STEP_FRACTION * _max_step(LZ, dZ, z, dz))
        if min(ap, ad) < _CORRECTOR_GUARD * min(ap_aff, ad_aff):
            # the second-order term can stall degenerate problems near the
            # optimum; fall back to the plain centred direction if it goes further
            alt = direction(sigma * mu * np.eye(d) - np.diag(lam ** 2), sigma * mu - x * z)
            ap2 = min(1.0, _STEP_FRACTION * _max_step(LX, alt[0], x, alt[1]))
            ad2 = min(1.0, _STEP_FRACTION * _max_step(LZ, alt[3], z, alt[4]))
            if min(ap2, ad2) > min(ap, ad):
                (dX, dx, dy, dZ, dz), ap, ad = alt, ap2, ad2
        X = X + ap * dX
        x = x + ap * dx
        y = y + ad * dy
        Z = Z + ad * dZ
        z = z + ad * dz
        X = 0.5 * (X + X.T)
        Z = 0.5 * (Z + Z.T)

    if status is not Status.OPTIMAL and best is not None:
        _, X, x, y, Z, z, pobj, dobj, res, _ = best
    else:
        res = history[-1][3], history[-1][4], history[-1][5]
        pobj, dobj = history[-1][1], history[-1][2]
    return SdpSolution(X_psd=X, x_nonneg=x, dual_y=y, Z_psd=Z, z_nonneg=z,
                       primal_obj=pobj, dual_obj=dobj, status=status,
                       residuals=tuple(float(r) for r in res), iterations=it, history=history)


def solve(prog, opts: SolverOptions | None = None) -> SdpSolution:
    """Solve a :class:`~psksdr.relaxations.ConicProgram`."""
    return solve_standard(prog.cost_psd, prog.cost_lin, prog.A_psd, prog.A_lin, prog.b, opts)
