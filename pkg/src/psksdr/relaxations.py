"""Semidefinite relaxations of PSK detection compiled to one conic standard form.

Every relaxation lives in a single PSD block of side ``d`` plus a nonnegative
block of length ``p``. For the real-form relaxations the PSD block is the
bordered matrix ``[[1, y'], [y, Y]]`` with ``y = [Re x; Im x]`` so block index
0 is the homogenizing corner, ``1..n`` the real parts and ``n+1..2n`` the
imaginary parts.

Supported kinds:

* ``bsdp``  -- binary relaxation over ``Re Q``, ``Re c`` (M = 2 only).
* ``rsdp``  -- real form of the conventional complex relaxation.
* ``csdp2`` -- ``rsdp`` plus the polygon cuts ``Re(conj(a_j) x_i) <= cos(pi/M)``.
* ``ersdp`` -- each 3x3 principal block ``[1, y_i, y_{n+i}; ...]`` restricted to
  the convex hull of the rank-one PSK extreme points.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.linalg as sla

from .errors import CertificateError, ExtractionError, ParameterError, UsageError
from .instance import QuadraticForm
from .linalg import real_embedding, symmetric_eig_min
from .solver import SdpSolution, SolverOptions, solve

KINDS = ("bsdp", "rsdp", "csdp2", "ersdp")
RANK_TOL = 1e-10


@dataclass(frozen=True)
class ConicProgram:
    """``min C.X + c'x + offset`` s.t. ``A_k.X + a_k'x = b_k``, ``X psd``, ``x >= 0``.

    ``rows`` maps row-group names (``corner``, ``diag``, ``cut``, ``simplex``, ...)
    to the constraint indices in that group so solutions and multipliers can
    be mapped back to relaxation variables.
    """

    psd_dim: int
    nonneg_dim: int
    cost_psd: np.ndarray
    cost_lin: np.ndarray
    A_psd: np.ndarray
    A_lin: np.ndarray
    b: np.ndarray
    offset: float = 0.0
    label: str = ""
    n: int = 0
    M: int = 0
    rows: dict = field(default_factory=dict)

    @property
    def num_constraints(self) -> int:
        return self.b.shape[0]

    @property
    def constraints(self):
        for k in range(self.num_constraints):
            yield self.A_psd[k], self.A_lin[k], float(self.b[k])


class _Builder:
    def __init__(self, d: int, p: int = 0):
        self.d, self.p = d, p
        self.A, self.Al, self.b = [], [], []
        self.rows: dict[str, list[int]] = {}

    def add(self, group: str, entries, rhs: float, lin=()):
        """``entries`` is a list of ``(i, j, coef)`` meaning ``coef * X[i, j]``."""
        A = np.zeros((self.d, self.d))
        for i, j, coef in entries:
            if i == j:
                A[i, i] += coef
            else:
                A[i, j] += 0.5 * coef
                A[j, i] += 0.5 * coef
        a = np.zeros(self.p)
        for k, coef in lin:
            a[k] += coef
        self.rows.setdefault(group, []).append(len(self.b))
        self.A.append(A)
        self.Al.append(a)
        self.b.append(float(rhs))

    def build(self, C, c_lin, label, n, M) -> ConicProgram:
        A = np.array(self.A)
        Al = np.array(self.Al).reshape(len(self.b), self.p)
        check_row_rank(A, Al)
        arrays = [np.asarray(C, float), np.asarray(c_lin, float), A, Al, np.array(self.b)]
        for arr in arrays:
            arr.setflags(write=False)
        rows = {k: tuple(v) for k, v in self.rows.items()}
        return ConicProgram(self.d, self.p, *arrays, offset=0.0, label=label, n=n, M=M, rows=rows)


def check_row_rank(A_psd: np.ndarray, A_lin: np.ndarray, tol: float = RANK_TOL) -> int:
    """Rank of the constraint rows via column-pivoted QR; raises if deficient."""
    m = A_psd.shape[0]
    rows = np.hstack([A_psd.reshape(m, -1), A_lin.reshape(m, -1)])
    _, R, _ = sla.qr(rows.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > tol * diag[0])) if diag.size else 0
    if rank < m:
        raise ParameterError(f"constraint rows are linearly dependent (rank {rank} < {m})")
    return rank


# --- complex <-> real ---------------------------------------------------------

def realify(q: QuadraticForm):
    """Real symmetric ``(Qhat, chat)`` with ``y'Qhat y + 2 chat'y = x^H Q x + 2 Re(c^H x)``."""
    Q = np.asarray(q.Q)
    scale = 1.0 + np.abs(Q).max(initial=0.0)
    if np.abs(Q - Q.conj().T).max(initial=0.0) > 1e-10 * scale:
        raise ParameterError("Q is not Hermitian")
    Qhat = real_embedding(Q).astype(float)
    Qhat = 0.5 * (Qhat + Qhat.T)
    chat = np.concatenate([np.real(q.c), np.imag(q.c)]).astype(float)
    return Qhat, chat


def _bordered_cost(Qhat: np.ndarray, chat: np.ndarray) -> np.ndarray:
    d = Qhat.shape[0] + 1
    C = np.zeros((d, d))
    C[1:, 1:] = Qhat
    C[0, 1:] = chat
    C[1:, 0] = chat
    return C


# --- builders ----------------------------------------------------------------

def build_rsdp(q: QuadraticForm) -> ConicProgram:
    n = q.n
    Qhat, chat = realify(q)
    bld = _Builder(2 * n + 1)
    bld.add("corner", [(0, 0, 1.0)], 1.0)
    for i in range(n):
        bld.add("diag", [(1 + i, 1 + i, 1.0), (1 + n + i, 1 + n + i, 1.0)], 1.0)
    return bld.build(_bordered_cost(Qhat, chat), np.zeros(0), "rsdp", n, 0)


def build_bsdp(q: QuadraticForm, M: int = 2) -> ConicProgram:
    if M != 2:
        raise UsageError(f"the binary relaxation needs M = 2, got M = {M}")
    n = q.n
    Qr = np.real(q.Q)
    cr = np.real(q.c)
    C = np.zeros((n + 1, n + 1))
    C[1:, 1:] = 0.5 * (Qr + Qr.T)
    C[0, 1:] = cr
    C[1:, 0] = cr
    bld = _Builder(n + 1)
    bld.add("corner", [(0, 0, 1.0)], 1.0)
    for i in range(n):
        bld.add("diag", [(1 + i, 1 + i, 1.0)], 1.0)
    return bld.build(C, np.zeros(0), "bsdp", n, 2)


@dataclass(frozen=True)
class ExtremePointSet:
    M: int
    P: np.ndarray  # (M, 3, 3)


def make_extreme_points(M: int) -> ExtremePointSet:
    """Rank-one matrices ``p_j p_j'`` with ``p_j = (1, cos(2 pi j/M), sin(2 pi j/M))``."""
    if int(M) != M or M < 2:
        raise ParameterError(f"need M >= 2, got {M}")
    ang = 2 * np.pi * np.arange(M) / M
    p = np.stack([np.ones(M), np.cos(ang), np.sin(ang)], axis=1)
    P = np.einsum("ja,jb->jab", p, p)
    P.setflags(write=False)
    return ExtremePointSet(int(M), P)


def build_ersdp(q: QuadraticForm, M: int) -> ConicProgram:
    n = q.n
    Qhat, chat = realify(q)
    P = make_extreme_points(M).P
    bld = _Builder(2 * n + 1, n * M)
    bld.add("corner", [(0, 0, 1.0)], 1.0)
    for i in range(n):
        re, im = 1 + i, 1 + n + i
        t_idx = [i * M + j for j in range(M)]
        # Y(i) = sum_j t_ij P_j, entry by entry (upper triangle, corner excluded)
        for group, (a, b), (pa, pb) in (
            ("y_re", (0, re), (0, 1)),
            ("y_im", (0, im), (0, 2)),
            ("Y_rr", (re, re), (1, 1)),
            ("Y_ii", (im, im), (2, 2)),
            ("Y_ri", (re, im), (1, 2)),
        ):
            lin = [(t, -P[j, pa, pb]) for j, t in enumerate(t_idx)]
            bld.add(group, [(a, b, 1.0)], 0.0, lin)
        bld.add("simplex", [], 1.0, [(t, 1.0) for t in t_idx])
    return bld.build(_bordered_cost(Qhat, chat), np.zeros(n * M), "ersdp", n, M)


def cut_directions(M: int) -> np.ndarray:
    """Cut normals ``a_j = exp(i (2j - 1) pi / M)``, j = 0..M-1."""
    return np.exp(1j * (2 * np.arange(M) - 1) * np.pi / M)


def build_csdp2(q: QuadraticForm, M: int) -> ConicProgram:
    if M < 3:
        raise UsageError(f"the polygon-cut relaxation needs M >= 3, got M = {M}")
    n = q.n
    Qhat, chat = realify(q)
    a = cut_directions(M)
    rhs = math.cos(math.pi / M)
    bld = _Builder(2 * n + 1, n * M)
    bld.add("corner", [(0, 0, 1.0)], 1.0)
    for i in range(n):
        bld.add("diag", [(1 + i, 1 + i, 1.0), (1 + n + i, 1 + n + i, 1.0)], 1.0)
    for i in range(n):
        for j in range(M):
            entries = [(0, 1 + i, a[j].real), (0, 1 + n + i, a[j].imag)]
            bld.add("cut", entries, rhs, [(i * M + j, 1.0)])
    return bld.build(_bordered_cost(Qhat, chat), np.zeros(n * M), "csdp2", n, M)


def build(kind: str, q: QuadraticForm, M: int) -> ConicProgram:
    if kind == "bsdp":
        return build_bsdp(q, M)
    if kind == "rsdp":
        return build_rsdp(q)
    if kind == "csdp2":
        return build_csdp2(q, M)
    if kind == "ersdp":
        return build_ersdp(q, M)
    raise UsageError(f"unknown relaxation {kind!r}; expected one of {KINDS}")


# --- solution mapping ---------------------------------------------------------

def complexify_solution(y: np.ndarray, Y: np.ndarray, tol: float = 1e-7):
    """Map a real-form point ``(y, Y)`` to ``(x, X)`` with the same objective.

    With ``y = [a; b]`` and ``Y = [[A, B], [B', C]]`` this returns
    ``x = a + ib`` and ``X = (A + C) + i(B' - B)``.
    """
    y = np.asarray(y, dtype=float)
    Y = np.asarray(Y, dtype=float)
    n = y.shape[0] // 2
    bordered = np.block([[np.ones((1, 1)), y[None, :]], [y[:, None], Y]])
    lam = symmetric_eig_min(0.5 * (bordered + bordered.T))
    if lam < -tol * (1.0 + np.trace(bordered)):
        raise CertificateError(f"real bordered matrix not PSD (min eigenvalue {lam:.3e})")
    A, B, C = Y[:n, :n], Y[:n, n:], Y[n:, n:]
    x = y[:n] + 1j * y[n:]
    X = (A + C) + 1j * (B.T - B)
    X = 0.5 * (X + X.conj().T)
    return x, X


def bordered_complex(x: np.ndarray, X: np.ndarray) -> np.ndarray:
    n = x.shape[0]
    out = np.empty((n + 1, n + 1), dtype=complex)
    out[0, 0] = 1.0
    out[0, 1:] = x.conj()
    out[1:, 0] = x
    out[1:, 1:] = X
    return out


def realify_feasible(x: np.ndarray, X: np.ndarray, factors: Optional[np.ndarray] = None,
                     tol: float = 1e-7):
    """Map a complex point ``(x, X)`` to a real-form point with the same objective.

    ``factors`` optionally supplies columns ``w_k`` with
    ``[[1, x^H], [x, X]] = sum_k w_k w_k^H``; otherwise they come from an
    eigendecomposition. Each ``w_k`` is rotated so its first entry ``t_k`` is
    real and nonnegative, then ``y = sum_k t_k [Re v_k; Im v_k]`` and
    ``Y = sum_k [Re v_k; Im v_k][Re v_k; Im v_k]'`` where ``v_k = w_k[1:]``.
    """
    x = np.asarray(x, dtype=complex)
    X = np.asarray(X, dtype=complex)
    if factors is None:
        P = bordered_complex(x, X)
        lam, V = np.linalg.eigh(0.5 * (P + P.conj().T))
        if lam[0] < -tol * (1.0 + np.trace(P).real):
            raise CertificateError(f"complex bordered matrix not PSD (min eigenvalue {lam[0]:.3e})")
        factors = V * np.sqrt(np.clip(lam, 0.0, None))
    W = np.asarray(factors, dtype=complex)
    phase = np.exp(-1j * np.angle(W[0]))
    W = W * phase
    t = W[0].real
    V = W[1:]
    R = np.vstack([V.real, V.imag])
    y = R @ t
    Y = R @ R.T
    return y, Y


@dataclass
class RelaxationSolution:
    kind: str
    lower_bound: float
    y_vec: np.ndarray
    Y_mat: np.ndarray
    t_weights: Optional[np.ndarray]
    x_complex: np.ndarray
    X_complex: np.ndarray
    solver_stats: SdpSolution
    program: ConicProgram = field(repr=False)
    seconds: float = 0.0

    @property
    def status(self):
        return self.solver_stats.status

    def bordered(self) -> np.ndarray:
        return bordered_complex(self.x_complex, self.X_complex)


def solution_from_sdp(prog: ConicProgram, sol: SdpSolution, seconds: float = 0.0) -> RelaxationSolution:
    S = sol.X_psd
    n = prog.n
    if prog.label == "bsdp":
        y = np.concatenate([S[0, 1:], np.zeros(n)])
        Y = np.zeros((2 * n, 2 * n))
        Y[:n, :n] = S[1:, 1:]
    else:
        y = S[0, 1:].copy()
        Y = S[1:, 1:].copy()
    t = sol.x_nonneg.reshape(n, prog.M).copy() if prog.label == "ersdp" else None
    x, X = complexify_solution(y, Y, tol=1e-6)
    return RelaxationSolution(kind=prog.label, lower_bound=sol.primal_obj + prog.offset,
                              y_vec=y, Y_mat=Y, t_weights=t, x_complex=x, X_complex=X,
                              solver_stats=sol, program=prog, seconds=seconds)


def solve_relaxation(kind: str, q: QuadraticForm, M: int,
                     opts: SolverOptions | None = None) -> RelaxationSolution:
    prog = build(kind, q, M)
    t0 = time.perf_counter()
    sol = solve(prog, opts)
    return solution_from_sdp(prog, sol, time.perf_counter() - t0)


# --- CSDP2 dual ---------------------------------------------------------------

@dataclass
class Csdp2Dual:
    lam: np.ndarray
    tau: float
    mu: np.ndarray  # (n, M)
    g: np.ndarray
    dual_objective: float
    min_eig: float


def csdp2_dual_matrix(q: QuadraticForm, lam, tau, g) -> np.ndarray:
    """``[[-tau, (c + g)^H], [c + g, Q + Diag(lam)]]``."""
    n = q.n
    out = np.empty((n + 1, n + 1), dtype=complex)
    cg = q.c + g
    out[0, 0] = -tau
    out[0, 1:] = cg.conj()
    out[1:, 0] = cg
    out[1:, 1:] = q.Q + np.diag(lam)
    return 0.5 * (out + out.conj().T)


def extract_csdp2_dual(prog: ConicProgram, sol: SdpSolution, q: QuadraticForm,
                       obj_tol: float = 1e-5, psd_tol: float = 1e-6) -> Csdp2Dual:
    """Read ``(lambda, tau, mu)`` off the solver multipliers of a ``csdp2`` program.

    Corner multiplier is ``tau``, the diagonal rows carry ``-lambda_i`` and
    the cut rows ``-mu_ij``.
    """
    if prog.label != "csdp2":
        raise UsageError("dual extraction needs a csdp2 program")
    yd = sol.dual_y
    n, M = prog.n, prog.M
    tau = float(yd[prog.rows["corner"][0]])
    lam = -yd[list(prog.rows["diag"])]
    mu = -yd[list(prog.rows["cut"])].reshape(n, M)
    mu_min = mu.min()
    if mu_min < -psd_tol * (1.0 + np.abs(mu).max()):
        raise ExtractionError(f"cut multipliers negative (min {mu_min:.3e})")
    mu = np.clip(mu, 0.0, None)
    g = (mu / 2.0) @ cut_directions(M)
    dual_obj = tau - lam.sum() - math.cos(math.pi / M) * mu.sum()
    primal = sol.primal_obj + prog.offset
    residual = abs(dual_obj - primal)
    if residual > obj_tol * (1.0 + abs(primal)):
        raise ExtractionError(f"dual objective {dual_obj:.8g} != primal {primal:.8g} "
                              f"(residual {residual:.3e})")
    D = csdp2_dual_matrix(q, lam, tau, g)
    min_eig = symmetric_eig_min(D)
    if min_eig < -psd_tol * (1.0 + np.abs(D).max()):
        raise ExtractionError(f"dual matrix not PSD (min eigenvalue {min_eig:.3e})")
    return Csdp2Dual(lam=lam, tau=tau, mu=mu, g=g, dual_objective=float(dual_obj), min_eig=min_eig)


# --- debug dump ---------------------------------------------------------------

def dump_program(prog: ConicProgram, path) -> None:
    """Write a sparse-triplet text dump, one constraint per line.

    Format::

        # label=<kind> psd_dim=<d> nonneg_dim=<p> rows=<m> offset=<float>
        obj psd i,j,v ... lin k,v ...
        con <k> rhs=<b> psd i,j,v ... lin k,v ...

    PSD triplets list the upper triangle ``i <= j`` (0-based) of the full
    symmetric matrix; lower entries are implied by symmetry.
    """
    def terms(A, a):
        iu, ju = np.triu_indices(A.shape[0])
        parts = ["psd"] + [f"{i},{j},{float(A[i, j])!r}" for i, j in zip(iu, ju) if A[i, j] != 0.0]
        parts += ["lin"] + [f"{k},{float(a[k])!r}" for k in np.flatnonzero(a)]
        return " ".join(parts)

    lines = [f"# label={prog.label} psd_dim={prog.psd_dim} nonneg_dim={prog.nonneg_dim} "
             f"rows={prog.num_constraints} offset={float(prog.offset)!r}",
             "obj " + terms(prog.cost_psd, prog.cost_lin)]
    for k, (A, a, rhs) in enumerate(prog.constraints):
        lines.append(f"con {k} rhs={float(rhs)!r} " + terms(A, a))
    Path(path).write_text("\n".join(lines) + "\n")


def load_program_dump(path):
    """Parse :func:`dump_program` output into ``(C, c_lin, A_psd, A_lin, b, header)``."""
    lines = Path(path).read_text().splitlines()
    header = dict(tok.split("=", 1) for tok in lines[0].lstrip("# ").split())
    d, p, m = int(header["psd_dim"]), int(header["nonneg_dim"]), int(header["rows"])

    def parse(tokens):
        A = np.zeros((d, d))
        a = np.zeros(p)
        mode = None
        for tok in tokens:
            if tok in ("psd", "lin"):
                mode = tok
                continue
            vals = tok.split(",")
            if mode == "psd":
                i, j, v = int(vals[0]), int(vals[1]), float(vals[2])
                A[i, j] = A[j, i] = v
            else:
                a[int(vals[0])] = float(vals[1])
        return A, a

    C, c_lin = parse(lines[1].split()[1:])
    A_psd, A_lin, b = np.zeros((m, d, d)), np.zeros((m, p)), np.zeros(m)
    for line in lines[2:]:
        tok = line.split()
        k = int(tok[1])
        b[k] = float(tok[2].split("=", 1)[1])
        A_psd[k], A_lin[k] = parse(tok[3:])
    return C, c_lin, A_psd, A_lin, b, header
