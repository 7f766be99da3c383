"""Independent reference values for the regression tests.

Builds the three relaxations directly in cvxpy (complex Hermitian form for
the conventional and cut relaxations, 3x3 block form for the enhanced one)
and solves them with Clarabel. The printed numbers are frozen into
tests/test_reference_values.py. Not collected by pytest; cvxpy is only
needed to regenerate.

    python tests/oracles/derive_reference_values.py
"""

import itertools

import cvxpy as cp
import numpy as np

from psksdr.instance import separation_instance, sample_instance, to_quadratic


def bordered(q):
    n = q.n
    C = np.zeros((n + 1, n + 1), dtype=complex)
    C[0, 1:] = q.c.conj()
    C[1:, 0] = q.c
    C[1:, 1:] = q.Q
    return C


def conventional(q, M, cuts=False):
    n = q.n
    X = cp.Variable((n + 1, n + 1), hermitian=True)
    cons = [X >> 0, cp.real(cp.diag(X)) == 1]
    if cuts:
        for i in range(n):
            for j in range(1, M + 1):
                a = np.exp(1j * (2 * j - 1) * np.pi / M)
                cons.append(cp.real(np.conj(a) * X[i + 1, 0]) <= np.cos(np.pi / M))
    prob = cp.Problem(cp.Minimize(cp.real(cp.trace(bordered(q) @ X))), cons)
    prob.solve(solver="CLARABEL", tol_gap_abs=1e-10, tol_gap_rel=1e-10, tol_feas=1e-10)
    return prob.value


def enhanced(q, M):
    n = q.n
    Qh = np.block([[q.Q.real, -q.Q.imag], [q.Q.imag, q.Q.real]])
    ch = np.concatenate([q.c.real, q.c.imag])
    S = cp.Variable((2 * n + 1, 2 * n + 1), symmetric=True)
    t = cp.Variable((n, M), nonneg=True)
    P = [np.outer(p, p) for p in
         (np.array([1, np.cos(2 * np.pi * j / M), np.sin(2 * np.pi * j / M)]) for j in range(M))]
    cons = [S >> 0, S[0, 0] == 1]
    for i in range(n):
        idx = [0, 1 + i, 1 + n + i]
        block = sum(t[i, j] * P[j] for j in range(M))
        for a, b in ((0, 1), (0, 2), (1, 1), (2, 2), (1, 2)):
            cons.append(S[idx[a], idx[b]] == block[a, b])
        cons.append(cp.sum(t[i]) == 1)
    obj = cp.trace(Qh @ S[1:, 1:]) + 2 * ch @ S[0, 1:]
    prob = cp.Problem(cp.Minimize(obj), cons)
    prob.solve(solver="CLARABEL", tol_gap_abs=1e-10, tol_gap_rel=1e-10, tol_feas=1e-10)
    return prob.value


def ml(q, M):
    sym = np.exp(2j * np.pi * np.arange(M) / M)
    return min(q.value(np.array(x)) for x in itertools.product(sym, repeat=q.n))


CASES = {
    "separation_reported": lambda: separation_instance("reported"),
    "separation_printed": lambda: separation_instance("printed"),
    "m6n4M3s1_seed5": lambda: sample_instance(6, 4, 3, 1.0, rng=5),
    "m6n4M4s05_seed9": lambda: sample_instance(6, 4, 4, 0.5, rng=9),
    "m8n5M8s2_seed3": lambda: sample_instance(8, 5, 8, 2.0, rng=3),
}

if __name__ == "__main__":
    for name, make in CASES.items():
        inst = make()
        q = to_quadratic(inst)
        vals = (conventional(q, inst.M), conventional(q, inst.M, cuts=True), enhanced(q, inst.M),
                ml(q, inst.M))
        print(f'    "{name}": (' + ", ".join(f"{v:.7f}" for v in vals) + "),")
