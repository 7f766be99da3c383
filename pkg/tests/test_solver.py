import numpy as np
import pytest

from psksdr.errors import ParameterError
from psksdr.instance import sample_instance, to_quadratic
from psksdr.relaxations import build_rsdp
from psksdr.solver import SolverOptions, Status, solve, solve_standard


def test_two_by_two_closed_form():
    C = np.array([[0.0, 1.0], [1.0, 0.0]])
    A = np.array([np.diag([1.0, 0.0]), np.diag([0.0, 1.0])])
    sol = solve_standard(C, np.zeros(0), A, np.zeros((2, 0)), np.ones(2))
    assert sol.optimal
    assert sol.primal_obj == pytest.approx(-2.0, abs=1e-7)
    assert np.allclose(sol.X_psd, [[1, -1], [-1, 1]], atol=1e-4)


@pytest.mark.parametrize("kw", [dict(tol_gap=0), dict(tol_feas=-1), dict(max_iter=0), dict(psd_shift=-1)])
def test_options_validation(kw):
    with pytest.raises(ParameterError):
        SolverOptions(**kw)


def test_random_rsdp_invariants():
    prog = build_rsdp(to_quadratic(sample_instance(15, 10, 3, 0.5, rng=4)))
    opts = SolverOptions()
    sol = solve(prog, opts)
    assert sol.optimal
    assert sol.dual_obj <= sol.primal_obj + 1e-7 * (1 + abs(sol.primal_obj))
    X = sol.X_psd
    assert np.linalg.eigvalsh(X)[0] >= -1e-7 * (1 + np.trace(X))
    res = np.array([np.sum(A * X) for A in prog.A_psd]) - prog.b
    assert np.linalg.norm(res) <= opts.tol_feas * (1 + np.linalg.norm(prog.b))
    assert abs(sol.primal_obj - sol.dual_obj) <= opts.tol_gap * (1 + abs(sol.primal_obj))
    # dual slack consistency
    Z = prog.cost_psd - np.einsum("k,kij->ij", sol.dual_y, prog.A_psd)
    assert np.allclose(Z, sol.Z_psd, atol=1e-6)


def test_weak_duality_along_history():
    prog = build_rsdp(to_quadratic(sample_instance(10, 6, 4, 1.0, rng=5)))
    sol = solve(prog)
    for it, pobj, dobj, pinf, dinf, gap, mu in sol.history:
        if pinf <= 1e-6 and dinf <= 1e-6:
            assert dobj <= pobj + 10 * 1e-8 * (1 + abs(pobj)) + 1e-4 * (pinf + dinf) * (1 + abs(pobj))


def test_deterministic():
    prog = build_rsdp(to_quadratic(sample_instance(10, 6, 3, 1.0, rng=6)))
    a, b = solve(prog), solve(prog)
    assert abs(a.primal_obj - b.primal_obj) <= 1e-9
    assert a.iterations == b.iterations


def test_max_iter_returns_best_iterate():
    prog = build_rsdp(to_quadratic(sample_instance(10, 6, 3, 1.0, rng=6)))
    sol = solve(prog, SolverOptions(max_iter=3))
    assert sol.status is Status.MAX_ITER
    merits = [max(h[3], h[4], h[5]) for h in sol.history]
    assert max(sol.residuals) == pytest.approx(min(merits))


def test_nonneg_block_lp():
    # min x1 + 2 x2 s.t. x1 + x2 = 1, x >= 0, with a trivial 1x1 PSD block X = 1
    C = np.zeros((1, 1))
    A = np.array([[[1.0]], [[0.0]]])
    Al = np.array([[0.0, 0.0], [1.0, 1.0]])
    sol = solve_standard(C, np.array([1.0, 2.0]), A, Al, np.array([1.0, 1.0]))
    assert sol.optimal
    assert sol.primal_obj == pytest.approx(1.0, abs=1e-7)
    assert np.allclose(sol.x_nonneg, [1, 0], atol=1e-6)
