import numpy as np
import pytest
from hypothesis import given, strategies as st

from psksdr.errors import ParameterError
from psksdr.instance import sample_instance, separation_instance, to_quadratic
from psksdr.oracle import brute_force
from psksdr.relaxations import solve_relaxation
from psksdr.rounding import project_psk, psk_indices, randomized_round


def test_project_examples():
    assert project_psk(np.array([0.9 + 0.1j]), 4)[0] == 1
    assert project_psk(np.array([np.exp(0.8j * np.pi)]), 2)[0] == -1
    assert project_psk(np.array([0.1 + 2j]), 4)[0] == 1j


@pytest.mark.parametrize("M", [2, 3, 4, 8, 16])
def test_symbols_are_fixed_points(M):
    s = np.exp(2j * np.pi * np.arange(M) / M)
    assert np.array_equal(psk_indices(s, M), np.arange(M))
    p = project_psk(s, M)
    assert np.allclose(p, s, atol=1e-15) and np.allclose(np.abs(p), 1)


def test_ties_go_to_smaller_index():
    # halfway between symbol 0 and symbol 1 for M=4
    assert psk_indices(np.array([1 + 1j]), 4)[0] == 0
    assert psk_indices(np.array([-1 + 1j]), 4)[0] == 1
    assert psk_indices(np.array([0j]), 4)[0] == 0


@given(st.integers(2, 16), st.floats(-10, 10), st.floats(-10, 10))
def test_projection_is_nearest(M, a, b):
    x = complex(a, b)
    if abs(x) < 1e-6:
        return
    p = project_psk(np.array([x]), M)[0]
    s = np.exp(2j * np.pi * np.arange(M) / M)
    assert abs(x - p) <= np.min(np.abs(x - s)) + 1e-9
    assert project_psk(np.array([p]), M)[0] == p


def test_trials_must_be_positive():
    q = to_quadratic(separation_instance())
    sol = solve_relaxation("ersdp", q, 3)
    with pytest.raises(ParameterError):
        randomized_round(sol, q, 3, trials=0)


def _solved(seed, M=4, sigma2=2.0, m=8, n=5):
    inst = sample_instance(m, n, M, sigma2, rng=seed)
    q = to_quadratic(inst)
    return inst, q, solve_relaxation("rsdp", q, M)


def test_rounding_is_feasible_and_above_bound():
    for seed in range(5):
        inst, q, sol = _solved(seed)
        r = randomized_round(sol, q, inst.M, 50, rng=seed)
        assert np.allclose(np.abs(r.x_hat), 1)
        assert np.array_equal(project_psk(r.x_hat, inst.M), r.x_hat)
        assert r.objective >= sol.lower_bound - 1e-6
        assert r.objective == pytest.approx(q.value(r.x_hat))


def test_more_trials_never_worse():
    # same stream: the first k samples of a longer run are the k-sample run
    inst, q, sol = _solved(3, M=8, sigma2=5.0)
    vals = [randomized_round(sol, q, 8, t, rng=42).objective for t in (1, 10, 100, 1000)]
    assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))


def test_deterministic_for_seed():
    inst, q, sol = _solved(4)
    a = randomized_round(sol, q, 4, 100, rng=9)
    b = randomized_round(sol, q, 4, 100, rng=9)
    assert np.array_equal(a.x_hat, b.x_hat)


def test_separation_instance_rounds_to_ml():
    q = to_quadratic(separation_instance())
    sol = solve_relaxation("ersdp", q, 3)
    r = randomized_round(sol, q, 3, 1000, rng=0)
    assert r.objective == pytest.approx(brute_force(q, 3).value, abs=1e-9)


def test_rank_one_solution_rounds_to_itself():
    inst = sample_instance(10, 5, 8, 0.0, rng=2)
    q = to_quadratic(inst)
    sol = solve_relaxation("ersdp", q, 8)
    r = randomized_round(sol, q, 8, 10, rng=0)
    assert np.array_equal(r.x_hat, project_psk(inst.x_star, 8))
    assert r.source == "direct"


def test_matches_ml_on_small_instances():
    hits = 0
    for k in range(50):
        M = (3, 4, 8)[k % 3]
        inst = sample_instance(8, 4 + k % 3, M, 0.5, rng=1000 + k)
        q = to_quadratic(inst)
        r = randomized_round(solve_relaxation("ersdp", q, M), q, M, 100, rng=k)
        hits += abs(r.objective - brute_force(q, M).value) <= 1e-9 * (1 + abs(r.objective))
    assert hits >= 45


def test_zero_noise_upper_equals_lower():
    inst = sample_instance(8, 4, 3, 0.0, rng=5)
    q = to_quadratic(inst)
    for kind in ("rsdp", "csdp2", "ersdp"):
        sol = solve_relaxation(kind, q, 3)
        r = randomized_round(sol, q, 3, 20, rng=1)
        assert np.array_equal(r.x_hat, project_psk(inst.x_star, 3))
        assert r.objective == pytest.approx(sol.lower_bound, abs=1e-5 * (1 + abs(r.objective)))
