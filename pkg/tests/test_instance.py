import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from psksdr.errors import InvariantError, ParameterError, SchemaError
from psksdr.instance import (MimoInstance, PskAlphabet, QuadraticForm, separation_instance,
                             derive_seed, instance_from_dict, instance_to_dict, load_instance,
                             sample_instance, save_instance, to_quadratic)


def test_alphabet_symbols():
    a = PskAlphabet(8)
    s = a.symbols
    assert s[0] == 1
    assert np.allclose(np.abs(s), 1)
    assert len(set(np.round(s, 12))) == 8
    assert np.array_equal(a.indices(s), np.arange(8))


@pytest.mark.parametrize("M", [1, 0, 2.5])
def test_alphabet_rejects_small_or_fractional(M):
    with pytest.raises(ParameterError):
        PskAlphabet(M)


def test_sample_reconstruction_identity():
    inst = sample_instance(15, 10, 3, 0.01, rng=1)
    assert np.linalg.norm(inst.r - inst.H @ inst.x_star - inst.v) <= 1e-12 * np.linalg.norm(inst.r)
    inst.validate()


def test_zero_noise_instance():
    inst = sample_instance(2, 2, 3, 0.0, rng=3)
    assert np.all(inst.v == 0)
    assert np.array_equal(inst.r, inst.H @ inst.x_star)


def test_per_part_moment():
    # E ||H||_F^2 / (2 m n) = 1 under unit variance per real part
    rng = np.random.default_rng(0)
    vals = [np.sum(np.abs(sample_instance(15, 10, 3, 0.0, "per-part-unit", rng).H) ** 2) / 300
            for _ in range(10_000)]
    assert 0.97 <= np.mean(vals) <= 1.03


def test_complex_unit_moment():
    rng = np.random.default_rng(1)
    vals = [np.mean(np.abs(sample_instance(15, 10, 3, 2.0, rng=rng).v) ** 2) for _ in range(4000)]
    assert abs(np.mean(vals) - 2.0) < 0.05


@pytest.mark.parametrize("args", [(2, 3, 3, 0.1), (0, 0, 3, 0.1), (5, 3, 1, 0.1), (5, 3, 3, -1.0)])
def test_sample_parameter_errors(args):
    with pytest.raises(ParameterError):
        sample_instance(*args, rng=0)


def test_unknown_convention():
    with pytest.raises(ParameterError):
        sample_instance(3, 2, 3, 0.1, convention="other", rng=0)


def test_determinism_and_seed_recorded():
    a = sample_instance(6, 4, 4, 0.3, rng=42)
    b = sample_instance(6, 4, 4, 0.3, rng=42)
    assert json.dumps(instance_to_dict(a)) == json.dumps(instance_to_dict(b))
    assert a.seed == 42


def test_derive_seed_xor():
    assert derive_seed(0b1010, 0b0110) == 0b1100
    assert derive_seed(2 ** 64 - 1, 1) == 2 ** 64 - 2


def test_separation_gram_matrix():
    q = to_quadratic(separation_instance("printed"))
    assert np.allclose(q.Q, [[125, 4 + 103j], [4 - 103j, 125]])
    # the noise variant does not change Q
    assert np.allclose(to_quadratic(separation_instance("reported")).Q, q.Q)


def test_separation_variants_differ_only_in_noise():
    a, b = separation_instance("reported"), separation_instance("printed")
    assert np.array_equal(a.v, b.v.conj())
    assert np.array_equal(a.H, b.H)
    with pytest.raises(ParameterError):
        separation_instance("other")


def test_scalar_quadratic():
    inst = MimoInstance(H=np.array([[1.0 + 0j]]), x_star=np.array([1.0 + 0j]), v=np.zeros(1, complex),
                        r=np.array([1.0 + 0j]), M=2)
    q = to_quadratic(inst)
    assert np.allclose(q.Q, [[1]]) and np.allclose(q.c, [-1]) and q.const_term == 1


def test_objective_at_x_star_is_noise_energy():
    inst = sample_instance(8, 5, 4, 0.5, rng=7)
    q = to_quadratic(inst)
    val = q.residual_norm2(inst.x_star)
    assert abs(val - np.linalg.norm(inst.v) ** 2) <= 1e-8 * (1 + val)


def test_objective_identity_random_points():
    inst = sample_instance(12, 6, 3, 1.0, rng=8)
    q = to_quadratic(inst)
    rng = np.random.default_rng(0)
    xs = np.exp(2j * np.pi * rng.random((1000, 6)))
    direct = np.linalg.norm(xs @ inst.H.T - inst.r, axis=1) ** 2
    via_q = q.values(xs) + q.const_term
    assert np.all(np.abs(via_q - direct) <= 1e-8 * (1 + direct))
    assert np.isclose(q.value(xs[0]), q.values(xs[:1])[0])


@given(st.integers(2, 8), st.integers(1, 5), st.integers(0, 3), st.integers(0, 2 ** 32))
def test_alphabet_closure_property(M, n, extra, seed):
    inst = sample_instance(n + extra, n, M, 0.1, rng=seed)
    k = np.angle(inst.x_star) * M / (2 * np.pi)
    assert np.allclose(k, np.round(k), atol=1e-9)
    assert np.linalg.norm(inst.r - inst.H @ inst.x_star - inst.v) <= 1e-12 * max(1, np.linalg.norm(inst.r))


def test_quadratic_psd():
    q = to_quadratic(sample_instance(10, 10, 3, 1.0, rng=2))
    assert np.allclose(q.Q, q.Q.conj().T)
    assert np.linalg.eigvalsh(q.Q)[0] >= -1e-9 * np.trace(q.Q).real


# --- JSON ---------------------------------------------------------------------

def test_roundtrip_bit_identical(tmp_path):
    inst = separation_instance()
    path = tmp_path / "b.json"
    save_instance(inst, path)
    back = load_instance(path)
    for key in ("H", "v", "x_star", "r"):
        assert np.array_equal(getattr(back, key), getattr(inst, key))


def test_roundtrip_random_full_precision(tmp_path):
    inst = sample_instance(7, 3, 8, 0.37, rng=123)
    save_instance(inst, tmp_path / "x.json")
    back = load_instance(tmp_path / "x.json")
    assert np.array_equal(back.H, inst.H) and np.array_equal(back.r, inst.r)
    assert back.seed == 123 and back.sigma2 == inst.sigma2


def test_missing_field(tmp_path):
    d = instance_to_dict(separation_instance())
    del d["M"]
    p = tmp_path / "m.json"
    p.write_text(json.dumps(d))
    with pytest.raises(SchemaError, match="missing field M"):
        load_instance(p)


def test_off_unit_symbol_rejected():
    d = instance_to_dict(separation_instance())
    d["x_star"][0] = [0.5, 0.0]
    with pytest.raises(InvariantError, match="x_star not unit-modulus"):
        instance_from_dict(d)


def test_off_grid_symbol_rejected():
    d = instance_to_dict(separation_instance())
    d["x_star"][1] = [np.cos(0.3), np.sin(0.3)]
    with pytest.raises(InvariantError):
        instance_from_dict(d)


def test_bad_shape_and_json(tmp_path):
    d = instance_to_dict(separation_instance())
    d["H"] = d["H"][:1]
    with pytest.raises(SchemaError):
        instance_from_dict(d)
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(SchemaError):
        load_instance(p)


def test_inconsistent_r_rejected():
    d = instance_to_dict(separation_instance())
    d["r"][0][0] += 1.0
    with pytest.raises(InvariantError):
        instance_from_dict(d)
