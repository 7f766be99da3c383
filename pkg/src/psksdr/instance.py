"""MIMO detection instances with M-PSK inputs.

An instance is the channel model ``r = H x* + v``. Detection minimizes
``||H x - r||^2`` over PSK vectors, which expands to the quadratic form
``x^H Q x + 2 Re(c^H x) + ||r||^2`` with ``Q = H^H H`` and ``c = -H^H r``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import InvariantError, ParameterError, SchemaError

CONVENTIONS = ("complex-unit", "per-part-unit")


@dataclass(frozen=True)
class PskAlphabet:
    """The M-PSK constellation ``{exp(2*pi*i*j/M) : j = 0..M-1}``."""

    M: int

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 2:
            raise ParameterError(f"alphabet size M must be an integer >= 2, got {self.M}")

    @property
    def symbols(self) -> np.ndarray:
        return np.exp(2j * np.pi * np.arange(self.M) / self.M)

    def symbol(self, j: int) -> complex:
        return complex(np.exp(2j * np.pi * (j % self.M) / self.M))

    def indices(self, x, atol: float = 1e-9) -> np.ndarray:
        """Symbol index of every entry of ``x``; raises if an entry is off the alphabet."""
        x = np.atleast_1d(np.asarray(x, dtype=complex))
        if np.any(np.abs(np.abs(x) - 1.0) > atol):
            raise InvariantError("x_star not unit-modulus")
        k = np.angle(x) * self.M / (2 * np.pi)
        j = np.rint(k)
        if np.any(np.abs(k - j) > atol * self.M):
            raise InvariantError(f"x_star argument not a multiple of 2*pi/{self.M}")
        return (j.astype(int) % self.M)


@dataclass(frozen=True)
class QuadraticForm:
    """Objective ``x^H Q x + 2 Re(c^H x) + const_term``.

    Reported bounds throughout the package exclude ``const_term``.
    """

    Q: np.ndarray
    c: np.ndarray
    const_term: float = 0.0

    @property
    def n(self) -> int:
        return self.c.shape[0]

    def value(self, x) -> float:
        """Objective at ``x`` without the constant term."""
        x = np.asarray(x, dtype=complex)
        return float(np.real(np.vdot(x, self.Q @ x)) + 2.0 * np.real(np.vdot(self.c, x)))

    def values(self, xs: np.ndarray) -> np.ndarray:
        """Row-wise objective for a stack of candidates of shape (k, n)."""
        xs = np.asarray(xs, dtype=complex)
        quad = np.einsum("ki,ki->k", xs.conj(), xs @ self.Q.T).real
        return quad + 2.0 * (xs @ self.c.conj()).real

    def residual_norm2(self, x) -> float:
        """``||H x - r||^2`` recovered through the constant term."""
        return self.value(x) + self.const_term


@dataclass(frozen=True)
class MimoInstance:
    """One realization of ``r = H x* + v`` with PSK inputs."""

    H: np.ndarray
    x_star: np.ndarray
    v: np.ndarray
    r: np.ndarray
    M: int
    sigma2: float = 0.0
    seed: Optional[int] = None
    convention: str = field(default="complex-unit", compare=False)

    @property
    def m(self) -> int:
        return self.H.shape[0]

    @property
    def n(self) -> int:
        return self.H.shape[1]

    @property
    def alphabet(self) -> PskAlphabet:
        return PskAlphabet(self.M)

    def Hv(self) -> np.ndarray:
        return self.H.conj().T @ self.v

    def validate(self, rtol: float = 1e-12) -> None:
        m, n = self.H.shape
        if n < 1 or m < n:
            raise InvariantError(f"need m >= n >= 1, got m={m}, n={n}")
        if self.x_star.shape != (n,) or self.v.shape != (m,) or self.r.shape != (m,):
            raise InvariantError("vector lengths inconsistent with H")
        if self.sigma2 < 0:
            raise InvariantError("sigma2 must be nonnegative")
        self.alphabet.indices(self.x_star)
        resid = np.linalg.norm(self.r - self.H @ self.x_star - self.v)
        if resid > rtol * max(np.linalg.norm(self.r), 1.0):
            raise InvariantError(f"r != H x_star + v (residual {resid:.3e})")


def _gaussian(rng: np.random.Generator, shape, part_var: float) -> np.ndarray:
    s = math.sqrt(part_var)
    return s * rng.standard_normal(shape) + 1j * s * rng.standard_normal(shape)


def sample_instance(
    m: int,
    n: int,
    M: int,
    sigma2: float,
    convention: str = "complex-unit",
    rng: np.random.Generator | int | None = None,
) -> MimoInstance:
    """Draw an i.i.d. Gaussian channel, uniform PSK symbols and Gaussian noise.

    Under ``complex-unit`` each channel entry has unit complex variance
    (real and imaginary parts N(0, 1/2)); under ``per-part-unit`` both parts
    are N(0, 1). Noise entries always have total variance ``sigma2``.
    Passing an integer seeds a fresh PCG64 stream and records the seed.
    """
    if int(m) != m or int(n) != n or n < 1 or m < n:
        raise ParameterError(f"need integers m >= n >= 1, got m={m}, n={n}")
    if int(M) != M or M < 2:
        raise ParameterError(f"need M >= 2, got {M}")
    if not sigma2 >= 0:
        raise ParameterError(f"sigma2 must be nonnegative, got {sigma2}")
    if convention not in CONVENTIONS:
        raise ParameterError(f"unknown convention {convention!r}; expected one of {CONVENTIONS}")
    seed = None
    if rng is None or isinstance(rng, (int, np.integer)):
        seed = None if rng is None else int(rng)
        rng = np.random.default_rng(seed)

    part_var = 0.5 if convention == "complex-unit" else 1.0
    H = _gaussian(rng, (m, n), part_var)
    s = rng.integers(0, M, size=n)
    x_star = np.exp(2j * np.pi * s / M)
    v = _gaussian(rng, (m,), sigma2 / 2.0)
    r = H @ x_star + v
    return MimoInstance(H=H, x_star=x_star, v=v, r=r, M=int(M), sigma2=float(sigma2),
                        seed=seed, convention=convention)


def derive_seed(seed: int, index: int) -> int:
    """Per-instance stream seed, ``seed XOR index`` in 64 bits."""
    return (int(seed) ^ int(index)) & 0xFFFFFFFFFFFFFFFF


def to_quadratic(inst: MimoInstance) -> QuadraticForm:
    Hh = inst.H.conj().T
    Q = Hh @ inst.H
    Q = 0.5 * (Q + Q.conj().T)
    c = -(Hh @ inst.r)
    return QuadraticForm(Q=Q, c=c, const_term=float(np.vdot(inst.r, inst.r).real))


def separation_instance(variant: str = "reported") -> MimoInstance:
    """The 2x2, M=3 instance on which the three relaxations separate strictly.

    ``variant="reported"`` uses noise ``(5+6i, 4+4i)``, which reproduces the
    expected optimal values (-76.3176, -45.1273, -25.4763) for the
    conventional, polygon-cut and enhanced relaxations. ``variant="printed"``
    uses the conjugate ``(5-6i, 4-4i)`` exactly as typeset; with it the
    enhanced relaxation is tight.
    """
    H = np.array([[8 - 6j, 8 + 6j], [3 + 4j, -4 - 3j]])
    if variant == "reported":
        v = np.array([5 + 6j, 4 + 4j])
    elif variant == "printed":
        v = np.array([5 - 6j, 4 - 4j])
    else:
        raise ParameterError(f"unknown variant {variant!r}")
    x_star = np.array([np.exp(4j * np.pi / 3), 1.0 + 0j])
    return MimoInstance(H=H, x_star=x_star, v=v, r=H @ x_star + v, M=3, sigma2=0.0)


# --- JSON serialization -------------------------------------------------------

def _pairs(a: np.ndarray):
    a = np.asarray(a, dtype=complex)
    if a.ndim == 1:
        return [[float(z.real), float(z.imag)] for z in a]
    return [_pairs(row) for row in a]


def _unpairs(obj, name: str, ndim: int) -> np.ndarray:
    try:
        arr = np.asarray(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"field {name} is not numeric: {exc}") from None
    if arr.ndim != ndim + 1 or arr.shape[-1] != 2:
        raise SchemaError(f"field {name} must be a {ndim}-d array of [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def instance_to_dict(inst: MimoInstance) -> dict:
    return {
        "m": inst.m,
        "n": inst.n,
        "M": inst.M,
        "sigma2": inst.sigma2,
        "H": _pairs(inst.H),
        "v": _pairs(inst.v),
        "x_star": _pairs(inst.x_star),
        "r": _pairs(inst.r),
        "seed": inst.seed,
    }


def instance_from_dict(d: dict) -> MimoInstance:
    for key in ("m", "n", "M", "sigma2", "H", "v", "x_star", "r"):
        if key not in d:
            raise SchemaError(f"missing field {key}")
    m, n, M = d["m"], d["n"], d["M"]
    for key, val in (("m", m), ("n", n), ("M", M)):
        if not isinstance(val, int) or isinstance(val, bool):
            raise SchemaError(f"field {key} must be an integer")
    H = _unpairs(d["H"], "H", 2)
    v = _unpairs(d["v"], "v", 1)
    x_star = _unpairs(d["x_star"], "x_star", 1)
    r = _unpairs(d["r"], "r", 1)
    if H.shape != (m, n):
        raise SchemaError(f"field H has shape {H.shape}, expected ({m}, {n})")
    if v.shape != (m,) or r.shape != (m,):
        raise SchemaError("fields v and r must have length m")
    if x_star.shape != (n,):
        raise SchemaError("field x_star must have length n")
    if M < 2:
        raise InvariantError("M must be >= 2")
    seed = d.get("seed")
    if seed is not None and (not isinstance(seed, int) or seed < 0):
        raise SchemaError("field seed must be a nonnegative integer or null")
    inst = MimoInstance(H=H, x_star=x_star, v=v, r=r, M=M, sigma2=float(d["sigma2"]), seed=seed)
    inst.validate()
    return inst


def save_instance(inst: MimoInstance, path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(inst), indent=1) + "\n")


def load_instance(path) -> MimoInstance:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise SchemaError("top-level JSON value must be an object")
    return instance_from_dict(data)
