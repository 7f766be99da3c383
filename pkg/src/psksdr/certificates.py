"""Closed-form tightness conditions, the CSDP2 dual certificate, and the
probability bound for the eigenvalue/noise condition with its tail checks.

Conditions are evaluated on ``Q = H^H H`` and ``w = H^H v``. Every report
carries a margin whose sign decides the outcome (``holds`` iff ``margin > 0``).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .errors import ParameterError, UsageError
from .instance import MimoInstance, derive_seed, sample_instance
from .linalg import symmetric_eig_min

CONDITIONS = ("cond_1_3", "cond_1_4", "cond_1_5", "cond_2_2_l1", "cond_2_3_l2",
              "jalden_m2", "csdp_necessary", "gpm_4_10")
_BINARY_ONLY = ("cond_1_3", "cond_2_2_l1", "cond_2_3_l2", "jalden_m2")

TIGHT_TOL = 1e-9
UNIQUE_TOL = 1e-7
RECON_TOL = 1e-9


@dataclass
class ConditionReport:
    name: str
    holds: bool
    margin: float
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"name": self.name, "holds": bool(self.holds), "margin": float(self.margin),
                "per_index": _jsonable(self.details)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    return obj


def _report(name: str, margin: float, details: dict) -> ConditionReport:
    margin = float(margin)
    if not math.isfinite(margin):
        raise ParameterError(f"{name}: margin is not finite")
    return ConditionReport(name=name, holds=margin > 0, margin=margin, details=details)


def _gram(inst: MimoInstance):
    Hh = inst.H.conj().T
    Q = Hh @ inst.H
    return 0.5 * (Q + Q.conj().T), Hh @ inst.v


def check_condition(name: str, inst: MimoInstance, alpha: Optional[float] = None) -> ConditionReport:
    """Evaluate one named sufficient (or necessary) condition on ``inst``.

    ``alpha`` is the step size needed by ``gpm_4_10``.
    """
    if name not in CONDITIONS:
        raise ParameterError(f"unknown condition {name!r}; expected one of {CONDITIONS}")
    if name == "csdp_necessary":
        return check_csdp_necessary(inst)
    if name in _BINARY_ONLY and inst.M != 2:
        raise UsageError(f"{name} applies to M = 2 only, got M = {inst.M}")
    Q, w = _gram(inst)

    if name in ("cond_1_4", "cond_1_5"):
        lmin = symmetric_eig_min(Q)
        scale = math.sin(math.pi / inst.M) if name == "cond_1_5" else 1.0
        absw = np.abs(w)
        return _report(name, lmin * scale - absw.max(),
                       {"lambda_min": lmin, "lhs": lmin * scale, "abs_Hv": absw})

    if name in ("cond_1_3", "cond_2_2_l1", "cond_2_3_l2"):
        lmin = symmetric_eig_min(Q.real)
        wr = w.real
        ord_ = {"cond_1_3": np.inf, "cond_2_2_l1": 1, "cond_2_3_l2": 2}[name]
        return _report(name, lmin - np.linalg.norm(wr, ord_),
                       {"lambda_min": lmin, "re_Hv": wr})

    if name == "jalden_m2":
        xs = inst.x_star.real  # +-1 for M = 2
        D = Q.real + np.diag(w.real / xs)
        lmin = symmetric_eig_min(D)
        return _report(name, lmin, {"lambda_min": lmin, "scaled_re_Hv": w.real / xs})

    # gpm_4_10
    if alpha is None:
        raise UsageError("gpm_4_10 needs a step size alpha")
    if not alpha > 0:
        raise ParameterError(f"alpha must be positive, got {alpha}")
    s = 2.0 * alpha / inst.m
    m1 = math.sin(math.pi / inst.M) / 2.0 - s * np.abs(w).max()
    m2 = 0.25 - np.linalg.norm(np.eye(inst.n) - s * Q, 2)
    return _report(name, min(m1, m2), {"noise_margin": m1, "operator_margin": m2, "alpha": alpha})


def check_csdp_necessary(inst: MimoInstance) -> ConditionReport:
    """Real multiplier test: ``conj(x*_i) [H^H v]_i`` must be real for every i.

    The margin is ``tol - max_i |Im z_i|`` with ``tol = 1e-9 (1 + ||H^H v||_inf)``
    so that the sign convention of :class:`ConditionReport` carries over.
    """
    _, w = _gram(inst)
    z = inst.x_star.conj() * w
    tol = 1e-9 * (1.0 + np.abs(w).max())
    im = np.abs(z.imag)
    return _report("csdp_necessary", tol - im.max(),
                   {"imag_part": im, "tolerance": tol, "lambda_star": z.real})


# --- dual certificate ---------------------------------------------------------

@dataclass
class TightnessCertificate:
    lambda_bar: np.ndarray
    mu_s: np.ndarray
    mu_t: np.ndarray
    s_idx: np.ndarray
    t_idx: np.ndarray
    min_eig: float
    tight: bool
    unique: bool
    reconstruction_error: float = 0.0

    @property
    def marginal(self) -> bool:
        return self.tight and not self.unique

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))


def certify_csdp2(inst: MimoInstance) -> TightnessCertificate:
    """Closed-form multipliers certifying that ``x*`` solves the polygon-cut SDR.

    The two cut normals adjacent to ``x*_i`` absorb the imaginary part of
    ``z_i = conj(x*_i) [H^H v]_i``; the rest goes to the componentwise
    largest compatible ``lambda_bar``.
    """
    M = inst.M
    if M < 3:
        raise UsageError(f"the cut certificate needs M >= 3, got M = {M}")
    k = inst.alphabet.indices(inst.x_star)
    Q, w = _gram(inst)
    z = inst.x_star.conj() * w
    sn, cs = math.sin(math.pi / M), math.cos(math.pi / M)
    mu_t = np.where(z.imag > 0, 2.0 * z.imag / sn, 0.0)
    mu_s = np.where(z.imag < 0, -2.0 * z.imag / sn, 0.0)
    lam = z.real - np.abs(z.imag) * cs / sn
    s_idx = k.copy()
    t_idx = (k + 1) % M
    # a_{s_i} = x*_i e^{-i pi/M}, a_{t_i} = x*_i e^{i pi/M}
    a = np.exp(1j * (2 * np.arange(M) - 1) * np.pi / M)
    recon = lam * inst.x_star + 0.5 * mu_s * a[s_idx] + 0.5 * mu_t * a[t_idx]
    err = float(np.abs(recon - w).max())
    if err > RECON_TOL * (1.0 + np.abs(w).max()):
        raise AssertionError(f"certificate reconstruction off by {err:.3e}")
    min_eig = symmetric_eig_min(Q + np.diag(lam))
    qnorm = np.linalg.norm(Q, 2)
    tight = min_eig >= -TIGHT_TOL * (1.0 + qnorm)
    unique = min_eig > UNIQUE_TOL * (1.0 + qnorm)
    return TightnessCertificate(lambda_bar=lam, mu_s=mu_s, mu_t=mu_t, s_idx=s_idx, t_idx=t_idx,
                                min_eig=min_eig, tight=bool(tight), unique=bool(unique),
                                reconstruction_error=err)


# --- probability bound and tails ----------------------------------------------

def _check_mn(m, n):
    if int(m) != m or int(n) != n or n < 1 or m <= n:
        raise ParameterError(f"need integers m > n >= 1, got m={m}, n={n}")


def thm45_bound(m: int, n: int) -> float:
    """Lower bound on the probability that ``cond_1_5`` holds (may be negative)."""
    _check_mn(m, n)
    rho = math.sqrt(n / m)
    return (1.0 - math.exp(-m * (1 - rho) ** 2 / 4) - 2 * math.sqrt(2 / math.pi) * n * math.exp(-m / 2)
            - 8 * math.exp(-m / 8))


def sigma_max(m: int, n: int, M: int) -> float:
    """Largest per-part noise standard deviation covered by :func:`thm45_bound`."""
    _check_mn(m, n)
    if int(M) != M or M < 2:
        raise ParameterError(f"need M >= 2, got {M}")
    rho = math.sqrt(n / m)
    return (1 - rho) ** 2 * math.sin(math.pi / M) / (4 * math.sqrt(2))


def scaled_smin(H: np.ndarray) -> float:
    """Smallest singular value of ``H / sqrt(2m)``."""
    m = H.shape[0]
    return float(np.linalg.svd(H / math.sqrt(2 * m), compute_uv=False)[-1])


def _binomial_se(p: float, trials: int) -> float:
    p = min(max(p, 0.0), 1.0)
    return math.sqrt(p * (1 - p) / trials)


@dataclass
class TailCheck:
    name: str
    trials: int
    hits: int
    frequency: float
    bound: float
    se: float
    passed: bool


def _tail(name, hits, trials, bound) -> TailCheck:
    freq = hits / trials
    se = _binomial_se(bound, trials)
    return TailCheck(name=name, trials=trials, hits=hits, frequency=freq, bound=bound, se=se,
                     passed=freq <= bound + 3 * se)


def tail_validators(m: int, n: int, t: float, trials: int, rng=None,
                    sigma: Optional[float] = None) -> dict:
    """Monte-Carlo checks of the two tail bounds behind the probability bound.

    Channels have i.i.d. N(0, 1) real and imaginary parts and noise has
    per-part standard deviation ``sigma``. Standard errors are binomial at
    the bound probability. The noise tail is skipped when ``sigma`` is None.
    Returns ``{"smin": TailCheck, "noise": TailCheck | None}``.
    """
    _check_mn(m, n)
    rho = math.sqrt(n / m)
    if not 0 < t < 1 - rho:
        raise ParameterError(f"need 0 < t < 1 - sqrt(n/m) = {1 - rho:.4g}, got t={t}")
    if int(trials) != trials or trials < 1:
        raise ParameterError(f"trials must be a positive integer, got {trials}")
    if sigma is not None and not sigma >= 0:
        raise ParameterError(f"sigma must be nonnegative, got {sigma}")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    thresh_s = 1 - rho - t
    hits_s = hits_v = 0
    for _ in range(trials):
        H = rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))
        if scaled_smin(H) <= thresh_s:
            hits_s += 1
        if sigma is not None:
            v = sigma * (rng.standard_normal(m) + 1j * rng.standard_normal(m))
            if np.abs(H.conj().T @ v).max() > 2 * math.sqrt(2) * m * sigma:
                hits_v += 1
    out = {"smin": _tail("smin", hits_s, trials, math.exp(-m * t * t)), "noise": None}
    if sigma is not None:
        bound = 2 * math.sqrt(2 / math.pi) * n * math.exp(-m / 2) + 8 * math.exp(-m / 8)
        out["noise"] = _tail("noise", hits_v, trials, min(bound, 1.0))
    return out


def cond15_probability(m: int, n: int, M: int, trials: int, seed: int = 0,
                       sigma: Optional[float] = None) -> dict:
    """Empirical frequency of ``cond_1_5`` next to :func:`thm45_bound`.

    Uses the per-part-unit channel and per-part noise deviation ``sigma``
    (default :func:`sigma_max`), i.e. total noise variance ``2 sigma**2``.
    Instance ``k`` draws from the stream ``derive_seed(seed, k)``.
    """
    sigma = sigma_max(m, n, M) if sigma is None else float(sigma)
    hits = 0
    for k in range(trials):
        inst = sample_instance(m, n, M, 2 * sigma ** 2, "per-part-unit", derive_seed(seed, k))
        hits += check_condition("cond_1_5", inst).holds
    freq = hits / trials
    bound = thm45_bound(m, n)
    return {"m": m, "n": n, "M": M, "sigma": sigma, "trials": trials, "hits": hits,
            "frequency": freq, "bound": bound, "passed": freq >= bound}
