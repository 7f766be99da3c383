"""Batch experiments: gap tables and tightness-probability curves.

Instance ``k`` (a global index running across all cells of a config) is
drawn from ``derive_seed(seed, k)``; its rounding stream is seeded with
``(derive_seed(seed, k), 1)``. With ``timing`` off the CSV output depends
only on the config.
"""

from __future__ import annotations

import csv
import datetime as _dt
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .certificates import certify_csdp2, check_condition
from .errors import ParameterError
from .instance import CONVENTIONS, MimoInstance, derive_seed, load_instance, sample_instance, to_quadratic
from .relaxations import solve_relaxation
from .rounding import DEFAULT_TRIALS, project_psk, randomized_round
from .solver import SolverOptions, Status

log = logging.getLogger(__name__)

CLOSED_GAP_FLOOR = 1e-9


def tight_tolerance(lb: float) -> float:
    return max(1e-5, 1e-6 * abs(lb))


@dataclass
class ExperimentConfig:
    M: tuple = (3,)
    sigma2: tuple = (0.01,)
    count: int = 10
    m: int = 15
    n: int = 10
    seed: int = 0
    trials: int = DEFAULT_TRIALS
    convention: str = "complex-unit"
    timing: bool = True
    workers: int = 1
    instance: Optional[str] = None

    def __post_init__(self):
        self.M = tuple(int(v) for v in np.atleast_1d(self.M))
        self.sigma2 = tuple(float(v) for v in np.atleast_1d(self.sigma2))
        for key in ("count", "m", "n", "seed", "trials", "workers"):
            val = getattr(self, key)
            if int(val) != val:
                raise ParameterError(f"{key} must be an integer, got {val}")
            setattr(self, key, int(val))
        if self.count < 1 or self.trials < 1 or self.workers < 1:
            raise ParameterError("count, trials and workers must be >= 1")
        if self.seed < 0:
            raise ParameterError("seed must be nonnegative")
        if self.instance is None:
            if self.n < 1 or self.m < self.n:
                raise ParameterError(f"need m >= n >= 1, got m={self.m}, n={self.n}")
            if any(M < 3 for M in self.M):
                raise ParameterError("experiments need M >= 3 (the cut relaxation is undefined for M = 2)")
            if any(not s >= 0 for s in self.sigma2):
                raise ParameterError("sigma2 values must be nonnegative")
        if self.convention not in CONVENTIONS:
            raise ParameterError(f"unknown convention {self.convention!r}")

    def header_lines(self) -> list:
        out = []
        for f in fields(self):
            if f.name == "workers":  # does not affect results
                continue
            val = getattr(self, f.name)
            if isinstance(val, tuple):
                val = ",".join(repr(v) if isinstance(v, float) else str(v) for v in val)
            out.append(f"# {f.name}={val}")
        return out


_BOOL = {"1": True, "true": True, "yes": True, "on": True,
         "0": False, "false": False, "no": False, "off": False}


def parse_config(text: str, overrides: Optional[dict] = None) -> ExperimentConfig:
    """Parse flat ``key=value`` lines; ``#`` starts a comment.

    ``M`` and ``sigma2`` accept comma-separated lists. Entries of
    ``overrides`` that are not None replace file values.
    """
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterError(f"config line {lineno}: expected key=value, got {line!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        raw[key] = val
    for key, val in (overrides or {}).items():
        if val is not None:
            raw[key] = val
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ParameterError(f"unknown config keys: {sorted(unknown)}")
    kw = {}
    try:
        for key, val in raw.items():
            if not isinstance(val, str):
                kw[key] = val
            elif key in ("M", "sigma2"):
                conv = int if key == "M" else float
                kw[key] = tuple(conv(v) for v in val.split(",") if v.strip())
            elif key in ("convention", "instance"):
                kw[key] = val
            elif key == "timing":
                if val.lower() not in _BOOL:
                    raise ParameterError(f"timing must be on/off, got {val!r}")
                kw[key] = _BOOL[val.lower()]
            else:
                kw[key] = int(val)
    except ValueError as exc:
        raise ParameterError(f"bad config value: {exc}") from None
    return ExperimentConfig(**kw)


def load_config(path, overrides: Optional[dict] = None) -> ExperimentConfig:
    text = Path(path).read_text() if path else ""
    return parse_config(text, overrides)


# --- one instance -------------------------------------------------------------

RECORD_COLUMNS = ("ID", "sigma2", "LBC", "LBE", "UB", "GapC", "GapE", "ClosedGap", "tightE",
                  "cond15", "LB2", "tightC", "tight2", "cert_tight", "M", "m", "n", "seed",
                  "status", "note", "TimeC", "Time2", "TimeE")


@dataclass
class ExperimentRecord:
    id: int
    sigma2: float
    M: int
    m: int
    n: int
    seed: Optional[int]
    LBC: float = math.nan
    LB2: float = math.nan
    LBE: float = math.nan
    UB: float = math.nan
    GapC: float = math.nan
    GapE: float = math.nan
    ClosedGap: float = math.nan
    tightE: bool = False
    tightC: bool = False
    tight2: bool = False
    cond15: bool = False
    cert_tight: bool = False
    status: str = "ok"
    note: str = ""
    times: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def row(self, timing: bool = True) -> list:
        def num(v):
            return "nan" if not math.isfinite(v) else repr(float(v))

        def yn(b):
            return "Y" if b else "N"

        def t(key):
            return f"{self.times[key]:.4f}" if timing and key in self.times else ""

        return [self.id, repr(self.sigma2), num(self.LBC), num(self.LBE), num(self.UB),
                num(self.GapC), num(self.GapE), num(self.ClosedGap), yn(self.tightE),
                yn(self.cond15), num(self.LB2), yn(self.tightC), yn(self.tight2),
                yn(self.cert_tight), self.M, self.m, self.n,
                "" if self.seed is None else self.seed, self.status, self.note,
                t("rsdp"), t("csdp2"), t("ersdp")]


def _is_tight(ub, lb, x, x_star, M) -> bool:
    return bool(ub - lb <= tight_tolerance(lb) and np.array_equal(project_psk(x, M), x_star))


def closed_gap(lbc: float, lbe: float, ub: float) -> float:
    denom = ub - lbc
    if denom <= CLOSED_GAP_FLOOR:
        return 1.0
    val = (lbe - lbc) / denom
    # tolerance clamping: solver noise may push a full closure slightly past 1
    if -0.01 <= val <= 1.01:
        val = min(max(val, 0.0), 1.0)
    return val


def evaluate_instance(inst: MimoInstance, rec_id: int, trials: int, rng_seed,
                      kinds=("rsdp", "csdp2", "ersdp"),
                      opts: Optional[SolverOptions] = None) -> ExperimentRecord:
    """Solve the requested relaxations, round each, and fill one record."""
    q = to_quadratic(inst)
    rec = ExperimentRecord(id=rec_id, sigma2=inst.sigma2, M=inst.M, m=inst.m, n=inst.n, seed=inst.seed)
    rng = np.random.default_rng(rng_seed)
    sols = {}
    ub = math.inf
    # snap x* onto exact symbols so projections compare bit for bit
    x_star = project_psk(inst.x_star, inst.M)
    for kind in kinds:
        sol = solve_relaxation(kind, q, inst.M, opts)
        rec.times[kind] = sol.seconds
        if sol.status is not Status.OPTIMAL:
            rec.status = f"{kind}:{sol.status.value}"
        sols[kind] = sol
        rounded = randomized_round(sol, q, inst.M, trials, rng)
        ub = min(ub, rounded.objective)
    rec.UB = ub
    if "rsdp" in sols:
        rec.LBC = sols["rsdp"].lower_bound
        rec.GapC = ub - rec.LBC
        rec.tightC = _is_tight(ub, rec.LBC, sols["rsdp"].x_complex, x_star, inst.M)
    if "csdp2" in sols:
        rec.LB2 = sols["csdp2"].lower_bound
        rec.tight2 = _is_tight(ub, rec.LB2, sols["csdp2"].x_complex, x_star, inst.M)
    if "ersdp" in sols:
        rec.LBE = sols["ersdp"].lower_bound
        rec.GapE = ub - rec.LBE
        rec.tightE = _is_tight(ub, rec.LBE, sols["ersdp"].x_complex, x_star, inst.M)
    if "rsdp" in sols and "ersdp" in sols:
        rec.ClosedGap = closed_gap(rec.LBC, rec.LBE, ub)
    rec.cond15 = check_condition("cond_1_5", inst).holds
    rec.cert_tight = certify_csdp2(inst).tight if inst.M >= 3 else False
    if rec.ok and rec.cond15 and "ersdp" in sols and not rec.tightE:
        log.warning("record %d: cond_1_5 holds but the enhanced relaxation is not tight", rec_id)
        rec.note = "cond15_not_tight"
    return rec


def _job(args):
    cfg, k, M, sigma2, kinds = args
    if cfg.instance is not None:
        inst = load_instance(cfg.instance)
        stream = (cfg.seed, 1)
    else:
        s = derive_seed(cfg.seed, k)
        inst = sample_instance(cfg.m, cfg.n, M, sigma2, cfg.convention, s)
        stream = (s, 1)
    return evaluate_instance(inst, k, cfg.trials, stream, kinds)


def _run_jobs(cfg: ExperimentConfig, jobs) -> list:
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(_job, jobs))
    return [_job(j) for j in jobs]


def _cells(cfg: ExperimentConfig):
    for M in cfg.M:
        for s2 in cfg.sigma2:
            yield M, s2


# --- tables -------------------------------------------------------------------

AGG_COLUMNS = ("M", "sigma2", "count", "solved", "failed", "GapC", "GapE", "ClosedGap",
               "TimeC", "TimeE", "ProbC", "ProbE", "Prob15")


@dataclass
class Aggregate:
    M: int
    sigma2: float
    count: int
    solved: int
    failed: int
    GapC: float
    GapE: float
    ClosedGap: float
    TimeC: float
    TimeE: float
    ProbC: float
    ProbE: float
    Prob15: float

    def row(self, timing: bool = True) -> list:
        def num(v):
            return "nan" if not math.isfinite(v) else repr(float(v))
        return [self.M, repr(self.sigma2), self.count, self.solved, self.failed,
                num(self.GapC), num(self.GapE), num(self.ClosedGap),
                num(self.TimeC) if timing else "", num(self.TimeE) if timing else "",
                num(self.ProbC), num(self.ProbE), num(self.Prob15)]


def aggregate(records: list, M: int, sigma2: float) -> Aggregate:
    """Means over the successfully solved records of one cell."""
    good = [r for r in records if r.ok]
    k = len(good)

    def mean(vals):
        return float(np.mean(vals)) if k else math.nan

    return Aggregate(
        M=M, sigma2=sigma2, count=len(records), solved=k, failed=len(records) - k,
        GapC=mean([r.GapC for r in good]), GapE=mean([r.GapE for r in good]),
        ClosedGap=mean([r.ClosedGap for r in good]),
        TimeC=mean([r.times.get("rsdp", math.nan) for r in good]),
        TimeE=mean([r.times.get("ersdp", math.nan) for r in good]),
        ProbC=mean([float(r.tightC) for r in good]), ProbE=mean([float(r.tightE) for r in good]),
        Prob15=mean([float(r.cond15) for r in good]))


@dataclass
class TableResult:
    config: ExperimentConfig
    records: list
    aggregates: list

    def records_csv(self, timestamp: bool = True) -> str:
        return _csv(self.config, RECORD_COLUMNS, [r.row(self.config.timing) for r in self.records],
                    timestamp)

    def aggregates_csv(self, timestamp: bool = True) -> str:
        return _csv(self.config, AGG_COLUMNS, [a.row(self.config.timing) for a in self.aggregates],
                    timestamp)


def _csv(cfg, header, rows, timestamp) -> str:
    buf = io.StringIO()
    if timestamp:
        now = _dt.datetime.now(_dt.timezone.utc).replace(microsecond=0).isoformat()
        buf.write(f"# generated {now}\n")
    for line in cfg.header_lines():
        buf.write(line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def run_table(cfg: ExperimentConfig) -> TableResult:
    """One record per instance and one aggregate per (M, sigma2) cell."""
    if cfg.instance is not None:
        rec = _job((cfg, 0, None, None, ("rsdp", "csdp2", "ersdp")))
        return TableResult(cfg, [rec], [aggregate([rec], rec.M, rec.sigma2)])
    jobs, cells = [], []
    k = 0
    for M, s2 in _cells(cfg):
        cells.append((M, s2, k, k + cfg.count))
        for _ in range(cfg.count):
            jobs.append((cfg, k, M, s2, ("rsdp", "csdp2", "ersdp")))
            k += 1
    records = _run_jobs(cfg, jobs)
    aggs = [aggregate(records[a:b], M, s2) for M, s2, a, b in cells]
    for a in aggs:
        if a.failed:
            log.warning("M=%d sigma2=%g: %d of %d instances failed and were excluded",
                        a.M, a.sigma2, a.failed, a.count)
    return TableResult(cfg, records, aggs)


# --- probability curves ---------------------------------------------------------

CURVE_COLUMNS = ("sigma2", "M", "count", "solved", "prob_tightE", "se_tightE",
                 "prob_cond15", "se_cond15")


@dataclass
class CurvePoint:
    sigma2: float
    M: int
    count: int
    solved: int
    prob_tightE: float
    se_tightE: float
    prob_cond15: float
    se_cond15: float

    def row(self) -> list:
        return [repr(self.sigma2), self.M, self.count, self.solved, repr(self.prob_tightE),
                repr(self.se_tightE), repr(self.prob_cond15), repr(self.se_cond15)]


def binomial_se(p: float, k: int) -> float:
    return math.sqrt(max(p * (1 - p), 0.0) / k) if k else math.nan


@dataclass
class CurveResult:
    config: ExperimentConfig
    points: list
    records: list = field(repr=False, default_factory=list)

    def to_csv(self, timestamp: bool = True) -> str:
        return _csv(self.config, CURVE_COLUMNS, [p.row() for p in self.points], timestamp)


def run_prob_curve(cfg: ExperimentConfig) -> CurveResult:
    """Empirical tightness of the enhanced relaxation and of ``cond_1_5`` per noise level.

    Only the enhanced relaxation is solved; its own rounding gives the upper
    bound (when it is tight its first-order part already rounds to x*).
    """
    if cfg.instance is not None:
        raise ParameterError("prob runs on sampled instances; drop the instance key")
    if any(not 1e-3 <= s <= 10 for s in cfg.sigma2):
        raise ParameterError("sigma2 grid must lie within [1e-3, 10]")
    grid = sorted(cfg.sigma2)
    jobs, cells = [], []
    k = 0
    for M in cfg.M:
        for s2 in grid:
            cells.append((M, s2, k, k + cfg.count))
            for _ in range(cfg.count):
                jobs.append((cfg, k, M, s2, ("ersdp",)))
                k += 1
    records = _run_jobs(cfg, jobs)
    points = []
    for M, s2, a, b in cells:
        good = [r for r in records[a:b] if r.ok]
        n_ok = len(good)
        pt = float(np.mean([r.tightE for r in good])) if n_ok else math.nan
        pc = float(np.mean([r.cond15 for r in good])) if n_ok else math.nan
        points.append(CurvePoint(sigma2=s2, M=M, count=b - a, solved=n_ok, prob_tightE=pt,
                                 se_tightE=binomial_se(pt, n_ok), prob_cond15=pc,
                                 se_cond15=binomial_se(pc, n_ok)))
    return CurveResult(cfg, points, records)


def with_overrides(cfg: ExperimentConfig, **kw) -> ExperimentConfig:
    return replace(cfg, **{k: v for k, v in kw.items() if v is not None})
