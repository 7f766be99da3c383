"""Command-line entry point.

Exit codes: 0 success, 2 parameter or input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import certificates as cert
from .errors import EnumerationLimitError, ExtractionError, PskSdrError
from .experiments import RECORD_COLUMNS, load_config, run_prob_curve, run_table
from .instance import (separation_instance, derive_seed, instance_to_dict, load_instance,
                       sample_instance, save_instance, to_quadratic)
from .oracle import brute_force
from .relaxations import KINDS, build, solution_from_sdp, dump_program
from .rounding import DEFAULT_TRIALS, randomized_round
from .solver import SolverOptions, Status, solve

EXIT_OK, EXIT_PARAM, EXIT_NUMERICAL = 0, 2, 3

_TABLE_HELP = ("Record CSV columns, in order: " + ", ".join(RECORD_COLUMNS) + ". "
               "LBC, LB2 and LBE are the conventional, polygon-cut and enhanced bounds "
               "(constant ||r||^2 excluded); UB is the best rounding over all three. "
               "tightE/tightC/tight2 are Y when UB - LB <= max(1e-5, 1e-6 |LB|) and the "
               "relaxation's first-order part rounds to x*. An aggregate CSV per cell goes "
               "to <out>.agg.csv.")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_PARAM, f"{self.prog}: error: {message}\n")


def _add_instance_flags(p, sample=True):
    p.add_argument("--instance", help="instance JSON (otherwise one is sampled)")
    p.add_argument("--separation", choices=("reported", "printed"),
                   help="use the built-in 2x2, M=3 separation instance")
    if sample:
        p.add_argument("--m", type=int, default=15)
        p.add_argument("--n", type=int, default=10)
        p.add_argument("--M", type=int, default=3)
        p.add_argument("--sigma2", type=float, default=0.01)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--convention", default="complex-unit",
                       choices=("complex-unit", "per-part-unit"))


def _get_instance(args):
    if args.instance:
        return load_instance(args.instance)
    if args.separation:
        return separation_instance(args.separation)
    return sample_instance(args.m, args.n, args.M, args.sigma2, args.convention, args.seed)


def _emit(obj, out):
    text = json.dumps(obj, indent=1) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _cplx(a):
    return [[float(z.real), float(z.imag)] for z in np.atleast_1d(a)]


def cmd_gen(args):
    if args.count == 1:
        inst = _get_instance(args)
        if args.out:
            save_instance(inst, args.out)
        else:
            _emit(instance_to_dict(inst), None)
        return EXIT_OK
    if not args.out:
        raise PskSdrError("--count > 1 needs --out as a directory")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for k in range(args.count):
        inst = sample_instance(args.m, args.n, args.M, args.sigma2, args.convention,
                               derive_seed(args.seed, k))
        save_instance(inst, out / f"instance_{k:05d}.json")
    return EXIT_OK


def cmd_solve(args):
    inst = _get_instance(args)
    q = to_quadratic(inst)
    prog = build(args.relaxation, q, inst.M)
    if args.dump:
        dump_program(prog, args.dump)
    sdp = solve(prog, SolverOptions(max_iter=args.max_iter))
    sol = solution_from_sdp(prog, sdp)
    rounded = randomized_round(sol, q, inst.M, args.trials, np.random.default_rng((args.seed, 1)))
    _emit({
        "relaxation": args.relaxation,
        "status": sdp.status.value,
        "lower_bound": sol.lower_bound,
        "dual_obj": sdp.dual_obj + prog.offset,
        "residuals": list(sdp.residuals),
        "iterations": sdp.iterations,
        "x": _cplx(sol.x_complex),
        "upper_bound": rounded.objective,
        "x_hat": _cplx(rounded.x_hat),
        "const_term": q.const_term,
    }, args.out)
    return EXIT_OK if sdp.status is Status.OPTIMAL else EXIT_NUMERICAL


def cmd_certify(args):
    inst = _get_instance(args)
    names = ["cond_1_4", "cond_1_5", "csdp_necessary"]
    if inst.M == 2:
        names += ["cond_1_3", "cond_2_2_l1", "cond_2_3_l2", "jalden_m2"]
    if args.alpha is not None:
        names.append("gpm_4_10")
    report = {"conditions": [cert.check_condition(nm, inst, alpha=args.alpha).to_dict()
                             for nm in names]}
    if inst.M >= 3:
        report["certificate"] = cert.certify_csdp2(inst).to_dict()
    _emit(report, args.out)
    return EXIT_OK


def cmd_oracle(args):
    inst = _get_instance(args)
    res = brute_force(to_quadratic(inst), inst.M, inst.n)
    _emit({"value": res.value, "x_opt": _cplx(res.x_opt), "enumerated": res.enumerated,
           "matches_x_star": bool(np.allclose(res.x_opt, inst.x_star))}, args.out)
    return EXIT_OK


def _overrides(args):
    def lst(v):
        return None if v is None else ",".join(str(x) for x in v)
    timing = None if args.timing is None else ("on" if args.timing else "off")
    return {"M": lst(args.M), "sigma2": lst(args.sigma2), "count": args.count, "m": args.m,
            "n": args.n, "seed": args.seed, "trials": args.trials,
            "convention": args.convention, "workers": args.workers, "timing": timing,
            "instance": getattr(args, "instance", None)}


def _write(text, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_table(args):
    cfg = load_config(args.config, _overrides(args))
    res = run_table(cfg)
    _write(res.records_csv(), args.out)
    agg = res.aggregates_csv()
    if args.out:
        Path(str(args.out) + ".agg.csv").write_text(agg)
    else:
        sys.stdout.write("\n" + agg)
    return EXIT_OK if all(r.ok for r in res.records) else EXIT_NUMERICAL


def cmd_prob(args):
    cfg = load_config(args.config, _overrides(args))
    res = run_prob_curve(cfg)
    _write(res.to_csv(), args.out)
    return EXIT_OK if all(r.ok for r in res.records) else EXIT_NUMERICAL


def cmd_bound(args):
    out = {"m": args.m, "n": args.n, "M": args.M,
           "bound": cert.thm45_bound(args.m, args.n),
           "sigma_max": cert.sigma_max(args.m, args.n, args.M)}
    if args.trials:
        out["empirical"] = cert.cond15_probability(args.m, args.n, args.M, args.trials, args.seed,
                                                   args.sigma)
    _emit(out, args.out)
    return EXIT_OK


def cmd_tails(args):
    res = cert.tail_validators(args.m, args.n, args.t, args.trials, args.seed, args.sigma)
    _emit({k: (None if v is None else vars(v)) for k, v in res.items()}, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="psksdr", description="Semidefinite relaxations for M-PSK MIMO detection.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log solver iterations")
    sub = ap.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="write instance JSON")
    _add_instance_flags(p)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("solve", help="solve one relaxation of one instance")
    _add_instance_flags(p)
    p.add_argument("--relaxation", choices=KINDS, default="ersdp")
    p.add_argument("--trials", type=int, default=DEFAULT_TRIALS)
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--dump", help="write the conic program as sparse triplets")
    p.add_argument("--out")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("certify", help="condition and certificate report")
    _add_instance_flags(p)
    p.add_argument("--alpha", type=float, help="step size for the gpm_4_10 predicate")
    p.add_argument("--out")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("oracle", help="brute-force ML optimum")
    _add_instance_flags(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_oracle)

    for name, func, hlp in (("table", cmd_table, _TABLE_HELP),
                            ("prob", cmd_prob, "Tightness probability per sigma2 grid point.")):
        p = sub.add_parser(name, help=hlp.split(".")[0], description=hlp)
        p.add_argument("--config", help="key=value file; flags below override it")
        p.add_argument("--M", type=int, nargs="+")
        p.add_argument("--sigma2", type=float, nargs="+")
        p.add_argument("--count", type=int)
        p.add_argument("--m", type=int)
        p.add_argument("--n", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--trials", type=int)
        p.add_argument("--convention", choices=("complex-unit", "per-part-unit"))
        p.add_argument("--workers", type=int)
        p.add_argument("--timing", dest="timing", action="store_true", default=None)
        p.add_argument("--no-timing", dest="timing", action="store_false",
                       help="blank the time columns so reruns are byte-identical")
        if name == "table":
            p.add_argument("--instance", help="single instance JSON instead of sampling")
        p.add_argument("--out")
        p.set_defaults(func=func)

    p = sub.add_parser("bound", help="probability bound and sigma_max")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--M", type=int, default=8)
    p.add_argument("--trials", type=int, default=0, help="also estimate the probability")
    p.add_argument("--sigma", type=float, help="per-part noise deviation (default sigma_max)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("tails", help="Monte-Carlo tail bound checks")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--trials", type=int, default=5000)
    p.add_argument("--sigma", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_tails)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ExtractionError, np.linalg.LinAlgError) as exc:
        print(f"psksdr: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except EnumerationLimitError as exc:
        print(f"psksdr: {exc}", file=sys.stderr)
        return EXIT_PARAM
    except (PskSdrError, OSError, ValueError) as exc:
        print(f"psksdr: {exc}", file=sys.stderr)
        return EXIT_PARAM


if __name__ == "__main__":
    sys.exit(main())
