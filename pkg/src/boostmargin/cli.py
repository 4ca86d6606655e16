"""Command-line interface.

Subcommands map one-to-one to the experiment runners plus ``margin`` (ad-hoc
single instance) and ``selfcheck`` (fast property suite).  Exit codes:
0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import sys

from . import experiments
from .fkappa import NumericalError
from .simplex import SimplexError
from .spectra import ConfigError

_SCHEMAS = {
    "sweep-psi": "sweep_psi.csv: psi,n,p,replicates,kappa_emp_mean,kappa_emp_sd,"
                 "n_separable,err_emp_mean,err_emp_sd,kappa_pred,err_pred,"
                 "bayes_pred,angle_pred,classical_bound",
    "normalized-margin": "normalized_margin.csv: psi,scaled_margin_emp,"
                         "scaled_margin_pred,classical_bound,bound_exceeds_half",
    "heatmap": "heatmap.csv: psi,rho,kappa_pred,err_pred,kappa_emp,err_emp,bayes_pred",
    "boost-run": "boost_summary.csv: n,p,kappa_lp,M,T_zero_bound,interp_time,"
                 "active_at_interp,active_bound,eps,T_certified,beta,steps_run,"
                 "final_margin,margin_floor,margin_ok,gen_err_final,err_pred,"
                 "bayes_pred,kappa_star; boost_trace.csv: t,gamma,train_err,norm,active_count",
    "universality": "universality.csv: rep,kappa_features,kappa_surrogate,abs_diff",
    "robustness-rademacher": "robustness_rademacher.csv: design,psi,kappa_mean,excess_err_mean",
    "predict": "predict.csv: psi,rho,kappa,c1,c2,s,residual,err_star,bayes,angle",
    "margin": "margin.csv: n,p,status,kappa,dual,gap,interp_norm,norm_times_kappa,iterations",
}


def _add_common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--config", metavar="PATH", help="flat key = value config file")
    sp.add_argument("--out", metavar="DIR", help="output directory (default: out)")
    sp.add_argument("--seed", type=int, metavar="U64", help="root seed")
    sp.add_argument("--threads", type=int, metavar="N", help="worker processes")
    sp.add_argument("--mc-samples", type=int, metavar="N",
                    help="Monte-Carlo cloud size (default 5000)")
    sp.add_argument("--no-plots", action="store_true", help="skip SVG rendering")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="boostmargin",
        description="Max-margin interpolation and boosting experiments on "
                    "synthetic high-dimensional classification data, with "
                    "asymptotic fixed-point predictions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in (*experiments.EXPERIMENTS, "margin"):
        if name == "robustness-rademacher":
            help_line = "Rademacher-vs-Gaussian design robustness sweep"
        else:
            help_line = f"run the {name} experiment"
        sp = sub.add_parser(name, help=help_line,
                            epilog="CSV schema -- " + _SCHEMAS[name])
        _add_common(sp)
    sc = sub.add_parser("selfcheck", help="fast property suite (pass/fail lines)")
    sc.add_argument("--seed", type=int, default=20240601)
    sc.add_argument("--mc-samples", type=int, default=200_000)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "selfcheck":
            from .selfcheck import run_selfcheck

            failures = run_selfcheck(seed=args.seed, mc_samples=args.mc_samples)
            return 0 if failures == 0 else 3
        overrides = {
            "experiment": args.command if args.command != "margin" else None,
            "out": args.out,
            "seed": args.seed,
            "threads": args.threads,
            "mc_samples": args.mc_samples,
        }
        if args.no_plots:
            overrides["make_plots"] = False
        cfg = experiments.load_config(args.config, overrides)
        if args.command == "margin":
            files = experiments.run_margin_adhoc(cfg)
        else:
            files = experiments.RUNNERS[args.command](cfg)
        for f in files:
            print(f"wrote {f}")
        return 0
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, SimplexError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
