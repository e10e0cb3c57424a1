"""Command-line experiment runner.

Subcommands:
  reference  -- unbiased campaign: gk.csv, fderiv.csv, alpha_hat.csv, fscan.csv
  biased     -- biased campaigns: weighted.csv, autocorr.csv
  oracle     -- quadrature predictions: oracle.json
  reproduce  -- pre-baked desk-scale figure configs with comparison.json

Every run writes manifest.json.  The GK_WORKERS environment variable
overrides the configured worker count.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .campaigns import (
    ExperimentConfig,
    FIGURES,
    reproduce,
    run_biased_campaign,
    run_oracle,
    run_reference_campaign,
)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="path to a JSON experiment config")
    parser.add_argument("--seed", type=int, default=None, help="override master_seed")
    parser.add_argument("--replicas", type=int, default=None, help="override replica count")
    parser.add_argument("--workers", type=int, default=None, help="override worker count")
    parser.add_argument("--out", default=None, help="override output directory")


def _load(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_json(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.replicas is not None:
        overrides["replicas"] = args.replicas
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.out is not None:
        overrides["output_dir"] = args.out
    return replace(cfg, **overrides) if overrides else cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gkreweight",
        description="Green-Kubo transport coefficients with Girsanov reweighting",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name in ("reference", "biased", "oracle"):
        p = sub.add_parser(name, help=f"run a {name} campaign")
        _add_common(p)

    p = sub.add_parser("reproduce", help="reproduce a study figure at desk scale")
    p.add_argument("figure", choices=sorted(FIGURES))
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--replicas", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", default="out")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "reference":
        result = run_reference_campaign(_load(args))
        print(f"reference campaign done: {', '.join(p.name for p in result.outputs)}")
    elif args.command == "biased":
        result = run_biased_campaign(_load(args))
        print(f"biased campaign done: {', '.join(p.name for p in result.outputs)}")
        if result.aborted:
            print(f"aborted alphas: {result.aborted}", file=sys.stderr)
            return 1
    elif args.command == "oracle":
        payload = run_oracle(_load(args))
        print(
            "oracle done: d1=%.6g d2=%.6g sigma2_gk=%.6g"
            % (payload["d1"], payload["d2"], payload["sigma2_gk"])
        )
    else:
        payload = reproduce(
            args.figure,
            seed=args.seed,
            replicas=args.replicas,
            workers=args.workers,
            out=args.out,
        )
        for check in payload["checks"]:
            flag = {True: "PASS", False: "FAIL", None: "info"}[check["passed"]]
            print(f"[{flag}] {check['name']}: {check['value']}")
        print(f"{args.figure}: {'PASS' if payload['passed'] else 'FAIL'}")
        return 0 if payload["passed"] else 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
