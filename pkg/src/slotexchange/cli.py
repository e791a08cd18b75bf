"""Command-line experiment runner.

    slotexchange run --agents 1000 --beta 0 --seed 1 --out runs/b0
    slotexchange sweep-beta --betas 0 0.25 0.5 0.75 --out runs/beta
    slotexchange sweep-pop --sizes 200 400 --fractions 0.2 0.4 --out runs/pop
    slotexchange exchange-subsets --sizes 100 200 --sets 5 --out runs/subsets
    slotexchange gen-plans --agents 1000 --out data/synthetic

``DSM_SEED`` overrides ``--seed`` when set.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from slotexchange import dataio, pipeline
from slotexchange.synthetic import synthetic_plan_sets

logger = logging.getLogger("slotexchange")


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="config.json of an earlier run; flags given here override it")
    parser.add_argument("--dataset", help="directory of agent_<id>.plans files (default: synthetic)")
    parser.add_argument("--agents", type=int, help="number of agents (default 1000)")
    parser.add_argument("--plans", type=int, help="plans per agent for synthetic data (default 10)")
    parser.add_argument("--slots", type=int, help="slots per plan for synthetic data (default 144)")
    parser.add_argument("--flexibility", type=float, help="synthetic plan flexibility (default 0.1)")
    parser.add_argument("--data-seed", type=int, dest="data_seed", help="seed of the synthetic dataset")
    parser.add_argument("--beta", type=float)
    parser.add_argument("--iterations", type=int, help="coordination iterations (default 50)")
    parser.add_argument("--seed", type=int, help="run seed (default 1)")
    parser.add_argument("--repeats", type=int, help="seeded repeats per sweep point (default 10)")
    parser.add_argument("--mode", choices=["literal", "strict"])
    parser.add_argument("--tolerance", type=float, help="absolute value-matching tolerance (default 0)")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="slotexchange", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="single coordination + exchange run")
    _common(p)

    p = sub.add_parser("sweep-beta", help="comfort/inefficiency/unfairness across beta values")
    _common(p)
    p.add_argument("--betas", type=float, nargs="+", default=[0.0, 0.25, 0.5, 0.75])

    p = sub.add_parser("sweep-pop", help="comfort gain across population sizes and subsets")
    _common(p)
    p.add_argument("--sizes", type=int, nargs="+", default=[200, 400, 600, 800, 1000])
    p.add_argument("--fractions", type=float, nargs="+", default=[0.2, 0.4, 0.6, 0.8, 1.0])

    p = sub.add_parser("exchange-subsets", help="replay random subsets of the exchange log")
    _common(p)
    p.add_argument("--sizes", type=int, nargs="+", default=list(range(100, 1000, 100)))
    p.add_argument("--sets", type=int, default=5, help="random subsets per size")

    p = sub.add_parser("gen-plans", help="write a synthetic agent_<id>.plans dataset")
    _common(p)
    return parser


def config_from_args(args) -> pipeline.RunConfig:
    base = {}
    if args.config:
        base = dataio.load_config(args.config)
    overrides = {
        name: getattr(args, name)
        for name in ("dataset", "agents", "plans", "slots", "flexibility", "data_seed", "beta",
                     "iterations", "seed", "repeats", "mode", "tolerance", "out")
        if getattr(args, name) is not None
    }
    base.update(overrides)
    env_seed = os.environ.get("DSM_SEED")
    if env_seed:
        base["seed"] = int(env_seed)
    return pipeline.RunConfig.from_dict(base)


def _print(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = config_from_args(args)
        if args.command == "run":
            report = pipeline.run(config)
            _print(report.summary())
        elif args.command == "sweep-beta":
            _, summary = pipeline.sweep_beta(config, args.betas)
            _print(summary)
        elif args.command == "sweep-pop":
            rows = pipeline.sweep_population(config, args.sizes, args.fractions)
            _print(rows if len(rows) <= 50 else {"rows": len(rows), "out": config.out})
        elif args.command == "exchange-subsets":
            rows = pipeline.exchange_subsets(config, args.sizes, args.sets)
            _print(rows if len(rows) <= 50 else {"rows": len(rows), "out": config.out})
        elif args.command == "gen-plans":
            if not config.out:
                raise ValueError("gen-plans needs --out")
            sets = synthetic_plan_sets(config.agents or 1000, config.slots, config.plans,
                                       config.flexibility, config.data_seed)
            written = dataio.write_dataset(sets, config.out)
            _print({"agents": len(written), "out": config.out})
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"slotexchange: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
