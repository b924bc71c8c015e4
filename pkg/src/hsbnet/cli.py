"""Command-line entry point: ``hsbnet run | sweep | validate-queue | cdf``.

Exit status is 0 on success, 2 when the scenario admits no feasible
solution, 1 on a bad config or arguments.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import experiments as ex
from .errors import (ConfigError, InfeasibleBudget, MUDropError, NoFeasibleLink,
                     StabilityViolation)
from .scenario import ScenarioConfig, generate_scenario, load_config

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE = 0, 1, 2
DESK = dict(num_mus=50, num_bss=5)


def _config(path, full_scale=False) -> ScenarioConfig:
    if path:
        return load_config(path)
    return ScenarioConfig() if full_scale else ScenarioConfig(**DESK)


def _emit(text, out):
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_run(args):
    scenario = generate_scenario(_config(args.config, args.full_scale), args.seed)
    r = ex.run(args.scheme, scenario, args.seed, max_iters=args.max_iters)
    _emit(r.to_csv(), args.out)
    failed = [k for k, ok in r.audit.checks.items() if not ok]
    print(f"{args.scheme} seed={args.seed} throughput={r.total_throughput:.9g} msg/s "
          f"qos_ok={int(r.audit.qos_ok.sum())}/{scenario.num_mus}"
          + (f" failed={','.join(failed)}" if failed else ""), file=sys.stderr)
    return EXIT_OK


def _values(args):
    if args.values:
        return [float(v) if args.axis == "tau_mean" else int(v) for v in args.values.split(",")]
    if args.start is None or args.stop is None:
        raise ConfigError([("--from/--to", "give a range or --values")])
    step = args.step or (0.1 if args.axis == "tau_mean" else 1)
    vals = np.round(np.arange(args.start, args.stop + step / 2, step), 9)
    return [float(v) for v in vals] if args.axis == "tau_mean" else [int(v) for v in vals]


def _cmd_sweep(args):
    schemes = ex.SCHEME_IDS if args.schemes == "all" else tuple(args.schemes.split(","))
    for s in schemes:
        if s not in ex.SCHEME_IDS:
            raise ConfigError([("--schemes", f"unknown scheme {s!r}")])
    rows = ex.sweep(args.axis, _values(args), schemes, range(args.seeds),
                    base=_config(args.config, args.full_scale), workers=args.workers,
                    max_iters=args.max_iters)
    _emit(ex.sweep_csv(rows), args.out)
    return EXIT_OK


def _cmd_validate(args):
    rows = ex.validate_queue(packets=args.packets, slots=args.slots, seed=args.seed)
    _emit(ex.validation_csv(rows), args.out)
    return EXIT_OK


def _cmd_cdf(args):
    scenario = generate_scenario(_config(args.config, args.full_scale), args.seed)
    r = ex.run(args.scheme, scenario, args.seed, max_iters=args.max_iters)
    _emit(ex.cdf_csv(ex.rate_cdf(r)), args.out)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="hsbnet", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        sp.add_argument("--config", help="scenario config JSON (default: desk scale)")
        sp.add_argument("--full-scale", action="store_true",
                        help="U=200, S=10 when no --config is given")
        sp.add_argument("--max-iters", type=int, default=500)
        sp.add_argument("--out", help="CSV output path (default: stdout)")
        if seed:
            sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("run", help="run one scheme on one scenario")
    common(sp)
    sp.add_argument("--scheme", default=ex.PROPOSED, choices=ex.SCHEME_IDS)
    sp.set_defaults(func=_cmd_run)

    sp = sub.add_parser("sweep", help="throughput versus BS count, MU count or mean tau")
    common(sp, seed=False)
    sp.add_argument("--axis", required=True, choices=ex.AXES)
    sp.add_argument("--from", dest="start", type=float)
    sp.add_argument("--to", dest="stop", type=float)
    sp.add_argument("--step", type=float)
    sp.add_argument("--values", help="comma-separated axis values instead of a range")
    sp.add_argument("--schemes", default="all", help="'all' or comma-separated scheme ids")
    sp.add_argument("--seeds", type=int, default=5, help="seeds 0..N-1")
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(func=_cmd_sweep)

    sp = sub.add_parser("validate-queue", help="analytic queues versus Monte Carlo")
    sp.add_argument("--packets", type=int, default=1_000_000)
    sp.add_argument("--slots", type=int, default=1_000_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out")
    sp.set_defaults(func=_cmd_validate)

    sp = sub.add_parser("cdf", help="CDF of per-link message rates")
    common(sp)
    sp.add_argument("--scheme", default=ex.PROPOSED, choices=ex.SCHEME_IDS)
    sp.set_defaults(func=_cmd_cdf)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, json.JSONDecodeError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (NoFeasibleLink, MUDropError, InfeasibleBudget, StabilityViolation) as e:
        print(f"infeasible: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
