#!/usr/bin/env python3
"""
RIS-aided THz link simulator - batch command line

    python app.py throughput --sweep N=16,36,64,100 --solver gd --out results/throughput.csv
    python app.py ser --sweep eta2_sq=0,1e-12,1e-11 --non-robust
    python app.py runtime --sweep N=16,36,64
    python app.py oracle
"""

import argparse
import logging
import os
import sys

from dotenv import load_dotenv

from config import load_default_config
from utils.errors import ConfigError, SimulatorError
from utils.harness import run_oracle, run_runtime, run_ser, run_throughput, write_csv
from utils.optimizers import SUB_SOLVERS
from utils.scenario import apply_overrides, load_config, parse_sweep

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='JSON or TOML configuration file (default: config/default.json)')
    common.add_argument('--sweep', help="Variable and values to sweep, e.g. 'N=16,36,64,100'")
    common.add_argument('--solver', choices=SUB_SOLVERS, help='RIS sub-solver inside BCD')
    robust = common.add_mutually_exclusive_group()
    robust.add_argument('--robust', dest='robust', action='store_const', const=True, default=None,
                        help='Fold CSI error levels into the objective')
    robust.add_argument('--non-robust', dest='robust', action='store_const', const=False,
                        help='Optimize as if the estimated channels were exact')
    common.add_argument('--zeta', type=int, choices=(0, 1), help='Re-radiation switch of the channel model')
    common.add_argument('--visibility', choices=('nd', 'd', 'bernoulli'), help='Interferer direct-link mode')
    common.add_argument('--trials', type=int, help='Monte Carlo trials per sweep point')
    common.add_argument('--symbols', type=int, help='4-QAM symbols per SER trial')
    common.add_argument('--seed', type=int, help='Master seed')
    common.add_argument('--workers', type=int, help='Worker threads (default: RIS_THZ_THREADS or CPU count)')
    common.add_argument('--out', default='-', help="CSV destination ('-' for stdout)")
    common.add_argument('--verbose', action='store_true', help='Debug logging')

    parser = argparse.ArgumentParser(description='RIS-aided THz link simulator')
    commands = parser.add_subparsers(dest='command', required=True)
    commands.add_parser('throughput', parents=[common], help='Mean throughput per sweep point')
    commands.add_parser('ser', parents=[common], help='4-QAM symbol error rate per sweep point')
    commands.add_parser('runtime', parents=[common], help='Per-iteration time of each sub-solver')
    oracle = commands.add_parser('oracle', help='One-element closed-form self-checks')
    oracle.add_argument('--instances', type=int, default=200, help='Random instances per check')
    oracle.add_argument('--seed', type=int, default=2024, help='Instance seed')
    oracle.add_argument('--verbose', action='store_true', help='Debug logging')
    return parser


def configure_logging(verbose: bool) -> None:
    level = logging.DEBUG if verbose else os.getenv('RIS_THZ_LOG_LEVEL', 'INFO').upper()
    logging.basicConfig(
        level=level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )


def run_command(args) -> int:
    if args.command == 'oracle':
        checks = run_oracle(instances=args.instances, seed=args.seed)
        for check in checks:
            print(f"{'PASS' if check.passed else 'FAIL'}  {check.name}: {check.detail}")
        failed = [c for c in checks if not c.passed]
        print(f"{len(checks) - len(failed)}/{len(checks)} oracle checks passed")
        return EXIT_SOLVER if failed else EXIT_OK

    cfg = load_config(args.config) if args.config else load_default_config()
    cfg = apply_overrides(cfg, solver=args.solver, robust=args.robust, zeta=args.zeta,
                          visibility=args.visibility, trials=args.trials, symbols=args.symbols,
                          seed=args.seed, workers=args.workers)
    sweep = parse_sweep(args.sweep) if args.sweep else None

    logger.info(f"🚀 Starting {args.command} experiment (solver={cfg.solver.name}, seed={cfg.experiment.seed})")
    if args.command == 'throughput':
        rows = run_throughput(cfg, sweep)
    elif args.command == 'ser':
        rows = run_ser(cfg, sweep)
    else:
        rows = run_runtime(cfg, sweep)
    write_csv(rows, args.out)
    logger.info(f"✅ {args.command} finished with {len(rows)} rows")
    return EXIT_OK


def main(argv=None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    try:
        return run_command(args)
    except ConfigError as e:
        print(f"Configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulatorError as e:
        logger.error(f"❌ Simulation failed: {e}")
        return EXIT_SOLVER
    except Exception as e:
        logger.exception(f"❌ Unexpected error during {args.command}: {e}")
        return EXIT_SOLVER


if __name__ == '__main__':
    sys.exit(main())
