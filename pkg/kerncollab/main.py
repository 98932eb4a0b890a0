"""
Main entry point for kerncollab experiments

    kerncollab run              one policy over Monte Carlo seeds
    kerncollab compare          several policies on the same instances
    kerncollab sweep-inducing   S-CEPE inducing budget against CEPE
    kerncollab validate-config  print the resolved configuration
"""

import argparse
import logging
import sys
from pathlib import Path

from kerncollab.config import ExperimentConfig, load_config
from kerncollab.constants import Policy
from kerncollab.exceptions import KernCollabError
from kerncollab.harness import (compare, run_experiment, sweep_inducing, write_compare_csv,
                                write_run_outputs, write_sweep_csv)
from kerncollab.plotting import plot_compare, plot_sweep
from kerncollab.utils import setup_logging

logger = logging.getLogger(__name__)

DEFAULT_Q0_GRID = [25.0, 50.0, 100.0, 200.0, 400.0, 800.0, 1600.0]


def build_parser():
    parser = argparse.ArgumentParser(prog='kerncollab', description=__doc__.strip().splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', help='INI experiment file')
    common.add_argument('--seed', type=int, help='base seed (falls back to $KERNCOLLAB_SEED)')
    common.add_argument('--out', help='output directory')
    common.add_argument('--paper-scale', '--full-scale', dest='full_scale', action='store_true',
                        help='K=50, T=2000, 30x30 grid')
    common.add_argument('--workers', type=int, help='parallel Monte Carlo processes')
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument('-v', '--verbose', action='store_true')
    verbosity.add_argument('-q', '--quiet', action='store_true')

    sub = parser.add_subparsers(dest='command', required=True)
    policies = [p.value for p in Policy]

    run = sub.add_parser('run', parents=[common], help='run one policy')
    run.add_argument('--policy', choices=policies)

    cmp_ = sub.add_parser('compare', parents=[common], help='compare policies')
    cmp_.add_argument('--policy', dest='policies', action='append', choices=policies,
                      help='repeatable; defaults to CEPE and the three baselines')

    sweep = sub.add_parser('sweep-inducing', parents=[common], help='S-CEPE q0 sweep')
    sweep.add_argument('--q0', type=float, action='append', help='repeatable q0 value')

    check = sub.add_parser('validate-config', parents=[common], help='load and validate a config')
    check.add_argument('--policy', choices=policies)
    return parser


def resolve_config(args):
    overrides = {
        'seed': args.seed,
        'out': args.out,
        'workers': args.workers,
        'policy': getattr(args, 'policy', None),
    }
    mapping = load_config(args.config, full_scale=args.full_scale, overrides=overrides)
    return ExperimentConfig.from_mapping(mapping)


def cmd_run(config):
    record = run_experiment(config)
    paths = write_run_outputs(record, config.out)
    mean, stderr = record.final_regret()
    print(f"{config.policy}: final regret {mean:.4f} +/- {stderr:.4f}, "
          f"communication {record.comm_total():g} scalars")
    logger.info("wrote %d files to %s", len(paths), config.out)


def cmd_compare(config, policies):
    names = policies or [Policy.CEPE.value, Policy.IGPUCB.value, Policy.GPEI.value, Policy.GPPI.value]
    table = compare([config.replace(policy=name) for name in names])
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    write_compare_csv(out / 'compare.csv', table)
    plot_compare(out / 'compare.svg', table)
    for name, curve in table.columns.items():
        print(f"{name}: final regret {curve[-1]:.4f}")


def cmd_sweep(config, q0_list):
    rows = sweep_inducing(config, q0_list or DEFAULT_Q0_GRID)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(out / 'sweep.csv', rows)
    plot_sweep(out / 'sweep.svg', rows)
    for row in rows:
        print(f"q0={row.q0:g}: regret ratio {row.regret_ratio:.3f}, cost ratio {row.cost_ratio:.3f}")


def cmd_validate(config):
    for key, value in config.to_mapping().items():
        print(f"{key} = {'' if value is None else value}")
    print(f"kappa (resolved) = {config.resolved_kappa()}")


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    setup_logging(level)

    try:
        config = resolve_config(args)
        if args.command == 'run':
            cmd_run(config)
        elif args.command == 'compare':
            cmd_compare(config, args.policies)
        elif args.command == 'sweep-inducing':
            cmd_sweep(config, args.q0)
        else:
            cmd_validate(config)
    except KernCollabError as e:
        print(f"kerncollab: error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
