'''
Command-line entry point of the NS3L laboratory.

Commands: train, eval, gradcheck, demo-toy, sweep, compare. Every command writes only
under the directory given with --out.
'''

import argparse
import logging
import os
import sys
from typing import Dict, List, Optional

from ns3l_lab import settings
from ns3l_lab.classifier import load_checkpoint, save_checkpoint
from ns3l_lab.errors import Ns3lError, TrainingDivergedError
from ns3l_lab.experiments.gradcheck_suite import TOLERANCE, run_gradcheck_suite
from ns3l_lab.experiments.seeds import format_summary, run_seeds
from ns3l_lab.experiments.sweep import (
    DEFAULT_LAMBDA1_GRID,
    DEFAULT_METHODS,
    DEFAULT_T_GRID,
    comparison_csv_text,
    run_method_matrix,
    run_negselect_comparison,
    run_sweep,
    write_sweep,
)
from ns3l_lab.experiments.toy import ToyConfig, mean_boundary_error, run_toy_demo, trajectory_csv_text
from ns3l_lab.models.config import ExperimentConfig
from ns3l_lab.training import build_experiment_data, evaluate
from ns3l_lab.utils.config_io import emit_config, parse_config, write_text_atomic

logging.basicConfig(
    level=logging.DEBUG if settings.DEBUG_MODE else logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
)
LOG = logging.getLogger(__name__)

EXIT_ERROR = 1
EXIT_DIVERGED = 3
EXIT_GRADCHECK = 4

OVERRIDE_FLAGS = ('method', 'T', 'lambda1', 'lambda2', 'lambda3', 'epsilon', 'alpha', 'E', 'A', 'lr', 'seed')


def _overrides(args: argparse.Namespace) -> Dict[str, object]:
    values = {name: getattr(args, name, None) for name in OVERRIDE_FLAGS}
    if getattr(args, 'steps', None) is not None:
        values['total_steps'] = args.steps
        values['warmup_steps'] = min(args.steps, args.warmup if args.warmup is not None else args.steps // 4)
    return {key: value for key, value in values.items() if value is not None}


def _load_config(args: argparse.Namespace) -> ExperimentConfig:
    return parse_config(args.config, _overrides(args))


def cmd_train(args: argparse.Namespace) -> int:
    '''
    Train one run per seed and save metrics, checkpoints and the resolved config.

    Args:
        args: Parsed command-line arguments.

    Returns:
        Process exit code.
    '''
    config = _load_config(args)
    seeds = [config.seed + offset for offset in range(args.seeds)]
    results = run_seeds(config, seeds, workers=args.workers)
    write_text_atomic(os.path.join(args.out, 'config.txt'), emit_config(config))
    for result in results:
        result.metrics.write_csv(os.path.join(args.out, f'metrics_seed{result.seed}.csv'))
        save_checkpoint(result.best_params, os.path.join(args.out, f'checkpoint_seed{result.seed}.ns3l'))
        print(
            f'seed {result.seed}: test error {result.test_error:.4f} at best validation step {result.best_step} '
            f'(median of last checkpoints {result.median_test_error:.4f})'
        )
    print(format_summary(config.method.value, [result.test_error for result in results]))
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    '''Evaluate a saved checkpoint on the test reserve of the configured dataset.'''
    config = _load_config(args)
    dataset, split = build_experiment_data(config)
    params = load_checkpoint(args.checkpoint, slope=config.leaky_slope, seed=config.seed)
    error = evaluate(params, dataset.X[split.test], dataset.y[split.test])
    print(f'{args.checkpoint}: test error {error:.4f}')
    return 0


def cmd_gradcheck(args: argparse.Namespace) -> int:
    '''Compare tape gradients with finite differences for every loss.'''
    results = run_gradcheck_suite(seed=args.seed or 0, instances=args.instances)
    for result in results:
        status = 'ok' if result.passed else 'FAILED'
        print(f'{result.name:<20} max relative error {result.max_relative_error:.3e} {status}')
    failed = [result.name for result in results if not result.passed]
    if failed:
        LOG.error('Gradient check above %.0e for: %s', TOLERANCE, ', '.join(failed))
        return EXIT_GRADCHECK
    return 0


def cmd_demo_toy(args: argparse.Namespace) -> int:
    '''Run the 1-D biased-label toy with and without NS3L.'''
    config = ToyConfig(bias=args.bias, gap=args.gap, steps=args.steps or ToyConfig.steps)
    runs = run_toy_demo(config, seeds=range(args.seed or 0, (args.seed or 0) + args.seeds))
    for run in runs:
        grads = run.gradients
        print(
            f'seed {run.seed}: |w - w*| supervised {run.error("supervised"):.4f}, ns3l {run.error("ns3l"):.4f}; '
            f'x_u={grads.x_u:+.3f} mu_u={grads.mu_u:.3f} grad inductive {grads.inductive:+.4f} '
            f'grad ns3l {grads.ns3l:+.4f} (measured {grads.measured_inductive:+.4f} / {grads.measured_ns3l:+.4f})'
        )
        if not grads.opposite:
            LOG.warning('seed %d: literal gradients do not point in opposite directions', run.seed)
    print(
        f'mean |w - w*|: supervised {mean_boundary_error(runs, "supervised"):.4f}, '
        f'ns3l {mean_boundary_error(runs, "ns3l"):.4f} over {len(runs)} seed(s)'
    )
    write_text_atomic(os.path.join(args.out, 'toy_boundaries.csv'), trajectory_csv_text(runs))
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    '''Grid over the threshold T and the weight lambda1.'''
    config = _load_config(args)
    seeds = [config.seed + offset for offset in range(args.seeds)]
    result = run_sweep(
        config,
        seeds,
        T_grid=args.T_grid or DEFAULT_T_GRID,
        lambda1_grid=args.lambda1_grid or DEFAULT_LAMBDA1_GRID,
        workers=args.workers,
    )
    write_sweep(result, args.out)
    for cell in result.cells:
        print(f'T={cell.T:<5} lambda1={cell.lambda1:<4} test error {cell.test_error:.4f} ± {cell.test_std:.4f}')
    print(f'supervised baseline {result.supervised[0]:.4f} ± {result.supervised[1]:.4f}')
    print(f'ns3l with lambda1=0 {result.zero_weight[0]:.4f} ± {result.zero_weight[1]:.4f}')
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    '''Method matrix, or NS3L under each negative-label selection strategy with --negselect.'''
    config = _load_config(args)
    seeds = [config.seed + offset for offset in range(args.seeds)]
    if args.negselect:
        errors = run_negselect_comparison(config, seeds, workers=args.workers)
        name = 'negselect.csv'
    else:
        errors = run_method_matrix(config, seeds, methods=args.methods or DEFAULT_METHODS, workers=args.workers)
        name = 'methods.csv'
    write_text_atomic(os.path.join(args.out, name), comparison_csv_text(errors))
    for run, (mean, std) in errors.items():
        print(f'{run:<14} test error {mean:.4f} ± {std:.4f}')
    return 0


def _add_experiment_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--config', help='flat "key = value" experiment file')
    parser.add_argument('--method', help='training recipe, e.g. ns3l or vat+ns3l')
    parser.add_argument('--T', type=float, help='NS3L threshold')
    parser.add_argument('--lambda1', type=float, help='NS3L weight')
    parser.add_argument('--lambda2', type=float, help='VAT or Pi weight')
    parser.add_argument('--lambda3', type=float, help='MixMatch unsupervised weight')
    parser.add_argument('--epsilon', type=float, help='VAT perturbation radius')
    parser.add_argument('--alpha', type=float, help='MixMatch Beta parameter')
    parser.add_argument('--E', type=float, help='MixMatch sharpening temperature')
    parser.add_argument('--A', type=int, help='MixMatch augmentations per unlabeled sample')
    parser.add_argument('--lr', type=float, help='Adam learning rate')
    parser.add_argument('--steps', type=int, help='total training steps')
    parser.add_argument('--warmup', type=int, help='warmup steps when --steps is given')


def _add_common_flags(parser: argparse.ArgumentParser, seeds: int = 1) -> None:
    parser.add_argument('--out', default=settings.DEFAULT_OUTPUT_DIR, help='output directory')
    parser.add_argument('--seeds', type=int, default=seeds, help='number of consecutive seeds')
    parser.add_argument('--seed', type=int, help='first seed')
    parser.add_argument('--workers', type=int, default=1, help='parallel worker processes')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=settings.APP_NAME, description='Negative sampling for semi-supervised learning')
    commands = parser.add_subparsers(dest='command', required=True)

    train = commands.add_parser('train', help='train and save metrics and checkpoints')
    _add_experiment_flags(train)
    _add_common_flags(train)
    train.set_defaults(handler=cmd_train)

    evaluate_parser = commands.add_parser('eval', help='evaluate a checkpoint')
    _add_experiment_flags(evaluate_parser)
    evaluate_parser.add_argument('--checkpoint', required=True, help='checkpoint written by train')
    evaluate_parser.add_argument('--seed', type=int, help='seed the checkpoint was trained with')
    evaluate_parser.set_defaults(handler=cmd_eval)

    gradcheck = commands.add_parser('gradcheck', help='finite-difference check of every loss')
    gradcheck.add_argument('--seed', type=int, default=0)
    gradcheck.add_argument('--instances', type=int, default=20)
    gradcheck.set_defaults(handler=cmd_gradcheck)

    toy = commands.add_parser('demo-toy', help='1-D biased-label toy')
    _add_common_flags(toy)
    toy.add_argument('--bias', type=float, default=0.6)
    toy.add_argument('--gap', type=float, default=0.0, help='unlabeled-free band around w*; 0 gives Uniform(-1, 1)')
    toy.add_argument('--steps', type=int)
    toy.set_defaults(handler=cmd_demo_toy)

    sweep = commands.add_parser('sweep', help='sensitivity grid over T and lambda1')
    _add_experiment_flags(sweep)
    _add_common_flags(sweep)
    sweep.add_argument('--T-grid', dest='T_grid', type=float, nargs='+')
    sweep.add_argument('--lambda1-grid', dest='lambda1_grid', type=float, nargs='+')
    sweep.set_defaults(handler=cmd_sweep)

    compare = commands.add_parser('compare', help='compare methods or negative-label selection strategies')
    _add_experiment_flags(compare)
    _add_common_flags(compare)
    compare.add_argument('--methods', nargs='+', help='methods to compare, e.g. supervised ns3l vat+ns3l')
    compare.add_argument('--negselect', action='store_true', help='compare selection strategies under NS3L')
    compare.set_defaults(handler=cmd_compare)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    '''Parse arguments, dispatch the command and map failures to exit codes.'''
    args = build_parser().parse_args(argv)
    if getattr(args, 'workers', 1) > settings.MAX_WORKERS:
        LOG.info('Capping workers at %d', settings.MAX_WORKERS)
        args.workers = settings.MAX_WORKERS
    try:
        return args.handler(args)
    except TrainingDivergedError as e:
        LOG.error('%s', e)
        return EXIT_DIVERGED
    except Ns3lError as e:
        LOG.error('%s', e)
        return EXIT_ERROR


if __name__ == '__main__':
    sys.exit(main())
