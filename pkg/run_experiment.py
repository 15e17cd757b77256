#!/usr/bin/env python3
"""
Desk-scale comparison of DN to MN conversion variants
Samples data from a seeded chain Markov network, learns a tree or logistic
regression DN, converts it six ways and compares against weight learning on
the DN's own features
"""

import argparse
import logging
import os
import sys
import time

sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), 'markovnet'))

from config import setup_logging  # noqa: E402
from settings import ExperimentSettings  # noqa: E402
from utils.cpd_learning import tune_dependency_network  # noqa: E402
from utils.dn2mn import ConversionConfig, OrderMode, convert, estimate_marginals  # noqa: E402
from utils.inference import GibbsConfig, eval_cmll, eval_pll, exact_cmll, partition_variables  # noqa: E402
from utils.synthetic import chain_markov_network  # noqa: E402
from utils.weight_learning import learn_baseline  # noqa: E402

logger = logging.getLogger('run_experiment')

# (label, order mode, base) in reporting order
VARIANTS = (
    ('single/single-base', OrderMode.SINGLE, 'single'),
    ('pair/single-base', OrderMode.OPPOSITE_PAIR, 'single'),
    ('single/marginal', OrderMode.SINGLE, 'marginal'),
    ('pair/marginal', OrderMode.OPPOSITE_PAIR, 'marginal'),
    ('rot1/marginal', OrderMode.ROTATIONS, 'marginal'),
    ('rot2/marginal', OrderMode.ROTATIONS_PAIR, 'marginal'),
)


def parse_args(argv):
    parser = argparse.ArgumentParser(description='Compare DN to MN conversion variants on synthetic data')
    parser.add_argument('--cpd', choices=('tree', 'lr'), default='tree', help='CPD family of the learned DN')
    parser.add_argument('--variables', type=int, default=8, help='Binary variables in the generating network')
    parser.add_argument('--train', type=int, default=5000, help='Training rows')
    parser.add_argument('--tune', type=int, default=1000, help='Tuning rows')
    parser.add_argument('--test', type=int, default=1000, help='Test rows')
    parser.add_argument('--seed', type=int, default=0, help='Seed for the generating network and all sampling')
    parser.add_argument('--config', help='Hyperparameter configuration file (JSON)')
    parser.add_argument('--log-level', help='Logging level (overrides LOG_LEVEL)')
    return parser.parse_args(argv)


def timed(function, *args, **kwargs):
    started = time.perf_counter()
    result = function(*args, **kwargs)
    return result, time.perf_counter() - started


def print_table(title, header, rows):
    print(f"# {title}")
    print('\t'.join(header))
    for row in rows:
        print('\t'.join(f"{v:.6f}" if isinstance(v, float) else str(v) for v in row))
    print()


def main(argv=None):
    args = parse_args(sys.argv[1:] if argv is None else argv)
    setup_logging(args.log_level)
    settings = ExperimentSettings(args.config)

    if args.variables < 4:
        logger.error("CMLL needs at least 4 variables")
        return 2

    source = chain_markov_network(args.variables, seed=args.seed)
    train = source.sample(args.train, seed=args.seed + 1)
    tune = source.sample(args.tune, seed=args.seed + 2)
    test = source.sample(args.test, seed=args.seed + 3)
    logger.info(f"Sampled {len(train)}/{len(tune)}/{len(test)} rows from {source}")

    if args.cpd == 'tree':
        grid, sigma_grid, options = settings.tuning.kappa_grid, settings.tuning.tree_sigma_grid, {}
    else:
        grid, sigma_grid = settings.tuning.l1_grid, settings.tuning.lr_sigma_grid
        options = {'max_iter': settings.limits.lr_max_iter, 'tol': settings.limits.lr_tolerance}
    tuning, dn_seconds = timed(tune_dependency_network, train, tune, args.cpd, grid, **options)
    dn = tuning.model
    logger.info(f"{args.cpd} DN learned with parameter {tuning.value} in {dn_seconds:.2f}s")
    _, dn_npll = eval_pll(dn, test)

    marginals = estimate_marginals(train)
    base_instance = tuple([0] * args.variables)
    converted = {}
    rows = []
    for label, mode, base in VARIANTS:
        options = {'marginals': marginals} if base == 'marginal' else {'base_instance': base_instance}
        cfg = ConversionConfig(order_mode=mode, weight_floor=settings.conversion.weight_floor, **options)
        mn, seconds = timed(convert, dn, cfg)
        converted[label] = (mn, seconds)
        _, npll = eval_pll(mn, test)
        rows.append((label, len(mn), npll, npll - dn_npll))
    print_table('NPLL by conversion variant', ('variant', 'features', 'npll', 'vs_dn'),
                [('dn', '-', dn_npll, 0.0)] + rows)

    mn, convert_seconds = converted['rot2/marginal']
    # Timed from the first sigma in the sweep to the selected model
    baseline, learn_seconds = timed(learn_baseline, dn, train, tune, sigma_grid,
                                    settings.limits.weight_max_iter, settings.limits.weight_gtol)
    learned = baseline.model
    logger.info(f"Weight learning selected sigma={baseline.value}; sweep took {learn_seconds:.2f}s")

    part = partition_variables(args.variables, args.seed)
    gibbs = GibbsConfig(burn_in=settings.gibbs.burn_in, samples=settings.gibbs.samples, seed=args.seed,
                        chains=settings.gibbs.chains)
    comparison = []
    for label, model in (('weight-learning', learned), ('rot2/marginal', mn)):
        pll_per_instance, _ = eval_pll(model, test)
        cmll = eval_cmll(model, test, part, gibbs)
        comparison.append((label, pll_per_instance, cmll, exact_cmll(model, test, part)))
    print_table('Test PLL and CMLL per instance', ('model', 'pll', 'cmll', 'exact_cmll'), comparison)

    print_table('Wall clock seconds', ('conversion', 'weight_learning', 'speedup'),
                [(convert_seconds, learn_seconds, learn_seconds / max(convert_seconds, 1e-9))])
    return 0


if __name__ == '__main__':
    sys.exit(main())
