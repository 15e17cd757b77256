import logging
import time

from commands.common import (
    common_parser, finish, new_manifest, parse_grid, validate_grid, validate_inputs, validate_output
)
from models.errors import ConfigurationError
from utils.cpd_learning import CPD_KINDS, learn_dependency_network, tune_dependency_network
from utils.files import load_dataset

logger = logging.getLogger(__name__)


def register(subparsers):
    parser = subparsers.add_parser('dnlearn', parents=[common_parser()],
                                   help='Learn a dependency network with tree or logistic regression CPDs')
    parser.add_argument('--cpd', choices=CPD_KINDS, default='tree', help='CPD family')
    parser.add_argument('--kappa', help='Tree structure prior grid (comma-separated)')
    parser.add_argument('--l1', help='Logistic regression L1 penalty grid (comma-separated)')
    parser.add_argument('-i', '--input', required=True, help='Training data')
    parser.add_argument('-t', '--tune', help='Tuning data for grid selection')
    parser.add_argument('--schema', help='Schema file (comma-separated arities)')
    parser.add_argument('-o', '--output', required=True, help='Output DN file')
    parser.set_defaults(command='dnlearn', validate=validate_dnlearn_args, run=run)


def validate_dnlearn_args(args):
    """Validate dnlearn flags"""
    errors = validate_inputs([args.input, args.tune, args.schema])
    errors += validate_output(args.output)
    errors += validate_grid(args.kappa, 'kappa')
    errors += validate_grid(args.l1, 'l1', positive=False)

    grid_flag = args.kappa if args.cpd == 'tree' else args.l1
    if grid_flag is not None and not errors and len(parse_grid(grid_flag, [])) > 1 and not args.tune:
        errors.append('A tuning set (-t) is required to choose among several grid values')
    if args.cpd == 'lr' and args.l1 is not None and not errors and any(v < 0 for v in parse_grid(args.l1, [])):
        errors.append('l1 values must not be negative')
    return errors


def run(args, settings):
    started = time.perf_counter()
    if args.cpd == 'tree':
        grid = parse_grid(args.kappa, settings.tuning.kappa_grid)
    else:
        grid = parse_grid(args.l1, settings.tuning.l1_grid)
    options = {}
    if args.cpd == 'lr':
        options = {'max_iter': settings.limits.lr_max_iter, 'tol': settings.limits.lr_tolerance}

    train = load_dataset(args.input, args.schema)
    if args.tune:
        tune = load_dataset(args.tune, args.schema)
        if tune.schema != train.schema:
            raise ConfigurationError('Training and tuning data have different schemas')
        result = tune_dependency_network(train, tune, args.cpd, grid, **options)
        dn, value = result.model, result.value
        logger.info(f"Selected {args.cpd} parameter {value} (tuning score {result.score:.6f})")
    else:
        if len(grid) != 1:
            raise ConfigurationError('A tuning set is required to choose among several grid values')
        value = grid[0]
        dn = learn_dependency_network(train, args.cpd, value, **options)

    manifest = new_manifest('dnlearn', args, cpd=args.cpd, grid=grid, selected=value)
    return finish(manifest, started, model=dn)
