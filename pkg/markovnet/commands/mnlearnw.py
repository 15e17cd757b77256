import logging
import time

from commands.common import (
    common_parser, finish, load_dataset_for, new_manifest, parse_grid, validate_grid, validate_inputs,
    validate_output
)
from models.dependency_network import DependencyNetwork
from models.errors import ConfigurationError
from utils.files import load_model
from utils.weight_learning import collect_features, learn_weights, tune_sigma

logger = logging.getLogger(__name__)


def register(subparsers):
    parser = subparsers.add_parser('mnlearnw', parents=[common_parser()],
                                   help='Learn Markov network weights by pseudo-likelihood')
    parser.add_argument('-m', '--model', required=True, help='Feature source (DN or MN file)')
    parser.add_argument('-i', '--input', required=True, help='Training data')
    parser.add_argument('-t', '--tune', help='Tuning data for sigma selection')
    parser.add_argument('--sigma', help='Gaussian prior standard deviation grid (comma-separated)')
    parser.add_argument('--max-iter', type=int, help='Optimizer iteration cap')
    parser.add_argument('--init-from-model', action='store_true',
                        help='Start from the feature source weights instead of zeros (MN source only)')
    parser.add_argument('-o', '--output', required=True, help='Output MN file')
    parser.set_defaults(command='mnlearnw', validate=validate_mnlearnw_args, run=run)


def validate_mnlearnw_args(args):
    """Validate mnlearnw flags"""
    errors = validate_inputs([args.model, args.input, args.tune])
    errors += validate_output(args.output)
    errors += validate_grid(args.sigma, 'sigma')
    if args.max_iter is not None and args.max_iter < 1:
        errors.append('max-iter must be at least 1')
    if args.sigma is not None and not errors and len(parse_grid(args.sigma, [])) > 1 and not args.tune:
        errors.append('A tuning set (-t) is required to choose among several sigma values')
    return errors


def run(args, settings):
    started = time.perf_counter()
    source = load_model(args.model)
    default_grid = settings.tuning.lr_sigma_grid
    if not isinstance(source, DependencyNetwork) or source.kind == 'tree':
        default_grid = settings.tuning.tree_sigma_grid
    grid = parse_grid(args.sigma, default_grid)
    max_iter = args.max_iter or settings.limits.weight_max_iter

    features = collect_features(source)
    logger.info(f"Learning weights for {len(features)} distinct features")
    train = load_dataset_for(args.input, source)

    if args.init_from_model:
        if isinstance(source, DependencyNetwork):
            raise ConfigurationError('--init-from-model needs a Markov network feature source')
        if len(grid) != 1:
            raise ConfigurationError('--init-from-model takes a single sigma value')
        mn, sigma = learn_weights(features, train, grid[0], max_iter, settings.limits.weight_gtol,
                                  initial=source), grid[0]
    elif args.tune:
        tune = load_dataset_for(args.tune, source)
        result = tune_sigma(features, train, tune, grid, max_iter)
        mn, sigma = result.model, result.value
        logger.info(f"Selected sigma {sigma} (tuning PLL {result.score:.6f})")
    else:
        if len(grid) != 1:
            raise ConfigurationError('A tuning set is required to choose among several sigma values')
        sigma = grid[0]
        mn = learn_weights(features, train, sigma, max_iter, settings.limits.weight_gtol)

    manifest = new_manifest('mnlearnw', args, grid=grid, selected=sigma, max_iter=max_iter,
                            features=len(features))
    return finish(manifest, started, model=mn)
