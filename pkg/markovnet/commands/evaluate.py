import logging
import time

from commands.common import common_parser, finish, load_dataset_for, new_manifest, validate_inputs
from utils.files import load_model
from utils.inference import (
    QUERY_BLOCKS, GibbsConfig, QueryPartition, eval_cmll, eval_pll, partition_variables
)

logger = logging.getLogger(__name__)

METRICS = ('pll', 'npll', 'cmll')


def register(subparsers):
    parser = subparsers.add_parser('eval', parents=[common_parser()],
                                   help='Evaluate a DN or MN on test data')
    parser.add_argument('--metric', choices=METRICS, default='npll', help='Evaluation metric')
    parser.add_argument('-m', '--model', required=True, help='Model file (DN or MN)')
    parser.add_argument('-i', '--input', required=True, help='Test data')
    parser.add_argument('--seed', type=int, default=0, help='Seed for the query partition and sampler')
    parser.add_argument('--burn-in', type=int, help='Gibbs burn-in sweeps')
    parser.add_argument('--samples', type=int, help='Gibbs counted sweeps')
    parser.add_argument('--chains', type=int, help='Independent Gibbs chains')
    parser.set_defaults(command='eval', validate=validate_eval_args, run=run)


def validate_eval_args(args):
    """Validate eval flags"""
    errors = validate_inputs([args.model, args.input])
    if args.burn_in is not None and args.burn_in < 0:
        errors.append('burn-in must not be negative')
    if args.samples is not None and args.samples < 1:
        errors.append('samples must be at least 1')
    if args.chains is not None and args.chains < 1:
        errors.append('chains must be at least 1')
    return errors


def query_partition(n: int, seed: int) -> QueryPartition:
    """Random four-way partition; fewer than four variables get one block each"""
    if n < QUERY_BLOCKS:
        return QueryPartition(tuple((var,) for var in range(n)) + ((),) * (QUERY_BLOCKS - n))
    return partition_variables(n, seed)


def run(args, settings):
    started = time.perf_counter()
    model = load_model(args.model)
    test = load_dataset_for(args.input, model)

    if args.metric == 'cmll':
        cfg = GibbsConfig(
            burn_in=settings.gibbs.burn_in if args.burn_in is None else args.burn_in,
            samples=args.samples or settings.gibbs.samples,
            seed=args.seed,
            chains=args.chains or settings.gibbs.chains,
        )
        value = eval_cmll(model, test, query_partition(len(model.schema), args.seed), cfg)
    else:
        pll_per_instance, npll = eval_pll(model, test)
        value = pll_per_instance if args.metric == 'pll' else npll

    print(repr(value))
    manifest = new_manifest('eval', args, metric=args.metric, value=value)
    return finish(manifest, started)
