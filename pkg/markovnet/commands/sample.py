import logging
import time

from commands.common import common_parser, finish, new_manifest, validate_inputs, validate_output
from models.dependency_network import DependencyNetwork
from models.errors import ConfigurationError
from utils.files import load_model

logger = logging.getLogger(__name__)


def register(subparsers):
    parser = subparsers.add_parser('sample', parents=[common_parser()],
                                   help='Draw exact samples from a small Markov network')
    parser.add_argument('-m', '--model', required=True, help='MN file')
    parser.add_argument('-n', '--count', type=int, required=True, help='Number of rows')
    parser.add_argument('--seed', type=int, default=0, help='Sampling seed')
    parser.add_argument('-o', '--output', required=True, help='Output data file')
    parser.set_defaults(command='sample', validate=validate_sample_args, run=run)


def validate_sample_args(args):
    """Validate sample flags"""
    errors = validate_inputs([args.model])
    errors += validate_output(args.output)
    if args.count < 1:
        errors.append('count must be at least 1')
    return errors


def run(args, settings):
    started = time.perf_counter()
    model = load_model(args.model)
    if isinstance(model, DependencyNetwork):
        raise ConfigurationError('Exact sampling needs a Markov network')
    data = model.sample(args.count, args.seed, settings.limits.enumeration_limit)
    manifest = new_manifest('sample', args, count=args.count)
    return finish(manifest, started, data=data)
