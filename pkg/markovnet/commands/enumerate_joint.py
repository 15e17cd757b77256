import logging
import time

from commands.common import common_parser, finish, new_manifest, validate_inputs
from models.dependency_network import DependencyNetwork
from models.errors import ConfigurationError
from utils.files import atomic_write, load_model

logger = logging.getLogger(__name__)


def register(subparsers):
    parser = subparsers.add_parser('enumerate', parents=[common_parser()],
                                   help='Print the exact joint of a small Markov network')
    parser.add_argument('-m', '--model', required=True, help='MN file')
    parser.add_argument('-o', '--output', help='Write the table here instead of stdout')
    parser.set_defaults(command='enumerate', validate=validate_enumerate_args, run=run)


def validate_enumerate_args(args):
    """Validate enumerate flags"""
    return validate_inputs([args.model])


def format_joint(mn, limit: int) -> str:
    """One line per assignment: comma-separated values, a tab, the probability"""
    joint = mn.enumerate_joint(limit)
    lines = []
    for state, probability in zip(mn.schema.all_assignments(), joint):
        lines.append(','.join(str(int(v)) for v in state) + f"\t{float(probability)!r}\n")
    return ''.join(lines)


def run(args, settings):
    started = time.perf_counter()
    model = load_model(args.model)
    if isinstance(model, DependencyNetwork):
        raise ConfigurationError('A dependency network has no closed-form joint; convert it with dn2mn first')

    table = format_joint(model, settings.limits.enumeration_limit)
    if args.output:
        atomic_write(args.output, table)
    else:
        print(table, end='')
    manifest = new_manifest('enumerate', args, states=model.schema.state_count)
    return finish(manifest, started)
