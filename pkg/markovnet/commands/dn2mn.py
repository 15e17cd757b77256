import logging
import time

from commands.common import (
    common_parser, finish, load_dataset_for, new_manifest, validate_inputs, validate_output
)
from models.dependency_network import DependencyNetwork
from models.errors import ConfigurationError
from utils.dn2mn import ConversionConfig, OrderMode, Ordering, convert, estimate_marginals
from utils.files import load_dn

logger = logging.getLogger(__name__)

BASE_MODES = ('single', 'marginal')
ORDER_MODES = tuple(mode.value for mode in OrderMode)


def register(subparsers):
    parser = subparsers.add_parser('dn2mn', parents=[common_parser()],
                                   help='Convert a dependency network into a Markov network')
    parser.add_argument('-m', '--model', required=True, help='Input DN file')
    parser.add_argument('-i', '--input', help='Training data (marginals for --base marginal)')
    parser.add_argument('--base', choices=BASE_MODES, help='Single base instance or expectation over marginals')
    parser.add_argument('--xprime', default='zeros', help='Base instance: comma-separated values or "zeros"')
    parser.add_argument('--order', choices=ORDER_MODES, help='Ordering averaging mode')
    parser.add_argument('--ordering', help='Base variable ordering (comma-separated permutation)')
    parser.add_argument('-o', '--output', required=True, help='Output MN file')
    parser.set_defaults(command='dn2mn', validate=validate_dn2mn_args, run=run)


def _parse_values(text):
    return [int(token) for token in text.split(',') if token.strip()]


def validate_dn2mn_args(args):
    """Validate dn2mn flags"""
    errors = validate_inputs([args.model, args.input])
    errors += validate_output(args.output)

    if args.xprime != 'zeros':
        try:
            if any(v < 0 for v in _parse_values(args.xprime)):
                errors.append('Base instance values must be non-negative')
        except ValueError:
            errors.append('Base instance must be comma-separated integers or "zeros"')
    if args.ordering:
        try:
            _parse_values(args.ordering)
        except ValueError:
            errors.append('Ordering must be comma-separated variable indices')
    return errors


def build_config(args, settings, dn: DependencyNetwork) -> ConversionConfig:
    base = args.base or settings.conversion.base
    order = args.order or settings.conversion.order
    if base not in BASE_MODES:
        raise ConfigurationError(f"Unknown base mode {base!r}")
    if order not in ORDER_MODES:
        raise ConfigurationError(f"Unknown order mode {order!r}")

    n = len(dn.schema)
    ordering = Ordering(_parse_values(args.ordering)) if args.ordering else None
    options = dict(order_mode=OrderMode(order), ordering=ordering,
                   max_ordering_feature_length=settings.conversion.max_ordering_feature_length,
                   weight_floor=settings.conversion.weight_floor)

    if base == 'single':
        base_instance = [0] * n if args.xprime == 'zeros' else _parse_values(args.xprime)
        return ConversionConfig(base_instance=tuple(base_instance), **options)

    if not args.input:
        raise ConfigurationError('--base marginal needs training data (-i) for the marginals')
    data = load_dataset_for(args.input, dn)
    return ConversionConfig(marginals=estimate_marginals(data), **options)


def run(args, settings):
    started = time.perf_counter()
    dn = load_dn(args.model)
    cfg = build_config(args, settings, dn)
    mn = convert(dn, cfg)

    manifest = new_manifest('dn2mn', args, base=args.base or settings.conversion.base,
                            order=cfg.order_mode.value, xprime=args.xprime, features=mn.feature_count,
                            max_feature_length=mn.max_feature_length)
    return finish(manifest, started, model=mn)
