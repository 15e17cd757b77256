"""
Closed-form conversion of dependency networks into Markov networks

For a base instance x' and an ordering o, the joint ratio P(x)/P(x') is a
product over positions of CPD ratios P(x_i | ...)/P(x'_i | ...) in which the
variables placed before i are fixed to x'. Each CPD is a log-linear model
over conjunctive features, so conditioning a feature either removes a test
(satisfied by x'), drops the whole feature (violated by x'), or keeps the test
free. Numerators keep the target test; denominators check it against x'.

Averaging is a geometric mean over conversions, i.e. pooling features and
scaling weights. Over base instances drawn from a product of marginals, a
checked test contributes its marginal probability instead of a keep/drop
decision. Over orderings, only which of a feature's tests land after the
target matters, so each feature expands into weighted subfeatures.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from itertools import combinations
from typing import List, Optional, Sequence, Tuple

import numpy as np

from models.dataset import Dataset
from models.dependency_network import DependencyNetwork
from models.errors import FeatureTooLong, SchemaViolation
from models.markov_network import (
    ALWAYS_TRUE, DEFAULT_WEIGHT_FLOOR, DROPPED, ConjunctiveFeature, Distribution, FeatureResult,
    MarkovNetwork, Schema, VariableTest, WeightedFeature
)

logger = logging.getLogger(__name__)

DEFAULT_MAX_ORDERING_FEATURE_LENGTH = 12


class Ordering:
    """A permutation of the variables together with its inverse"""

    def __init__(self, order: Sequence[int]):
        order = tuple(int(v) for v in order)
        if sorted(order) != list(range(len(order))):
            raise SchemaViolation(f"Ordering {order} is not a permutation of 0..{len(order) - 1}")
        self.order = order
        inverse = [0] * len(order)
        for position, var in enumerate(order):
            inverse[var] = position
        self.inverse = tuple(inverse)

    def __len__(self):
        return len(self.order)

    def __eq__(self, other):
        return isinstance(other, Ordering) and self.order == other.order

    def __hash__(self):
        return hash(self.order)

    def __repr__(self):
        return f"Ordering({list(self.order)})"

    @staticmethod
    def identity(n: int) -> 'Ordering':
        return Ordering(range(n))

    def reversed(self) -> 'Ordering':
        return Ordering(self.order[::-1])

    def rotation(self, start: int) -> 'Ordering':
        """Ordering that begins at position start and wraps around"""
        return Ordering(self.order[start:] + self.order[:start])


@dataclass(frozen=True)
class Marginals:
    """Per-variable distributions used as a product distribution over base instances"""
    distributions: Tuple[Distribution, ...]

    def __post_init__(self):
        for var, distribution in enumerate(self.distributions):
            if np.any(distribution.probabilities <= 0):
                raise SchemaViolation(f"Marginal of variable {var} is not strictly positive")

    def __len__(self):
        return len(self.distributions)

    def __getitem__(self, var: int) -> Distribution:
        return self.distributions[var]

    @staticmethod
    def uniform(schema: Schema) -> 'Marginals':
        return Marginals(tuple(Distribution(np.full(a, 1.0 / a)) for a in schema.arities))


def estimate_marginals(data: Dataset) -> Marginals:
    """Add-one-smoothed empirical marginal of every variable"""
    data.require_rows('marginal estimation')
    distributions = []
    for var, arity in enumerate(data.schema.arities):
        counts = np.bincount(data.rows[:, var], minlength=arity)
        distributions.append(Distribution((counts + 1.0) / (len(data) + arity)))
    return Marginals(tuple(distributions))


class OrderMode(Enum):
    SINGLE = 'single'
    OPPOSITE_PAIR = 'pair'
    ROTATIONS = 'rot1'
    ROTATIONS_PAIR = 'rot2'
    ALL_ORDERINGS = 'all'


@dataclass(frozen=True)
class ConversionConfig:
    """Base-instance handling plus ordering averaging

    Exactly one of base_instance and marginals is set: a single base instance
    x', or an expectation over base instances under the given marginals.
    """
    order_mode: OrderMode = OrderMode.ROTATIONS_PAIR
    ordering: Optional[Ordering] = None
    base_instance: Optional[Tuple[int, ...]] = None
    marginals: Optional[Marginals] = None
    max_ordering_feature_length: int = DEFAULT_MAX_ORDERING_FEATURE_LENGTH
    weight_floor: float = DEFAULT_WEIGHT_FLOOR

    def __post_init__(self):
        if (self.base_instance is None) == (self.marginals is None):
            raise SchemaViolation("Set exactly one of base_instance and marginals")
        if self.base_instance is not None:
            object.__setattr__(self, 'base_instance', tuple(int(v) for v in self.base_instance))

    @property
    def uses_expectation(self) -> bool:
        return self.marginals is not None

    def ordering_for(self, n: int) -> Ordering:
        return self.ordering if self.ordering is not None else Ordering.identity(n)

    def validate(self, dn: DependencyNetwork):
        n = len(dn.schema)
        if self.base_instance is not None:
            dn.schema.check_assignment(self.base_instance)
        if self.marginals is not None:
            if len(self.marginals) != n:
                raise SchemaViolation(f"Marginals cover {len(self.marginals)} variables, network has {n}")
            for var, arity in enumerate(dn.schema.arities):
                if len(self.marginals[var]) != arity:
                    raise SchemaViolation(f"Marginal of variable {var} does not match arity {arity}")
        if len(self.ordering_for(n)) != n:
            raise SchemaViolation(f"Ordering covers {len(self.ordering_for(n))} variables, network has {n}")


def simplify_feature(target: int, feature: ConjunctiveFeature, base_instance: Sequence[int],
                     inverse: Sequence[int], numerator: bool) -> FeatureResult:
    """Condition a CPD feature on the base-instance values fixed by the ordering"""
    kept = []
    for var, val in feature.tests:
        if inverse[target] < inverse[var] or (var == target and numerator):
            kept.append(VariableTest(var, val))
        elif val != base_instance[var]:
            return DROPPED
    if not kept:
        return ALWAYS_TRUE
    return ConjunctiveFeature(tuple(kept))


def simplify_feature_expected(target: int, feature: ConjunctiveFeature, marginals: Marginals,
                              inverse: Sequence[int], numerator: bool) -> Tuple[FeatureResult, float]:
    """Like simplify_feature, averaged over base instances drawn from the marginals"""
    kept = []
    multiplier = 1.0
    for var, val in feature.tests:
        if inverse[target] < inverse[var] or (var == target and numerator):
            kept.append(VariableTest(var, val))
        else:
            multiplier *= float(marginals[var][val])
    if not kept:
        return ALWAYS_TRUE, multiplier
    return ConjunctiveFeature(tuple(kept)), multiplier


def rotation_subfeatures(target: int, feature: ConjunctiveFeature,
                         base: Ordering) -> List[Tuple[ConjunctiveFeature, float]]:
    """Subfeatures kept over the n rotations of base, with the fraction of rotations giving each

    A rotation fixes exactly the feature variables lying cyclically between its
    starting position and the target, so sorting the feature variables by
    backward cyclic distance from the target yields the k subfeatures directly.
    """
    target_value = feature.value_of(target)
    if target_value is None:
        return [(feature, 1.0)]

    n = len(base)
    target_position = base.inverse[target]
    others = sorted(feature.without(target), key=lambda t: (target_position - base.inverse[t.var]) % n)
    distances = [(target_position - base.inverse[t.var]) % n for t in others]

    result = []
    boundaries = [0] + distances + [n]
    for fixed in range(len(others) + 1):
        rotations = boundaries[fixed + 1] - boundaries[fixed]
        kept = sorted(others[fixed:] + [VariableTest(target, target_value)])
        result.append((ConjunctiveFeature(tuple(kept)), rotations / n))
    return result


def all_orderings_subfeatures(target: int, feature: ConjunctiveFeature,
                              max_length: int = DEFAULT_MAX_ORDERING_FEATURE_LENGTH
                              ) -> List[Tuple[ConjunctiveFeature, float]]:
    """Every subset of non-target tests, weighted by the fraction of orderings placing exactly those after the target"""
    k = len(feature)
    if k > max_length:
        raise FeatureTooLong(f"Feature {feature} has {k} tests; all-orderings averaging allows {max_length}")
    target_value = feature.value_of(target)
    if target_value is None:
        return [(feature, 1.0)]

    others = feature.without(target)
    target_test = VariableTest(target, target_value)
    result = []
    for size in range(len(others) + 1):
        length = size + 1
        fraction = math.factorial(length - 1) * math.factorial(k - length) / math.factorial(k)
        for subset in combinations(others, size):
            result.append((ConjunctiveFeature(tuple(sorted(subset + (target_test,)))), fraction))
    return result


def _kept_by_position(target: int, feature: ConjunctiveFeature, ordering: Ordering) -> ConjunctiveFeature:
    inverse = ordering.inverse
    kept = [t for t in feature.tests if t.var == target or inverse[target] < inverse[t.var]]
    return ConjunctiveFeature(tuple(kept))


def conversion_plan(target: int, feature: ConjunctiveFeature, cfg: ConversionConfig,
                    n: int) -> List[Tuple[ConjunctiveFeature, float]]:
    """Numerator subfeatures (target test kept) and their share of the averaged orderings"""
    base = cfg.ordering_for(n)
    mode = cfg.order_mode
    if mode == OrderMode.SINGLE:
        return [(_kept_by_position(target, feature, base), 1.0)]
    if mode == OrderMode.OPPOSITE_PAIR:
        return [(_kept_by_position(target, feature, base), 0.5),
                (_kept_by_position(target, feature, base.reversed()), 0.5)]
    if mode == OrderMode.ROTATIONS:
        return rotation_subfeatures(target, feature, base)
    if mode == OrderMode.ROTATIONS_PAIR:
        forward = rotation_subfeatures(target, feature, base)
        backward = rotation_subfeatures(target, feature, base.reversed())
        return [(sub, fraction / 2.0) for sub, fraction in forward + backward]
    return all_orderings_subfeatures(target, feature, cfg.max_ordering_feature_length)


def _emit(target: int, weight: float, feature: ConjunctiveFeature, kept: ConjunctiveFeature,
          fraction: float, cfg: ConversionConfig, out: List[WeightedFeature]):
    """Numerator and denominator terms for one kept subfeature"""
    kept_vars = set(kept.variables)
    removed = [t for t in feature.tests if t.var not in kept_vars]
    target_test = VariableTest(target, kept.value_of(target))
    denominator = ConjunctiveFeature(kept.without(target))

    for sign, free, checked in ((1.0, kept, removed), (-1.0, denominator, removed + [target_test])):
        if cfg.uses_expectation:
            scale = math.prod(float(cfg.marginals[t.var][t.val]) for t in checked)
        elif all(cfg.base_instance[t.var] == t.val for t in checked):
            scale = 1.0
        else:
            continue
        # All tests removed: a constant absorbed by normalization
        if len(free) == 0:
            continue
        out.append(WeightedFeature(sign * weight * fraction * scale, free))


def convert_basic(dn: DependencyNetwork, base_instance: Sequence[int], ordering: Ordering) -> MarkovNetwork:
    """Single base instance and single ordering, feature by feature"""
    base_instance = dn.schema.check_assignment(base_instance)
    if len(ordering) != len(dn.schema):
        raise SchemaViolation(f"Ordering covers {len(ordering)} variables, network has {len(dn.schema)}")

    pooled = []
    for var in range(len(dn.schema)):
        for wf in dn.cpd_features(var):
            numerator = simplify_feature(var, wf.feature, base_instance, ordering.inverse, True)
            denominator = simplify_feature(var, wf.feature, base_instance, ordering.inverse, False)
            if isinstance(numerator, ConjunctiveFeature):
                pooled.append(WeightedFeature(wf.weight, numerator))
            if isinstance(denominator, ConjunctiveFeature):
                pooled.append(WeightedFeature(-wf.weight, denominator))
    return MarkovNetwork(dn.schema, pooled).merge_features(DEFAULT_WEIGHT_FLOOR)


def convert(dn: DependencyNetwork, cfg: ConversionConfig) -> MarkovNetwork:
    """Averaged conversion under cfg, merged into a single log-linear model"""
    cfg.validate(dn)
    n = len(dn.schema)
    if cfg.order_mode == OrderMode.SINGLE and not cfg.uses_expectation:
        return convert_basic(dn, cfg.base_instance, cfg.ordering_for(n))

    pooled: List[WeightedFeature] = []
    input_count = 0
    for var in range(n):
        features = dn.cpd_features(var)
        input_count += len(features)
        for wf in features:
            for kept, fraction in conversion_plan(var, wf.feature, cfg, n):
                _emit(var, wf.weight, wf.feature, kept, fraction, cfg, pooled)

    mn = MarkovNetwork(dn.schema, pooled).merge_features(cfg.weight_floor)
    logger.info(
        f"Converted DN ({input_count} CPD features) with order={cfg.order_mode.value}, "
        f"base={'marginal' if cfg.uses_expectation else 'single'}: {len(mn)} features"
    )
    return mn
