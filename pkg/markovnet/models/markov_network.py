"""
Log-linear Markov networks over discrete variables

A network is a schema (the arity of every variable) plus a list of weighted
conjunctive features. Values are 0-indexed; for binary variables 0 is false
and 1 is true. Assignments are enumerated in lexicographic order with
variable 0 most significant.
"""
import math
from collections import defaultdict
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Set, Tuple, Union

import numpy as np
from scipy.special import logsumexp

from models.errors import MalformedModel, SchemaViolation, StateSpaceTooLarge

DEFAULT_ENUMERATION_LIMIT = 2 ** 22
DEFAULT_WEIGHT_FLOOR = 1e-12


class FeatureConstant(Enum):
    """Result of simplifying a conjunction down to a constant"""
    ALWAYS_TRUE = 'always_true'
    ALWAYS_FALSE = 'always_false'


ALWAYS_TRUE = FeatureConstant.ALWAYS_TRUE
ALWAYS_FALSE = FeatureConstant.ALWAYS_FALSE
# A feature whose tests are violated by fixed values is always zero
DROPPED = ALWAYS_FALSE


@dataclass(frozen=True)
class Schema:
    arities: Tuple[int, ...]

    def __post_init__(self):
        arities = tuple(int(a) for a in self.arities)
        if not arities:
            raise SchemaViolation("Schema needs at least one variable")
        for index, arity in enumerate(arities):
            if arity < 2:
                raise SchemaViolation(f"Variable {index} has arity {arity}; every arity must be at least 2")
        object.__setattr__(self, 'arities', arities)

    def __len__(self):
        return len(self.arities)

    @property
    def num_variables(self) -> int:
        return len(self.arities)

    @property
    def state_count(self) -> int:
        return math.prod(self.arities)

    @property
    def is_binary(self) -> bool:
        return all(a == 2 for a in self.arities)

    def check_variable(self, var: int):
        if not 0 <= var < len(self.arities):
            raise SchemaViolation(f"Variable index {var} outside schema of {len(self.arities)} variables")

    def check_test(self, var: int, val: int):
        self.check_variable(var)
        if not 0 <= val < self.arities[var]:
            raise SchemaViolation(f"Value {val} outside arity {self.arities[var]} of variable {var}")

    def check_assignment(self, values: Sequence[int]) -> Tuple[int, ...]:
        """Validate a complete assignment and return it as a tuple"""
        values = tuple(int(v) for v in values)
        if len(values) != len(self.arities):
            raise SchemaViolation(f"Assignment has {len(values)} values, schema has {len(self.arities)} variables")
        for var, val in enumerate(values):
            if not 0 <= val < self.arities[var]:
                raise SchemaViolation(f"Value {val} outside arity {self.arities[var]} of variable {var}")
        return values

    def all_assignments(self) -> np.ndarray:
        """Every assignment as rows of a matrix, lexicographic order"""
        return np.indices(self.arities).reshape(len(self.arities), -1).T


class VariableTest(NamedTuple):
    var: int
    val: int

    def __str__(self):
        return f"{self.var}={self.val}"


@dataclass(frozen=True)
class ConjunctiveFeature:
    tests: Tuple[VariableTest, ...]

    def __len__(self):
        return len(self.tests)

    def __iter__(self):
        return iter(self.tests)

    def __str__(self):
        return ','.join(str(t) for t in self.tests)

    @property
    def variables(self) -> Tuple[int, ...]:
        return tuple(t.var for t in self.tests)

    def value_of(self, var: int) -> Optional[int]:
        """Value tested on var, or None if var is not in scope"""
        for test in self.tests:
            if test.var == var:
                return test.val
        return None

    def without(self, var: int) -> Tuple[VariableTest, ...]:
        return tuple(t for t in self.tests if t.var != var)


FeatureResult = Union[ConjunctiveFeature, FeatureConstant]


def canonicalize_feature(tests: Iterable, schema: Optional[Schema] = None) -> FeatureResult:
    """Sort tests by variable, merge duplicates, detect contradictions"""
    by_var: Dict[int, int] = {}
    contradiction = False
    for var, val in tests:
        var, val = int(var), int(val)
        if schema is not None:
            schema.check_test(var, val)
        elif var < 0 or val < 0:
            raise SchemaViolation(f"Invalid test {var}={val}")
        if var in by_var and by_var[var] != val:
            contradiction = True
        by_var.setdefault(var, val)

    if contradiction:
        return ALWAYS_FALSE
    if not by_var:
        return ALWAYS_TRUE
    return ConjunctiveFeature(tuple(VariableTest(var, by_var[var]) for var in sorted(by_var)))


def evaluate_feature(feature: ConjunctiveFeature, assignment: Sequence[int]) -> int:
    for var, val in feature.tests:
        if assignment[var] != val:
            return 0
    return 1


@dataclass(frozen=True)
class WeightedFeature:
    weight: float
    feature: ConjunctiveFeature

    def __post_init__(self):
        if not math.isfinite(self.weight):
            raise MalformedModel(f"Feature {self.feature} has non-finite weight {self.weight}")
        object.__setattr__(self, 'weight', float(self.weight))


@dataclass(frozen=True, eq=False)
class Distribution:
    """Normalized probabilities over a finite outcome space"""
    probabilities: np.ndarray

    def __post_init__(self):
        probabilities = np.array(self.probabilities, dtype=float).reshape(-1)
        if probabilities.size == 0:
            raise ValueError("Distribution needs at least one outcome")
        if np.any(probabilities < 0) or abs(probabilities.sum() - 1.0) > 1e-9:
            raise ValueError(f"Not a probability distribution: {probabilities}")
        probabilities.setflags(write=False)
        object.__setattr__(self, 'probabilities', probabilities)

    @staticmethod
    def from_log_scores(log_scores) -> 'Distribution':
        """Normalize unnormalized log scores with a max shift"""
        log_scores = np.asarray(log_scores, dtype=float)
        return Distribution(np.exp(log_scores - logsumexp(log_scores)))

    def __getitem__(self, index):
        return self.probabilities[index]

    def __len__(self):
        return self.probabilities.size

    def __iter__(self):
        return iter(self.probabilities)

    def tolist(self) -> List[float]:
        return self.probabilities.tolist()


class MarkovNetwork:
    """Log-linear model P(x) = exp(sum_k w_k f_k(x)) / Z"""

    def __init__(self, schema: Schema, features: Iterable[WeightedFeature] = ()):
        self.schema = schema
        self.features: Tuple[WeightedFeature, ...] = tuple(features)

        touching = defaultdict(list)
        for index, wf in enumerate(self.features):
            if len(wf.feature) == 0:
                raise MalformedModel("Constant features cannot be stored in a Markov network")
            for var, val in wf.feature.tests:
                schema.check_test(var, val)
                touching[var].append(index)
        self._touching: Dict[int, Tuple[int, ...]] = {var: tuple(ix) for var, ix in touching.items()}

    def __len__(self):
        return len(self.features)

    def __repr__(self):
        return f"MarkovNetwork(variables={len(self.schema)}, features={len(self.features)})"

    @property
    def feature_count(self) -> int:
        return len(self.features)

    @property
    def max_feature_length(self) -> int:
        return max((len(wf.feature) for wf in self.features), default=0)

    def feature_indices_touching(self, var: int) -> Tuple[int, ...]:
        return self._touching.get(var, ())

    def features_touching(self, var: int) -> List[WeightedFeature]:
        return [self.features[k] for k in self.feature_indices_touching(var)]

    def unnormalized_log_score(self, assignment: Sequence[int]) -> float:
        assignment = self.schema.check_assignment(assignment)
        return math.fsum(wf.weight for wf in self.features if evaluate_feature(wf.feature, assignment))

    def log_scores(self, states: np.ndarray) -> np.ndarray:
        """Unnormalized log scores of many assignments at once"""
        states = np.asarray(states)
        scores = np.zeros(states.shape[0])
        for wf in self.features:
            variables = list(wf.feature.variables)
            values = np.array([t.val for t in wf.feature.tests])
            scores += wf.weight * np.all(states[:, variables] == values, axis=1)
        return scores

    def enumerate_joint(self, limit: int = DEFAULT_ENUMERATION_LIMIT) -> Distribution:
        """Exact joint over all assignments in lexicographic order"""
        if self.schema.state_count > limit:
            raise StateSpaceTooLarge(
                f"State space of {self.schema.state_count} assignments exceeds enumeration limit {limit}"
            )
        return Distribution.from_log_scores(self.log_scores(self.schema.all_assignments()))

    def conditional_distribution(self, var: int, assignment: Sequence[int]) -> Distribution:
        """P(X_var | rest of assignment), using only the features in var's blanket"""
        self.schema.check_variable(var)
        assignment = self.schema.check_assignment(assignment)
        scores = np.zeros(self.schema.arities[var])
        for wf in self.features_touching(var):
            target_value = None
            satisfied = True
            for test_var, test_val in wf.feature.tests:
                if test_var == var:
                    target_value = test_val
                elif assignment[test_var] != test_val:
                    satisfied = False
                    break
            if satisfied:
                scores[target_value] += wf.weight
        return Distribution.from_log_scores(scores)

    def markov_blanket(self, var: int) -> Set[int]:
        self.schema.check_variable(var)
        blanket = set()
        for wf in self.features_touching(var):
            blanket.update(wf.feature.variables)
        blanket.discard(var)
        return blanket

    def merge_features(self, floor: float = 0.0) -> 'MarkovNetwork':
        """Collapse identical features by summing weights; drop zero sums and sums with |weight| < floor"""
        grouped: Dict[ConjunctiveFeature, List[float]] = defaultdict(list)
        for wf in self.features:
            grouped[wf.feature].append(wf.weight)

        merged = []
        # fsum and sorted output keep the result independent of input order
        for feature in sorted(grouped, key=lambda f: (len(f), f.tests)):
            weight = math.fsum(grouped[feature])
            if weight == 0.0 or abs(weight) < floor:
                continue
            merged.append(WeightedFeature(weight, feature))
        return MarkovNetwork(self.schema, merged)

    def sample(self, count: int, seed: int = 0, limit: int = DEFAULT_ENUMERATION_LIMIT):
        """Draw exact samples through enumeration"""
        from models.dataset import Dataset

        joint = self.enumerate_joint(limit)
        rng = np.random.default_rng(seed)
        picks = rng.choice(joint.probabilities.size, size=count, p=joint.probabilities)
        return Dataset(self.schema, self.schema.all_assignments()[picks])

    def to_dependency_network(self):
        """Exact DN whose CPDs are this network's conditionals"""
        from models.dependency_network import DependencyNetwork

        return DependencyNetwork.from_markov_network(self)
