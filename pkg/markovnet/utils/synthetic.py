"""
Seeded random Markov networks for fixtures and the desk-scale experiment
"""
from typing import Optional

import numpy as np

from models.cpd import TreeCPD, TreeLeaf, TreeSplit
from models.dependency_network import DependencyNetwork
from models.markov_network import MarkovNetwork, Schema, VariableTest, WeightedFeature, canonicalize_feature


def random_markov_network(schema: Schema, feature_count: int, seed: int = 0, max_length: int = 3,
                          weight_scale: float = 2.0, rng: Optional[np.random.Generator] = None) -> MarkovNetwork:
    """Features over random variable subsets (length 1..max_length) with weights uniform in +-weight_scale"""
    rng = rng if rng is not None else np.random.default_rng(seed)
    n = len(schema)
    features = []
    for _ in range(feature_count):
        length = int(rng.integers(1, min(max_length, n) + 1))
        variables = rng.choice(n, size=length, replace=False)
        tests = [VariableTest(int(v), int(rng.integers(schema.arities[v]))) for v in variables]
        weight = float(rng.uniform(-weight_scale, weight_scale))
        features.append(WeightedFeature(weight, canonicalize_feature(tests, schema)))
    return MarkovNetwork(schema, features)


def chain_markov_network(n: int, coupling: float = 1.0, field_strength: float = 0.3,
                         seed: int = 0) -> MarkovNetwork:
    """Binary chain with pairwise agreement features plus random extra pairwise features

    The generating model of the desk-scale experiment: neighbours agree with
    log-odds coupling, each variable has a small random bias, and a few
    longer-range interactions make the conditionals non-trivial.
    """
    rng = np.random.default_rng(seed)
    schema = Schema((2,) * n)
    features = []
    for var in range(n):
        features.append(WeightedFeature(float(rng.uniform(-field_strength, field_strength)),
                                         canonicalize_feature([(var, 1)])))
    for var in range(n - 1):
        features.append(WeightedFeature(coupling, canonicalize_feature([(var, 1), (var + 1, 1)])))
        features.append(WeightedFeature(coupling, canonicalize_feature([(var, 0), (var + 1, 0)])))
    for _ in range(n // 2):
        a, b = rng.choice(n, size=2, replace=False)
        features.append(WeightedFeature(float(rng.uniform(-coupling, coupling)),
                                         canonicalize_feature([(int(a), 1), (int(b), 1)])))
    return MarkovNetwork(schema, features)


def two_variable_dependency_network(x0_given_x1: float, x0_given_not_x1: float,
                                    x1_given_x0: float, x1_given_not_x0: float) -> DependencyNetwork:
    """Binary DN over two variables from its four conditionals P(X_i = 1 | other = 1 or 0)"""
    schema = Schema((2, 2))

    def split(target, parent, p_true, p_false):
        root = TreeSplit(VariableTest(parent, 1), TreeLeaf([1 - p_true, p_true]), TreeLeaf([1 - p_false, p_false]))
        return TreeCPD(schema, target, root)

    return DependencyNetwork(schema, [
        split(0, 1, x0_given_x1, x0_given_not_x1),
        split(1, 0, x1_given_x0, x1_given_not_x0),
    ])
