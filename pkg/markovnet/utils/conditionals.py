"""
Batched local conditionals P(X_i | rest) for many states at once

Each variable i owns a block of weighted features that all test X_i. For a
batch of states, a feature is active for X_i = v when all of its other tests
hold and its test on X_i reads v; the conditional is the softmax of the
summed weights of active features. States are one-hot encoded so that
checking every feature's other tests is a single matrix product.
"""
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from scipy.special import softmax

from models.dependency_network import DependencyNetwork
from models.markov_network import MarkovNetwork, Schema, WeightedFeature


@dataclass
class _Block:
    literal_map: np.ndarray  # (literals, K) ones at the feature's non-target tests
    needed: np.ndarray  # (K,) number of non-target tests
    value_map: np.ndarray  # (K, arity) one-hot of the feature's target value
    weights: np.ndarray  # (K,)
    indices: np.ndarray  # (K,) position of each feature in the source list


class LocalConditionals:

    def __init__(self, schema: Schema, local_features: Sequence[Sequence[WeightedFeature]],
                 local_indices: Optional[Sequence[Sequence[int]]] = None):
        self.schema = schema
        arities = np.array(schema.arities)
        self.offsets = np.concatenate([[0], np.cumsum(arities)[:-1]]).astype(int)
        self.width = int(arities.sum())
        self.blocks: List[_Block] = []

        for var, features in enumerate(local_features):
            count = len(features)
            literal_map = np.zeros((self.width, count))
            needed = np.zeros(count)
            target_values = np.zeros(count, dtype=int)
            weights = np.zeros(count)
            for k, wf in enumerate(features):
                weights[k] = wf.weight
                for test_var, test_val in wf.feature.tests:
                    if test_var == var:
                        target_values[k] = test_val
                    else:
                        literal_map[self.offsets[test_var] + test_val, k] = 1.0
                        needed[k] += 1
            value_map = np.zeros((count, schema.arities[var]))
            value_map[np.arange(count), target_values] = 1.0
            indices = np.asarray(local_indices[var] if local_indices is not None else range(count), dtype=int)
            self.blocks.append(_Block(literal_map, needed, value_map, weights, indices))

    @staticmethod
    def from_markov_network(mn: MarkovNetwork) -> 'LocalConditionals':
        indices = [mn.feature_indices_touching(var) for var in range(len(mn.schema))]
        features = [[mn.features[k] for k in ix] for ix in indices]
        return LocalConditionals(mn.schema, features, indices)

    @staticmethod
    def from_dependency_network(dn: DependencyNetwork) -> 'LocalConditionals':
        return LocalConditionals(dn.schema, [dn.cpd_features(var) for var in range(len(dn.schema))])

    @staticmethod
    def for_model(model) -> 'LocalConditionals':
        if isinstance(model, DependencyNetwork):
            return LocalConditionals.from_dependency_network(model)
        return LocalConditionals.from_markov_network(model)

    def encode(self, states: np.ndarray) -> np.ndarray:
        """One-hot encoding of states, shape (batch, sum of arities)"""
        states = np.asarray(states)
        encoded = np.zeros((states.shape[0], self.width))
        rows = np.arange(states.shape[0])
        for var in range(len(self.schema)):
            encoded[rows, self.offsets[var] + states[:, var]] = 1.0
        return encoded

    def set_values(self, encoded: np.ndarray, var: int, values: np.ndarray):
        start = self.offsets[var]
        encoded[:, start:start + self.schema.arities[var]] = 0.0
        encoded[np.arange(encoded.shape[0]), start + values] = 1.0

    def activity(self, encoded: np.ndarray, var: int) -> np.ndarray:
        """1.0 where a feature's non-target tests all hold, shape (batch, K)"""
        block = self.blocks[var]
        return (encoded @ block.literal_map == block.needed).astype(float)

    def log_scores(self, encoded: np.ndarray, var: int, weights: Optional[np.ndarray] = None) -> np.ndarray:
        block = self.blocks[var]
        local_weights = block.weights if weights is None else weights[block.indices]
        return self.activity(encoded, var) @ (local_weights[:, None] * block.value_map)

    def probabilities(self, encoded: np.ndarray, var: int, weights: Optional[np.ndarray] = None) -> np.ndarray:
        return softmax(self.log_scores(encoded, var, weights), axis=1)
