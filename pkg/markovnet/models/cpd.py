"""
Conditional probability distributions of one variable given the others

TreeCPD is a probabilistic decision tree with binary (X_j = v) splits and a
distribution over the target at each leaf. LrCPD is a logistic regression
for a binary target over binary inputs. Both convert to weighted conjunctive
features whose renormalized exponentiated sums reproduce the CPD exactly.
"""
import itertools
import math
from dataclasses import dataclass
from typing import Callable, Dict, Iterator, List, Mapping, Sequence, Tuple, Union

import numpy as np
from scipy.special import expit

from models.errors import MalformedModel, PositivityError, SchemaViolation, UnsupportedSchema
from models.markov_network import (
    Distribution, Schema, VariableTest, WeightedFeature, canonicalize_feature
)


@dataclass(frozen=True, eq=False)
class TreeLeaf:
    distribution: np.ndarray

    def __post_init__(self):
        distribution = Distribution(self.distribution).probabilities
        object.__setattr__(self, 'distribution', distribution)


@dataclass(frozen=True, eq=False)
class TreeSplit:
    test: VariableTest
    true_branch: 'TreeNode'
    false_branch: 'TreeNode'


TreeNode = Union[TreeLeaf, TreeSplit]


class TreeCPD:
    """Probabilistic decision tree for P(X_target | X_-target)"""

    def __init__(self, schema: Schema, target: int, root: TreeNode):
        schema.check_variable(target)
        self.schema = schema
        self.target = target
        self.root = root
        self._validate(root)

    def _validate(self, node: TreeNode, path: frozenset = frozenset()):
        if isinstance(node, TreeLeaf):
            if node.distribution.size != self.schema.arities[self.target]:
                raise MalformedModel(
                    f"Leaf of CPD {self.target} has {node.distribution.size} values, "
                    f"variable has arity {self.schema.arities[self.target]}"
                )
            return
        var, val = node.test
        if var == self.target:
            raise MalformedModel(f"Tree for variable {self.target} tests its own target")
        self.schema.check_test(var, val)
        if node.test in path:
            raise MalformedModel(f"Tree for variable {self.target} tests {var}={val} twice on one path")
        path = path | {node.test}
        self._validate(node.true_branch, path)
        self._validate(node.false_branch, path)

    def __repr__(self):
        return f"TreeCPD(target={self.target}, leaves={self.leaf_count})"

    @property
    def leaf_count(self) -> int:
        return sum(1 for _ in self.leaves())

    def leaves(self) -> Iterator[TreeLeaf]:
        stack = [self.root]
        while stack:
            node = stack.pop()
            if isinstance(node, TreeLeaf):
                yield node
            else:
                stack.extend((node.false_branch, node.true_branch))

    def is_positive(self) -> bool:
        return all(np.all(leaf.distribution > 0) for leaf in self.leaves())

    def find_leaf(self, assignment: Sequence[int]) -> TreeLeaf:
        node = self.root
        while isinstance(node, TreeSplit):
            var, val = node.test
            node = node.true_branch if assignment[var] == val else node.false_branch
        return node

    def predict(self, assignment: Sequence[int]) -> Distribution:
        return Distribution(self.find_leaf(assignment).distribution)

    def predict_many(self, rows: np.ndarray) -> np.ndarray:
        """Leaf distributions for every row, shape (rows, arity)"""
        rows = np.asarray(rows)
        out = np.empty((rows.shape[0], self.schema.arities[self.target]))
        self._fill(self.root, rows, np.arange(rows.shape[0]), out)
        return out

    def _fill(self, node: TreeNode, rows: np.ndarray, index: np.ndarray, out: np.ndarray):
        if isinstance(node, TreeLeaf):
            out[index] = node.distribution
            return
        var, val = node.test
        hit = rows[index, var] == val
        self._fill(node.true_branch, rows, index[hit], out)
        self._fill(node.false_branch, rows, index[~hit], out)

    def paths(self) -> Iterator[Tuple[Dict[int, Tuple[int, ...]], TreeLeaf]]:
        """Each leaf with the values its path allows for every tested variable"""
        def walk(node, allowed):
            if isinstance(node, TreeLeaf):
                yield allowed, node
                return
            var, val = node.test
            current = allowed.get(var, tuple(range(self.schema.arities[var])))
            true_allowed = dict(allowed)
            true_allowed[var] = tuple(v for v in current if v == val)
            false_allowed = dict(allowed)
            false_allowed[var] = tuple(v for v in current if v != val)
            yield from walk(node.true_branch, true_allowed)
            yield from walk(node.false_branch, false_allowed)

        yield from walk(self.root, {})

    def to_features(self) -> List[WeightedFeature]:
        """One feature per (path conjunction, target value) with weight ln P(value | leaf)"""
        features = []
        for allowed, leaf in self.paths():
            if np.any(leaf.distribution <= 0):
                raise PositivityError(f"CPD {self.target} has a leaf with zero probability")
            # Variables restricted to several values expand into one conjunction per value
            choices = [[VariableTest(var, v) for v in values] for var, values in sorted(allowed.items())]
            for combo in itertools.product(*choices):
                for value, probability in enumerate(leaf.distribution):
                    feature = canonicalize_feature(combo + (VariableTest(self.target, value),), self.schema)
                    features.append(WeightedFeature(math.log(probability), feature))
        return features


class LrCPD:
    """Logistic regression P(X_target = 1 | x) = sigmoid(bias + sum_j w_j [x_j = 1])"""

    def __init__(self, schema: Schema, target: int, bias: float, weights: Mapping[int, float] = None):
        schema.check_variable(target)
        if schema.arities[target] != 2:
            raise UnsupportedSchema(f"Logistic regression CPD needs a binary target, variable {target} is not")
        weights = {int(var): float(w) for var, w in (weights or {}).items() if w != 0.0}
        for var in weights:
            schema.check_variable(var)
            if var == target:
                raise MalformedModel(f"Logistic regression CPD {target} has a self-weight")
            if schema.arities[var] != 2:
                raise UnsupportedSchema(f"Logistic regression input {var} is not binary")
        self.schema = schema
        self.target = target
        self.bias = float(bias)
        self.weights: Dict[int, float] = dict(sorted(weights.items()))

    def __repr__(self):
        return f"LrCPD(target={self.target}, nonzero={len(self.weights)})"

    def is_positive(self) -> bool:
        return True

    def logit(self, assignment: Sequence[int]) -> float:
        return self.bias + math.fsum(w for var, w in self.weights.items() if assignment[var] == 1)

    def predict(self, assignment: Sequence[int]) -> Distribution:
        p = float(expit(self.logit(assignment)))
        return Distribution([1.0 - p, p])

    def predict_many(self, rows: np.ndarray) -> np.ndarray:
        rows = np.asarray(rows)
        z = np.full(rows.shape[0], self.bias)
        for var, w in self.weights.items():
            z += w * (rows[:, var] == 1)
        p = expit(z)
        return np.column_stack([1.0 - p, p])

    def to_features(self) -> List[WeightedFeature]:
        on = VariableTest(self.target, 1)
        features = [WeightedFeature(self.bias, canonicalize_feature([on]))]
        for var, w in self.weights.items():
            features.append(WeightedFeature(w, canonicalize_feature([on, VariableTest(var, 1)])))
        return features


CPD = Union[TreeCPD, LrCPD]


def cpd_to_features(cpd: CPD) -> List[WeightedFeature]:
    return cpd.to_features()


def tabular_cpd(schema: Schema, target: int, parents: Sequence[int],
                table: Union[Mapping[Tuple[int, ...], Sequence[float]], Callable]) -> TreeCPD:
    """Complete tree over the parents whose leaves come from table[parent values]"""
    parents = sorted(parents)
    if target in parents:
        raise SchemaViolation(f"Variable {target} cannot be its own parent")
    lookup = table if callable(table) else table.__getitem__

    def build(depth, values):
        if depth == len(parents):
            return TreeLeaf(np.asarray(lookup(tuple(values)), dtype=float))
        var = parents[depth]
        arity = schema.arities[var]
        if arity == 2:
            return TreeSplit(VariableTest(var, 1), build(depth + 1, values + [1]), build(depth + 1, values + [0]))
        # Multi-valued parents become a chain of value tests
        node = build(depth + 1, values + [arity - 1])
        for val in range(arity - 2, -1, -1):
            node = TreeSplit(VariableTest(var, val), build(depth + 1, values + [val]), node)
        return node

    return TreeCPD(schema, target, build(0, []))
