from typing import List, Sequence

import numpy as np

from models.cpd import CPD, LrCPD, TreeCPD, tabular_cpd
from models.errors import MalformedModel
from models.markov_network import Distribution, MarkovNetwork, Schema, WeightedFeature


class DependencyNetwork:
    """One CPD per variable; cpds[i] models P(X_i | X_-i)"""

    def __init__(self, schema: Schema, cpds: Sequence[CPD]):
        cpds = tuple(cpds)
        if len(cpds) != len(schema):
            raise MalformedModel(f"Dependency network has {len(cpds)} CPDs for {len(schema)} variables")
        for index, cpd in enumerate(cpds):
            if cpd.target != index:
                raise MalformedModel(f"CPD at position {index} models variable {cpd.target}")
            if cpd.schema != schema:
                raise MalformedModel(f"CPD {index} was built for a different schema")
        self.schema = schema
        self.cpds = cpds

    def __len__(self):
        return len(self.cpds)

    def __repr__(self):
        kinds = sorted({type(c).__name__ for c in self.cpds})
        return f"DependencyNetwork(variables={len(self.schema)}, cpds={'/'.join(kinds)})"

    @property
    def kind(self) -> str:
        if all(isinstance(c, LrCPD) for c in self.cpds):
            return 'lr'
        if all(isinstance(c, TreeCPD) for c in self.cpds):
            return 'tree'
        return 'mixed'

    def predict(self, var: int, assignment: Sequence[int]) -> Distribution:
        return self.cpds[var].predict(assignment)

    def cpd_features(self, var: int) -> List[WeightedFeature]:
        """Weighted features of CPD var; every one must test the target"""
        features = self.cpds[var].to_features()
        for wf in features:
            if wf.feature.value_of(var) is None:
                raise MalformedModel(f"CPD {var} produced feature {wf.feature} without a test on its target")
        return features

    def is_positive(self) -> bool:
        return all(cpd.is_positive() for cpd in self.cpds)

    @staticmethod
    def from_markov_network(mn: MarkovNetwork) -> 'DependencyNetwork':
        """Tabular CPDs over each Markov blanket, holding the exact conditionals of mn"""
        cpds = []
        for var in range(len(mn.schema)):
            parents = sorted(mn.markov_blanket(var))

            def table(values, var=var, parents=parents):
                assignment = np.zeros(len(mn.schema), dtype=int)
                if parents:
                    assignment[parents] = values
                return mn.conditional_distribution(var, assignment).probabilities

            cpds.append(tabular_cpd(mn.schema, var, parents, table))
        return DependencyNetwork(mn.schema, cpds)
