"""
Weight-learning baseline: maximize pseudo-log-likelihood with a Gaussian prior

The objective for weights w over a fixed feature list is
    PLL(w) - sum_k w_k^2 / (2 sigma^2)
which is concave; it is maximized with L-BFGS from the all-zeros start.
"""
import logging
from typing import List, Optional, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.special import logsumexp

from models.dataset import Dataset
from models.dependency_network import DependencyNetwork
from models.errors import ConfigurationError, MalformedModel
from models.markov_network import ConjunctiveFeature, MarkovNetwork, WeightedFeature
from utils.conditionals import LocalConditionals
from utils.cpd_learning import TuningResult, tune_hyperparameter

logger = logging.getLogger(__name__)


def deduplicate_features(features: Sequence[ConjunctiveFeature]) -> List[ConjunctiveFeature]:
    """Keep the first copy of each canonical feature"""
    seen = set()
    unique = []
    for feature in features:
        if feature in seen:
            continue
        seen.add(feature)
        unique.append(feature)
    return unique


def collect_features(model) -> List[ConjunctiveFeature]:
    """Feature set of a model with weights discarded and duplicates removed"""
    if isinstance(model, DependencyNetwork):
        features = [wf.feature for var in range(len(model.schema)) for wf in model.cpd_features(var)]
    else:
        features = [wf.feature for wf in model.features]
    return deduplicate_features(features)


def pll(model, data: Dataset) -> float:
    """Sum over rows and variables of ln P(x_i | x_-i)"""
    conditionals = LocalConditionals.for_model(model)
    rows = data.rows
    encoded = conditionals.encode(rows)
    index = np.arange(len(rows))
    total = 0.0
    for var in range(len(data.schema)):
        scores = conditionals.log_scores(encoded, var)
        log_probabilities = scores - logsumexp(scores, axis=1, keepdims=True)
        total += float(np.sum(log_probabilities[index, rows[:, var]]))
    return total


class PllObjectiveState:
    """Penalized PLL over fixed features and data, compiled once per variable"""

    def __init__(self, features: Sequence[ConjunctiveFeature], data: Dataset, sigma: float,
                 weights: Optional[np.ndarray] = None):
        if not sigma > 0:
            raise ConfigurationError(f"Prior standard deviation must be positive, got {sigma}")
        features = list(features)
        if len(deduplicate_features(features)) != len(features):
            raise MalformedModel("Weight learning needs a duplicate-free feature list")

        self.features = features
        self.data = data
        self.sigma = float(sigma)
        self.weights = np.zeros(len(features)) if weights is None else np.asarray(weights, dtype=float)

        self.network = MarkovNetwork(data.schema, [WeightedFeature(0.0, f) for f in features])
        conditionals = LocalConditionals.from_markov_network(self.network)
        encoded = conditionals.encode(data.rows)
        rows = data.rows
        index = np.arange(len(rows))

        # Per variable: feature activity on every row, target-value map and observed one-hot
        self._blocks = []
        for var in range(len(data.schema)):
            block = conditionals.blocks[var]
            observed = np.zeros((len(rows), data.schema.arities[var]))
            observed[index, rows[:, var]] = 1.0
            self._blocks.append((conditionals.activity(encoded, var), block.value_map, block.indices, observed))

    def value_and_gradient(self, weights: Optional[np.ndarray] = None):
        weights = self.weights if weights is None else np.asarray(weights, dtype=float)
        total = 0.0
        gradient = np.zeros_like(weights)
        for activity, value_map, indices, observed in self._blocks:
            if indices.size == 0:
                # No feature touches this variable: uniform conditional, constant term
                arity = observed.shape[1]
                total -= observed.shape[0] * np.log(arity)
                continue
            scores = activity @ (weights[indices][:, None] * value_map)
            log_probabilities = scores - logsumexp(scores, axis=1, keepdims=True)
            total += float(np.sum(log_probabilities * observed))
            residual = observed - np.exp(log_probabilities)
            np.add.at(gradient, indices, np.sum(activity * (residual @ value_map.T), axis=0))

        variance = self.sigma ** 2
        value = total - float(np.dot(weights, weights)) / (2.0 * variance)
        gradient -= weights / variance
        return value, gradient

    def value(self, weights: Optional[np.ndarray] = None) -> float:
        return self.value_and_gradient(weights)[0]

    def gradient(self, weights: Optional[np.ndarray] = None) -> np.ndarray:
        return self.value_and_gradient(weights)[1]

    def network_with(self, weights: np.ndarray) -> MarkovNetwork:
        return MarkovNetwork(self.data.schema,
                             [WeightedFeature(float(w), f) for w, f in zip(weights, self.features)])


def pll_gradient(state: PllObjectiveState) -> np.ndarray:
    return state.gradient()


def learn_weights(features: Sequence[ConjunctiveFeature], data: Dataset, sigma: float,
                  max_iter: int = 100, gtol: float = 1e-5, initial: Optional[MarkovNetwork] = None,
                  trace: Optional[List[float]] = None) -> MarkovNetwork:
    """L-BFGS maximization of penalized PLL

    initial, when given, supplies starting weights for matching features
    (others start at zero). trace, when given, receives the objective value
    of the start and of every accepted iterate.
    """
    data.require_rows('weight learning')
    features = deduplicate_features(features)
    state = PllObjectiveState(features, data, sigma)

    start = np.zeros(len(features))
    if initial is not None:
        initial_weights = {}
        for wf in initial.features:
            initial_weights[wf.feature] = initial_weights.get(wf.feature, 0.0) + wf.weight
        start = np.array([initial_weights.get(f, 0.0) for f in features])

    def negated(weights):
        value, gradient = state.value_and_gradient(weights)
        return -value, -gradient

    callback = None
    if trace is not None:
        trace.append(state.value(start))

        def callback(weights):
            trace.append(state.value(weights))

    result = minimize(negated, start, jac=True, method='L-BFGS-B', callback=callback,
                      options={'maxiter': max_iter, 'gtol': gtol, 'ftol': 1e-12})
    logger.info(
        f"Weight learning over {len(features)} features, sigma={sigma}: "
        f"{result.nit} iterations, objective {-result.fun:.6f} ({result.message})"
    )
    return state.network_with(result.x)


def tune_sigma(features: Sequence[ConjunctiveFeature], train: Dataset, tune: Dataset,
               grid: Sequence[float], max_iter: int = 100, gtol: float = 1e-5) -> TuningResult:
    """Learn at every sigma and keep the best tuning-set PLL; ties go to the smaller sigma"""
    features = deduplicate_features(features)
    return tune_hyperparameter(lambda data, sigma: learn_weights(features, data, sigma, max_iter, gtol),
                               list(grid), train, tune, early_stop=False, stronger=min, score=pll)


def learn_baseline(dn: DependencyNetwork, train: Dataset, tune: Dataset, grid: Sequence[float],
                   max_iter: int = 100, gtol: float = 1e-5) -> TuningResult:
    """Weight learning over the DN's own CPD features, sigma tuned on the tuning set"""
    features = collect_features(dn)
    logger.info(f"Baseline weight learning over {len(features)} features from {dn}")
    return tune_sigma(features, train, tune, grid, max_iter, gtol)
