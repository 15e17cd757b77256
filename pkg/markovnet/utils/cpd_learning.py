"""
Learning CPDs from data

Trees are grown greedily to maximize the add-one-smoothed conditional
log-likelihood of the target plus a structure prior f * ln(kappa), where f
counts free leaf parameters. Logistic regression CPDs minimize the negative
conditional log-likelihood plus an L1 penalty (bias unpenalized) with an
accelerated proximal gradient method.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit

from models.cpd import LrCPD, TreeCPD, TreeLeaf, TreeSplit
from models.dataset import Dataset
from models.dependency_network import DependencyNetwork
from models.errors import ConfigurationError, UnsupportedSchema
from models.markov_network import VariableTest

logger = logging.getLogger(__name__)

CPD_KINDS = ('tree', 'lr')


def _smoothed_log_likelihood(counts: np.ndarray) -> float:
    """Log-likelihood of counts under their own add-one-smoothed estimate"""
    total = counts.sum()
    probabilities = (counts + 1.0) / (total + counts.size)
    return float(np.dot(counts, np.log(probabilities)))


def _split_candidates(arity: int) -> Sequence[int]:
    # X_j = 0 on a binary variable is the X_j = 1 partition with branches swapped
    return (1,) if arity == 2 else range(arity)


def learn_tree_cpd(data: Dataset, target: int, kappa: float) -> TreeCPD:
    """Greedy top-down probabilistic decision tree for variable target"""
    data.require_rows('tree CPD learning')
    if not kappa > 0:
        raise ConfigurationError(f"kappa must be positive, got {kappa}")

    schema = data.schema
    schema.check_variable(target)
    rows = data.rows
    labels = rows[:, target]
    target_arity = schema.arities[target]
    # Each split replaces one leaf by two: (arity - 1) new free parameters
    split_penalty = (target_arity - 1) * math.log(kappa)
    inputs = [var for var in range(len(schema)) if var != target]

    def grow(index: np.ndarray) -> object:
        counts = np.bincount(labels[index], minlength=target_arity).astype(float)
        parent_ll = _smoothed_log_likelihood(counts)

        best_gain = 0.0
        best_test = None
        for var in inputs:
            arity = schema.arities[var]
            joint = np.bincount(rows[index, var] * target_arity + labels[index],
                                minlength=arity * target_arity).reshape(arity, target_arity)
            for val in _split_candidates(arity):
                true_counts = joint[val].astype(float)
                false_counts = counts - true_counts
                if true_counts.sum() == 0 or false_counts.sum() == 0:
                    continue
                gain = (_smoothed_log_likelihood(true_counts) + _smoothed_log_likelihood(false_counts)
                        - parent_ll + split_penalty)
                # Strict comparison keeps the lowest (variable, value) on ties
                if gain > best_gain:
                    best_gain = gain
                    best_test = VariableTest(var, val)

        if best_test is None:
            return TreeLeaf((counts + 1.0) / (counts.sum() + target_arity))

        logger.debug(f"CPD {target}: split on {best_test} with gain {best_gain:.6f} over {index.size} rows")
        hit = rows[index, best_test.var] == best_test.val
        return TreeSplit(best_test, grow(index[hit]), grow(index[~hit]))

    return TreeCPD(schema, target, grow(np.arange(len(data))))


def _soft_threshold(values: np.ndarray, threshold: float) -> np.ndarray:
    return np.sign(values) * np.maximum(np.abs(values) - threshold, 0.0)


def lr_objective(data: Dataset, target: int, lam: float, bias: float, weights: np.ndarray) -> float:
    """Negative conditional log-likelihood plus lam * ||weights||_1 (weights over non-target inputs)"""
    inputs = [var for var in range(len(data.schema)) if var != target]
    z = bias + data.rows[:, inputs] @ weights
    labels = data.rows[:, target]
    return float(np.sum(np.logaddexp(0.0, z) - labels * z) + lam * np.abs(weights).sum())


def kkt_residual(design: np.ndarray, labels: np.ndarray, lam: float, theta: np.ndarray) -> float:
    """Largest violation of the L1 subgradient optimality conditions, unscaled objective

    Column 0 of design is the unpenalized bias.
    """
    gradient = design.T @ (expit(design @ theta) - labels)
    weights, weight_gradient = theta[1:], gradient[1:]
    violations = np.where(weights != 0.0,
                          np.abs(weight_gradient + lam * np.sign(weights)),
                          np.maximum(0.0, np.abs(weight_gradient) - lam))
    return float(max(abs(gradient[0]), violations.max(initial=0.0)))


def _polish_support(design: np.ndarray, labels: np.ndarray, lam: float, theta: np.ndarray,
                    objective: Callable[[np.ndarray], float], steps: int = 25) -> np.ndarray:
    """Damped Newton steps on the nonzero coordinates with their signs held fixed

    Inside the sign orthant the L1 term is linear, so the restricted problem
    is smooth. A step is only taken when it keeps every sign and does not
    raise the objective.
    """
    support = np.concatenate([[0], 1 + np.flatnonzero(theta[1:])])
    signs = np.sign(theta[support])
    signs[0] = 0.0
    columns = design[:, support]
    theta = theta.copy()
    current = objective(theta)
    for _ in range(steps):
        probabilities = expit(columns @ theta[support])
        gradient = columns.T @ (probabilities - labels) + lam * signs
        if np.max(np.abs(gradient)) <= 1e-10:
            break
        hessian = columns.T @ (columns * (probabilities * (1.0 - probabilities))[:, None])
        direction = np.linalg.lstsq(hessian, gradient, rcond=None)[0]
        scale = 1.0
        while scale > 1e-6:
            trial = theta.copy()
            trial[support] -= scale * direction
            if np.array_equal(np.sign(trial[support[1:]]), signs[1:]):
                trial_value = objective(trial)
                if trial_value <= current:
                    theta, current = trial, trial_value
                    break
            scale /= 2.0
        else:
            break
    return theta


def learn_lr_cpd(data: Dataset, target: int, lam: float, max_iter: int = 1000, tol: float = 1e-6,
                 kkt_tol: float = 1e-4, rounds: int = 5) -> LrCPD:
    """L1-regularized logistic regression CPD via FISTA with monotone restarts

    A FISTA run ends when no coordinate moves by tol or after max_iter
    iterations. If the subgradient conditions still miss kkt_tol, the
    support is refined with Newton steps and FISTA resumes from there, for
    at most rounds passes.
    """
    data.require_rows('logistic regression CPD learning')
    schema = data.schema
    schema.check_variable(target)
    if not schema.is_binary:
        raise UnsupportedSchema("Logistic regression CPDs need every variable to be binary")
    if lam < 0:
        raise ConfigurationError(f"L1 penalty must be non-negative, got {lam}")

    inputs = [var for var in range(len(schema)) if var != target]
    count = len(data)
    design = np.column_stack([np.ones(count), data.rows[:, inputs].astype(float)])
    labels = data.rows[:, target].astype(float)

    # Work on the objective divided by the row count; same minimizer
    penalty = lam / count
    lipschitz = 0.25 * np.linalg.norm(design, 2) ** 2 / count
    step = 1.0 / lipschitz

    def objective(theta):
        z = design @ theta
        return float(np.mean(np.logaddexp(0.0, z) - labels * z) + penalty * np.abs(theta[1:]).sum())

    def prox_step(point):
        gradient = design.T @ (expit(design @ point) - labels) / count
        moved = point - step * gradient
        moved[1:] = _soft_threshold(moved[1:], step * penalty)
        return moved

    def fista(theta):
        current = objective(theta)
        momentum_point = theta.copy()
        t = 1.0
        for iteration in range(max_iter):
            candidate = prox_step(momentum_point)
            candidate_value = objective(candidate)
            if candidate_value > current:
                # Momentum overshot: fall back to a plain proximal step
                t = 1.0
                candidate = prox_step(theta)
                candidate_value = objective(candidate)

            change = float(np.max(np.abs(candidate - theta)))
            t_next = (1.0 + math.sqrt(1.0 + 4.0 * t * t)) / 2.0
            momentum_point = candidate + ((t - 1.0) / t_next) * (candidate - theta)
            theta, current, t = candidate, candidate_value, t_next
            if change < tol:
                return theta, iteration + 1
        return theta, max_iter

    # Start at the best bias for all-zero weights
    rate = np.clip(labels.mean(), 1e-6, 1 - 1e-6)
    theta = np.zeros(design.shape[1])
    theta[0] = math.log(rate / (1 - rate))

    for attempt in range(rounds):
        theta, iterations = fista(theta)
        residual = kkt_residual(design, labels, lam, theta)
        logger.debug(f"LR CPD {target}: pass {attempt + 1}, {iterations} iterations, residual {residual:.2e}")
        if residual <= kkt_tol:
            break
        theta = _polish_support(design, labels, lam, theta, objective)
        residual = kkt_residual(design, labels, lam, theta)
        if residual <= kkt_tol:
            break
    else:
        logger.warning(f"LR CPD {target}: optimality residual {residual:.2e} above {kkt_tol} after {rounds} passes")

    weights = {var: float(w) for var, w in zip(inputs, theta[1:]) if w != 0.0}
    return LrCPD(schema, target, float(theta[0]), weights)


def learn_dependency_network(data: Dataset, kind: str, value: float, **options) -> DependencyNetwork:
    """One CPD per variable; value is kappa for trees and lambda for LR"""
    if kind not in CPD_KINDS:
        raise ConfigurationError(f"Unknown CPD kind {kind!r}; expected one of {', '.join(CPD_KINDS)}")

    cpds = []
    for target in range(len(data.schema)):
        if kind == 'tree':
            cpds.append(learn_tree_cpd(data, target, value))
        else:
            cpds.append(learn_lr_cpd(data, target, value, **options))
    logger.info(f"Learned {kind} DN over {len(data.schema)} variables with parameter {value}")
    return DependencyNetwork(data.schema, cpds)


def dn_validation_score(dn: DependencyNetwork, data: Dataset) -> float:
    """Sum over rows and variables of ln P_i(x_i | x_-i)"""
    rows = data.rows
    total = 0.0
    for var, cpd in enumerate(dn.cpds):
        probabilities = cpd.predict_many(rows)
        total += float(np.sum(np.log(probabilities[np.arange(len(rows)), rows[:, var]])))
    return total


@dataclass
class TuningResult:
    value: float
    model: object
    score: float
    scores: List[Tuple[float, float]] = field(default_factory=list)


def tune_hyperparameter(learner: Callable[[Dataset, float], object], grid: Sequence[float],
                        train: Dataset, tune: Dataset, early_stop: bool = False,
                        stronger: Callable = min,
                        score: Callable[[object, Dataset], float] = dn_validation_score) -> TuningResult:
    """Pick the grid value whose model scores best on the tuning set

    With early_stop the sweep ends at the first value that scores below its
    predecessor. Ties go to stronger(tied values), the more regularized one.
    """
    if not grid:
        raise ConfigurationError("Hyperparameter grid is empty")

    result: Optional[TuningResult] = None
    scores = []
    previous = None
    for value in grid:
        model = learner(train, value)
        value_score = score(model, tune)
        scores.append((value, value_score))
        logger.info(f"Tuning: value {value} scored {value_score:.6f}")

        if (result is None or value_score > result.score
                or (value_score == result.score and stronger([value, result.value]) == value)):
            result = TuningResult(value, model, value_score)

        if early_stop and previous is not None and value_score < previous:
            break
        previous = value_score

    result.scores = scores
    return result


def tune_dependency_network(train: Dataset, tune: Dataset, kind: str, grid: Sequence[float],
                            **options) -> TuningResult:
    """Protocol tuning: ascending kappa with early stop, or a full lambda sweep"""
    if kind == 'tree':
        return tune_hyperparameter(lambda data, value: learn_dependency_network(data, 'tree', value),
                                   sorted(grid), train, tune, early_stop=True, stronger=min)
    return tune_hyperparameter(lambda data, value: learn_dependency_network(data, kind, value, **options),
                               list(grid), train, tune, early_stop=False, stronger=max)
