"""
Gibbs sampling and the evaluation metrics

Sampling is Rao-Blackwellized: every visit to a free variable adds its full
conditional distribution to the running counts before a new value is drawn.
Many queries sharing the same free variables (one per test row in CMLL) are
sampled together as a batch; each row is an independent chain.
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np

from models.dataset import Dataset
from models.dependency_network import DependencyNetwork
from models.errors import ConfigurationError, EmptyDataset, SchemaViolation
from models.markov_network import DEFAULT_ENUMERATION_LIMIT, Distribution
from utils.conditionals import LocalConditionals
from utils.weight_learning import pll

logger = logging.getLogger(__name__)

PROBABILITY_FLOOR = 1e-6
QUERY_BLOCKS = 4


@dataclass(frozen=True)
class GibbsConfig:
    burn_in: int = 100
    samples: int = 1000
    seed: int = 0
    chains: int = 1

    def __post_init__(self):
        if self.burn_in < 0:
            raise ConfigurationError(f"burn_in must be non-negative, got {self.burn_in}")
        if self.samples < 1:
            raise ConfigurationError(f"samples must be at least 1, got {self.samples}")
        if self.chains < 1:
            raise ConfigurationError(f"chains must be at least 1, got {self.chains}")


@dataclass(frozen=True)
class QueryPartition:
    """Four disjoint variable blocks that together cover every variable"""
    blocks: Tuple[Tuple[int, ...], ...]

    def __post_init__(self):
        blocks = tuple(tuple(sorted(int(v) for v in block)) for block in self.blocks)
        if len(blocks) != QUERY_BLOCKS:
            raise ConfigurationError(f"A query partition has {QUERY_BLOCKS} blocks, got {len(blocks)}")
        seen = [v for block in blocks for v in block]
        if len(seen) != len(set(seen)):
            raise ConfigurationError("Query blocks overlap")
        object.__setattr__(self, 'blocks', blocks)

    def __iter__(self):
        return iter(self.blocks)

    @property
    def variables(self) -> List[int]:
        return sorted(v for block in self.blocks for v in block)

    def check_covers(self, n: int):
        if self.variables != list(range(n)):
            raise ConfigurationError(f"Query blocks do not cover exactly the {n} variables")


def partition_variables(n: int, seed: int = 0) -> QueryPartition:
    """Seeded random permutation cut into four near-equal contiguous blocks"""
    if n < QUERY_BLOCKS:
        raise ConfigurationError(f"Need at least {QUERY_BLOCKS} variables to partition, got {n}")
    permutation = np.random.default_rng(seed).permutation(n)
    return QueryPartition(tuple(tuple(block.tolist()) for block in np.array_split(permutation, QUERY_BLOCKS)))


def _draw(probabilities: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One categorical draw per row"""
    cumulative = np.cumsum(probabilities, axis=1)
    u = rng.random(probabilities.shape[0])[:, None] * cumulative[:, -1:]
    return np.minimum((cumulative <= u).sum(axis=1), probabilities.shape[1] - 1)


def _sample_batch(conditionals: LocalConditionals, states: np.ndarray, free: Sequence[int],
                  cfg: GibbsConfig) -> Dict[int, np.ndarray]:
    """Rao-Blackwellized marginal estimates of the free variables for every row of states

    Non-free columns of states hold the evidence; free columns are overwritten.
    Returns var -> (rows, arity) array of estimated marginals.
    """
    schema = conditionals.schema
    rows = states.shape[0]
    totals = {var: np.zeros((rows, schema.arities[var])) for var in free}

    for chain in range(cfg.chains):
        rng = np.random.default_rng(cfg.seed + chain)
        current = np.array(states, dtype=np.int64)
        for var in free:
            current[:, var] = rng.integers(schema.arities[var], size=rows)
        encoded = conditionals.encode(current)
        counts = {var: np.zeros((rows, schema.arities[var])) for var in free}

        for sweep in range(cfg.burn_in + cfg.samples):
            for var in free:
                probabilities = conditionals.probabilities(encoded, var)
                if sweep >= cfg.burn_in:
                    counts[var] += probabilities
                values = _draw(probabilities, rng)
                conditionals.set_values(encoded, var, values)
        logger.debug(f"Gibbs chain {chain}: {cfg.burn_in} burn-in and {cfg.samples} counted sweeps")

        for var in free:
            totals[var] += counts[var] / counts[var].sum(axis=1, keepdims=True)

    return {var: total / cfg.chains for var, total in totals.items()}


def gibbs_marginals(model, evidence: Mapping[int, int], cfg: GibbsConfig = GibbsConfig()) -> Dict[int, Distribution]:
    """Marginals of every non-evidence variable given evidence (var -> value)"""
    schema = model.schema
    for var, val in evidence.items():
        schema.check_test(var, val)
    free = [var for var in range(len(schema)) if var not in evidence]
    if not free:
        return {}

    state = np.zeros((1, len(schema)), dtype=np.int64)
    for var, val in evidence.items():
        state[0, var] = val
    estimates = _sample_batch(LocalConditionals.for_model(model), state, free, cfg)
    return {var: Distribution(estimates[var][0] / estimates[var][0].sum()) for var in free}


def eval_pll(model, test: Dataset) -> Tuple[float, float]:
    """Per-instance PLL and its per-variable normalization (NPLL)"""
    if len(test) == 0:
        raise EmptyDataset("PLL evaluation needs at least one test row")
    if test.schema != model.schema:
        raise SchemaViolation("Test data and model have different schemas")
    per_instance = pll(model, test) / len(test)
    return per_instance, per_instance / len(test.schema)


def eval_cmll(model, test: Dataset, part: QueryPartition, cfg: GibbsConfig = GibbsConfig()) -> float:
    """Mean per-instance CMLL; each query block is sampled given the rest of the row"""
    if len(test) == 0:
        raise EmptyDataset("CMLL evaluation needs at least one test row")
    part.check_covers(len(model.schema))

    conditionals = LocalConditionals.for_model(model)
    rows = test.rows
    index = np.arange(len(rows))
    total = np.zeros(len(rows))
    for block in part:
        if not block:
            continue
        if len(block) == 1:
            # The rest of the row is evidence: the conditional is exact
            var = block[0]
            estimates = {var: conditionals.probabilities(conditionals.encode(rows), var)}
        else:
            estimates = _sample_batch(conditionals, rows, block, cfg)
        for var in block:
            total += np.log(np.maximum(estimates[var][index, rows[:, var]], PROBABILITY_FLOOR))
        logger.debug(f"CMLL block {list(block)} done")

    cmll = float(total.mean())
    logger.info(f"CMLL over {len(rows)} rows: {cmll:.6f}")
    return cmll


def exact_cmll(model, test: Dataset, part: QueryPartition, limit: int = DEFAULT_ENUMERATION_LIMIT) -> float:
    """CMLL from exact enumeration of the joint (small Markov networks only)"""
    if isinstance(model, DependencyNetwork):
        raise ConfigurationError("Exact CMLL needs a Markov network")
    if len(test) == 0:
        raise EmptyDataset("CMLL evaluation needs at least one test row")
    part.check_covers(len(model.schema))

    joint = model.enumerate_joint(limit).probabilities
    states = model.schema.all_assignments()
    total = 0.0
    for row in test.rows:
        for block in part:
            if not block:
                continue
            evidence = [v for v in range(len(row)) if v not in block]
            mask = np.all(states[:, evidence] == row[evidence], axis=1)
            conditional = joint[mask]
            for var in block:
                total += np.log(conditional[states[mask, var] == row[var]].sum() / conditional.sum())
    return total / len(test)
