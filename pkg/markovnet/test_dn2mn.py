import itertools
import math

import numpy as np
import pytest

from models.dataset import Dataset
from models.errors import FeatureTooLong, SchemaViolation
from models.markov_network import (
    ALWAYS_TRUE, DROPPED, Distribution, MarkovNetwork, Schema, WeightedFeature,
    canonicalize_feature
)
from utils.cpd_learning import learn_dependency_network
from utils.dn2mn import (
    ConversionConfig, Marginals, Ordering, OrderMode, all_orderings_subfeatures, conversion_plan, convert,
    convert_basic, estimate_marginals, rotation_subfeatures, simplify_feature, simplify_feature_expected
)
from utils.synthetic import random_markov_network, two_variable_dependency_network


def feature(*tests):
    return canonicalize_feature(tests)


def consistent_dn():
    return two_variable_dependency_network(4 / 5, 2 / 5, 2 / 3, 1 / 4)


def inconsistent_dn():
    # X0 follows X1, X1 opposes X0
    return two_variable_dependency_network(4 / 5, 1 / 5, 1 / 5, 4 / 5)


def joint(mn):
    return mn.enumerate_joint().probabilities


def total_variation(p, q):
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


def factor_values(dn, var, base_instance, ordering):
    """Factor converted from one CPD, over all states, constants included"""
    converted = []
    constant = 0.0
    for wf in dn.cpd_features(var):
        for numerator, sign in ((True, 1.0), (False, -1.0)):
            result = simplify_feature(var, wf.feature, base_instance, ordering.inverse, numerator)
            if result is ALWAYS_TRUE:
                constant += sign * wf.weight
            elif result is not DROPPED:
                converted.append(WeightedFeature(sign * wf.weight, result))
    mn = MarkovNetwork(dn.schema, converted)
    return np.exp(mn.log_scores(dn.schema.all_assignments()) + constant)


class TestOrdering:

    def test_inverse(self):
        o = Ordering([2, 0, 1])
        assert o.inverse == (1, 2, 0)

    def test_rejects_non_permutation(self):
        with pytest.raises(SchemaViolation):
            Ordering([0, 0, 1])

    def test_rotation_and_reverse(self):
        o = Ordering([3, 1, 0, 2])
        assert o.rotation(1).order == (1, 0, 2, 3)
        assert o.reversed().order == (2, 0, 1, 3)


class TestSimplifyFeature:
    """Target X2 (index 1) of P(X2 | X1, X4) with base instance all true"""

    base = (1, 1, 1, 1)
    f1 = feature((0, 1), (1, 0), (3, 1))
    f2 = feature((0, 1), (1, 1))
    f3 = feature((1, 1), (3, 0))
    # X4 placed before X2 and X1 after it
    reversed_order = Ordering([3, 2, 1, 0]).inverse

    def test_numerator_keeps_later_tests(self):
        assert simplify_feature(1, self.f1, self.base, self.reversed_order, True) == feature((0, 1), (1, 0))

    def test_violated_feature_dropped(self):
        assert simplify_feature(1, self.f3, self.base, self.reversed_order, True) is DROPPED

    def test_denominator_checks_target(self):
        assert simplify_feature(1, self.f2, self.base, self.reversed_order, False) == feature((0, 1))
        assert simplify_feature(1, self.f1, self.base, self.reversed_order, False) is DROPPED

    def test_identity_order_keeps_x4(self):
        identity = Ordering.identity(4).inverse
        assert simplify_feature(1, self.f1, self.base, identity, True) == feature((1, 0), (3, 1))

    def test_everything_fixed(self):
        identity = Ordering.identity(2).inverse
        assert simplify_feature(1, feature((0, 1), (1, 1)), (1, 1), identity, False) is ALWAYS_TRUE


class TestMarginals:

    def test_add_one_smoothing(self):
        data = Dataset(Schema((2, 3)), [[1, 0]] * 2 + [[1, 1]] * 3 + [[1, 2]] * 5)
        q = estimate_marginals(data)
        np.testing.assert_allclose(q[0].probabilities, [1 / 12, 11 / 12])
        np.testing.assert_allclose(q[1].probabilities, [3 / 13, 4 / 13, 6 / 13])

    def test_must_be_positive(self):
        with pytest.raises(SchemaViolation):
            Marginals((Distribution([1.0, 0.0]),))

    def test_expected_simplification_multiplier(self):
        q = Marginals.uniform(Schema((2, 2, 2)))
        f = feature((0, 1), (1, 1), (2, 1))
        result, multiplier = simplify_feature_expected(2, f, q, Ordering.identity(3).inverse, True)
        assert result == feature((2, 1))
        assert multiplier == pytest.approx(0.25)

    def test_expected_simplification_product(self):
        q = Marginals(tuple(Distribution([1 - p, p]) for p in (0.5, 0.3, 0.5, 0.9)))
        f = feature((1, 1), (2, 1), (3, 1))
        result, multiplier = simplify_feature_expected(3, f, q, Ordering.identity(4).inverse, True)
        assert result == feature((3, 1))
        assert multiplier == pytest.approx(0.15)

    def test_nothing_checked(self):
        q = Marginals.uniform(Schema((2, 2)))
        f = feature((0, 1), (1, 1))
        result, multiplier = simplify_feature_expected(0, f, q, Ordering.identity(2).inverse, True)
        assert result == f
        assert multiplier == 1.0


def brute_force_rotations(target, f, base):
    fractions = {}
    n = len(base)
    for start in range(n):
        inverse = base.rotation(start).inverse
        kept = feature(*[t for t in f.tests if t.var == target or inverse[target] < inverse[t.var]])
        fractions[kept] = fractions.get(kept, 0.0) + 1.0 / n
    return fractions


def brute_force_orderings(target, f):
    fractions = {}
    orders = list(itertools.permutations(f.variables))
    for order in orders:
        after = order[order.index(target):]
        kept = feature(*[t for t in f.tests if t.var in after])
        fractions[kept] = fractions.get(kept, 0.0) + 1.0 / len(orders)
    return fractions


def random_feature(rng, n, k):
    variables = rng.choice(n, size=k, replace=False)
    return feature(*[(int(v), int(rng.integers(2))) for v in variables])


class TestRotationSubfeatures:

    def test_target_only(self):
        f = feature((3, 1))
        assert rotation_subfeatures(3, f, Ordering.identity(5)) == [(f, 1.0)]

    def test_worked_example(self):
        n = 20
        f = feature((3, 1), (5, 1), (6, 1), (12, 1))
        plan = dict(rotation_subfeatures(6, f, Ordering.identity(n)))
        assert plan[f] == pytest.approx(1 / n)
        assert plan[feature((3, 1), (6, 1), (12, 1))] == pytest.approx(2 / n)
        assert plan[feature((6, 1), (12, 1))] == pytest.approx(11 / n)
        # Rotations starting at X8 through X13 leave only the target test
        assert plan[feature((6, 1))] == pytest.approx(6 / n)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            n = int(rng.integers(2, 31))
            k = int(rng.integers(1, min(n, 6) + 1))
            f = random_feature(rng, n, k)
            target = int(rng.choice(f.variables))
            base = Ordering(rng.permutation(n))
            plan = rotation_subfeatures(target, f, base)
            expected = brute_force_rotations(target, f, base)
            assert len(plan) == k
            assert {sub for sub, _ in plan} == set(expected)
            for sub, fraction in plan:
                assert fraction == pytest.approx(expected[sub], abs=1e-12)
            assert math.fsum(fr for _, fr in plan) == pytest.approx(1.0, abs=1e-12)


class TestAllOrderingsSubfeatures:

    def test_single_test(self):
        f = feature((2, 0))
        assert all_orderings_subfeatures(2, f) == [(f, 1.0)]

    def test_pairs_split_evenly(self):
        f = feature((0, 1), (4, 0))
        plan = dict(all_orderings_subfeatures(4, f))
        assert plan == {feature((4, 0)): 0.5, f: 0.5}

    def test_length_four(self):
        f = feature((0, 1), (1, 1), (2, 1), (3, 1))
        plan = dict(all_orderings_subfeatures(0, f))
        assert len(plan) == 8
        assert plan[f] == pytest.approx(1 / 4)
        assert plan[feature((0, 1))] == pytest.approx(1 / 4)
        assert plan[feature((0, 1), (2, 1))] == pytest.approx(1 / 12)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(8)
        for _ in range(60):
            k = int(rng.integers(1, 7))
            f = random_feature(rng, 10, k)
            target = int(rng.choice(f.variables))
            plan = all_orderings_subfeatures(target, f)
            expected = brute_force_orderings(target, f)
            assert set(dict(plan)) == set(expected)
            for sub, fraction in plan:
                assert fraction == pytest.approx(expected[sub], abs=1e-12)
            assert math.fsum(fr for _, fr in plan) == pytest.approx(1.0, abs=1e-12)

    def test_length_bound(self):
        f = feature(*[(v, 1) for v in range(13)])
        with pytest.raises(FeatureTooLong):
            all_orderings_subfeatures(0, f)
        assert len(all_orderings_subfeatures(0, f, max_length=13)) == 2 ** 12


class TestConvertBasic:

    def test_consistent_two_variable_joint(self):
        mn = convert_basic(consistent_dn(), (1, 1), Ordering([0, 1]))
        # States in order FF, FT, TF, TT
        np.testing.assert_allclose(joint(mn), [0.3, 0.1, 0.2, 0.4], atol=1e-12)

    def test_consistent_two_variable_factors(self):
        dn = consistent_dn()
        ordering = Ordering([0, 1])
        np.testing.assert_allclose(factor_values(dn, 0, (1, 1), ordering), [3 / 2, 1 / 4, 1, 1], rtol=1e-12)
        np.testing.assert_allclose(factor_values(dn, 1, (1, 1), ordering), [1 / 2, 1, 1 / 2, 1], rtol=1e-12)
        mn = convert_basic(dn, (1, 1), ordering)
        scores = np.exp(mn.log_scores(dn.schema.all_assignments()))
        # Constant factors are dropped, so compare relative to the base instance TT
        np.testing.assert_allclose(scores / scores[3], [3 / 4, 1 / 4, 1 / 2, 1], rtol=1e-12)

    def test_consistent_any_base_and_order(self):
        dn = consistent_dn()
        for base in itertools.product((0, 1), repeat=2):
            for order in ([0, 1], [1, 0]):
                np.testing.assert_allclose(joint(convert_basic(dn, base, Ordering(order))),
                                           [0.3, 0.1, 0.2, 0.4], atol=1e-12)

    def test_inconsistent_depends_on_base(self):
        dn = inconsistent_dn()
        np.testing.assert_allclose(joint(convert_basic(dn, (1, 1), Ordering([0, 1]))),
                                   np.array([64, 1, 16, 4]) / 85, atol=1e-12)
        np.testing.assert_allclose(joint(convert_basic(dn, (0, 0), Ordering([0, 1]))),
                                   np.array([4, 16, 1, 64]) / 85, atol=1e-12)

    def test_wrong_ordering_length(self):
        with pytest.raises(SchemaViolation):
            convert_basic(consistent_dn(), (1, 1), Ordering([0, 1, 2]))


class TestConvert:

    def test_config_needs_exactly_one_base(self):
        with pytest.raises(SchemaViolation):
            ConversionConfig()
        with pytest.raises(SchemaViolation):
            ConversionConfig(base_instance=(0, 0), marginals=Marginals.uniform(Schema((2, 2))))

    def test_single_single_matches_basic(self):
        dn = inconsistent_dn()
        cfg = ConversionConfig(order_mode=OrderMode.SINGLE, base_instance=(1, 1))
        assert [(wf.weight, wf.feature) for wf in convert(dn, cfg).features] == \
            [(wf.weight, wf.feature) for wf in convert_basic(dn, (1, 1), Ordering.identity(2)).features]

    def test_averaging_recovers_uniform(self):
        dn = inconsistent_dn()
        cfg = ConversionConfig(order_mode=OrderMode.OPPOSITE_PAIR, marginals=Marginals.uniform(dn.schema))
        np.testing.assert_allclose(joint(convert(dn, cfg)), np.full(4, 0.25), atol=1e-12)

    def test_expectation_equals_pooled_conversions(self):
        dn = inconsistent_dn()
        pooled = []
        for base in itertools.product((0, 1), repeat=2):
            for order in ([0, 1], [1, 0]):
                for wf in convert_basic(dn, base, Ordering(order)).features:
                    pooled.append(WeightedFeature(wf.weight / 8, wf.feature))
        expected = joint(MarkovNetwork(dn.schema, pooled))
        cfg = ConversionConfig(order_mode=OrderMode.OPPOSITE_PAIR, marginals=Marginals.uniform(dn.schema))
        np.testing.assert_allclose(joint(convert(dn, cfg)), expected, atol=1e-12)

    def test_consistent_rotation_pair_with_marginals(self):
        dn = consistent_dn()
        q = Marginals((Distribution([0.3, 0.7]), Distribution([0.6, 0.4])))
        cfg = ConversionConfig(order_mode=OrderMode.ROTATIONS_PAIR, marginals=q)
        np.testing.assert_allclose(joint(convert(dn, cfg)), [0.3, 0.1, 0.2, 0.4], atol=1e-12)

    def test_plan_fractions_sum_to_one(self):
        f = feature((0, 1), (2, 0), (3, 1), (5, 1))
        q = Marginals.uniform(Schema((2,) * 6))
        for mode in OrderMode:
            cfg = ConversionConfig(order_mode=mode, marginals=q, ordering=Ordering([4, 2, 0, 5, 1, 3]))
            plan = conversion_plan(3, f, cfg, 6)
            assert math.fsum(fraction for _, fraction in plan) == pytest.approx(1.0, abs=1e-12)
            for sub, _ in plan:
                assert sub.value_of(3) == 1

    def test_size_bounds(self):
        rng = np.random.default_rng(3)
        rows = rng.integers(0, 2, size=(300, 6))
        rows[:, 1] = rows[:, 0] ^ (rng.random(300) < 0.1)
        rows[:, 2] = rows[:, 1] & rows[:, 3]
        dn = learn_dependency_network(Dataset(Schema((2,) * 6), rows), 'tree', 0.1)
        features = [wf for var in range(6) for wf in dn.cpd_features(var)]
        longest = max(len(wf.feature) for wf in features)
        q = estimate_marginals(Dataset(Schema((2,) * 6), rows))
        rot1 = convert(dn, ConversionConfig(order_mode=OrderMode.ROTATIONS, marginals=q))
        rot2 = convert(dn, ConversionConfig(order_mode=OrderMode.ROTATIONS_PAIR, marginals=q))
        assert len(rot1) <= 2 * len(features) * longest
        assert len(rot2) <= 4 * len(features) * longest

    def test_conversion_is_deterministic(self):
        mn = random_markov_network(Schema((2, 2, 2, 2)), 8, seed=12)
        dn = mn.to_dependency_network()
        cfg = ConversionConfig(marginals=Marginals.uniform(dn.schema))
        a = convert(dn, cfg)
        b = convert(dn, cfg)
        assert [(wf.weight, wf.feature) for wf in a.features] == [(wf.weight, wf.feature) for wf in b.features]


def random_config(rng, schema, base_mode, order_mode):
    n = len(schema)
    ordering = Ordering(rng.permutation(n))
    if base_mode == 'single':
        return ConversionConfig(order_mode=order_mode, ordering=ordering,
                                base_instance=tuple(int(v) for v in rng.integers(0, 2, size=n)))
    marginals = Marginals(tuple(Distribution([1 - p, p]) for p in rng.uniform(0.1, 0.9, size=n)))
    return ConversionConfig(order_mode=order_mode, ordering=ordering, marginals=marginals)


def check_consistent_exactness(model_count, pairs, seed):
    rng = np.random.default_rng(seed)
    for _ in range(model_count):
        n = int(rng.integers(3, 6))
        source = random_markov_network(Schema((2,) * n), int(rng.integers(1, 11)), rng=rng)
        dn = source.to_dependency_network()
        expected = joint(source)
        for _ in range(pairs):
            for base_mode in ('single', 'marginal'):
                for order_mode in OrderMode:
                    cfg = random_config(rng, dn.schema, base_mode, order_mode)
                    assert total_variation(joint(convert(dn, cfg)), expected) < 1e-9


class TestConsistentExactness:
    """Any conversion of an exact DN reproduces the source network"""

    def test_seeded_networks(self):
        check_consistent_exactness(model_count=15, pairs=2, seed=21)

    @pytest.mark.slow
    def test_full_property_suite(self):
        check_consistent_exactness(model_count=50, pairs=10, seed=22)
