import numpy as np
import pytest
from hypothesis import given, strategies as st

from compclust.audit import random_similarity
from compclust.compose import SUM
from compclust.core import (
    BudgetExceededError, Dataset, build_catalog, build_similarity, check_feasible,
)
from compclust.oracle import (
    OracleBudget, brute_force_cap_map, brute_force_reassignment, count_reassignment_maps,
    naive_find_all_maxes, reassignment_cost,
)


def independent_count(k, d):
    # enumerate every (compositional subset, one-to-one map) pair explicitly
    from itertools import combinations, permutations
    total = 0
    for i in range(k + 1):
        for comp in combinations(range(k), i):
            rest = [j for j in range(k) if j not in comp]
            targets = [c for s in range(2, d + 1) for c in combinations(rest, s)]
            total += sum(1 for _ in permutations(targets, i))
    return total


class TestCounts:
    def test_known_values(self):
        assert count_reassignment_maps(15, 2) == 107770296705436
        assert count_reassignment_maps(2, 2) == 1
        assert count_reassignment_maps(3, 2) == 4

    @pytest.mark.parametrize("k,d", [(4, 2), (5, 2), (5, 3), (6, 2)])
    def test_against_explicit_enumeration(self, k, d):
        assert count_reassignment_maps(k, d) == independent_count(k, d)

    def test_is_exact_integer(self):
        assert isinstance(count_reassignment_maps(40, 3), int)
        assert count_reassignment_maps(40, 3) > 2 ** 63


class TestCapMap:
    def test_hand_example(self):
        cat = build_catalog(3, 2)
        S = build_similarity(Dataset(np.array([[1.0], [4.0], [5.0]])), cat, SUM, -0.5)
        labels, value = brute_force_cap_map(S, cat)
        assert labels.labels == ((1,), (2,), (1, 2)) and value == -1.0

    def test_single(self):
        cat = build_catalog(1, 1)
        labels, value = brute_force_cap_map(np.array([[-2.5]]), cat)
        assert labels.labels == ((1,),) and value == -2.5

    @given(n=st.integers(1, 4), d=st.integers(1, 2), seed=st.integers(0, 10**5))
    def test_methods_agree(self, n, d, seed):
        rng = np.random.default_rng(seed)
        cat = build_catalog(n, min(d, n))
        S = build_similarity(Dataset(rng.normal(size=(n, 2))), cat, SUM,
                             -rng.uniform(0.1, 2)).values
        a, va = brute_force_cap_map(S, cat)
        b, vb = brute_force_cap_map(S, cat, method="product")
        assert va == pytest.approx(vb, abs=1e-12)
        assert check_feasible(a) and check_feasible(b)

    def test_d1_is_standard_ap(self, rng):
        # singleton catalog: exemplar constraint of plain affinity propagation
        S, cat = random_similarity(rng, 5, d=1)
        labels, value = brute_force_cap_map(S, cat)
        for lab in labels.labels:
            assert labels.labels[lab[0] - 1] == lab

    def test_budget(self):
        with pytest.raises(BudgetExceededError):
            brute_force_cap_map(np.zeros((11, 11)), build_catalog(11, 1))
        with pytest.raises(BudgetExceededError):
            brute_force_cap_map(np.zeros((6, 21)), build_catalog(6, 2), method="product",
                                budget=OracleBudget(max_product_states=1000))


class TestReassignment:
    def test_hand_example(self):
        m = np.array([[1.0], [4.0], [5.0]])
        res = brute_force_reassignment(m, SUM, build_catalog(3, 2))
        assert res.mapping == {3: (1, 2)} and res.singletons == (1, 2)
        assert res.visited == 4
        assert res.labels(3) == ((1,), (2,), (1, 2))

    def test_two_clusters(self):
        res = brute_force_reassignment(np.array([[0.0], [1.0]]), SUM, build_catalog(2, 2))
        assert res.mapping == {} and res.visited == 1

    def test_far_apart(self):
        m = np.array([[0.0], [100.0], [1000.0], [5000.0]])
        res = brute_force_reassignment(m, SUM, build_catalog(4, 2), tau=1.0)
        assert res.mapping == {}

    @pytest.mark.parametrize("k", range(2, 8))
    def test_visited_count(self, k):
        m = np.random.default_rng(k).normal(size=(k, 2))
        res = brute_force_reassignment(m, SUM, build_catalog(k, 2))
        assert res.visited == count_reassignment_maps(k, 2)

    def test_cost_helper(self):
        m = np.array([[1.0], [4.0], [5.5]])
        assert reassignment_cost(m, SUM, {3: (1, 2)}, 2.0) == pytest.approx(4.5)

    def test_point_objective(self):
        x = np.array([[1.0], [4.0], [5.2], [4.8]])
        m = np.array([[1.0], [4.0], [5.0]])
        res = brute_force_reassignment(m, SUM, build_catalog(3, 2), points=x,
                                       cluster_of=np.array([0, 1, 2, 2]))
        assert res.total == pytest.approx(0.4)

    def test_many_to_one_superset(self, rng):
        m = rng.normal(size=(5, 2))
        cat = build_catalog(5, 2)
        inj = brute_force_reassignment(m, SUM, cat, tau=1.5)
        loose = brute_force_reassignment(m, SUM, cat, tau=1.5, injective=False)
        assert loose.total <= inj.total and loose.visited >= inj.visited

    def test_budget(self):
        with pytest.raises(BudgetExceededError):
            brute_force_reassignment(np.zeros((8, 1)), SUM, build_catalog(8, 2))


def test_naive_maxes_pair_case():
    r, s = naive_find_all_maxes(np.array([-1.0, -3.0, -2.0]), build_catalog(2, 2))
    np.testing.assert_array_equal(r, [-1, -2])
    np.testing.assert_array_equal(s, [-3, -1])
