import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from compclust.audit import fast_messages, random_q_row, random_similarity
from compclust.cap import (
    MessageState, cap_cluster, cap_messages, cap_subset, compute_alpha_stats,
    compute_rho_stats, find_all_maxes, q_table, repair,
)
from compclust.compose import SUM
from compclust.core import (
    Dataset, InvalidParameterError, build_catalog, build_similarity, check_feasible,
)
from compclust.oracle import (
    alpha_to_stats, brute_force_cap_map, enumerated_alpha, naive_alpha,
    naive_find_all_maxes, naive_message_passing, naive_rho,
)


def line_data(values):
    return Dataset(np.asarray(values, dtype=float)[:, None])


class TestFindAllMaxes:
    def test_singletons(self):
        r, s = find_all_maxes(np.array([-1.0, -3.0]), build_catalog(2, 1))
        np.testing.assert_array_equal(r, [-1, -3])
        np.testing.assert_array_equal(s, [-3, -1])

    def test_with_pair(self):
        r, s = find_all_maxes(np.array([-1.0, -3.0, -2.0]), build_catalog(2, 2))
        np.testing.assert_array_equal(r, [-1, -2])
        np.testing.assert_array_equal(s, [-3, -1])

    def test_empty_complement(self):
        r, s = find_all_maxes(np.array([0.5]), build_catalog(1, 1))
        assert r[0] == 0.5 and s[0] == -np.inf

    @given(n=st.integers(1, 12), d=st.integers(1, 3), seed=st.integers(0, 10**6))
    def test_matches_naive(self, n, d, seed):
        cat = build_catalog(n, min(d, n))
        q = random_q_row(np.random.default_rng(seed), cat)
        r, s = find_all_maxes(q, cat)
        r0, s0 = naive_find_all_maxes(q, cat)
        np.testing.assert_array_equal(r, r0)
        np.testing.assert_array_equal(s, s0)

    def test_block_input(self, rng):
        cat = build_catalog(6, 3)
        q = np.stack([random_q_row(rng, cat) for _ in range(5)])
        r, s = find_all_maxes(q, cat)
        for row in range(5):
            r0, s0 = naive_find_all_maxes(q[row], cat)
            np.testing.assert_array_equal(r[row], r0)
            np.testing.assert_array_equal(s[row], s0)


class TestStatistics:
    def test_first_iteration(self, rng):
        S, cat = random_similarity(rng, 5)
        b, b_bar, h = compute_rho_stats(S, cat, MessageState.zeros(5))
        for k in range(5):
            np.testing.assert_array_equal(b[:, k], S.max(axis=1))
            np.testing.assert_array_equal(b_bar[:, k], S[:, cat.phi_bar(k)].max(axis=1))
        np.testing.assert_array_equal(h, np.diag(S))

    def test_rho_two_points_singletons(self):
        S = np.array([[-1.0, -3.0], [-2.0, -0.5]])
        cat = build_catalog(2, 1)
        rho = naive_rho(S, cat, np.zeros((2, 2, 2)))
        np.testing.assert_array_equal(rho[0, 1], S[0])
        b, b_bar, h = compute_rho_stats(S, cat, MessageState.zeros(2))
        assert b[0, 1] == rho[0, 1].max()
        assert b_bar[0, 1] == rho[0, 1, 0]

    def test_alpha_self_branch(self, rng):
        S, cat = random_similarity(rng, 4)
        b, b_bar, h = compute_rho_stats(S, cat, MessageState.zeros(4))
        a, a_bar, _ = compute_alpha_stats(cat, b, b_bar, h)
        e = b.sum(axis=0) - np.diag(b)
        np.testing.assert_allclose(np.diag(a), e)

    def test_q_singleton_differences(self, rng):
        n = 5
        cat = build_catalog(n, 2)
        a, a_bar = rng.normal(size=(2, n, n))
        q = q_table(a, a_bar, cat)
        diff = a - a_bar
        for i in range(n):
            for k1 in range(n):
                for k2 in range(n):
                    np.testing.assert_allclose(q[i, k1] - q[i, k2],
                                               diff[i, k1] - diff[i, k2], atol=1e-12)

    def test_zero_rho_gives_zero_alpha(self):
        cat = build_catalog(3, 2)
        alpha = naive_alpha(np.zeros((3, 6)), cat, np.zeros((3, 3, 6)))
        finite = np.isfinite(alpha)
        assert np.all(alpha[finite] == 0)
        # only the forbidden i == k entries are -inf
        for k in range(3):
            for pos, mem in enumerate(cat.members):
                assert np.isfinite(alpha[k, k, pos]) == ((k + 1) not in mem or mem == (k + 1,))

    @pytest.mark.parametrize("seed", range(5))
    def test_naive_alpha_matches_enumeration(self, seed):
        rng = np.random.default_rng(seed)
        S, cat = random_similarity(rng, 3)
        rho = rng.normal(size=(3, 3, len(cat)))
        np.testing.assert_allclose(naive_alpha(S, cat, rho), enumerated_alpha(cat, rho))

    @given(n=st.integers(2, 5), seed=st.integers(0, 10**6))
    def test_statistics_match_tables(self, n, seed):
        S, cat = random_similarity(np.random.default_rng(seed), n)
        fast = fast_messages(S, cat, 3)
        slow = naive_message_passing(S, cat, 3)
        for (b, b_bar, h, a, a_bar), (rho, alpha) in zip(fast, slow):
            a0, a_bar0 = alpha_to_stats(alpha, cat)
            np.testing.assert_allclose(a, a0, rtol=1e-9, atol=1e-9)
            np.testing.assert_allclose(a_bar, a_bar0, rtol=1e-9, atol=1e-9)


class TestCluster:
    def test_hand_example(self):
        res = cap_cluster(line_data([1, 4, 5]), gamma=-0.5)
        assert res.assignment.labels == ((1,), (2,), (1, 2))
        assert res.objective == pytest.approx(-1.0)
        assert res.converged

    def test_duplicates_single_exemplar(self):
        res = cap_cluster(line_data([3, 3]), d=1, gamma=-10.0)
        assert res.assignment.labels in (((1,), (1,)), ((2,), (2,)))
        assert res.objective == pytest.approx(-10.0)

    def test_single_example(self):
        res = cap_cluster(line_data([2.0]), gamma=-3.0)
        assert res.assignment.labels == ((1,),) and res.objective == -3.0

    @given(n=st.integers(2, 7), d=st.integers(1, 2), seed=st.integers(0, 10**6))
    def test_feasible_and_bounded(self, n, d, seed):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(n, 2))
        cat = build_catalog(n, d)
        S = build_similarity(Dataset(x), cat, SUM, -rng.uniform(0.2, 3)).values
        res = cap_messages(S, cat)
        assert check_feasible(res.assignment)
        _, best = brute_force_cap_map(S, cat)
        assert res.objective <= best + 1e-9

    def test_standard_ap_case(self, rng):
        # singleton-only catalog behaves as plain affinity propagation
        x = np.concatenate([rng.normal(0, 0.1, (4, 2)), rng.normal(5, 0.1, (4, 2))])
        res = cap_cluster(Dataset(x), d=1, gamma=-2.0, metric="squared")
        labels = res.assignment.labels
        assert len(set(labels[:4])) == 1 and len(set(labels[4:])) == 1
        assert labels[0] != labels[4]
        S = build_similarity(Dataset(x), build_catalog(8, 1), SUM, -2.0, "squared").values
        assert res.objective == pytest.approx(brute_force_cap_map(S, build_catalog(8, 1))[1])

    def test_reproducible(self, rng):
        ds = Dataset(rng.normal(size=(12, 3)))
        a = cap_cluster(ds, gamma=-2.0)
        b = cap_cluster(ds, gamma=-2.0)
        assert a.assignment == b.assignment and a.objective == b.objective

    def test_normalisation_keeps_decodes(self, rng):
        S, cat = random_similarity(rng, 6)
        seen = {True: [], False: []}
        for flag in seen:
            cap_messages(S, cat, max_iter=8, stall_window=100, normalize=flag,
                         callback=lambda it, a, ab, raw, f=flag: seen[f].append(raw.copy()))
        for x, y in zip(seen[True], seen[False]):
            np.testing.assert_array_equal(x, y)

    def test_diagnostics(self, rng):
        res = cap_cluster(Dataset(rng.normal(size=(6, 2))), gamma=-1.0)
        blob = json.loads(json.dumps(res.diagnostics_json()))
        assert blob["iterations"] == len(blob["per_iteration"])
        assert set(blob["per_iteration"][0]) == {"iteration", "objective", "label_changes",
                                                 "wall_ms"}

    def test_parameter_checks(self):
        with pytest.raises(InvalidParameterError):
            cap_cluster(line_data([1, 2, 3]), damping=1.0)
        with pytest.raises(InvalidParameterError):
            cap_cluster(line_data([1, 2, 3]), max_iter=0)


class TestRepair:
    def test_reassigns_to_exemplars(self):
        cat = build_catalog(3, 2)
        S = build_similarity(line_data([1, 4, 5]), cat, SUM, -0.5).values
        # example 2 claims {3} but 3 is not an exemplar
        fixed = repair(S, cat, np.array([0, 2, 4]))
        assert set(fixed.tolist()) <= {0, 1, 3, 4} and fixed[0] == 0

    def test_empty_exemplar_set(self):
        cat = build_catalog(3, 1)
        S = build_similarity(line_data([1, 2, 3]), cat, SUM, -1.0).values
        fixed = repair(S, cat, np.array([1, 2, 0]), margin=np.array([0.0, 5.0, 1.0]))
        np.testing.assert_array_equal(fixed, [1, 1, 1])


class TestSubset:
    def test_whole_set(self, rng):
        ds = Dataset(rng.normal(size=(10, 2)))
        a = cap_subset(ds, gamma=-1.5, subset_size=10, seed=3)
        assert a == cap_cluster(ds, gamma=-1.5).assignment
        assert cap_subset(ds, gamma=-1.5, subset_size=50) == a

    def test_composed_exemplar(self):
        ds = line_data([1, 4, 5, 5.01])
        a = cap_subset(ds, gamma=-0.5, subset_indices=[0, 1, 2])
        assert a.labels[3] == (1, 2)
        assert check_feasible(a)

    def test_random_subset_feasible(self, rng):
        ds = Dataset(rng.normal(size=(40, 2)))
        a = cap_subset(ds, gamma=-2.0, subset_size=12, seed=1)
        assert len(a) == 40 and check_feasible(a)
        assert a == cap_subset(ds, gamma=-2.0, subset_size=12, seed=1)

    def test_too_small(self):
        with pytest.raises(InvalidParameterError):
            cap_subset(line_data([1, 2, 3]), subset_size=1)
