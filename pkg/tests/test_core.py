import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from compclust.compose import SUM
from compclust.core import (
    EXEMPLAR, Assignment, Dataset, InvalidInputError, InvalidParameterError, ParseError,
    build_catalog, build_similarity, catalog_size, check_feasible, read_dataset,
    write_dataset,
)


class TestCatalog:
    def test_singletons_only(self):
        assert build_catalog(3, 1).members == ((1,), (2,), (3,))

    def test_pairs_order(self):
        cat = build_catalog(4, 2)
        assert cat.members == ((1,), (2,), (3,), (4,), (1, 2), (1, 3), (1, 4),
                               (2, 3), (2, 4), (3, 4))

    def test_triples_count(self):
        assert len(build_catalog(5, 3)) == 25

    @pytest.mark.parametrize("base,d", [(3, 0), (3, 4), (1, 2)])
    def test_bad_sizes(self, base, d):
        with pytest.raises(InvalidParameterError):
            build_catalog(base, d)

    @given(st.integers(1, 9), st.integers(1, 4))
    def test_phi_partition(self, base, d):
        d = min(d, base)
        cat = build_catalog(base, d)
        assert len(cat) == sum(math.comb(base, j) for j in range(1, d + 1))
        assert len(cat) == catalog_size(base, d)
        for k in range(base):
            inside = set(cat.phi[k].tolist())
            outside = set(cat.phi_bar(k).tolist())
            assert not inside & outside
            assert inside | outside == set(range(len(cat)))
            for pos, mem in enumerate(cat.members):
                assert (pos in inside) == ((k + 1) in mem)

    def test_singleton_positions(self):
        cat = build_catalog(6, 3)
        for i in range(1, 7):
            assert cat.position((i,)) == i - 1


class TestSimilarity:
    def test_hand_example(self):
        ds = Dataset(np.array([[1.0], [4.0], [5.0]]))
        cat = build_catalog(3, 2)
        S = build_similarity(ds, cat, SUM, -0.5).values
        assert S[2, cat.position((1, 2))] == 0.0
        assert S[1, cat.position((2,))] == -0.5
        assert S[0, cat.position((1, 2))] == -np.inf
        assert S[0, cat.position((2,))] == -3.0

    def test_per_example_gamma(self):
        ds = Dataset(np.arange(4.0)[:, None])
        cat = build_catalog(4, 2)
        gam = np.array([-1.0, -2.0, -3.0, -4.0])
        S = build_similarity(ds, cat, SUM, gam).values
        np.testing.assert_array_equal(S[np.arange(4), np.arange(4)], gam)

    def test_singleton_squared_matches_standard_ap(self, rng):
        x = rng.normal(size=(7, 3))
        cat = build_catalog(7, 1)
        S = build_similarity(Dataset(x), cat, SUM, -1.0, metric="squared").values
        want = -((x[:, None, :] - x[None, :, :]) ** 2).sum(-1)
        np.fill_diagonal(want, -1.0)
        np.testing.assert_allclose(S, want, rtol=1e-12, atol=1e-12)

    @given(st.integers(2, 7), st.integers(1, 3), st.integers(0, 10_000))
    def test_mask_and_sign(self, n, d, seed):
        d = min(d, n)
        x = np.random.default_rng(seed).normal(size=(n, 2))
        cat = build_catalog(n, d)
        S = build_similarity(Dataset(x), cat, SUM, -2.0).values
        for i in range(n):
            for pos, mem in enumerate(cat.members):
                if (i + 1) in mem and len(mem) > 1:
                    assert S[i, pos] == -np.inf
                else:
                    assert S[i, pos] <= 0
        assert not S.flags.writeable

    def test_catalog_base_mismatch(self):
        with pytest.raises(InvalidInputError):
            build_similarity(Dataset(np.zeros((3, 1))), build_catalog(4, 2), SUM, -1.0)


class TestFeasible:
    def test_examples(self):
        assert check_feasible([(1,), (2,), (1, 2)])
        assert not check_feasible([(2,), (1,)])
        assert check_feasible([(1,), (1,)])

    def test_accepts_assignment(self):
        assert check_feasible(Assignment(((1,), (1,), (3,), (1, 3)), EXEMPLAR))

    @given(st.lists(st.sets(st.integers(1, 5), min_size=1, max_size=2), min_size=5,
                    max_size=5),
           st.permutations(range(5)))
    def test_permutation_invariant(self, labels, perm):
        labels = [tuple(sorted(s)) for s in labels]
        inv = {old + 1: new + 1 for new, old in enumerate(perm)}
        moved = [None] * 5
        for i, lab in enumerate(labels):
            moved[perm.index(i)] = tuple(sorted(inv[v] for v in lab))
        assert check_feasible(labels) == check_feasible(moved)


class TestDatasetIO:
    @given(n=st.integers(1, 8), p=st.integers(1, 4), seed=st.integers(0, 1000))
    def test_round_trip(self, tmp_path_factory, n, p, seed):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(n, p)) * 10.0 ** rng.integers(-8, 8)
        labels = [tuple(sorted(rng.choice(5, size=rng.integers(1, 3), replace=False) + 1))
                  for _ in range(n)]
        ds = Dataset(x, labels)
        d = tmp_path_factory.mktemp("io")
        write_dataset(ds, d / "a.csv", d / "a.json")
        assert read_dataset(d / "a.csv", d / "a.json") == ds

    def test_missing_sidecar(self, tmp_path):
        write_dataset(Dataset(np.ones((2, 2))), tmp_path / "a.csv")
        assert read_dataset(tmp_path / "a.csv", tmp_path / "none.json").labels is None

    def test_header_and_line_endings(self, tmp_path):
        write_dataset(Dataset(np.ones((2, 3))), tmp_path / "a.csv")
        raw = (tmp_path / "a.csv").read_bytes()
        assert raw.startswith(b"dim0,dim1,dim2\n") and b"\r" not in raw

    def test_row_width_error(self, tmp_path):
        (tmp_path / "a.csv").write_text("dim0,dim1\n1,2\n3\n")
        with pytest.raises(ParseError) as info:
            read_dataset(tmp_path / "a.csv")
        assert info.value.line == 3

    def test_bad_number(self, tmp_path):
        (tmp_path / "a.csv").write_text("dim0,dim1\n1,x\n")
        with pytest.raises(ParseError) as info:
            read_dataset(tmp_path / "a.csv")
        assert (info.value.line, info.value.field) == (2, 1)

    def test_bad_labels(self, tmp_path):
        (tmp_path / "a.csv").write_text("dim0\n1\n2\n")
        (tmp_path / "a.json").write_text("[[1], [2, 1]]")
        with pytest.raises(ParseError):
            read_dataset(tmp_path / "a.csv", tmp_path / "a.json")


class TestDataset:
    def test_points_read_only(self):
        ds = Dataset([[1.0, 2.0]])
        with pytest.raises(ValueError):
            ds.points[0, 0] = 3.0

    def test_label_checks(self):
        with pytest.raises(InvalidInputError):
            Dataset(np.zeros((2, 1)), [(1,)])
        with pytest.raises(InvalidInputError):
            Dataset(np.zeros((1, 1)), [(1, 1)])
        assert Dataset(np.zeros((1, 1)), [(2, 1)]).labels == ((1, 2),)
