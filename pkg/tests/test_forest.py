import json

import numpy as np
import pytest

from cqforest.data import DataError, Dataset, SimConfig, simulate
from cqforest.forest import (
    Forest,
    ForestConfig,
    WeightVector,
    apply,
    data_checksum,
    fit,
    forest_weights,
    load_forest,
    mass_above,
    quantile_from_weights,
    save_forest,
    support_grid,
    tree_weights,
    weight_matrix,
    weighted_mean,
    weighted_quantile,
)

from _oracles import weighted_quantile_grid


def toy_dataset(n=60, p=1, seed=0, model="aft1d"):
    return simulate(SimConfig(model=model, n=n, censor_rate_param=0.1, seed=seed))


def uncensored(features, response):
    features = np.asarray(features, dtype=np.float64)
    response = np.asarray(response, dtype=np.float64)
    return Dataset(features=features, response=response, event=np.ones(response.size, dtype=bool))


class TestConfig:
    def test_validation(self):
        with pytest.raises(DataError):
            ForestConfig(min_node_size=0)
        with pytest.raises(DataError):
            ForestConfig(min_node_size=1, n_trees=0)
        with pytest.raises(DataError):
            ForestConfig(min_node_size=1, mtry=0)
        with pytest.raises(DataError):
            ForestConfig(min_node_size=1, min_child_fraction=0.6)

    def test_fit_rejects_impossible_sizes(self):
        d = toy_dataset(n=10)
        with pytest.raises(DataError):
            fit(d, ForestConfig(min_node_size=11, n_trees=1))
        with pytest.raises(DataError):
            fit(d, ForestConfig(min_node_size=1, n_trees=1, mtry=2))


class TestGrowth:
    def test_hand_split(self):
        # variance reduction is maximized by separating the two response
        # clusters; threshold is the midpoint of the middle gap
        d = uncensored([[0.0], [1.0], [2.0], [3.0]], [0.0, 0.0, 10.0, 10.0])
        f = fit(d, ForestConfig(min_node_size=1, n_trees=1, mtry=1, bootstrap=False, seed=0))
        tree = f.trees[0]
        assert tree.feature[0] == 0
        assert tree.threshold[0] == 1.5
        left, right = tree.left[0], tree.right[0]
        assert np.array_equal(tree.leaf_rows[left], [0, 1])
        assert np.array_equal(tree.leaf_rows[right], [2, 3])

    def test_single_row(self):
        d = uncensored([[1.0]], [5.0])
        f = fit(d, ForestConfig(min_node_size=1, n_trees=3, seed=1))
        for tree in f.trees:
            assert tree.feature[0] == -1
            assert np.array_equal(tree.leaf_rows[0], [0])

    def test_constant_response_single_leaf(self):
        d = uncensored(np.linspace(0, 1, 100).reshape(-1, 1), np.full(100, 7.0))
        f = fit(d, ForestConfig(min_node_size=1, n_trees=5, seed=2))
        for tree in f.trees:
            assert len(tree.feature) == 1 and tree.feature[0] == -1

    def test_leaves_partition_bag_and_respect_node_size(self):
        d = toy_dataset(n=90, seed=4)
        cfg = ForestConfig(min_node_size=7, n_trees=20, seed=5)
        f = fit(d, cfg)
        for tree in f.trees:
            rows = [r for r in tree.leaf_rows if r is not None]
            assert all(len(r) >= cfg.min_node_size for r in rows)
            merged = np.sort(np.concatenate(rows))
            assert np.array_equal(merged, tree.bag)
            # internal nodes route left iff x <= threshold; spot-check by
            # dropping every training point down the tree
            leaves = apply(tree, d.features)
            for i, leaf in enumerate(leaves):
                assert tree.feature[leaf] == -1

    def test_child_fraction_constraint(self):
        d = toy_dataset(n=100, seed=6)
        cfg = ForestConfig(min_node_size=2, n_trees=10, min_child_fraction=0.3, seed=7)
        f = fit(d, cfg)

        def node_sizes(tree):
            # reconstruct per-node row counts by routing the bag
            sizes = {}
            xb = d.features[tree.bag]
            for xi in xb:
                nid = 0
                while True:
                    sizes[nid] = sizes.get(nid, 0) + 1
                    if tree.feature[nid] < 0:
                        break
                    nid = tree.left[nid] if xi[tree.feature[nid]] <= tree.threshold[nid] else tree.right[nid]
            return sizes

        for tree in f.trees[:3]:
            sizes = node_sizes(tree)
            for nid in range(len(tree.feature)):
                if tree.feature[nid] >= 0:
                    parent = sizes[nid]
                    for child in (tree.left[nid], tree.right[nid]):
                        assert sizes[child] >= 0.3 * parent - 1e-9

    def test_threads_do_not_change_result(self):
        d = toy_dataset(n=80, seed=8)
        cfg = ForestConfig(min_node_size=8, n_trees=12, seed=9)
        f1 = fit(d, cfg, threads=1)
        f2 = fit(d, cfg, threads=4)
        x = np.array([1.0])
        assert np.array_equal(forest_weights(f1, x).dense(), forest_weights(f2, x).dense())


class TestWeightVector:
    def test_validation(self):
        with pytest.raises(DataError):
            WeightVector([0, 1], [0.6, 0.6], 2)  # sums to 1.2
        with pytest.raises(DataError):
            WeightVector([0, 0], [0.5, 0.5], 2)  # duplicate index
        with pytest.raises(DataError):
            WeightVector([0, 5], [0.5, 0.5], 3)  # out of range
        with pytest.raises(DataError):
            WeightVector([0], [-1.0], 1)
        with pytest.raises(DataError):
            WeightVector([], [], 4)  # empty support

    def test_dense_round_trip(self):
        w = WeightVector.from_dense([0.0, 0.25, 0.75, 0.0])
        assert np.array_equal(w.index, [1, 2])
        assert np.array_equal(w.dense(), [0.0, 0.25, 0.75, 0.0])
        u = WeightVector.uniform_subset([3, 1], 5)
        assert np.array_equal(u.index, [1, 3]) and np.array_equal(u.value, [0.5, 0.5])


class TestWeights:
    def test_single_leaf_uniform(self):
        d = uncensored(np.arange(10.0).reshape(-1, 1), np.arange(10.0))
        f = fit(d, ForestConfig(min_node_size=10, n_trees=1, bootstrap=False, seed=0))
        w = tree_weights(f.trees[0], [4.0], n=10)
        assert np.array_equal(w.dense(), np.full(10, 0.1))

    def test_two_point_leaf(self):
        d = uncensored([[0.0], [1.0], [2.0], [3.0]], [0.0, 0.0, 10.0, 10.0])
        f = fit(d, ForestConfig(min_node_size=1, n_trees=1, mtry=1, bootstrap=False, seed=0))
        w = tree_weights(f.trees[0], [2.5], n=4)
        assert np.array_equal(w.index, [2, 3])
        assert np.array_equal(w.value, [0.5, 0.5])

    def test_bootstrap_multiplicity(self):
        # a row duplicated in the bag gets proportionally larger weight
        d = uncensored([[0.0], [1.0]], [0.0, 1.0])
        f = fit(d, ForestConfig(min_node_size=2, n_trees=1, seed=3))
        tree = f.trees[0]
        counts = np.bincount(tree.bag, minlength=2)
        w = tree_weights(tree, [0.0], n=2)
        assert np.array_equal(w.dense(), counts / 2.0)

    def test_forest_weights_average_trees(self):
        d = toy_dataset(n=40, seed=11)
        f = fit(d, ForestConfig(min_node_size=5, n_trees=7, seed=12))
        x = np.array([0.7])
        dense = np.zeros(d.n)
        for tree in f.trees:
            dense += tree_weights(tree, x, n=d.n).dense()
        dense /= len(f.trees)
        assert forest_weights(f, x).dense() == pytest.approx(dense, abs=1e-15)

    def test_weight_matrix_matches_per_point(self):
        d = toy_dataset(n=50, seed=13)
        f = fit(d, ForestConfig(min_node_size=5, n_trees=9, seed=14))
        xs = d.features[:6]
        mat = weight_matrix(f, xs)
        for i in range(6):
            assert np.array_equal(mat[i], forest_weights(f, xs[i]).dense())

    def test_normalization_and_leaf_bound(self):
        d = toy_dataset(n=70, seed=15)
        f = fit(d, ForestConfig(min_node_size=6, n_trees=15, seed=16))
        min_leaf = min(len(r) for t in f.trees for r in t.leaf_rows if r is not None)
        # bagging duplicates inflate a single row's weight by its in-leaf
        # multiplicity, so the 1/min_leaf bound scales by the worst one
        max_dup = max(int(np.bincount(t.bag).max()) for t in f.trees)
        rng = np.random.default_rng(17)
        for _ in range(25):
            x = rng.uniform(0, 2, 1)
            w = forest_weights(f, x)
            assert abs(w.value.sum() - 1.0) <= 1e-10
            assert (w.value >= 0).all()
            assert w.value.max() <= max_dup / min_leaf + 1e-12

    def test_leaf_bound_without_bootstrap(self):
        # with multiplicities gone the classic bound is exact
        d = toy_dataset(n=70, seed=15)
        f = fit(d, ForestConfig(min_node_size=6, n_trees=15, bootstrap=False, seed=16))
        min_leaf = min(len(r) for t in f.trees for r in t.leaf_rows if r is not None)
        rng = np.random.default_rng(17)
        for _ in range(25):
            w = forest_weights(f, rng.uniform(0, 2, 1))
            assert w.value.max() <= 1.0 / min_leaf + 1e-12

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(18)
        x_train = rng.uniform(0, 2, (40, 2))
        y_train = rng.normal(size=40)
        d1 = uncensored(x_train, y_train)
        perm = rng.permutation(40)
        d2 = uncensored(x_train[perm], y_train[perm])
        cfg = ForestConfig(min_node_size=4, n_trees=3, mtry=2, bootstrap=False, seed=19)
        f1, f2 = fit(d1, cfg), fit(d2, cfg)
        for x in rng.uniform(0, 2, (5, 2)):
            w1 = forest_weights(f1, x).dense()
            w2 = forest_weights(f2, x).dense()
            assert np.array_equal(w2, w1[perm])


class TestSupportGrid:
    def test_distinct_sorted_and_mass(self):
        y = np.array([3.0, 1.0, 2.0, 2.0, 5.0])
        w = WeightVector.from_dense([0.1, 0.2, 0.3, 0.15, 0.25])
        cands, above = support_grid(w, y)
        assert np.array_equal(cands, [1.0, 2.0, 3.0, 5.0])
        brute = [sum(wv for yv, wv in zip(y, w.dense()) if yv > c) for c in cands]
        assert above == pytest.approx(brute, abs=1e-12)
        assert above[-1] == 0.0

    def test_mass_above_arbitrary_points(self):
        y = np.array([1.0, 2.0, 3.0])
        w = WeightVector.uniform(3)
        qs = np.array([0.0, 1.0, 1.5, 3.0, 9.0])
        got = mass_above(w, y, qs)
        assert got == pytest.approx([1.0, 2 / 3, 2 / 3, 0.0, 0.0], abs=1e-12)
        assert mass_above(w, y, 2.0) == pytest.approx(1 / 3, abs=1e-12)


class TestWeightedQuantile:
    def test_uniform_four(self):
        assert quantile_from_weights(WeightVector.uniform(4), np.array([1.0, 2.0, 3.0, 4.0]), 0.5) == 2.0

    def test_uniform_five(self):
        # pinned against brute-force pinball minimization over the grid
        y = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
        assert quantile_from_weights(WeightVector.uniform(5), y, 0.5) == 3.0

    def test_point_mass(self):
        w = WeightVector.from_dense([0.0, 1.0, 0.0])
        y = np.array([4.0, 8.0, 15.0])
        for tau in (0.1, 0.5, 0.9):
            assert quantile_from_weights(w, y, tau) == 8.0

    def test_matches_pinball_oracle(self):
        rng = np.random.default_rng(20)
        for _ in range(40):
            n = int(rng.integers(2, 25))
            y = np.round(rng.normal(size=n), 2)  # induce occasional ties
            raw = rng.uniform(0.1, 1.0, n)
            w = WeightVector.from_dense(raw / raw.sum())
            tau = float(rng.uniform(0.05, 0.95))
            got = quantile_from_weights(w, y, tau)
            assert got == weighted_quantile_grid(y, w.dense(), tau)

    def test_monotone_in_tau(self):
        d = toy_dataset(n=60, seed=21)
        f = fit(d, ForestConfig(min_node_size=6, n_trees=10, seed=22))
        qs = [weighted_quantile(f, [1.0], t) for t in np.linspace(0.05, 0.95, 19)]
        assert all(b >= a for a, b in zip(qs, qs[1:]))

    def test_rejects_bad_tau(self):
        d = toy_dataset(n=20, seed=23)
        f = fit(d, ForestConfig(min_node_size=5, n_trees=2, seed=0))
        with pytest.raises(DataError):
            weighted_quantile(f, [1.0], 1.0)


class TestWeightedMean:
    def test_single_leaf_equals_sample_mean(self):
        y = np.linspace(-3, 5, 30)
        d = uncensored(np.linspace(0, 1, 30).reshape(-1, 1), y)
        f = fit(d, ForestConfig(min_node_size=30, n_trees=1, bootstrap=False, seed=0))
        assert weighted_mean(f, [0.5]) == pytest.approx(y.mean(), rel=1e-14)


class TestSerialization:
    def test_round_trip_bitwise(self, tmp_path):
        d = toy_dataset(n=45, seed=24)
        f = fit(d, ForestConfig(min_node_size=5, n_trees=6, seed=25), feature_names=("x1",))
        path = tmp_path / "model.json"
        save_forest(f, path)
        g = load_forest(path, d)
        assert g.config == f.config
        assert g.feature_names == ("x1",)
        xs = d.features[:5]
        assert np.array_equal(weight_matrix(g, xs), weight_matrix(f, xs))
        for tree_a, tree_b in zip(f.trees, g.trees):
            assert np.array_equal(tree_a.feature, tree_b.feature)
            assert np.array_equal(tree_a.threshold, tree_b.threshold, equal_nan=True)
            assert np.array_equal(tree_a.bag, tree_b.bag)

    def test_checksum_guards_against_wrong_data(self, tmp_path):
        d = toy_dataset(n=30, seed=26)
        other = toy_dataset(n=30, seed=27)
        f = fit(d, ForestConfig(min_node_size=5, n_trees=2, seed=0))
        path = tmp_path / "model.json"
        save_forest(f, path)
        with pytest.raises(DataError, match="does not match"):
            load_forest(path, other)

    def test_rejects_foreign_files(self, tmp_path):
        d = toy_dataset(n=10, seed=0)
        bad = tmp_path / "bad.json"
        bad.write_text("not json at all")
        with pytest.raises(DataError, match="not a valid model file"):
            load_forest(bad, d)
        bad.write_text(json.dumps({"format": "something-else"}))
        with pytest.raises(DataError, match="unrecognized"):
            load_forest(bad, d)

    def test_checksum_is_data_dependent(self):
        a = toy_dataset(n=12, seed=1)
        b = toy_dataset(n=12, seed=2)
        assert data_checksum(a) != data_checksum(b)
        assert data_checksum(a) == data_checksum(a)
