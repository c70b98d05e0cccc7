import math
import random

import numpy as np
import pytest

import bnqubo as bq
from bnqubo.cart import score, train_cart, used_variables
from util import make_copy_dataset, partition_score


def uniform_two_state(rows=100):
    cells = np.zeros((rows, 2), dtype=np.int64)
    cells[rows // 2 :, 0] = 1
    cells[:, 1] = np.arange(rows) % 2
    return bq.Dataset(cells=cells, states=(2, 2), names=("y", "x"))


class TestTrain:
    def test_no_explanatory_variables_gives_single_leaf(self):
        ds = uniform_two_state()
        tree = train_cart(ds, 0, frozenset(), 0.01)
        assert tree.root.is_leaf
        assert used_variables(tree) == frozenset()

    def test_pure_split_on_copy(self):
        ds = make_copy_dataset(rows=100)
        tree = train_cart(ds, 1, {0}, 0.01)
        assert not tree.root.is_leaf
        assert tree.root.split_variable == 0
        assert tree.root.left.is_leaf and tree.root.right.is_leaf
        assert used_variables(tree) == frozenset({0})
        assert score(tree) == 0.0

    def test_infinite_threshold_gives_single_leaf(self):
        ds = make_copy_dataset(rows=100)
        tree = train_cart(ds, 1, {0, 2}, math.inf)
        assert tree.root.is_leaf

    def test_target_cannot_be_explanatory(self):
        ds = uniform_two_state()
        with pytest.raises(ValueError):
            train_cart(ds, 0, {0, 1}, 0.01)

    def test_repeated_splits_on_one_variable_collapse_in_used(self):
        # y is a 3-state function of a 3-state w: one-vs-rest splits force the
        # tree to split on w twice, but the used set names w once
        rng = np.random.default_rng(0)
        w = rng.integers(0, 3, 150)
        noise = rng.integers(0, 2, 150)
        cells = np.column_stack([w, w.copy(), noise])
        ds = bq.Dataset(cells=cells, states=(3, 3, 2), names=("y", "w", "n"))
        tree = train_cart(ds, 0, {1, 2}, 0.05)
        internal = 0
        stack = [tree.root]
        while stack:
            node = stack.pop()
            if not node.is_leaf:
                internal += 1
                stack.extend((node.left, node.right))
        assert internal == 2
        assert used_variables(tree) == frozenset({1})
        assert len(used_variables(tree)) <= internal
        assert score(tree) == 0.0

    def test_determinism(self):
        ds, _ = bq.generate_synthetic(
            bq.SyntheticSpec(num_variables=5, num_rows=300, seed=3, edge_probability=0.6)
        )
        t1 = train_cart(ds, 2, {0, 1, 3, 4}, 0.005)
        t2 = train_cart(ds, 2, {0, 1, 3, 4}, 0.005)
        assert t1.root == t2.root
        assert score(t1) == score(t2)

    def test_every_split_decreases_entropy_by_threshold(self):
        # recompute each split's decrease from the stored counts
        ds, _ = bq.generate_synthetic(
            bq.SyntheticSpec(num_variables=5, num_rows=400, seed=6, edge_probability=0.7)
        )
        threshold = 0.004
        tree = train_cart(ds, 0, {1, 2, 3, 4}, threshold)

        def entropy(counts):
            total = sum(counts)
            return sum(-c * math.log(c / total) for c in counts if c > 0)

        stack = [tree.root]
        saw_split = False
        while stack:
            node = stack.pop()
            if node.is_leaf:
                continue
            saw_split = True
            dec = (
                entropy(node.counts) - entropy(node.left.counts) - entropy(node.right.counts)
            ) / ds.num_rows
            assert dec >= threshold - 1e-12
            stack.extend((node.left, node.right))
        assert saw_split


class TestScore:
    def test_uniform_single_leaf_is_rows_log2(self):
        ds = uniform_two_state(rows=100)
        tree = train_cart(ds, 0, frozenset(), 0.01)
        assert score(tree) == pytest.approx(100 * math.log(2), rel=1e-12)
        assert score(tree) == pytest.approx(69.31471805599453, rel=1e-12)

    def test_pure_leaves_score_zero(self):
        ds = make_copy_dataset(rows=80)
        tree = train_cart(ds, 1, {0}, 0.01)
        assert score(tree) == 0.0

    def test_monotone_in_explanatory_pool(self):
        ds, _ = bq.generate_synthetic(
            bq.SyntheticSpec(num_variables=5, num_rows=300, seed=8, edge_probability=0.7)
        )
        for target in range(5):
            pool = frozenset(range(5)) - {target}
            single = score(train_cart(ds, target, frozenset(), 0.005))
            grown = score(train_cart(ds, target, pool, 0.005))
            assert grown <= single + 1e-12

    def test_matches_row_partition_oracle(self):
        rng = random.Random(0)
        ds, _ = bq.generate_synthetic(
            bq.SyntheticSpec(num_variables=6, num_rows=350, seed=12, edge_probability=0.6)
        )
        for _ in range(25):
            target = rng.randrange(6)
            pool = frozenset(
                w for w in range(6) if w != target and rng.random() < 0.7
            )
            tree = train_cart(ds, target, pool, 0.004)
            expected = partition_score(tree, ds)
            assert score(tree) == pytest.approx(expected, rel=1e-9)

    def test_smoothing_increases_impure_leaf_score(self):
        ds = uniform_two_state(rows=100)
        tree = train_cart(ds, 0, frozenset(), 0.01)
        assert score(tree, alpha=1.0) > 0.0
        # pure leaves pick up mass from smoothing too
        dsc = make_copy_dataset(rows=80)
        pure = train_cart(dsc, 1, {0}, 0.01)
        assert score(pure, alpha=1.0) > score(pure)

    def test_leaf_counts_sum_to_routed_rows(self):
        ds, _ = bq.generate_synthetic(
            bq.SyntheticSpec(num_variables=4, num_rows=200, seed=1, edge_probability=0.7)
        )
        tree = train_cart(ds, 0, {1, 2, 3}, 0.005)
        assert sum(sum(leaf.counts) for leaf in tree.leaves()) == ds.num_rows


class TestRetrainStability:
    def test_retrain_on_used_plus_any_subset_reproduces_tree(self):
        rng = random.Random(42)
        ds, _ = bq.generate_synthetic(
            bq.SyntheticSpec(num_variables=6, num_rows=300, seed=5, edge_probability=0.6)
        )
        checked = 0
        for _ in range(60):
            target = rng.randrange(6)
            pool = frozenset(w for w in range(6) if w != target and rng.random() < 0.8)
            tree = train_cart(ds, target, pool, 0.004)
            used = used_variables(tree)
            spare = sorted(pool - used)
            extra = frozenset(w for w in spare if rng.random() < 0.5)
            retrained = train_cart(ds, target, used | extra, 0.004)
            assert retrained.root == tree.root
            assert used_variables(retrained) == used
            assert score(retrained) == score(tree)
            checked += 1
        assert checked == 60

    def test_json_dump_shape(self, tmp_path):
        from bnqubo.cart import dump_tree, tree_to_json_dict

        ds = make_copy_dataset(rows=60)
        tree = train_cart(ds, 1, {0, 2}, 0.01)
        dump = tree_to_json_dict(tree)
        assert dump["used"] == [0]
        assert dump["nodes"][0]["split_variable"] == 0
        dump_tree(tree, tmp_path / "t.json")
        assert (tmp_path / "t.json").exists()
