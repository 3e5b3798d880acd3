import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from conftest import clustered_descriptors
from pervisor.match import (
    DEFAULT_CHECKS,
    LEAF_SIZE,
    EmptyIndexError,
    SearchStats,
    build_forest,
    distance,
    knn_search,
    linear_scan,
    ratio_match,
)

vec64 = hnp.arrays(np.float64, 64, elements=st.floats(-10, 10, width=32))


def small_forest(seed=0, n=300, num_trees=4, forest_seed=42):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(n, 64))
    signs = rng.choice(np.array([-1, 1], dtype=np.int8), n)
    return build_forest(pts, signs, num_trees=num_trees, seed=forest_seed), pts, signs


class TestDistance:
    def test_identical_zero(self):
        v = np.arange(64, dtype=np.float64)
        assert distance(v, v) == 0.0

    def test_hand_value(self):
        a = np.zeros(64)
        b = np.zeros(64)
        b[:4] = 1.0
        assert distance(a, b) == pytest.approx(2.0, rel=1e-15)

    def test_matches_elementwise_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            a, b = rng.normal(size=(2, 64))
            oracle = math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)))
            got = distance(a, b)
            assert abs(got - oracle) <= 1e-12 * max(1.0, abs(oracle))

    @settings(max_examples=50, deadline=None)
    @given(vec64, vec64, vec64)
    def test_metric_properties(self, a, b, c):
        assert distance(a, b) >= 0.0
        assert distance(a, b) == distance(b, a)
        assert distance(a, c) <= distance(a, b) + distance(b, c) + 1e-9

    def test_wrong_dim_rejected(self):
        with pytest.raises(ValueError):
            distance(np.zeros(63), np.zeros(63))


class TestBuildForest:
    def test_empty_rejected(self):
        with pytest.raises(EmptyIndexError):
            build_forest(np.empty((0, 64)), np.empty(0, dtype=np.int8))

    def test_leaf_sizes_and_membership(self):
        forest, pts, _ = small_forest()
        for tree in forest.trees:
            leaves = np.nonzero(tree.split_dim == -1)[0]
            seen = []
            for node in leaves:
                s, c = tree.leaf_start[node], tree.leaf_count[node]
                assert c <= LEAF_SIZE
                seen.extend(tree.order[s : s + c].tolist())
            # Every point in exactly one leaf.
            assert sorted(seen) == list(range(len(pts)))

    def test_split_partitions_points(self):
        forest, pts, _ = small_forest()
        for tree in forest.trees:
            def collect(node):
                if tree.split_dim[node] == -1:
                    s, c = tree.leaf_start[node], tree.leaf_count[node]
                    return tree.order[s : s + c]
                return np.concatenate(
                    [collect(tree.left[node]), collect(tree.right[node])]
                )

            for node in np.nonzero(tree.split_dim >= 0)[0]:
                dim, val = tree.split_dim[node], tree.split_val[node]
                lidx = collect(tree.left[node])
                ridx = collect(tree.right[node])
                assert len(lidx) and len(ridx)
                assert (pts[lidx, dim] <= val).all()
                assert (pts[ridx, dim] > val).all()

    def test_depth_balanced(self):
        forest, pts, _ = small_forest(n=2000)
        limit = math.ceil(math.log2(len(pts) / LEAF_SIZE)) + 3
        for tree in forest.trees:
            assert tree.depth() <= limit

    def test_deterministic_and_trees_differ(self):
        f1, _, _ = small_forest(forest_seed=7)
        f2, _, _ = small_forest(forest_seed=7)
        for t1, t2 in zip(f1.trees, f2.trees):
            assert np.array_equal(t1.split_dim, t2.split_dim)
            assert np.array_equal(t1.split_val, t2.split_val)
            assert np.array_equal(t1.order, t2.order)
        # Randomized dimension choice should make the trees non-identical.
        dims = {tuple(t.split_dim.tolist()) for t in f1.trees}
        assert len(dims) > 1

    def test_duplicate_points_handled(self):
        pts = np.zeros((40, 64))
        pts[:20, 0] = 1.0
        signs = np.ones(40, dtype=np.int8)
        forest = build_forest(pts, signs, num_trees=2, seed=1)
        got = knn_search(forest, pts[0], 1, k=3, checks=None)
        assert [i for i, _ in got] == [0, 1, 2]


class TestKnnSearch:
    def test_exact_equals_linear_scan(self):
        forest, pts, signs = small_forest(n=500)
        rng = np.random.default_rng(9)
        for _ in range(100):
            q = rng.normal(size=64)
            sgn = int(rng.choice([-1, 1]))
            got = knn_search(forest, q, sgn, k=3, checks=None)
            ref = linear_scan(forest, q, sgn, k=3)
            assert [i for i, _ in got] == [i for i, _ in ref]
            for (_, dg), (_, dr) in zip(got, ref):
                assert abs(dg - dr) <= 1e-12 * max(1.0, dr)

    def test_query_among_points_found(self):
        forest, pts, signs = small_forest()
        i = 17
        got = knn_search(forest, pts[i], int(signs[i]), k=1, checks=None)
        assert got[0][0] == i and got[0][1] == 0.0

    def test_sign_filter_skips_without_eval(self):
        forest, pts, signs = small_forest()
        stats = SearchStats()
        got = knn_search(forest, pts[0], 1, k=5, checks=None, stats=stats)
        assert all(signs[i] == 1 for i, _ in got)
        n_plus = int((signs == 1).sum())
        assert stats.distance_evals <= n_plus
        assert stats.distance_evals + stats.sign_skips <= len(pts)
        assert stats.sign_skips > 0

    def test_sign_filter_off_sees_everything(self):
        forest, pts, signs = small_forest()
        stats = SearchStats()
        knn_search(
            forest, pts[0], 1, k=5, checks=None, sign_filter=False, stats=stats
        )
        assert stats.sign_skips == 0
        assert stats.distance_evals == len(pts)

    def test_checks_bounds_work(self):
        forest, pts, _ = small_forest(n=1000)
        stats = SearchStats()
        knn_search(forest, pts[0], 1, k=2, checks=32, stats=stats)
        assert stats.distance_evals <= 32

    def test_recall_improves_with_checks(self):
        pts, signs, qs, qsigns = clustered_descriptors(5, 4000, 200)
        forest = build_forest(pts, signs, seed=3)

        def recall(checks):
            hits = 0
            for q, s in zip(qs, qsigns):
                truth = linear_scan(forest, q, int(s), k=1)[0][0]
                got = knn_search(forest, q, int(s), k=1, checks=checks)
                hits += bool(got and got[0][0] == truth)
            return hits / len(qs)

        r32, r128 = recall(32), recall(128)
        assert r32 >= 0.80
        assert r128 >= r32

    def test_k_larger_than_population(self):
        forest, pts, signs = small_forest(n=5)
        got = knn_search(forest, pts[0], 1, k=10, checks=None, sign_filter=False)
        assert len(got) == 5

    def test_bad_args(self):
        forest, pts, _ = small_forest(n=20)
        with pytest.raises(ValueError):
            knn_search(forest, np.zeros(10), 1, k=1)
        with pytest.raises(ValueError):
            knn_search(forest, pts[0], 1, k=0)


class TestRatioMatch:
    def test_against_bruteforce_oracle(self):
        forest, pts, signs = small_forest(n=400)
        rng = np.random.default_rng(11)
        queries = []
        for _ in range(60):
            base = rng.integers(0, len(pts))
            queries.append((pts[base] + rng.normal(scale=0.05, size=64), int(signs[base])))
        results = ratio_match(forest, queries, ratio=0.7, checks=None)
        for res, (q, sgn) in zip(results, queries):
            nn = linear_scan(forest, q, sgn, k=2)
            d1, d2 = nn[0][1], nn[1][1]
            if d1 < 0.7 * d2:
                assert res.best_index == nn[0][0]
            else:
                assert res.best_index is None
            assert res.best_distance == pytest.approx(d1, rel=1e-12)

    def test_linear_route_matches_exact_tree(self):
        forest, pts, signs = small_forest(n=200)
        queries = [(pts[i] * 1.01, int(signs[i])) for i in range(30)]
        a = ratio_match(forest, queries, checks=None)
        b = ratio_match(forest, queries, use_linear=True)
        assert [r.best_index for r in a] == [r.best_index for r in b]

    def test_single_candidate_accepted(self):
        pts = np.zeros((3, 64))
        pts[0, 0] = 5.0
        signs = np.array([1, -1, -1], dtype=np.int8)
        forest = build_forest(pts, signs, num_trees=1, seed=0)
        res = ratio_match(forest, [(pts[0], 1)], checks=None)[0]
        assert res.best_index == 0 and res.second_distance is None

    def test_no_candidates(self):
        pts = np.zeros((2, 64))
        signs = np.array([1, 1], dtype=np.int8)
        forest = build_forest(pts, signs, num_trees=1, seed=0)
        res = ratio_match(forest, [(pts[0], -1)], checks=None)[0]
        assert res.best_index is None and res.best_distance == math.inf

    def test_bad_ratio(self):
        forest, pts, _ = small_forest(n=10)
        with pytest.raises(ValueError):
            ratio_match(forest, [], ratio=0.0)
