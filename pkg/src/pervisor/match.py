"""Descriptor distance and approximate nearest-neighbor search.

A forest of randomized KD-trees is searched jointly best-first.  Each tree
splits at the (lower) median of a dimension drawn from the five
highest-variance dimensions of the node's point set, using a PCG64 stream
seeded per tree, so construction is deterministic for a given seed.
Points whose Laplacian sign differs from the query's are skipped without a
distance evaluation.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

LEAF_SIZE = 8
DEFAULT_NUM_TREES = 4
DEFAULT_CHECKS = 32
TOP_VARIANCE_DIMS = 5


class EmptyIndexError(ValueError):
    """Cannot build a forest over an empty point set."""


def distance(p, q) -> float:
    """Euclidean distance between two 64-d descriptors."""
    p = np.asarray(getattr(p, "values", p), dtype=np.float64)
    q = np.asarray(getattr(q, "values", q), dtype=np.float64)
    if p.shape != (64,) or q.shape != (64,):
        raise ValueError("descriptors must be 64-dimensional")
    d = p - q
    return float(np.sqrt(np.dot(d, d)))


@dataclass
class _Tree:
    # Flat node arrays; split_dim == -1 marks a leaf, whose points are
    # order[leaf_start : leaf_start + leaf_count].
    split_dim: np.ndarray
    split_val: np.ndarray
    left: np.ndarray
    right: np.ndarray
    leaf_start: np.ndarray
    leaf_count: np.ndarray
    order: np.ndarray

    def depth(self) -> int:
        def rec(node: int) -> int:
            if self.split_dim[node] < 0:
                return 1
            return 1 + max(rec(self.left[node]), rec(self.right[node]))

        return rec(0)


@dataclass
class KdForest:
    points: np.ndarray  # float64 (n, 64)
    signs: np.ndarray  # int8 (n,)
    payload: np.ndarray  # int64 (n,), caller-defined ids (record indices)
    trees: list[_Tree]
    num_trees: int
    seed: int

    @property
    def size(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class MatchResult:
    query_index: int
    best_index: int | None
    best_distance: float
    second_distance: float | None


@dataclass
class SearchStats:
    """Instrumentation for tests: counts of work done during a search."""

    distance_evals: int = 0
    sign_skips: int = 0


class _TreeBuilder:
    def __init__(self, points: np.ndarray, rng: np.random.Generator):
        self.points = points
        self.rng = rng
        self.split_dim: list[int] = []
        self.split_val: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.leaf_start: list[int] = []
        self.leaf_count: list[int] = []
        self.order: list[int] = []

    def _new_node(self) -> int:
        for a in (
            self.split_dim,
            self.split_val,
            self.left,
            self.right,
            self.leaf_start,
            self.leaf_count,
        ):
            a.append(-1)
        return len(self.split_dim) - 1

    def _make_leaf(self, node: int, idx: np.ndarray) -> None:
        self.split_dim[node] = -1
        self.leaf_start[node] = len(self.order)
        self.leaf_count[node] = len(idx)
        self.order.extend(int(i) for i in idx)

    def build(self, idx: np.ndarray) -> int:
        node = self._new_node()
        if len(idx) <= LEAF_SIZE:
            self._make_leaf(node, idx)
            return node
        sub = self.points[idx]
        var = sub.var(axis=0)
        top = np.argsort(-var, kind="stable")[:TOP_VARIANCE_DIMS]
        top = top[var[top] > 0.0]
        if len(top) == 0:
            self._make_leaf(node, idx)
            return node
        dim = int(top[self.rng.integers(0, len(top))])
        vals = sub[:, dim]
        split = float(np.sort(vals, kind="stable")[(len(vals) - 1) // 2])
        mask = vals <= split
        if mask.all():
            # Lower median equals the max (heavy ties); split just below it
            # so the right side is non-empty.
            vmax = vals.max()
            split = float(vals[vals < vmax].max())
            mask = vals <= split
        self.split_dim[node] = dim
        self.split_val[node] = split
        left = self.build(idx[mask])
        right = self.build(idx[~mask])
        self.left[node] = left
        self.right[node] = right
        return node


def build_forest(
    points: np.ndarray,
    signs: np.ndarray,
    num_trees: int = DEFAULT_NUM_TREES,
    seed: int = 42,
    payload: np.ndarray | None = None,
) -> KdForest:
    """Build a randomized KD-tree forest over descriptor rows.

    Deterministic for a given (points, num_trees, seed): tree t uses the
    PCG64 stream seeded with SeedSequence((seed, t)).
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] < 1:
        raise EmptyIndexError("need at least one point to index")
    n = points.shape[0]
    signs = np.asarray(signs, dtype=np.int8)
    if signs.shape != (n,):
        raise ValueError("signs must have one entry per point")
    if payload is None:
        payload = np.arange(n, dtype=np.int64)
    else:
        payload = np.asarray(payload, dtype=np.int64)

    trees = []
    all_idx = np.arange(n)
    for t in range(num_trees):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, t))))
        b = _TreeBuilder(points, rng)
        b.build(all_idx)
        trees.append(
            _Tree(
                split_dim=np.array(b.split_dim, dtype=np.int32),
                split_val=np.array(b.split_val, dtype=np.float64),
                left=np.array(b.left, dtype=np.int32),
                right=np.array(b.right, dtype=np.int32),
                leaf_start=np.array(b.leaf_start, dtype=np.int64),
                leaf_count=np.array(b.leaf_count, dtype=np.int64),
                order=np.array(b.order, dtype=np.int64),
            )
        )
    return KdForest(
        points=points,
        signs=signs,
        payload=payload,
        trees=trees,
        num_trees=num_trees,
        seed=seed,
    )


def linear_scan(
    forest: KdForest,
    query: np.ndarray,
    query_sign: int,
    k: int,
    sign_filter: bool = True,
) -> list[tuple[int, float]]:
    """Brute-force k nearest neighbors (the nm-comparison baseline).

    Exact by construction; used as the oracle for the tree search and as a
    fallback matcher.
    """
    q = np.asarray(getattr(query, "values", query), dtype=np.float64)
    if sign_filter:
        idx = np.nonzero(forest.signs == query_sign)[0]
    else:
        idx = np.arange(forest.size)
    if len(idx) == 0:
        return []
    diff = forest.points[idx] - q
    d2 = np.einsum("ij,ij->i", diff, diff)
    order = np.lexsort((idx, d2))[:k]
    return [(int(idx[i]), float(np.sqrt(d2[i]))) for i in order]


def knn_search(
    forest: KdForest,
    query: np.ndarray,
    query_sign: int,
    k: int,
    checks: int | None = DEFAULT_CHECKS,
    sign_filter: bool = True,
    stats: SearchStats | None = None,
) -> list[tuple[int, float]]:
    """k nearest same-sign neighbors via best-first forest traversal.

    checks bounds the number of distance evaluations; None means
    unlimited, which makes the search exact (every reachable candidate is
    either evaluated or pruned by a valid lower bound).  Returns
    (point index, distance) pairs ascending by distance, ties by index.
    """
    q = np.asarray(getattr(query, "values", query), dtype=np.float64)
    if q.shape != (forest.points.shape[1],):
        raise ValueError("query dimensionality mismatch")
    if k < 1:
        raise ValueError("k must be >= 1")
    exact = checks is None
    budget = math.inf if exact else int(checks)

    visited = np.zeros(forest.size, dtype=bool)
    # Max-heap of the k best so far: entries (-d2, -idx).
    best: list[tuple[float, int]] = []
    # Branch queue entries: (priority, tiebreak, valid_bound, tree_id, node).
    # priority is the FLANN-style accumulated bound (ordering heuristic);
    # valid_bound is a true lower bound on distance^2 to the branch region,
    # safe for exact-mode pruning.
    branches: list[tuple[float, int, float, int, int]] = []
    counter = 0
    evals = 0
    sign_skips = 0

    def kth_d2() -> float:
        return -best[0][0] if len(best) == k else math.inf

    def eval_leaf(tree: _Tree, node: int) -> None:
        nonlocal evals, sign_skips
        start = tree.leaf_start[node]
        ids = tree.order[start : start + tree.leaf_count[node]]
        ids = ids[~visited[ids]]
        if len(ids) == 0:
            return
        visited[ids] = True
        if sign_filter:
            ok = forest.signs[ids] == query_sign
            sign_skips += int((~ok).sum())
            ids = ids[ok]
        if len(ids) == 0:
            return
        if not exact and evals + len(ids) > budget:
            ids = ids[: int(budget) - evals]
        if len(ids) == 0:
            return
        evals += len(ids)
        diff = forest.points[ids] - q
        d2s = np.einsum("ij,ij->i", diff, diff)
        for i, d2 in zip(ids, d2s):
            entry = (-float(d2), -int(i))
            if len(best) < k:
                heapq.heappush(best, entry)
            elif entry > best[0]:
                heapq.heapreplace(best, entry)

    def descend(tree_id: int, node: int, priority: float, vbound: float) -> None:
        nonlocal counter
        tree = forest.trees[tree_id]
        while tree.split_dim[node] >= 0:
            dim = tree.split_dim[node]
            diff = q[dim] - tree.split_val[node]
            if diff <= 0.0:
                near, far = tree.left[node], tree.right[node]
            else:
                near, far = tree.right[node], tree.left[node]
            far_bound = max(vbound, diff * diff)
            counter += 1
            heapq.heappush(
                branches, (priority + diff * diff, counter, far_bound, tree_id, far)
            )
            node = near
        eval_leaf(tree, node)

    for t in range(forest.num_trees):
        descend(t, 0, 0.0, 0.0)
        if evals >= budget:
            break

    while branches and evals < budget:
        priority, _, vbound, tree_id, node = heapq.heappop(branches)
        if vbound > kth_d2():
            continue  # provably cannot improve the current k-best
        descend(tree_id, node, priority, vbound)

    if stats is not None:
        stats.distance_evals += evals
        stats.sign_skips += sign_skips
    results = sorted((-nd, -ni) for nd, ni in best)  # (d2, idx) ascending
    return [(int(i), float(np.sqrt(d2))) for d2, i in results]


def ratio_match(
    forest: KdForest,
    queries,
    ratio: float = 0.7,
    checks: int | None = DEFAULT_CHECKS,
    sign_filter: bool = True,
    use_linear: bool = False,
    stats: SearchStats | None = None,
) -> list[MatchResult]:
    """Nearest/second-nearest acceptance over a batch of query features.

    queries: sequence of (descriptor, laplacian_sign) pairs.  A query is
    accepted when best < ratio * second; a lone retrieved neighbor is
    accepted unconditionally.  use_linear routes retrieval through the
    brute-force scan instead of the tree search.
    """
    if not (0.0 < ratio <= 1.0):
        raise ValueError("ratio must be in (0, 1]")
    out: list[MatchResult] = []
    for qi, (desc, sign) in enumerate(queries):
        if use_linear:
            nn = linear_scan(forest, desc, sign, k=2, sign_filter=sign_filter)
        else:
            nn = knn_search(
                forest, desc, sign, k=2, checks=checks, sign_filter=sign_filter,
                stats=stats,
            )
        if len(nn) == 0:
            out.append(MatchResult(qi, None, math.inf, None))
        elif len(nn) == 1:
            out.append(MatchResult(qi, nn[0][0], nn[0][1], None))
        else:
            (i1, d1), (_, d2) = nn
            accepted = d1 < ratio * d2
            out.append(MatchResult(qi, i1 if accepted else None, d1, d2))
    return out
