import math
from fractions import Fraction

import numpy as np
import pytest

from metagap.errors import InfeasibleError
from metagap.sff import default_library, featurize_ids
from metagap.tools.commands import _parser
from metagap.tree.binarize import BinarizedFeatures, BinaryColumn, binarize
from metagap.tree.model import Leaf
from metagap.tree.objective import Objective
from metagap.tree.search import fit_optimal_tree

OBJECTIVES = [
    Objective("prec-support", K=1.0, eps=1e-9, lam=0.005),
    Objective("prec-support", K=3.0, eps=1e-9, lam=0.02),
    Objective("balanced-accuracy", lam=0.01),
]


def _features(matrix: np.ndarray) -> BinarizedFeatures:
    d = matrix.shape[1]
    columns = tuple(BinaryColumn(j, f"f{j}", Fraction(1, 2)) for j in range(d))
    return BinarizedFeatures(matrix.astype(bool), columns, tuple(f"f{j}" for j in range(d)))


def _outcomes(matrix: np.ndarray, y: np.ndarray, rows: np.ndarray, depth: int) -> set[tuple[int, int, int]]:
    """Every (FP, FN, leaves) some tree of this depth can produce on `rows`."""
    pos = int(y[rows].sum())
    neg = int(rows.sum()) - pos
    out = {(0, pos, 1), (neg, 0, 1)}
    if depth == 0:
        return out
    for j in range(matrix.shape[1]):
        right = rows & matrix[:, j]
        left = rows & ~matrix[:, j]
        if not right.any() or not left.any():
            continue
        for lfp, lfn, ll in _outcomes(matrix, y, left, depth - 1):
            for rfp, rfn, rl in _outcomes(matrix, y, right, depth - 1):
                out.add((lfp + rfp, lfn + rfn, ll + rl))
    return out


def exhaustive_best(matrix: np.ndarray, y: np.ndarray, obj: Objective, depth: int) -> float:
    pos = int(y.sum())
    neg = len(y) - pos
    rows = np.ones(len(y), dtype=bool)
    return max(obj.penalized(fp, fn, leaves, pos, neg) for fp, fn, leaves in _outcomes(matrix, y, rows, depth))


def _instance(rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    n = int(rng.integers(8, 65))
    d = int(rng.integers(1, 9))
    matrix = rng.random((n, d)) < rng.uniform(0.2, 0.8)
    # labels loosely follow the first two columns so good trees exist
    score = matrix[:, 0].astype(float) + 0.5 * matrix[:, min(1, d - 1)] + rng.normal(0, 0.6, n)
    y = (score > np.median(score)).astype(np.uint8)
    y[0], y[1] = 0, 1
    return matrix, y


def test_matches_exhaustive_search(rng: np.random.Generator):
    for k in range(30):
        matrix, y = _instance(rng)
        obj = OBJECTIVES[k % len(OBJECTIVES)]
        depth = 1 + k % 2
        fit = fit_optimal_tree(_features(matrix), y, obj, depth_limit=depth)
        assert fit.optimal
        assert fit.value == pytest.approx(exhaustive_best(matrix, y, obj, depth), rel=1e-12, abs=1e-12)
        assert fit.bound == fit.value
        assert fit.tree.depth <= depth


def test_reported_value_matches_tree(rng: np.random.Generator):
    matrix, y = _instance(rng)
    obj = OBJECTIVES[0]
    fit = fit_optimal_tree(_features(matrix), y, obj, depth_limit=3)
    fp = sum(leaf.negatives for leaf in fit.tree.leaves() if leaf.prediction == 1)
    fn = sum(leaf.positives for leaf in fit.tree.leaves() if leaf.prediction == 0)
    assert sum(leaf.positives for leaf in fit.tree.leaves()) == int(y.sum())
    assert fit.value == pytest.approx(obj.penalized(fp, fn, fit.tree.num_leaves, int(y.sum()), len(y) - int(y.sum())))


def test_trace_bounds_are_sound(rng: np.random.Generator):
    matrix, y = _instance(rng)
    trace: list[tuple[float, float]] = []
    fit_optimal_tree(_features(matrix), y, OBJECTIVES[2], depth_limit=3, trace=trace)
    assert trace
    for bound, best in trace:
        assert best <= bound + 1e-9


def test_larger_penalty_never_adds_leaves(rng: np.random.Generator):
    matrix, y = _instance(rng)
    leaves = [
        fit_optimal_tree(_features(matrix), y, Objective("balanced-accuracy", lam=lam), depth_limit=3).tree.num_leaves
        for lam in (0.0, 0.01, 0.05, 0.2, 1.0)
    ]
    assert leaves == sorted(leaves, reverse=True)
    assert leaves[-1] == 1


def test_deterministic(rng: np.random.Generator):
    matrix, y = _instance(rng)
    a = fit_optimal_tree(_features(matrix), y, OBJECTIVES[0], depth_limit=3)
    b = fit_optimal_tree(_features(matrix), y, OBJECTIVES[0], depth_limit=3)
    assert a.tree == b.tree and a.value == b.value


def test_separable_data_gets_a_perfect_tree():
    matrix = np.array([[0, 0], [0, 1], [1, 0], [1, 1]] * 5, dtype=bool)
    y = (matrix[:, 0] & matrix[:, 1]).astype(np.uint8)
    fit = fit_optimal_tree(_features(matrix), y, Objective("balanced-accuracy", lam=0.001), depth_limit=2)
    assert fit.value == pytest.approx(1.0 - 0.001 * fit.tree.num_leaves)
    assert all(leaf.positives == 0 or leaf.negatives == 0 for leaf in fit.tree.leaves())


def test_time_limit_returns_bounded_tree(rng: np.random.Generator):
    matrix = rng.random((300, 40)) < 0.5
    y = (rng.random(300) < 0.3).astype(np.uint8)
    y[:2] = (0, 1)
    fit = fit_optimal_tree(_features(matrix), y, OBJECTIVES[0], depth_limit=4, time_limit=0.0)
    assert not fit.optimal
    assert fit.bound >= fit.value
    assert math.isfinite(fit.value)
    assert fit.gap == fit.bound - fit.value


def test_works_on_binarized_counts():
    counts = np.array([[10], [20], [30], [40], [50], [60]])
    y = np.array([0, 0, 0, 1, 1, 1], dtype=np.uint8)
    fit = fit_optimal_tree(binarize(counts, 100, ("plus",)), y, Objective("balanced-accuracy"), depth_limit=2)
    assert fit.tree.num_leaves == 2
    assert fit.tree.predict_counts(np.array([[34], [36]]), 100).tolist() == [0, 1]


def test_rejects_bad_input():
    data = _features(np.array([[0], [1]], dtype=bool))
    with pytest.raises(ValueError):
        fit_optimal_tree(data, np.array([1, 1]), OBJECTIVES[0])
    with pytest.raises(ValueError):
        fit_optimal_tree(data, np.array([0, 2]), OBJECTIVES[0])
    with pytest.raises(ValueError):
        fit_optimal_tree(data, np.array([0, 1]), OBJECTIVES[0], depth_limit=0)
    with pytest.raises(InfeasibleError):
        fit_optimal_tree(_features(np.zeros((2, 0), dtype=bool)), np.array([0, 1]), OBJECTIVES[0])


def test_single_leaf_when_nothing_helps():
    matrix = np.array([[0], [1], [0], [1]], dtype=bool)
    y = np.array([0, 0, 1, 1], dtype=np.uint8)
    fit = fit_optimal_tree(_features(matrix), y, Objective("balanced-accuracy", lam=0.01), depth_limit=2)
    assert isinstance(fit.tree.root, Leaf)


def test_matches_exhaustive_search_at_depth_three(rng: np.random.Generator):
    for k in range(8):
        matrix, y = _instance(rng)
        matrix, y = matrix[:32, :5], y[:32]
        y[0], y[1] = 0, 1
        obj = OBJECTIVES[k % len(OBJECTIVES)]
        fit = fit_optimal_tree(_features(matrix), y, obj, depth_limit=3)
        assert fit.optimal
        assert fit.value == pytest.approx(exhaustive_best(matrix, y, obj, 3), rel=1e-12, abs=1e-12)


def test_duplicate_columns_do_not_change_the_fit(rng: np.random.Generator):
    matrix, y = _instance(rng)
    # repeated and complemented columns cut every support the same way
    wide = np.hstack([matrix, matrix, ~matrix])
    narrow_fit = fit_optimal_tree(_features(matrix), y, OBJECTIVES[0], depth_limit=3)
    wide_fit = fit_optimal_tree(_features(wide), y, OBJECTIVES[0], depth_limit=3)
    assert wide_fit.value == narrow_fit.value
    assert wide_fit.tree.root == narrow_fit.tree.root
    assert wide_fit.nodes == narrow_fit.nodes


def test_depth_two_on_many_columns_finishes():
    rng = np.random.default_rng(5)
    matrix = rng.random((1500, 120)) < rng.uniform(0.1, 0.9, size=120)
    y = ((matrix[:, 3] & ~matrix[:, 17]) ^ (rng.random(1500) < 0.05)).astype(np.uint8)
    fit = fit_optimal_tree(_features(matrix), y, OBJECTIVES[0], depth_limit=2, time_limit=120.0)
    assert fit.optimal
    assert fit.gap == 0.0
    assert fit.tree.num_leaves >= 2


def test_cli_tree_search_has_a_finite_time_limit():
    args = _parser().parse_args(["train-tree", "--feats", "f.csv", "--labels", "d.csv", "--range", "10k-20k"])
    assert math.isfinite(args.time_limit) and args.time_limit > 0


@pytest.mark.slow
def test_dataset_sized_depth_two_search_is_exact():
    rng = np.random.default_rng(11)
    ids = rng.choice(1 << 15, size=3277, replace=False)
    table = featurize_ids(ids.tolist(), default_library())
    soft = table.counts[:, 0] * 10 > 6 * table.denominator
    y = (soft ^ (rng.random(len(ids)) < 0.03)).astype(np.uint8)
    data = binarize(table.counts, table.denominator, table.names, 64)
    fit = fit_optimal_tree(data, y, Objective("prec-support", K=1.0, eps=1e-9, lam=0.005), depth_limit=2,
                           time_limit=1800.0)
    assert fit.optimal
