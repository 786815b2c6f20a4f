"""
Exact branch-and-bound search for sparse decision trees.

Trees are enumerated by deciding subproblems in preorder: the leftmost open subproblem
becomes a leaf (predicting 0 or 1) or splits on a binary column. The objectives only get
worse as false positives, false negatives or leaves grow, so a partial tree is bounded by
giving every open subproblem the fewest errors it could possibly make, spread between
false positives and false negatives in the most favourable way. Those error floors are:

- a subproblem that must become a leaf makes `min(positives, negatives)` errors;
- one with a single level left makes at least the errors of its best depth-1 subtree;
- deeper ones make at least one error per minority row among identical rows with
  conflicting labels, which no split can separate.

Subproblems with at most one level left are not searched. Their Pareto frontier of
(false positives, false negatives, leaves) is computed once per support and cached, and the
search picks among its points. Splits that cut a support into the same two halves as a
lower-index column are skipped.

The incumbent is replaced only by a strictly better tree, or an equal one whose decision
sequence sorts earlier, so fits are reproducible.
"""

import logging
import math
import time
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt

from metagap.bitset import bitset
from metagap.errors import InfeasibleError
from metagap.tree.binarize import BinarizedFeatures
from metagap.tree.model import Leaf, Node, SparseTree, Split
from metagap.tree.objective import Objective

logger = logging.getLogger(__name__)

DEFAULT_DEPTH = 4
DEFAULT_TIME_LIMIT = 600.0

# bounds within this of the incumbent are still explored
_BOUND_SLACK = 1e-12
_CHECK_EVERY = 256
# per-support caches are dropped wholesale past this many entries
_CACHE_LIMIT = 1 << 17

# (0, prediction) for a leaf, (1, column) for a split
type Decision = tuple[int, int]
type Pending = tuple[tuple[int, int], ...]
# (false positives, false negatives, leaves, preorder decisions) of a finished subtree
type Outcome = tuple[int, int, int, tuple[Decision, ...]]


@dataclass(frozen=True)
class TreeFit:
    """
    Result of a tree search. `bound` is an upper bound on the best achievable value;
    it equals `value` when the search finished.
    """

    tree: SparseTree
    value: float
    bound: float
    optimal: bool
    nodes: int
    elapsed: float = field(compare=False)

    @property
    def gap(self) -> float:
        return max(self.bound - self.value, 0.0)


class _Timeout(Exception):
    pass


class _Search:
    def __init__(
        self,
        data: BinarizedFeatures,
        labels: npt.NDArray[np.integer],
        objective: Objective,
        depth_limit: int,
        time_limit: float | None,
        trace: list[tuple[float, float]] | None,
    ):
        self.data = data
        self.objective = objective
        self.depth_limit = depth_limit
        self.trace = trace
        self.deadline = None if time_limit is None else time.monotonic() + time_limit

        y = np.asarray(labels).astype(bool)
        self.cols = [bitset(data.matrix[:, j]) for j in range(data.num_columns)]
        self.pos_mask = bitset(y)
        self.all_mask = (1 << len(y)) - 1
        self.P = int(y.sum())
        self.N = len(y) - self.P
        self.conflicts = _conflict_groups(data.matrix, y)
        self.conflict_mask = 0
        for gp, gn in self.conflicts:
            self.conflict_mask |= gp | gn

        self._floors: dict[int, int] = {}
        self._splits: dict[int, tuple[int, ...]] = {}
        self._frontiers: dict[int, tuple[Outcome, ...]] = {}

        self.best = -math.inf
        self.best_decisions: tuple[Decision, ...] = ()
        self.open_bound = -math.inf
        self.nodes = 0

    def counts(self, support: int) -> tuple[int, int]:
        pos = (support & self.pos_mask).bit_count()
        return pos, support.bit_count() - pos

    def floor(self, support: int) -> int:
        """
        Errors no tree can avoid inside `support`: identical rows with both labels.
        """
        if not support & self.conflict_mask:
            return 0
        cached = self._floors.get(support)
        if cached is None:
            cached = sum(min((support & gp).bit_count(), (support & gn).bit_count()) for gp, gn in self.conflicts)
            _remember(self._floors, support, cached)
        return cached

    def splits(self, support: int) -> tuple[int, ...]:
        """
        Columns that cut `support` into two non-empty halves, one column per distinct cut.
        """
        cached = self._splits.get(support)
        if cached is None:
            seen: set[int] = set()
            out = []
            for j, col in enumerate(self.cols):
                right = support & col
                if not right or right == support:
                    continue
                # a cut and its mirror image give trees of equal value
                key = min(right, support ^ right)
                if key not in seen:
                    seen.add(key)
                    out.append(j)
            cached = tuple(out)
            _remember(self._splits, support, cached)
        return cached

    def frontier(self, support: int, depth: int) -> tuple[Outcome, ...]:
        """
        Non-dominated outcomes of every subtree of `support` with at most one level,
        or a single leaf when `depth` is 0 or the support is pure.
        """
        pos, neg = self.counts(support)
        leaves: list[Outcome] = [(0, pos, 1, ((0, 0),)), (neg, 0, 1, ((0, 1),))]
        if depth == 0 or not pos or not neg:
            return _pareto(leaves)
        cached = self._frontiers.get(support)
        if cached is None:
            options = leaves
            for j, col in enumerate(self.cols):
                right = support & col
                if not right or right == support:
                    continue
                rp, rn = self.counts(right)
                lp, ln = pos - rp, neg - rn
                # children with the same label are never better than the plain leaf
                options.append((rn, lp, 2, ((1, j), (0, 0), (0, 1))))
                options.append((ln, rp, 2, ((1, j), (0, 1), (0, 0))))
            cached = _pareto(options)
            _remember(self._frontiers, support, cached)
        return cached

    def need(self, support: int, depth: int) -> int:
        """
        Fewest errors any subtree of `support` within `depth` more levels can make.
        """
        if depth <= 1:
            return min(fp + fn for fp, fn, _, _ in self.frontier(support, depth))
        return self.floor(support)

    def bound(self, fp: int, fn: int, need: int, leaves: int) -> float:
        return self.objective.best_split_of_errors(fp, fn, need, self.P, self.N) - self.objective.lam * leaves

    def offer(self, value: float, decisions: tuple[Decision, ...]):
        if value > self.best or (value == self.best and decisions < self.best_decisions):
            if value > self.best:
                logger.info("Tree incumbent %.6f after %d nodes", value, self.nodes)
            self.best = value
            self.best_decisions = decisions

    def prunable(self, bound: float, prefix: tuple[Decision, ...]) -> bool:
        if bound < self.best - _BOUND_SLACK:
            return True
        return bound <= self.best + _BOUND_SLACK and prefix > self.best_decisions

    def tick(self):
        self.nodes += 1
        if self.deadline is not None and self.nodes % _CHECK_EVERY == 0 and time.monotonic() > self.deadline:
            raise _Timeout

    def leave_open(self, bounds: Iterable[float]):
        self.open_bound = max(self.open_bound, *bounds, -math.inf)

    def expand(self, pending: Pending, fp: int, fn: int, leaves: int, need: int, prefix: tuple[Decision, ...]) -> float:
        """
        Best completed value below this partial tree; -inf when everything was pruned.

        `need` is the sum of `self.need` over the pending subproblems.
        """
        if not pending:
            value = self.objective.penalized(fp, fn, leaves, self.P, self.N)
            self.offer(value, prefix)
            return value

        node_bound = self.bound(fp, fn, need, leaves + len(pending))
        try:
            self.tick()
        except _Timeout:
            self.leave_open([node_bound])
            raise
        if self.prunable(node_bound, prefix):
            return -math.inf

        (support, depth), rest = pending[0], pending[1:]
        pos, neg = self.counts(support)
        rest_need = need - self.need(support, depth)
        rest_leaves = leaves + len(rest)
        best = -math.inf

        if depth <= 1 or not pos or not neg:
            outcomes = self.frontier(support, depth)
            for i, (ofp, ofn, oleaves, decisions) in enumerate(outcomes):
                try:
                    value = self.expand(rest, fp + ofp, fn + ofn, leaves + oleaves, rest_need, prefix + decisions)
                except _Timeout:
                    self.leave_open(
                        self.bound(fp + o[0], fn + o[1], rest_need, rest_leaves + o[2]) for o in outcomes[i + 1 :]
                    )
                    raise
                best = max(best, value)
        else:
            leaf_choices = [((0, 0), fp, fn + pos), ((0, 1), fp + neg, fn)]
            split_bound = self.bound(fp, fn, need, rest_leaves + 2)
            columns = self.splits(support)
            for i, (decision, lfp, lfn) in enumerate(leaf_choices):
                try:
                    value = self.expand(rest, lfp, lfn, leaves + 1, rest_need, prefix + (decision,))
                except _Timeout:
                    untried = [self.bound(f, n, rest_need, rest_leaves + 1) for _, f, n in leaf_choices[i + 1 :]]
                    self.leave_open([*untried, split_bound] if columns else untried)
                    raise
                best = max(best, value)
            for i, j in enumerate(columns):
                decision = (1, j)
                # later columns sort later, so none of them can win either
                if self.prunable(split_bound, prefix + (decision,)):
                    break
                right = support & self.cols[j]
                left = support ^ right
                child_need = rest_need + self.need(left, depth - 1) + self.need(right, depth - 1)
                if self.prunable(self.bound(fp, fn, child_need, rest_leaves + 2), prefix + (decision,)):
                    continue
                children = ((left, depth - 1), (right, depth - 1))
                try:
                    value = self.expand(children + rest, fp, fn, leaves, child_need, prefix + (decision,))
                except _Timeout:
                    if i + 1 < len(columns):
                        self.leave_open([split_bound])
                    raise
                best = max(best, value)

        if self.trace is not None:
            self.trace.append((node_bound, best))
        return best

    def greedy(self) -> tuple[Decision, ...]:
        """
        Top-down greedy tree: a leaf is split on the column that most improves the whole
        tree's objective, children labelled optimally, while that beats leaving it a leaf.
        """
        root = self.all_mask
        pos, neg = self.counts(root)
        totals = {"fp": 0, "fn": 0, "leaves": 1}
        root_pred = self._best_label(pos, neg, totals)
        if root_pred:
            totals["fp"] += neg
        else:
            totals["fn"] += pos

        def grow(support: int, depth: int, pred: int) -> tuple[Decision, ...]:
            pos, neg = self.counts(support)
            # remove this leaf's contribution before trying replacements
            base_fp = totals["fp"] - (neg if pred else 0)
            base_fn = totals["fn"] - (0 if pred else pos)
            current = self.objective.penalized(totals["fp"], totals["fn"], totals["leaves"], self.P, self.N)
            best: tuple[float, int, int, int] | None = None
            if depth > 0 and pos and neg:
                for j in self.splits(support):
                    right = support & self.cols[j]
                    (rp, rn) = self.counts(right)
                    lp, ln = pos - rp, neg - rn
                    for lpred in (0, 1):
                        for rpred in (0, 1):
                            fp = base_fp + (ln if lpred else 0) + (rn if rpred else 0)
                            fn = base_fn + (0 if lpred else lp) + (0 if rpred else rp)
                            value = self.objective.penalized(fp, fn, totals["leaves"] + 1, self.P, self.N)
                            if value > current and (best is None or value > best[0]):
                                best = (value, j, lpred, rpred)
            if best is None:
                return ((0, pred),)
            _, j, lpred, rpred = best
            right = support & self.cols[j]
            left = support ^ right
            (lp, ln), (rp, rn) = self.counts(left), self.counts(right)
            totals["fp"] = base_fp + (ln if lpred else 0) + (rn if rpred else 0)
            totals["fn"] = base_fn + (0 if lpred else lp) + (0 if rpred else rp)
            totals["leaves"] += 1
            return ((1, j),) + grow(left, depth - 1, lpred) + grow(right, depth - 1, rpred)

        return grow(root, self.depth_limit, root_pred)

    def _best_label(self, pos: int, neg: int, totals: dict[str, int]) -> int:
        as_zero = self.objective.penalized(totals["fp"], totals["fn"] + pos, totals["leaves"], self.P, self.N)
        as_one = self.objective.penalized(totals["fp"] + neg, totals["fn"], totals["leaves"], self.P, self.N)
        return 1 if as_one > as_zero else 0

    def value_of(self, decisions: Sequence[Decision]) -> float:
        fp = fn = leaves = 0
        for support, decision in _walk_decisions(decisions, self.all_mask, self.cols):
            if decision[0] == 0:
                pos, neg = self.counts(support)
                leaves += 1
                if decision[1]:
                    fp += neg
                else:
                    fn += pos
        return self.objective.penalized(fp, fn, leaves, self.P, self.N)

    def build(self, decisions: Sequence[Decision]) -> SparseTree:
        it = iter(decisions)

        def node(support: int) -> Node:
            kind, arg = next(it)
            if kind == 0:
                pos, neg = self.counts(support)
                return Leaf(arg, pos, neg)
            col = self.cols[arg]
            return Split(self.data.columns[arg], node(support & ~col), node(support & col))

        return SparseTree(node(self.all_mask), self.data.names)


def _remember[K, V](cache: dict[K, V], key: K, value: V):
    if len(cache) >= _CACHE_LIMIT:
        cache.clear()
    cache[key] = value


def _pareto(options: Iterable[Outcome]) -> tuple[Outcome, ...]:
    """
    Outcomes not dominated in (false positives, false negatives, leaves); among equal
    counts the earliest decision sequence is kept.
    """
    kept: list[Outcome] = []
    # anything dominating an outcome sorts before it
    for o in sorted(options):
        if not any(k[0] <= o[0] and k[1] <= o[1] and k[2] <= o[2] for k in kept):
            kept.append(o)
    return tuple(kept)


def _walk_decisions(decisions: Sequence[Decision], root: int, cols: Sequence[int]):
    stack = [root]
    for decision in decisions:
        support = stack.pop()
        yield support, decision
        if decision[0] == 1:
            col = cols[decision[1]]
            stack.extend((support & col, support & ~col))


def _conflict_groups(matrix: npt.NDArray[np.bool_], y: npt.NDArray[np.bool_]) -> list[tuple[int, int]]:
    """
    (positives, negatives) bitsets of every group of identical rows holding both labels.
    """
    if matrix.shape[1] == 0:
        groups = np.zeros(len(y), dtype=np.intp)
    else:
        _, groups = np.unique(matrix, axis=0, return_inverse=True)
        groups = groups.reshape(-1)
    out: list[tuple[int, int]] = []
    for g in np.unique(groups):
        members = groups == g
        gp, gn = members & y, members & ~y
        if gp.any() and gn.any():
            out.append((bitset(gp), bitset(gn)))
    return out


def fit_optimal_tree(
    data: BinarizedFeatures,
    labels: npt.NDArray[np.integer],
    objective: Objective,
    depth_limit: int = DEFAULT_DEPTH,
    time_limit: float | None = None,
    trace: list[tuple[float, float]] | None = None,
) -> TreeFit:
    """
    Tree maximizing `objective - lam * leaves` among all trees of depth <= `depth_limit`.

    The search starts from a greedy tree. When `time_limit` (seconds) runs out the best
    tree so far is returned with `optimal=False` and an upper bound on what was left
    unexplored. If `trace` is given, a `(bound, best found below)` pair is appended for
    every fully explored search node.
    """
    if depth_limit < 1:
        raise ValueError(f"depth_limit must be >= 1, got {depth_limit}")
    y = np.asarray(labels)
    if y.shape != (data.matrix.shape[0],):
        raise ValueError(f"Expected {data.matrix.shape[0]} labels, got shape {y.shape}")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("Labels must be 0 or 1")
    if y.all() or not y.any():
        raise ValueError("Need at least one positive and one negative label")
    if data.num_columns == 0:
        raise InfeasibleError("No binary features to split on; every feature is constant")

    start = time.monotonic()
    search = _Search(data, y, objective, depth_limit, time_limit, trace)
    seed = search.greedy()
    search.best = search.value_of(seed)
    search.best_decisions = seed
    logger.info("Greedy tree %.6f with %d leaves", search.best, sum(1 for d in seed if d[0] == 0))

    root: Pending = ((search.all_mask, depth_limit),)
    optimal = True
    try:
        search.expand(root, 0, 0, 0, search.need(search.all_mask, depth_limit), ())
    except _Timeout:
        optimal = False
        logger.warning("Tree search hit the time limit after %d nodes", search.nodes)

    bound = search.best if optimal else max(search.best, search.open_bound)
    elapsed = time.monotonic() - start
    logger.info("Tree search done: value %.6f, bound %.6f, %d nodes, %.1fs", search.best, bound, search.nodes, elapsed)
    return TreeFit(
        tree=search.build(search.best_decisions),
        value=search.best,
        bound=bound,
        optimal=optimal,
        nodes=search.nodes,
        elapsed=elapsed,
    )
