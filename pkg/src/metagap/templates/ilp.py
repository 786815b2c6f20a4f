"""
Exact template-set selection: pick at most `s` candidates whose union matches as many
designs as possible while keeping the union's precision at least `p`.

A design counts as covered exactly when a chosen template matches it, so a set is
feasible iff its union precision reaches `p`. The search is depth-first over candidate
indices, including a candidate before excluding it, with a bound that adds the `r`
largest marginal gains still available (r = slots left), capped by how many designs
the best-case positives could carry at precision `p`.
"""

import heapq
import logging
import math
import time
from collections.abc import Sequence
from dataclasses import dataclass, replace

import numpy as np
import numpy.typing as npt

from metagap.templates.preselect import Candidate
from metagap.templates.template import Template, TemplateSet, match_matrix, meets_precision

logger = logging.getLogger(__name__)

DEFAULT_TIME_LIMIT = 1800.0
_CHECK_EVERY = 64


@dataclass(frozen=True, eq=False)
class ILPInstance:
    """
    Candidate templates, which designs each matches, the labels, and the constraints.

    `match[i, j]` is true iff design i matches candidate j.
    """

    templates: tuple[Template, ...]
    match: npt.NDArray[np.bool_]
    labels: npt.NDArray[np.uint8]
    s: int
    p: float
    target: tuple[float, float] = (0.0, 0.0)
    dataset_digest: str = ""

    def __post_init__(self):
        if not self.templates:
            raise ValueError("An ILP instance needs at least one candidate")
        if self.match.shape != (len(self.labels), len(self.templates)):
            raise ValueError(f"Match matrix shape {self.match.shape} != ({len(self.labels)}, {len(self.templates)})")
        if self.s < 1:
            raise ValueError(f"Sparsity s must be >= 1, got {self.s}")
        if not 0 <= self.p <= 1:
            raise ValueError(f"Minimum precision must be in [0, 1], got {self.p}")

    @classmethod
    def from_candidates(
        cls,
        candidates: Sequence[Candidate],
        ids: npt.NDArray[np.integer],
        labels: npt.NDArray[np.integer],
        s: int,
        p: float,
        target: tuple[float, float] = (0.0, 0.0),
        dataset_digest: str = "",
    ) -> ILPInstance:
        templates = tuple(c.template for c in candidates)
        return cls(
            templates=templates,
            match=match_matrix(templates, ids),
            labels=np.asarray(labels, dtype=np.uint8),
            s=s,
            p=p,
            target=target,
            dataset_digest=dataset_digest,
        )

    @property
    def num_candidates(self) -> int:
        return len(self.templates)


class _Timeout(Exception):
    pass


def _pack(mask: npt.NDArray[np.bool_]) -> npt.NDArray[np.uint64]:
    """
    Pack the last axis of a boolean array into little-endian 64-bit words.
    """
    packed = np.packbits(mask, axis=-1, bitorder="little")
    pad = (-packed.shape[-1]) % 8
    if pad:
        packed = np.concatenate([packed, np.zeros((*packed.shape[:-1], pad), dtype=np.uint8)], axis=-1)
    return np.ascontiguousarray(packed).view(np.uint64)


def _popcount(words: npt.NDArray[np.uint64]) -> npt.NDArray[np.int64]:
    return np.bitwise_count(words).sum(axis=-1, dtype=np.int64)


def dominated(cover: npt.NDArray[np.uint64], positives: npt.NDArray[np.uint64]) -> npt.NDArray[np.bool_]:
    """
    Candidates that can be dropped without losing any optimum.

    j is dropped when it covers nothing, or when some kept j' covers the same negatives
    and a superset of j's positives (for identical coverage the lower index is kept).
    """
    pos_cov = cover & positives
    neg_cov = cover & ~positives
    counts = _popcount(pos_cov)
    out = _popcount(cover) == 0
    groups: dict[bytes, list[int]] = {}
    for j in np.flatnonzero(~out):
        groups.setdefault(neg_cov[j].tobytes(), []).append(int(j))
    for members in groups.values():
        kept: list[int] = []
        for j in sorted(members, key=lambda k: (-counts[k], k)):
            if any(not (pos_cov[j] & ~pos_cov[k]).any() for k in kept):
                out[j] = True
            else:
                kept.append(j)
    return out


class _Selector:
    def __init__(self, cover: npt.NDArray[np.uint64], positives: npt.NDArray[np.uint64], s: int, p: float, deadline):
        self.cover = cover
        self.positives = positives
        self.s = s
        self.p = p
        self.deadline = deadline
        self.best = 0
        self.best_positives = 0
        self.best_chosen: tuple[int, ...] = ()
        self.open_bound = 0
        self.nodes = 0

    def tick(self):
        self.nodes += 1
        if self.deadline is not None and self.nodes % _CHECK_EVERY == 0 and time.monotonic() > self.deadline:
            raise _Timeout

    def suffix_bounds(self, start: int, union: npt.NDArray[np.uint64], size: int, pos: int, slots: int):
        """
        Marginal gains of candidates start.. against `union`, and for every k the bound
        on what adding up to `slots` of candidates k.. can reach.
        """
        fresh = self.cover[start:] & ~union
        gains = _popcount(fresh)
        pos_gains = _popcount(fresh & self.positives)
        bounds = np.empty(len(gains), dtype=np.int64)
        top: list[int] = []
        top_pos: list[int] = []
        for k in range(len(gains) - 1, -1, -1):
            for heap, v in ((top, int(gains[k])), (top_pos, int(pos_gains[k]))):
                if len(heap) < slots:
                    heapq.heappush(heap, v)
                elif v > heap[0]:
                    heapq.heapreplace(heap, v)
            by_size = size + sum(top)
            by_precision = math.floor((pos + sum(top_pos)) / self.p + 1e-6) if self.p > 0 else by_size
            bounds[k] = min(by_size, by_precision)
        return gains, pos_gains, bounds

    def dfs(self, start: int, chosen: tuple[int, ...], union: npt.NDArray[np.uint64], size: int, pos: int):
        self.tick()
        slots = self.s - len(chosen)
        if slots == 0 or start >= len(self.cover):
            return
        gains, pos_gains, bounds = self.suffix_bounds(start, union, size, pos, slots)
        k = start
        try:
            for k in range(start, len(self.cover)):
                if bounds[k - start] <= self.best:
                    break
                if gains[k - start] == 0:
                    continue
                nsize = size + int(gains[k - start])
                npos = pos + int(pos_gains[k - start])
                picked = chosen + (k,)
                if nsize > self.best and meets_precision(npos, nsize, self.p):
                    logger.info("Template incumbent: support %d with %d templates", nsize, len(picked))
                    self.best, self.best_positives, self.best_chosen = nsize, npos, picked
                if slots > 1:
                    self.dfs(k + 1, picked, union | self.cover[k], nsize, npos)
        except _Timeout:
            self.open_bound = max(self.open_bound, int(bounds[k - start]))
            raise


def select_ilp(instance: ILPInstance, time_limit: float | None = DEFAULT_TIME_LIMIT) -> TemplateSet:
    """
    Optimal template set for an instance, or the best found before `time_limit` seconds.

    The result has `feasible=False` and no templates when no non-empty set reaches the
    precision constraint.

    ```python
    import numpy as np
    from metagap.templates.ilp import ILPInstance, select_ilp
    from metagap.templates.template import Template

    templates = (Template("1" + "*" * 14), Template("*1" + "*" * 13))
    match = np.array([[1, 0], [1, 1], [0, 1], [0, 1]], dtype=bool)
    labels = np.array([1, 1, 1, 0], dtype=np.uint8)
    tset = select_ilp(ILPInstance(templates, match, labels, s=2, p=0.9))
    assert tset.templates == templates[:1] and tset.support == 2 and tset.optimal
    ```
    """
    start = time.monotonic()
    deadline = None if time_limit is None else start + time_limit
    cover = _pack(instance.match.T)
    positives = _pack(instance.labels.astype(bool))
    drop = dominated(cover, positives)
    keep = np.flatnonzero(~drop)
    logger.info("Dominance kept %d of %d candidates", len(keep), instance.num_candidates)

    selector = _Selector(cover[keep], positives, instance.s, instance.p, deadline)
    optimal = True
    try:
        selector.dfs(0, (), np.zeros_like(positives), 0, 0)
    except _Timeout:
        optimal = False
        logger.warning("Template selection hit the time limit after %d nodes", selector.nodes)

    chosen = [int(keep[k]) for k in selector.best_chosen]
    bound = selector.best if optimal else max(selector.best, selector.open_bound)
    supports = instance.match.sum(axis=0)
    logger.info(
        "Template selection: support %d, bound %d, %d nodes, %.1fs",
        selector.best,
        bound,
        selector.nodes,
        time.monotonic() - start,
    )
    return TemplateSet(
        templates=tuple(instance.templates[j] for j in chosen),
        supports=tuple(int(supports[j]) for j in chosen),
        support=selector.best,
        positives=selector.best_positives,
        s=instance.s,
        p=instance.p,
        optimal=optimal,
        bound=bound,
        feasible=bool(chosen),
        target=instance.target,
        dataset_digest=instance.dataset_digest,
    )


def sweep_sparsity(
    instance: ILPInstance, s_values: Sequence[int], time_limit: float | None = DEFAULT_TIME_LIMIT
) -> list[TemplateSet]:
    """
    One selection per sparsity level, in the order given.
    """
    return [select_ilp(replace(instance, s=s), time_limit) for s in s_values]


def union_counts(match: npt.NDArray[np.bool_], labels: npt.NDArray[np.integer], chosen: Sequence[int]) -> tuple[int, int]:
    """
    (support, positives) of the union of the chosen columns, by direct recount.
    """
    if not chosen:
        return 0, 0
    covered = match[:, list(chosen)].any(axis=1)
    return int(covered.sum()), int((covered & np.asarray(labels).astype(bool)).sum())
