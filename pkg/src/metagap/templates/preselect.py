"""
Candidate templates by exhaustive ternary enumeration.

Every template over the irreducible pixels is visited depth-first, one position at a
time, carrying the bitset of designs that still match. Fixing a free entry can only
shrink that set, so a branch is abandoned as soon as it falls below the minimum
support. The first positions are fixed per shard and shards run in a process pool.
"""

import itertools
import logging
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial

import numpy as np
import numpy.typing as npt

from metagap.bitset import bitset
from metagap.templates.template import SYMBOLS, Template, meets_precision
from metagap.unitcell import ids_to_bits, irreducible_count

logger = logging.getLogger(__name__)

DEFAULT_MIN_SUPPORT = 10
SHARD_DEPTH = 4


@dataclass(frozen=True)
class Candidate:
    template: Template
    support: int
    positives: int
    index: int

    @property
    def precision(self) -> float:
        return self.positives / self.support if self.support else 0.0


@dataclass(frozen=True)
class PreselectReport:
    """
    Surviving candidates ordered by support (descending) then enumeration index.

    `enumerated` is the size of the whole ternary space; `visited` counts the search
    nodes actually expanded and `pruned` the branches cut by the support bound.
    """

    candidates: tuple[Candidate, ...]
    enumerated: int
    visited: int
    pruned: int


@dataclass(frozen=True)
class _ScanContext:
    zeros: tuple[int, ...]
    ones: tuple[int, ...]
    positives: int
    everyone: int
    min_support: int
    min_precision: float


def preselect(
    ids: Sequence[int] | npt.NDArray[np.integer],
    labels: npt.NDArray[np.integer],
    min_support: int = DEFAULT_MIN_SUPPORT,
    min_precision: float = 0.93,
    resolution: int = 10,
    jobs: int = 1,
) -> PreselectReport:
    """
    All templates matching at least `min_support` designs with precision >= `min_precision`.

    ```python
    import numpy as np
    from metagap.templates.preselect import preselect
    ids = np.arange(1 << 15)
    labels = (ids & 1).astype(np.uint8)  # positive iff irreducible pixel 0 is stiff
    report = preselect(ids, labels, min_support=1 << 14, min_precision=1.0)
    assert [c.template.pattern for c in report.candidates] == ["1" + "*" * 14]
    ```
    """
    if min_support < 1:
        raise ValueError(f"min_support must be >= 1, got {min_support}")
    if not 0 <= min_precision <= 1:
        raise ValueError(f"min_precision must be in [0, 1], got {min_precision}")
    ids = np.asarray(ids, dtype=np.int64)
    y = np.asarray(labels).astype(bool)
    if y.shape != ids.shape:
        raise ValueError(f"Got {len(ids)} ids but {len(y)} labels")

    t = irreducible_count(resolution)
    bits = ids_to_bits(ids, resolution).astype(bool)
    ctx = _ScanContext(
        zeros=tuple(bitset(~bits[:, i]) for i in range(t)),
        ones=tuple(bitset(bits[:, i]) for i in range(t)),
        positives=bitset(y),
        everyone=(1 << len(ids)) - 1,
        min_support=min_support,
        min_precision=min_precision,
    )

    depth = min(SHARD_DEPTH, t)
    shards = list(itertools.product(range(3), repeat=depth))
    scan = partial(_scan_shard, ctx=ctx, depth=depth)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(scan, shards, chunksize=max(1, len(shards) // (4 * jobs))))
    else:
        results = [scan(shard) for shard in shards]

    found: list[tuple[int, int, int]] = []
    visited = pruned = 0
    for k, (hits, v, p) in enumerate(results, start=1):
        found.extend(hits)
        visited += v
        pruned += p
        logger.debug("Shard %d/%d: %d candidates", k, len(shards), len(hits))

    found.sort(key=lambda h: (-h[1], h[0]))
    candidates = tuple(Candidate(_decode(index, t, resolution), sup, pos, index) for index, sup, pos in found)
    logger.info("Pre-selection kept %d of %d templates (%d nodes visited)", len(candidates), 3**t, visited)
    return PreselectReport(candidates=candidates, enumerated=3**t, visited=visited, pruned=pruned)


def _scan_shard(prefix: tuple[int, ...], ctx: _ScanContext, depth: int) -> tuple[list[tuple[int, int, int]], int, int]:
    t = len(ctx.ones)
    hits: list[tuple[int, int, int]] = []
    visited = 0
    pruned = 0

    support = ctx.everyone
    index = 0
    for i, digit in enumerate(prefix):
        support = _narrow(support, ctx, i, digit)
        index += digit * 3**i
        if support.bit_count() < ctx.min_support:
            return hits, 1, 1

    def walk(i: int, support: int, index: int):
        nonlocal visited, pruned
        visited += 1
        count = support.bit_count()
        if count < ctx.min_support:
            pruned += 1
            return
        if i == t:
            pos = (support & ctx.positives).bit_count()
            if meets_precision(pos, count, ctx.min_precision):
                hits.append((index, count, pos))
            return
        weight = 3**i
        walk(i + 1, support & ctx.zeros[i], index)
        walk(i + 1, support & ctx.ones[i], index + weight)
        walk(i + 1, support, index + 2 * weight)

    walk(depth, support, index)
    return hits, visited, pruned


def _narrow(support: int, ctx: _ScanContext, i: int, digit: int) -> int:
    match digit:
        case 0:
            return support & ctx.zeros[i]
        case 1:
            return support & ctx.ones[i]
        case _:
            return support


def _decode(index: int, length: int, resolution: int) -> Template:
    chars = []
    for _ in range(length):
        index, digit = divmod(index, 3)
        chars.append(SYMBOLS[digit])
    return Template("".join(chars), resolution)


def support_counts(
    template: Template, ids: npt.NDArray[np.integer], labels: npt.NDArray[np.integer]
) -> tuple[int, int]:
    """
    (support, positives) of one template by direct matching, without bitsets.
    """
    hit = template.matches_ids(ids)
    return int(hit.sum()), int((hit & np.asarray(labels).astype(bool)).sum())
