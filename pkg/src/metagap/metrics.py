"""Scores for predictors and generated designs."""

from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
import scipy.ndimage
import scipy.sparse
import scipy.stats
from scipy.sparse.csgraph import connected_components


@dataclass(frozen=True)
class Confusion:
    """
    Confusion counts of a binary predictor.

    ```python
    import numpy as np
    from metagap.metrics import Confusion
    c = Confusion.of(np.array([1, 1, 0, 0]), np.array([1, 0, 1, 0]))
    assert (c.tp, c.fp, c.fn, c.tn) == (1, 1, 1, 1)
    assert c.precision == 0.5 and c.support == 2
    ```
    """

    tp: int
    fp: int
    fn: int
    tn: int

    @classmethod
    def of(cls, truth: npt.ArrayLike, predicted: npt.ArrayLike) -> Confusion:
        y = np.asarray(truth).astype(bool)
        p = np.asarray(predicted).astype(bool)
        if y.shape != p.shape:
            raise ValueError(f"Shape mismatch: {y.shape} vs {p.shape}")
        return cls(
            tp=int((y & p).sum()),
            fp=int((~y & p).sum()),
            fn=int((y & ~p).sum()),
            tn=int((~y & ~p).sum()),
        )

    @property
    def support(self) -> int:
        """
        Number of designs predicted positive.
        """
        return self.tp + self.fp

    @property
    def precision(self) -> float:
        return self.tp / self.support if self.support else 0.0

    @property
    def recall(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def accuracy(self) -> float:
        total = self.tp + self.fp + self.fn + self.tn
        return (self.tp + self.tn) / total if total else 0.0

    @property
    def balanced_accuracy(self) -> float:
        tnr = self.tn / (self.tn + self.fp) if self.tn + self.fp else 0.0
        return (self.recall + tnr) / 2


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    """
    Wilson score interval for a binomial proportion; (0, 1) when there are no trials.

    ```python
    from metagap.metrics import wilson_interval
    lo, hi = wilson_interval(50, 100)
    assert lo < 0.5 < hi and abs((lo + hi) / 2 - 0.5) < 1e-12
    ```
    """
    if not 0 <= successes <= trials:
        raise ValueError(f"Need 0 <= successes <= trials, got {successes}/{trials}")
    if trials == 0:
        return 0.0, 1.0
    z = float(scipy.stats.norm.ppf(0.5 + confidence / 2))
    phat = successes / trials
    denom = 1 + z * z / trials
    centre = (phat + z * z / (2 * trials)) / denom
    half = z * np.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def periodic_clusters(matrix: npt.ArrayLike) -> list[int]:
    """
    Sizes of 4-connected same-phase clusters of a cell tiled periodically.
    """
    m = np.asarray(matrix).astype(bool)
    if m.ndim != 2:
        raise ValueError(f"Expected a 2-D matrix, got shape {m.shape}")
    sizes: list[int] = []
    for phase in (m, ~m):
        labels, count = scipy.ndimage.label(phase)
        if count == 0:
            continue
        # glue labels that touch across the periodic edges
        edges = [
            (labels[:, 0], labels[:, -1]),
            (labels[0, :], labels[-1, :]),
        ]
        rows: list[int] = []
        cols: list[int] = []
        for a, b in edges:
            both = (a > 0) & (b > 0)
            rows.extend(a[both] - 1)
            cols.extend(b[both] - 1)
        graph = scipy.sparse.coo_array((np.ones(len(rows)), (rows, cols)), shape=(count, count))
        _, component = connected_components(graph, directed=False)
        pixel_component = component[labels[phase] - 1]
        sizes.extend(int(s) for s in np.bincount(pixel_component) if s)
    return sizes


def mean_cluster_size(matrix: npt.ArrayLike) -> float:
    """
    Mean size of same-phase clusters on the periodic tiling.

    ```python
    import numpy as np
    from metagap.metrics import mean_cluster_size
    checker = np.indices((4, 4)).sum(axis=0) % 2
    assert mean_cluster_size(checker) == 1.0
    assert mean_cluster_size(np.zeros((4, 4))) == 16.0
    ```
    """
    sizes = periodic_clusters(matrix)
    return float(np.mean(sizes))
