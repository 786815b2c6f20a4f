"""
Threshold binarization of shape-frequency features.

Every binary column reads `feature > threshold`. Thresholds are exact fractions so a
column computed on coarse counts and one computed on fine counts with another
denominator agree on the boundary.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import numpy.typing as npt

logger = logging.getLogger(__name__)

DEFAULT_MAX_THRESHOLDS = 64


@dataclass(frozen=True)
class BinaryColumn:
    """
    Where a binary column comes from: source feature index and name, and the threshold.
    """

    feature: int
    name: str
    threshold: Fraction


@dataclass(frozen=True, eq=False)
class BinarizedFeatures:
    """
    Binary design matrix with the column bookkeeping needed to apply it to new data.

    ```python
    import numpy as np
    from metagap.tree.binarize import binarize
    counts = np.array([[20], [40], [40]])
    binf = binarize(counts, 100, ("plus",))
    assert [str(c.threshold) for c in binf.columns] == ["3/10"]
    assert binf.matrix[:, 0].tolist() == [False, True, True]
    ```
    """

    matrix: npt.NDArray[np.bool_]
    columns: tuple[BinaryColumn, ...]
    names: tuple[str, ...]

    @property
    def num_columns(self) -> int:
        return len(self.columns)

    def thresholds(self, feature: int) -> list[Fraction]:
        return [c.threshold for c in self.columns if c.feature == feature]

    def transform(self, counts: npt.NDArray[np.integer], denominator: int) -> npt.NDArray[np.bool_]:
        """
        Apply these columns to another count matrix, possibly with a different denominator.
        """
        return transform(counts, denominator, self.columns, len(self.names))


def binarize(
    counts: npt.NDArray[np.integer],
    denominator: int,
    names: Sequence[str],
    max_thresholds: int = DEFAULT_MAX_THRESHOLDS,
) -> BinarizedFeatures:
    """
    Build threshold columns from an (N, F) matrix of feature numerators.

    Thresholds are midpoints between consecutive distinct observed values. When a
    feature has more than `max_thresholds` of them, evenly spaced ones are kept:
    midpoint indices `round(k·U / (cap + 1)) - 1` for k = 1..cap over the U distinct values.
    Constant features produce no columns.
    """
    if max_thresholds < 1:
        raise ValueError(f"max_thresholds must be >= 1, got {max_thresholds}")
    counts = np.asarray(counts, dtype=np.int64)
    if counts.ndim != 2 or counts.shape[1] != len(names):
        raise ValueError(f"Expected an (N, {len(names)}) matrix, got shape {counts.shape}")
    if denominator <= 0:
        raise ValueError(f"denominator must be positive, got {denominator}")

    columns: list[BinaryColumn] = []
    for f, name in enumerate(names):
        distinct = np.unique(counts[:, f])
        if len(distinct) < 2:
            logger.info("Feature %s is constant, no thresholds", name)
            continue
        for i in _midpoint_indices(len(distinct), max_thresholds):
            a, b = int(distinct[i]), int(distinct[i + 1])
            columns.append(BinaryColumn(f, name, Fraction(a + b, 2 * denominator)))

    matrix = transform(counts, denominator, columns, len(names))
    logger.debug("Binarized %d features into %d columns", len(names), len(columns))
    return BinarizedFeatures(matrix=matrix, columns=tuple(columns), names=tuple(names))


def transform(
    counts: npt.NDArray[np.integer], denominator: int, columns: Sequence[BinaryColumn], num_features: int
) -> npt.NDArray[np.bool_]:
    counts = np.asarray(counts, dtype=np.int64)
    if counts.ndim != 2 or counts.shape[1] != num_features:
        raise ValueError(f"Expected an (N, {num_features}) matrix, got shape {counts.shape}")
    out = np.zeros((counts.shape[0], len(columns)), dtype=bool)
    for j, col in enumerate(columns):
        # c/d > p/q  <=>  c·q > p·d
        t = col.threshold
        out[:, j] = counts[:, col.feature] * t.denominator > t.numerator * denominator
    return out


def _midpoint_indices(num_distinct: int, cap: int) -> list[int]:
    available = num_distinct - 1
    if available <= cap:
        return list(range(available))
    picked = (int(np.floor(k * num_distinct / (cap + 1) + 0.5)) - 1 for k in range(1, cap + 1))
    return sorted(set(picked))
