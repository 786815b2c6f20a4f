from collections.abc import Callable, Iterable

import numpy as np
import pytest

from metagap.custom_types import Interval
from metagap.dataset import DatasetManifest, DesignRecord, LabeledDataset
from metagap.dispersion.label import label

TARGET: Interval = (10_000.0, 20_000.0)
# a gap inside TARGET, so positives are labeled 1 under every policy but cover
POSITIVE_GAPS: tuple[Interval, ...] = ((12_000.0, 14_000.0),)


def make_dataset(
    ids: Iterable[int],
    positive: Callable[[int], bool],
    ranges: tuple[Interval, ...] = (TARGET,),
    resolution: int = 10,
) -> LabeledDataset:
    """A dataset with made-up gaps, labeled consistently with its manifest."""
    manifest = DatasetManifest(resolution=resolution, ranges=ranges, version="test")
    records = []
    for i in ids:
        gaps = POSITIVE_GAPS if positive(i) else ()
        records.append(DesignRecord(int(i), gaps, tuple(label(gaps, p) for p in manifest.policies)))
    return LabeledDataset(manifest, tuple(records))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture(scope="module")
def pixel0_dataset() -> LabeledDataset:
    """All 2^15 coarse designs, positive iff irreducible pixel 0 is stiff and pixel 1 is soft."""
    return make_dataset(range(1 << 15), lambda i: (i & 0b11) == 0b01)
