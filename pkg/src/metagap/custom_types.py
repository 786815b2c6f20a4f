"""Custom types used throughout metagap."""

from typing import Literal

import numpy as np
import numpy.typing as npt

# A two-phase pixel grid, 0 = soft and 1 = stiff.
type BitMatrix = npt.NDArray[np.uint8]

# A stack of pixel grids, shape (batch, n, n).
type BitMatrices = npt.NDArray[np.uint8]

# Frequency interval in Hz, (lo, hi).
type Interval = tuple[float, float]

type Plane = Literal["strain", "stress"]

type SolverKind = Literal["dense", "sparse", "auto"]

type LabelMode = Literal["intersect", "min-width", "cover"]

# Row/column pixel offset.
type Offset = tuple[int, int]
