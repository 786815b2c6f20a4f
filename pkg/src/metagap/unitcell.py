"""
Symmetric pixelated unit cells.

A cell of resolution n is stored as its irreducible pixels: the pairs (r, c) with
0 <= r <= c < n/2 in the top-left quadrant, in lexicographic order. Every other pixel
is a copy under the D4 group (horizontal flip, vertical flip, transpose).
"""

from collections.abc import Iterator, Sequence
from dataclasses import dataclass
from functools import cache

import numpy as np
import numpy.typing as npt

from metagap.custom_types import BitMatrices, BitMatrix
from metagap.errors import SymmetryViolation


def irreducible_count(n: int) -> int:
    """
    Number of irreducible pixels T(n) for an n x n cell.

    ```python
    from metagap.unitcell import irreducible_count
    assert irreducible_count(10) == 15
    assert irreducible_count(20) == 55
    ```
    """
    _check_resolution(n)
    h = n // 2
    return h * (h + 1) // 2


def irreducible_index(r: int, c: int, n: int) -> int:
    """
    Index of quadrant pixel (r, c) in the irreducible vector.

    The pair is canonicalised so that r <= c, then enumerated lexicographically.

    ```python
    from metagap.unitcell import irreducible_index
    assert irreducible_index(0, 0, 10) == 0
    assert irreducible_index(1, 3, 10) == 7
    assert irreducible_index(3, 1, 10) == 7
    assert irreducible_index(4, 4, 10) == 14
    ```
    """
    _check_resolution(n)
    h = n // 2
    if not (0 <= r < h and 0 <= c < h):
        raise ValueError(f"Pixel ({r}, {c}) is outside the {h}x{h} quadrant")
    if r > c:
        r, c = c, r
    # rows before r contribute h, h-1, ..., h-r+1 pairs
    return r * h - r * (r - 1) // 2 + (c - r)


@cache
def expansion_map(n: int) -> npt.NDArray[np.intp]:
    """
    n x n array holding, for every pixel, the index of the irreducible pixel it copies.
    """
    h = n // 2
    idx = np.empty((n, n), dtype=np.intp)
    for i in range(n):
        fi = min(i, n - 1 - i)
        for j in range(n):
            fj = min(j, n - 1 - j)
            idx[i, j] = irreducible_index(fi, fj, n)
    assert h * (h + 1) // 2 == idx.max() + 1
    idx.setflags(write=False)
    return idx


@cache
def representative_pixels(n: int) -> npt.NDArray[np.intp]:
    """
    (T(n), 2) array of the canonical quadrant position (r, c), r <= c, of each irreducible pixel.
    """
    h = n // 2
    out = np.array([(r, c) for r in range(h) for c in range(r, h)], dtype=np.intp)
    out.setflags(write=False)
    return out


def d4_images(matrix: npt.NDArray) -> Iterator[npt.NDArray]:
    """
    Yield the matrix under all 8 elements of the D4 group.
    """
    for m in (matrix, matrix.T):
        yield m
        yield m[::-1, :]
        yield m[:, ::-1]
        yield m[::-1, ::-1]


@dataclass(frozen=True)
class UnitCell:
    """
    A two-phase symmetric unit cell.

    `bits` holds the irreducible pixels (0 = soft, 1 = stiff) and `resolution` the
    number of pixels per side.

    ```python
    from metagap.unitcell import UnitCell
    cell = UnitCell.from_id(1, 10)
    assert cell.bits[0] == 1
    assert cell.design_id == 1
    assert cell.expand().sum() == 4
    ```
    """

    resolution: int
    bits: tuple[int, ...]

    def __post_init__(self):
        expected = irreducible_count(self.resolution)
        if len(self.bits) != expected:
            raise ValueError(
                f"A {self.resolution}x{self.resolution} cell needs {expected} irreducible pixels, got {len(self.bits)}"
            )
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError("Irreducible pixels must be 0 or 1")

    @classmethod
    def from_bits(cls, bits: Sequence[int] | npt.NDArray, resolution: int) -> UnitCell:
        return cls(resolution=resolution, bits=tuple(int(b) for b in bits))

    @classmethod
    def from_id(cls, design_id: int, resolution: int = 10) -> UnitCell:
        """
        Build a cell from its design id (irreducible bit vector read with index 0 as least significant bit).
        """
        t = irreducible_count(resolution)
        if not 0 <= design_id < 1 << t:
            raise ValueError(f"Design id {design_id} out of range for resolution {resolution}")
        return cls(resolution=resolution, bits=tuple((design_id >> i) & 1 for i in range(t)))

    @classmethod
    def from_string(cls, text: str, resolution: int) -> UnitCell:
        """
        Parse a bit string where character i is irreducible pixel i.
        """
        if any(ch not in "01" for ch in text):
            raise ValueError(f"Not a bit string: {text!r}")
        return cls(resolution=resolution, bits=tuple(int(ch) for ch in text))

    @property
    def design_id(self) -> int:
        return sum(b << i for i, b in enumerate(self.bits))

    def to_string(self) -> str:
        return "".join(str(b) for b in self.bits)

    def array(self) -> npt.NDArray[np.uint8]:
        return np.asarray(self.bits, dtype=np.uint8)

    def expand(self) -> BitMatrix:
        return expand(self)


def expand(cell: UnitCell) -> BitMatrix:
    """
    Full n x n pixel matrix of a cell.
    """
    return cell.array()[expansion_map(cell.resolution)]


def expand_batch(bits: npt.NDArray, resolution: int) -> BitMatrices:
    """
    Expand a (batch, T(n)) array of irreducible vectors into (batch, n, n) matrices.
    """
    bits = np.asarray(bits, dtype=np.uint8)
    return bits[:, expansion_map(resolution)]


def ids_to_bits(ids: Sequence[int] | npt.NDArray, resolution: int = 10) -> npt.NDArray[np.uint8]:
    """
    (batch, T(n)) irreducible bit array for a batch of design ids.
    """
    t = irreducible_count(resolution)
    arr = np.asarray(ids, dtype=np.int64)[:, None]
    return ((arr >> np.arange(t, dtype=np.int64)) & 1).astype(np.uint8)


def reduce(matrix: npt.NDArray) -> UnitCell:
    """
    Inverse of `expand`: recover the cell from a D4-symmetric matrix.

    Raises `SymmetryViolation` naming the first pixel that differs from its image.
    """
    m = np.asarray(matrix)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"Expected a square matrix, got shape {m.shape}")
    n = m.shape[0]
    _check_resolution(n)
    if not np.isin(m, (0, 1)).all():
        raise ValueError("Pixel values must be 0 or 1")

    # the transpose and the two flips generate D4
    for image, mapping in (
        (m.T, lambda i, j: (j, i)),
        (m[::-1, :], lambda i, j: (n - 1 - i, j)),
        (m[:, ::-1], lambda i, j: (i, n - 1 - j)),
    ):
        diff = np.argwhere(image != m)
        if len(diff):
            i, j = (int(v) for v in diff[0])
            raise SymmetryViolation((i, j), mapping(i, j))

    reps = representative_pixels(n)
    return UnitCell.from_bits(m[reps[:, 0], reps[:, 1]], n)


def refine(cell: UnitCell, factor: int) -> UnitCell:
    """
    Subdivide every pixel into a factor x factor block of the same phase.
    """
    if factor < 1:
        raise ValueError(f"Refinement factor must be >= 1, got {factor}")
    if factor == 1:
        return cell
    fine = np.kron(expand(cell), np.ones((factor, factor), dtype=np.uint8))
    reps = representative_pixels(cell.resolution * factor)
    return UnitCell.from_bits(fine[reps[:, 0], reps[:, 1]], cell.resolution * factor)


def _check_resolution(n: int):
    if n < 2 or n % 2:
        raise ValueError(f"Resolution must be a positive even integer, got {n}")
