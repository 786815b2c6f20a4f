"""
Shape-frequency features.

For a shape (a set of pixel offsets) the feature is the fraction of placements on the
periodic cell at which every offset lands on soft material. Counts are kept as exact
integers over a known denominator.
"""

import csv
import io
import logging
import re
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
import numpy.typing as npt

from metagap.custom_types import BitMatrices, Offset
from metagap.errors import DataFormatError
from metagap.unitcell import UnitCell, expand, expand_batch, ids_to_bits

logger = logging.getLogger(__name__)

DEFAULT_BASE = 10

_OFFSET_RE = re.compile(r"\(\s*(-?\d+)\s*,\s*(-?\d+)\s*\)")


@dataclass(frozen=True)
class Shape:
    """
    A sliding-window pattern, offsets normalised so the smallest row and column are 0.

    ```python
    from metagap.sff import Shape
    plus = Shape.of("plus", [(0, 1), (1, 0), (1, 1), (1, 2), (2, 1)])
    assert plus.height == 3 and plus.width == 3
    assert Shape.of("bar", [(5, 5), (5, 6)]).offsets == ((0, 0), (0, 1))
    ```
    """

    name: str
    offsets: tuple[Offset, ...]

    @classmethod
    def of(cls, name: str, offsets: Iterable[Offset]) -> Shape:
        pts = {(int(r), int(c)) for r, c in offsets}
        if not pts:
            raise ValueError(f"Shape {name!r} has no offsets")
        r0 = min(r for r, _ in pts)
        c0 = min(c for _, c in pts)
        return cls(name=name, offsets=tuple(sorted((r - r0, c - c0) for r, c in pts)))

    @property
    def height(self) -> int:
        return max(r for r, _ in self.offsets) + 1

    @property
    def width(self) -> int:
        return max(c for _, c in self.offsets) + 1

    def rotate90(self, name: str | None = None) -> Shape:
        return Shape.of(name or f"{self.name}_r90", [(c, -r) for r, c in self.offsets])

    def wrapped(self, n: int) -> tuple[Offset, ...]:
        """
        Offsets reduced modulo n, deduplicated.
        """
        return tuple(sorted({(r % n, c % n) for r, c in self.offsets}))


@dataclass(frozen=True)
class ShapeLibrary:
    """
    Ordered shapes; the order fixes the feature layout.
    """

    shapes: tuple[Shape, ...]

    def __post_init__(self):
        if not self.shapes:
            raise ValueError("Shape library is empty")
        names = [s.name for s in self.shapes]
        if len(set(names)) != len(names):
            raise ValueError(f"Shape names must be unique: {names}")

    def __len__(self) -> int:
        return len(self.shapes)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.shapes)


def default_library() -> ShapeLibrary:
    """
    Solid rectangles up to 4x4, the 3x3 plus, and pairs of parallel 1x4 bars 1-3 pixels apart.

    ```python
    from metagap.sff import default_library
    lib = default_library()
    assert len(lib) == 20
    assert lib.names[0] == "rect1x1"
    ```
    """
    shapes = [
        Shape.of(f"rect{h}x{w}", [(r, c) for r in range(h) for c in range(w)])
        for h in range(1, 5)
        for w in range(1, 5)
    ]
    shapes.append(Shape.of("plus", [(0, 1), (1, 0), (1, 1), (1, 2), (2, 1)]))
    for gap in (1, 2, 3):
        shapes.append(Shape.of(f"bars{gap}", [(r, c) for r in (0, gap + 1) for c in range(4)]))
    return ShapeLibrary(tuple(shapes))


@dataclass(frozen=True)
class SFFVector:
    """
    Feature vector as exact counts over a shared denominator.
    """

    counts: tuple[int, ...]
    denominator: int
    resolution: int

    @property
    def values(self) -> tuple[float, ...]:
        return tuple(c / self.denominator for c in self.counts)

    def fraction(self, i: int) -> Fraction:
        return Fraction(self.counts[i], self.denominator)


def shape_counts(matrices: BitMatrices, lib: ShapeLibrary) -> npt.NDArray[np.int64]:
    """
    Number of toroidal placements where each shape lies entirely in soft pixels.

    Takes a (batch, n, n) stack of 0/1 matrices, need not be symmetric; returns (batch, len(lib)).
    """
    mats = _as_stack(matrices)
    n = mats.shape[1]
    soft = mats == 0
    out = np.empty((mats.shape[0], len(lib)), dtype=np.int64)
    for k, shape in enumerate(lib.shapes):
        hit = np.ones_like(soft)
        for r, c in shape.wrapped(n):
            hit &= np.roll(soft, shift=(-r, -c), axis=(1, 2))
        out[:, k] = hit.sum(axis=(1, 2))
    return out


def shape_counts_fine(matrices: BitMatrices, lib: ShapeLibrary, base_n: int = DEFAULT_BASE) -> npt.NDArray[np.int64]:
    """
    Coarse-compatible counts on an m x m stack, m a multiple of `base_n`.

    Each offset is dilated to a scale x scale block (scale = m / base_n), placements
    stride by scale, and a window matches when it holds fewer than `scale` stiff pixels.
    Counts are over base_n² placements.
    """
    mats = _as_stack(matrices)
    m = mats.shape[1]
    if m % base_n:
        raise ValueError(f"Resolution {m} is not a multiple of the base resolution {base_n}")
    scale = m // base_n
    blocks = mats.reshape(mats.shape[0], base_n, scale, base_n, scale).sum(axis=(2, 4), dtype=np.int64)
    out = np.empty((mats.shape[0], len(lib)), dtype=np.int64)
    for k, shape in enumerate(lib.shapes):
        stiff = np.zeros_like(blocks)
        for r, c in shape.wrapped(base_n):
            stiff += np.roll(blocks, shift=(-r, -c), axis=(1, 2))
        out[:, k] = (stiff < scale).sum(axis=(1, 2))
    return out


def sff_coarse(cell: UnitCell, lib: ShapeLibrary) -> SFFVector:
    """
    Shape-frequency features of a cell at its own resolution.
    """
    n = cell.resolution
    counts = shape_counts(expand(cell)[None], lib)[0]
    return SFFVector(tuple(int(c) for c in counts), n * n, n)


def sff_fine(cell: UnitCell, lib: ShapeLibrary, base_n: int = DEFAULT_BASE) -> SFFVector:
    """
    Shape-frequency features of a fine cell, comparable with `sff_coarse` at `base_n`.
    """
    counts = shape_counts_fine(expand(cell)[None], lib, base_n)[0]
    return SFFVector(tuple(int(c) for c in counts), base_n * base_n, cell.resolution)


def featurize_bits(
    bits: npt.NDArray, resolution: int, lib: ShapeLibrary, base_n: int = DEFAULT_BASE
) -> npt.NDArray[np.int64]:
    """
    Counts for a (batch, T) array of irreducible vectors, picking the coarse or fine rule by resolution.
    """
    mats = expand_batch(bits, resolution)
    if resolution == base_n:
        return shape_counts(mats, lib)
    return shape_counts_fine(mats, lib, base_n)


@dataclass(frozen=True, eq=False)
class FeatureTable:
    """
    Shape counts for a set of designs, one row per design id.
    """

    ids: npt.NDArray[np.int64]
    counts: npt.NDArray[np.int64]
    denominator: int
    names: tuple[str, ...]
    dataset_digest: str = ""

    def __post_init__(self):
        if self.counts.shape != (len(self.ids), len(self.names)):
            raise ValueError(f"Counts shape {self.counts.shape} does not match {len(self.ids)} ids x {len(self.names)}")

    def rows_for(self, ids: Sequence[int]) -> npt.NDArray[np.int64]:
        """
        Counts reordered to follow `ids`.
        """
        where = {int(i): k for k, i in enumerate(self.ids)}
        try:
            return self.counts[[where[int(i)] for i in ids]]
        except KeyError as e:
            raise DataFormatError(f"Design {e} has no features") from None


def featurize_ids(
    ids: Sequence[int],
    lib: ShapeLibrary,
    resolution: int = DEFAULT_BASE,
    base_n: int | None = None,
    dataset_digest: str = "",
    batch: int = 4096,
) -> FeatureTable:
    """
    Feature table for design ids at `resolution`, counted against `base_n` (default: the resolution itself).
    """
    base_n = base_n if base_n is not None else resolution
    ids_arr = np.asarray(ids, dtype=np.int64)
    parts = [
        featurize_bits(ids_to_bits(ids_arr[i : i + batch], resolution), resolution, lib, base_n)
        for i in range(0, len(ids_arr), batch)
    ]
    counts = np.vstack(parts) if parts else np.zeros((0, len(lib)), dtype=np.int64)
    return FeatureTable(ids_arr, counts, base_n * base_n, lib.names, dataset_digest)


def render_features(table: FeatureTable) -> str:
    buf = io.StringIO()
    buf.write("# metagap features\n")
    buf.write(f"# denominator = {table.denominator}\n")
    buf.write(f"# dataset = {table.dataset_digest}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["id", *table.names])
    for i, row in zip(table.ids, table.counts):
        writer.writerow([int(i), *(int(v) for v in row)])
    return buf.getvalue()


def write_features(table: FeatureTable, path: Path):
    path.write_text(render_features(table))


def read_features(path: Path) -> FeatureTable:
    try:
        lines = path.read_text().splitlines()
    except OSError as e:
        raise DataFormatError(f"Cannot read features {path}: {e}") from e
    if not lines or lines[0].strip() != "# metagap features":
        raise DataFormatError(f"{path} is not a metagap feature file")
    items: dict[str, str] = {}
    k = 1
    while k < len(lines) and lines[k].startswith("#"):
        key, _, value = lines[k][1:].partition("=")
        items[key.strip()] = value.strip()
        k += 1
    rows = list(csv.reader(lines[k:]))
    if not rows or rows[0][0] != "id":
        raise DataFormatError(f"{path}: missing column header")
    try:
        data = np.array([[int(v) for v in row] for row in rows[1:] if row], dtype=np.int64).reshape(
            -1, len(rows[0])
        )
        denominator = int(items["denominator"])
    except (KeyError, ValueError) as e:
        raise DataFormatError(f"{path}: {e}") from None
    return FeatureTable(data[:, 0], data[:, 1:], denominator, tuple(rows[0][1:]), items.get("dataset", ""))


def render_library(lib: ShapeLibrary) -> str:
    lines = [f"{s.name}: " + " ".join(f"({r},{c})" for r, c in s.offsets) for s in lib.shapes]
    return "\n".join(lines) + "\n"


def parse_library(text: str, source: str = "<string>") -> ShapeLibrary:
    """
    Parse `name: (r,c) (r,c) ...` lines; blank lines and `#` comments are ignored.

    ```python
    from metagap.sff import parse_library
    lib = parse_library("bar: (0,0) (0,1)\\n# comment\\ndot: (0,0)\\n")
    assert lib.names == ("bar", "dot")
    ```
    """
    shapes: list[Shape] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        name, sep, rest = line.partition(":")
        offsets = [(int(r), int(c)) for r, c in _OFFSET_RE.findall(rest)]
        if not sep or not name.strip() or not offsets:
            raise DataFormatError(f"{source}:{lineno}: expected 'name: (r,c) (r,c) ...'")
        shapes.append(Shape.of(name.strip(), offsets))
    try:
        return ShapeLibrary(tuple(shapes))
    except ValueError as e:
        raise DataFormatError(f"{source}: {e}") from None


def read_library(path: Path) -> ShapeLibrary:
    try:
        return parse_library(path.read_text(), source=str(path))
    except OSError as e:
        raise DataFormatError(f"Cannot read shape library {path}: {e}") from e


def _as_stack(matrices: BitMatrices) -> npt.NDArray[np.uint8]:
    mats = np.asarray(matrices, dtype=np.uint8)
    if mats.ndim == 2:
        mats = mats[None]
    if mats.ndim != 3 or mats.shape[1] != mats.shape[2]:
        raise ValueError(f"Expected a (batch, n, n) stack, got shape {mats.shape}")
    return mats
