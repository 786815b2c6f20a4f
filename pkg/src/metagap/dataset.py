"""
Labeled design datasets.

A dataset file is a block of `# key = value` manifest lines followed by CSV records
`id,gaps,labels`: gaps as `lo:hi;lo:hi` in Hz and labels as one character per
manifest range.
"""

import csv
import hashlib
import io
import logging
import os
from collections.abc import Callable, Iterable, Iterator, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from functools import partial
from pathlib import Path

import numpy as np
import numpy.typing as npt

from metagap.config import PhysicalConfig, SimulationConfig, package_version
from metagap.custom_types import Interval, LabelMode
from metagap.dispersion.label import LABEL_MODES, LabelPolicy, label
from metagap.dispersion.solver import dispersion
from metagap.errors import DataFormatError, MetagapError
from metagap.unitcell import UnitCell, irreducible_count

logger = logging.getLogger(__name__)

CHECKPOINT_EVERY = 256

DEFAULT_RANGES: tuple[Interval, ...] = (
    (0.0, 10_000.0),
    (10_000.0, 20_000.0),
    (20_000.0, 30_000.0),
    (30_000.0, 40_000.0),
    (40_000.0, 50_000.0),
    (0.0, 6_000.0),
    (6_000.0, 12_000.0),
    (12_000.0, 18_000.0),
    (18_000.0, 24_000.0),
    (24_000.0, 30_000.0),
)

_HEADER = "# metagap dataset"
_COLUMNS = ["id", "gaps", "labels"]


@dataclass(frozen=True)
class DatasetManifest:
    """
    Everything needed to regenerate a dataset bit-for-bit.
    """

    resolution: int = 10
    phys: PhysicalConfig = field(default_factory=PhysicalConfig)
    sim: SimulationConfig = field(default_factory=lambda: SimulationConfig(epp=1))
    mode: LabelMode = "intersect"
    min_width: float = 0.0
    ranges: tuple[Interval, ...] = DEFAULT_RANGES
    version: str = field(default_factory=package_version)

    def __post_init__(self):
        if self.mode not in LABEL_MODES:
            raise ValueError(f"Unknown label mode {self.mode!r}")
        if not self.ranges:
            raise ValueError("A dataset needs at least one target range")

    @property
    def policies(self) -> tuple[LabelPolicy, ...]:
        return tuple(LabelPolicy(self.mode, lo, hi, self.min_width) for lo, hi in self.ranges)

    def range_index(self, lo: float, hi: float) -> int:
        """
        Position of a target range in the label string.
        """
        for i, (a, b) in enumerate(self.ranges):
            if a == lo and b == hi:
                return i
        raise ValueError(f"Range {lo:g}-{hi:g} Hz is not in the dataset manifest")

    def to_lines(self) -> list[str]:
        items: list[tuple[str, object]] = [("resolution", self.resolution)]
        items += [(f.name, getattr(self.phys, f.name)) for f in fields(self.phys)]
        items += [(f.name, getattr(self.sim, f.name)) for f in fields(self.sim)]
        items += [
            ("mode", self.mode),
            ("min_width", self.min_width),
            ("ranges", ";".join(f"{lo!r}:{hi!r}" for lo, hi in self.ranges)),
            ("version", self.version),
        ]
        return [f"# {key} = {value}" for key, value in items]

    @classmethod
    def from_items(cls, items: dict[str, str]) -> DatasetManifest:
        try:
            phys = PhysicalConfig(
                **{f.name: _coerce(f.type, items[f.name]) for f in fields(PhysicalConfig)},
            )
            sim = SimulationConfig(
                **{f.name: _coerce(f.type, items[f.name]) for f in fields(SimulationConfig)},
            )
            return cls(
                resolution=int(items["resolution"]),
                phys=phys,
                sim=sim,
                mode=items["mode"],  # ty: ignore[invalid-argument-type]
                min_width=float(items["min_width"]),
                ranges=parse_intervals(items["ranges"]),
                version=items["version"],
            )
        except KeyError as e:
            raise DataFormatError(f"Dataset manifest is missing key {e}") from None
        except ValueError as e:
            raise DataFormatError(f"Invalid dataset manifest: {e}") from None

    def digest(self) -> str:
        return hashlib.sha256("\n".join(self.to_lines()).encode()).hexdigest()[:16]


@dataclass(frozen=True)
class DesignRecord:
    design_id: int
    gaps: tuple[Interval, ...]
    labels: tuple[int, ...]


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """
    Simulated designs with their gaps and one label per manifest range.
    """

    manifest: DatasetManifest
    records: tuple[DesignRecord, ...]

    def __post_init__(self):
        limit = 1 << irreducible_count(self.manifest.resolution)
        width = len(self.manifest.ranges)
        for rec in self.records:
            if not 0 <= rec.design_id < limit:
                raise DataFormatError(f"Design id {rec.design_id} out of range for the manifest resolution")
            if len(rec.labels) != width:
                raise DataFormatError(f"Design {rec.design_id} has {len(rec.labels)} labels, expected {width}")

    def __len__(self) -> int:
        return len(self.records)

    @property
    def ids(self) -> npt.NDArray[np.int64]:
        return np.array([r.design_id for r in self.records], dtype=np.int64)

    def cells(self) -> Iterator[UnitCell]:
        for rec in self.records:
            yield UnitCell.from_id(rec.design_id, self.manifest.resolution)

    def label_vector(self, range_index: int) -> npt.NDArray[np.uint8]:
        return np.array([r.labels[range_index] for r in self.records], dtype=np.uint8)

    def subset(self, ids: Iterable[int]) -> LabeledDataset:
        keep = set(ids)
        return LabeledDataset(self.manifest, tuple(r for r in self.records if r.design_id in keep))

    def digest(self) -> str:
        return hashlib.sha256(render_dataset(self).encode()).hexdigest()[:16]


@dataclass
class GenerationReport:
    written: int = 0
    skipped: int = 0
    failed: list[int] = field(default_factory=list)


def simulate_record(design_id: int, manifest: DatasetManifest) -> DesignRecord:
    """
    Simulate one design and label it under the manifest's policies.
    """
    cell = UnitCell.from_id(design_id, manifest.resolution)
    result = dispersion(cell, manifest.phys, sim=manifest.sim)
    labels = tuple(label(result.gaps, p) for p in manifest.policies)
    return DesignRecord(design_id=design_id, gaps=result.gaps, labels=labels)


def _simulate_or_none(design_id: int, manifest: DatasetManifest) -> tuple[int, DesignRecord | None, str]:
    try:
        return design_id, simulate_record(design_id, manifest), ""
    except MetagapError as e:
        return design_id, None, str(e)


def generate(
    ids: Sequence[int] | None,
    manifest: DatasetManifest,
    out: Path | None = None,
    jobs: int = 1,
    resume: bool = False,
    checkpoint_every: int = CHECKPOINT_EVERY,
    progress: Callable[[int, int], None] | None = None,
) -> tuple[LabeledDataset, GenerationReport]:
    """
    Simulate and label designs, optionally appending to a dataset file.

    `ids=None` means the whole design space. With `resume`, records already in `out`
    are kept and skipped. Designs whose simulation fails are logged and left out.
    """
    all_ids = range(1 << irreducible_count(manifest.resolution)) if ids is None else sorted(set(ids))
    if len(all_ids) == 0:
        raise ValueError("No design ids requested")

    report = GenerationReport()
    existing: list[DesignRecord] = []
    if out is not None and resume and out.exists():
        _truncate_partial_line(out)
        previous = read_dataset(out)
        if previous.manifest != manifest:
            raise DataFormatError(f"Cannot resume {out}: its manifest differs from the requested one")
        existing = list(previous.records)
    elif out is not None:
        out.write_text(_render_header(manifest))

    done = {r.design_id for r in existing}
    todo = [i for i in all_ids if i not in done]
    report.skipped = len(all_ids) - len(todo)
    logger.info("Generating %d designs (%d already present)", len(todo), report.skipped)

    records = list(existing)
    worker = partial(_simulate_or_none, manifest=manifest)
    executor = ProcessPoolExecutor(max_workers=jobs) if jobs > 1 else None
    try:
        for start in range(0, len(todo), checkpoint_every):
            chunk = todo[start : start + checkpoint_every]
            results = executor.map(worker, chunk, chunksize=8) if executor else map(worker, chunk)
            batch: list[DesignRecord] = []
            for design_id, rec, message in results:
                if rec is None:
                    logger.warning("Design %d failed: %s", design_id, message)
                    report.failed.append(design_id)
                else:
                    batch.append(rec)
            records += batch
            report.written += len(batch)
            if out is not None:
                with out.open("a", newline="") as f:
                    f.write(_render_records(batch))
            logger.info("Checkpoint: %d/%d designs", start + len(chunk), len(todo))
            if progress is not None:
                progress(start + len(chunk), len(todo))
    finally:
        if executor is not None:
            executor.shutdown()

    return LabeledDataset(manifest, tuple(records)), report


def split(dataset: LabeledDataset, test_fraction: float, seed: int) -> tuple[LabeledDataset, LabeledDataset]:
    """
    Seeded random train/test split; the test set has round(N·f) records.
    """
    if not 0 < test_fraction < 1:
        raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction}")
    n = len(dataset)
    n_test = int(np.floor(n * test_fraction + 0.5))
    order = np.random.default_rng(seed).permutation(n)
    is_test = np.zeros(n, dtype=bool)
    is_test[order[:n_test]] = True
    train = tuple(r for r, t in zip(dataset.records, is_test) if not t)
    test = tuple(r for r, t in zip(dataset.records, is_test) if t)
    return LabeledDataset(dataset.manifest, train), LabeledDataset(dataset.manifest, test)


def verify_labels(dataset: LabeledDataset) -> list[int]:
    """
    Ids whose stored labels disagree with their stored gaps under the manifest policies.
    """
    policies = dataset.manifest.policies
    return [
        rec.design_id
        for rec in dataset.records
        if tuple(label(rec.gaps, p) for p in policies) != rec.labels
    ]


def relabel(
    dataset: LabeledDataset, mode: LabelMode, ranges: Sequence[Interval], min_width: float = 0.0
) -> LabeledDataset:
    """
    Recompute labels from stored gaps under new policies; gaps are untouched.
    """
    manifest = replace(dataset.manifest, mode=mode, ranges=tuple(ranges), min_width=min_width)
    records = tuple(
        replace(rec, labels=tuple(label(rec.gaps, p) for p in manifest.policies)) for rec in dataset.records
    )
    return LabeledDataset(manifest, records)


def write_dataset(dataset: LabeledDataset, path: Path):
    path.write_text(render_dataset(dataset))


def render_dataset(dataset: LabeledDataset) -> str:
    return _render_header(dataset.manifest) + _render_records(dataset.records)


def read_dataset(path: Path) -> LabeledDataset:
    """
    Parse a dataset file.
    """
    try:
        text = path.read_text()
    except OSError as e:
        raise DataFormatError(f"Cannot read dataset {path}: {e}") from e
    return parse_dataset(text, source=str(path))


def parse_dataset(text: str, source: str = "<string>") -> LabeledDataset:
    lines = text.splitlines()
    if not lines or lines[0].strip() != _HEADER:
        raise DataFormatError(f"{source} is not a metagap dataset")
    items: dict[str, str] = {}
    body_start = len(lines)
    for i, line in enumerate(lines[1:], start=1):
        if not line.startswith("#"):
            body_start = i
            break
        key, sep, value = line[1:].partition("=")
        if not sep:
            raise DataFormatError(f"{source}:{i + 1}: expected 'key = value' in header")
        items[key.strip()] = value.strip()
    manifest = DatasetManifest.from_items(items)

    reader = csv.reader(lines[body_start:])
    if next(reader, None) != _COLUMNS:
        raise DataFormatError(f"{source}: expected column header {','.join(_COLUMNS)}")
    records: list[DesignRecord] = []
    for row in reader:
        if not row:
            continue
        try:
            design_id, gaps, labels = row
            records.append(
                DesignRecord(
                    design_id=int(design_id),
                    gaps=parse_intervals(gaps),
                    labels=tuple(int(ch) for ch in labels),
                )
            )
        except ValueError as e:
            raise DataFormatError(f"{source}: bad record {row!r}: {e}") from None
    return LabeledDataset(manifest, tuple(records))


def parse_intervals(text: str) -> tuple[Interval, ...]:
    """
    Parse `lo:hi;lo:hi` into intervals; empty text means none.

    ```python
    from metagap.dataset import parse_intervals
    assert parse_intervals("") == ()
    assert parse_intervals("1.5:2.0;3.0:4.0") == ((1.5, 2.0), (3.0, 4.0))
    ```
    """
    if not text:
        return ()
    out: list[Interval] = []
    for part in text.split(";"):
        lo, hi = part.split(":")
        out.append((float(lo), float(hi)))
    return tuple(out)


def format_intervals(intervals: Iterable[Interval]) -> str:
    return ";".join(f"{lo!r}:{hi!r}" for lo, hi in intervals)


def _render_header(manifest: DatasetManifest) -> str:
    return "\n".join([_HEADER, *manifest.to_lines(), ",".join(_COLUMNS)]) + "\n"


def _render_records(records: Iterable[DesignRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for rec in records:
        writer.writerow([rec.design_id, format_intervals(rec.gaps), "".join(str(b) for b in rec.labels)])
    return buf.getvalue()


def _truncate_partial_line(path: Path):
    data = path.read_bytes()
    if data and not data.endswith(b"\n"):
        cut = data.rfind(b"\n") + 1
        logger.warning("Dropping a partially written record at the end of %s", path)
        with path.open("r+b") as f:
            f.truncate(cut)
            f.flush()
            os.fsync(f.fileno())


def _coerce(kind: object, value: str) -> object:
    if kind in (int, "int"):
        return int(value)
    if kind in (float, "float"):
        return float(value)
    return value
