"""
Generating designs from trained models.

Draws happen in the irreducible space, so every sample is a valid symmetric cell.
Each draw owns a random stream seeded by `(seed, draw index)`: running draws in a
process pool or one after another gives the same designs.
"""

import csv
import io
import logging
from collections.abc import Callable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import cache, partial
from pathlib import Path

import numpy as np
import numpy.typing as npt
import scipy.linalg
from scipy.spatial.distance import cdist

from metagap.config import PhysicalConfig, SimulationConfig
from metagap.dispersion.label import LabelPolicy
from metagap.dispersion.solver import dispersion
from metagap.errors import BudgetExhausted, DataFormatError, MetagapError, SolverError
from metagap.metrics import wilson_interval
from metagap.sff import DEFAULT_BASE, ShapeLibrary, featurize_bits
from metagap.templates.template import Template, TemplateSet, transfer_template
from metagap.tree.model import SparseTree
from metagap.unitcell import UnitCell, representative_pixels

logger = logging.getLogger(__name__)

RESOLUTIONS = (10, 20, 40, 80)
DEFAULT_MAX_ATTEMPTS = 1_000_000
REJECTION_BATCH = 4096


@dataclass(frozen=True)
class Independent:
    """
    Free pixels are stiff with probability `p_stiff`, independently.
    """

    p_stiff: float = 0.5

    def __post_init__(self):
        if not 0 <= self.p_stiff <= 1:
            raise ValueError(f"p_stiff must be in [0, 1], got {self.p_stiff}")


@dataclass(frozen=True)
class Matern:
    """
    Free pixels are the signs of a Gaussian field with Matern 3/2 correlations of
    length `length`, in pixels.
    """

    length: float

    def __post_init__(self):
        if self.length <= 0:
            raise ValueError(f"Length scale must be positive, got {self.length}")


type FreeLaw = Independent | Matern


@dataclass(frozen=True)
class SamplerConfig:
    seed: int = 0
    resolution: int = 10
    max_attempts: int = DEFAULT_MAX_ATTEMPTS
    law: FreeLaw = field(default_factory=Independent)

    def __post_init__(self):
        if self.resolution not in RESOLUTIONS:
            raise ValueError(f"Resolution must be one of {RESOLUTIONS}, got {self.resolution}")
        if self.max_attempts < 1:
            raise ValueError(f"max_attempts must be >= 1, got {self.max_attempts}")

    def rng(self, draw: int) -> np.random.Generator:
        return np.random.default_rng([self.seed, draw])


def matern_kernel(d: npt.ArrayLike, length: float) -> npt.NDArray[np.float64]:
    """
    Matern 3/2 correlation at distance `d`.

    ```python
    from metagap.sampler import matern_kernel
    assert matern_kernel(0.0, 2.0) == 1.0
    assert 0 < matern_kernel(1.0, 2.0) < 1
    ```
    """
    r = np.sqrt(3.0) * np.asarray(d, dtype=np.float64) / length
    return (1.0 + r) * np.exp(-r)


def matern_covariance(positions: npt.NDArray[np.floating], length: float) -> npt.NDArray[np.float64]:
    """
    Covariance of the latent Gaussian field at the given pixel centres.

    The kernel is mapped through sin(πk/2), which makes the correlation of the field's
    signs equal to the kernel itself.
    """
    return np.sin(np.pi / 2 * matern_kernel(cdist(positions, positions), length))


@cache
def _matern_factor(resolution: int, length: float, free: tuple[int, ...]) -> npt.NDArray[np.float64]:
    positions = representative_pixels(resolution)[list(free)] + 0.5
    cov = matern_covariance(positions, length)
    try:
        w, v = scipy.linalg.eigh(cov)
    except np.linalg.LinAlgError as e:
        raise SolverError(f"Covariance factorisation failed: {e}") from e
    factor = v * np.sqrt(np.clip(w, 0.0, None))
    if not np.isfinite(factor).all():
        raise SolverError("Covariance factorisation produced non-finite values")
    factor.setflags(write=False)
    return factor


def fill_free(template: Template, law: FreeLaw, rng: np.random.Generator, count: int = 1) -> npt.NDArray[np.uint8]:
    """
    (count, T) irreducible vectors agreeing with `template`, free entries drawn from `law`.
    """
    pattern = np.array(list(template.pattern))
    out = np.broadcast_to((pattern == "1").astype(np.uint8), (count, len(pattern))).copy()
    free = np.flatnonzero(pattern == "*")
    if not len(free):
        return out
    match law:
        case Independent(p_stiff=p):
            out[:, free] = rng.random((count, len(free))) < p
        case Matern(length=length):
            factor = _matern_factor(template.resolution, float(length), tuple(int(i) for i in free))
            z = rng.standard_normal((count, len(free))) @ factor.T
            out[:, free] = z > 0
        case _:
            raise ValueError(f"Unknown free-pixel law {law!r}")
    return out


def sample_matern_free(template: Template, length: float, rng: np.random.Generator) -> UnitCell:
    """
    Fill a template's free pixels with a Matern-correlated sign field; fixed pixels are kept.
    """
    bits = fill_free(template, Matern(length), rng)[0]
    return UnitCell.from_bits(bits, template.resolution)


@dataclass(frozen=True)
class RejectionDraw:
    cell: UnitCell
    attempts: int


def rejection_draw(tree: SparseTree, lib: ShapeLibrary, config: SamplerConfig, draw: int = 0) -> RejectionDraw:
    """
    Sample cells from the configured law until the tree accepts one.

    Features are counted at the base resolution, coarse-compatibly for finer cells.
    Raises `BudgetExhausted` after `config.max_attempts` rejections.
    """
    if tree.names != lib.names:
        raise ValueError("Tree was trained on a different shape library")
    rng = config.rng(draw)
    free = Template.free(config.resolution)
    attempts = 0
    while attempts < config.max_attempts:
        batch = min(REJECTION_BATCH, config.max_attempts - attempts)
        bits = fill_free(free, config.law, rng, batch)
        counts = featurize_bits(bits, config.resolution, lib, DEFAULT_BASE)
        accepted = np.flatnonzero(tree.predict_counts(counts, DEFAULT_BASE * DEFAULT_BASE))
        if len(accepted):
            k = int(accepted[0])
            return RejectionDraw(UnitCell.from_bits(bits[k], config.resolution), attempts + k + 1)
        attempts += batch
    raise BudgetExhausted(attempts)


def sample_rejection_tree(tree: SparseTree, lib: ShapeLibrary, config: SamplerConfig, draw: int = 0) -> UnitCell:
    return rejection_draw(tree, lib, config, draw).cell


def choose_template(tset: TemplateSet, rng: np.random.Generator) -> int:
    """
    Index of a template drawn with probability proportional to its support.
    """
    if not tset.templates:
        raise ValueError("Cannot sample from an empty template set")
    weights = np.asarray(tset.supports if tset.supports else [1] * len(tset), dtype=np.float64)
    if weights.sum() <= 0:
        weights = np.ones(len(tset))
    return int(rng.choice(len(tset), p=weights / weights.sum()))


def template_draw(tset: TemplateSet, config: SamplerConfig, draw: int = 0) -> tuple[int, UnitCell]:
    """
    (chosen template index, sampled cell); the cell always matches the chosen template
    transferred to the configured resolution.
    """
    rng = config.rng(draw)
    j = choose_template(tset, rng)
    template = tset.templates[j]
    factor, rem = divmod(config.resolution, template.resolution)
    if rem or factor < 1:
        raise ValueError(f"Cannot transfer a {template.resolution}x{template.resolution} template to {config.resolution}")
    fine = transfer_template(template, factor)
    bits = fill_free(fine, config.law, rng)[0]
    return j, UnitCell.from_bits(bits, config.resolution)


def sample_template(tset: TemplateSet, config: SamplerConfig, draw: int = 0) -> UnitCell:
    return template_draw(tset, config, draw)[1]


def sample_many[T](sampler: Callable[[int], T], count: int, jobs: int = 1) -> list[T]:
    """
    Draws 0..count-1 of a picklable per-draw sampler, in order.
    """
    if jobs > 1 and count > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(sampler, range(count)))
    return [sampler(i) for i in range(count)]


@dataclass(frozen=True)
class PrecisionReport:
    """
    Simulated labels of generated designs. Designs whose simulation failed are listed
    in `failed` and left out of the precision.
    """

    designs: tuple[UnitCell, ...]
    labels: tuple[int | None, ...]

    @property
    def failed(self) -> tuple[int, ...]:
        return tuple(i for i, lab in enumerate(self.labels) if lab is None)

    @property
    def evaluated(self) -> int:
        return len(self.labels) - len(self.failed)

    @property
    def positives(self) -> int:
        return sum(1 for lab in self.labels if lab == 1)

    @property
    def precision(self) -> float:
        return self.positives / self.evaluated if self.evaluated else 0.0

    @property
    def interval(self) -> tuple[float, float]:
        return wilson_interval(self.positives, self.evaluated)


def _simulate_label(cell: UnitCell, phys: PhysicalConfig, sim: SimulationConfig, policy: LabelPolicy) -> int | None:
    try:
        return policy.label(dispersion(cell, phys, sim=sim).gaps)
    except MetagapError as e:
        logger.warning("Simulation of %s failed: %s", cell.to_string(), e)
        return None


def evaluate_designs(
    designs: Sequence[UnitCell],
    phys: PhysicalConfig,
    sim: SimulationConfig,
    policy: LabelPolicy,
    jobs: int = 1,
) -> PrecisionReport:
    """
    Simulate every design and label it under `policy`.
    """
    if not designs:
        raise ValueError("No designs to evaluate")
    run = partial(_simulate_label, phys=phys, sim=sim, policy=policy)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            labels = list(pool.map(run, designs))
    else:
        labels = [run(cell) for cell in designs]
    report = PrecisionReport(tuple(designs), tuple(labels))
    logger.info(
        "Precision %.4f over %d designs (%d failed)", report.precision, report.evaluated, len(report.failed)
    )
    return report


def evaluate_sampler(
    generator: Callable[[int], UnitCell],
    n_samples: int,
    phys: PhysicalConfig,
    sim: SimulationConfig,
    policy: LabelPolicy,
    jobs: int = 1,
) -> PrecisionReport:
    """
    Draw `n_samples` designs from `generator` (called with the draw index) and score them by simulation.
    """
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    return evaluate_designs(sample_many(generator, n_samples, jobs), phys, sim, policy, jobs)


_DESIGNS_HEADER = "# metagap designs"


def render_designs(designs: Sequence[UnitCell], templates: Sequence[int | None] | None = None) -> str:
    """
    One design per row as its irreducible bit string; the chosen template index is kept
    when the designs came from a template set.

    ```python
    from metagap.sampler import parse_designs, render_designs
    from metagap.unitcell import UnitCell
    cells = [UnitCell.from_id(3), UnitCell.from_id(5)]
    assert parse_designs(render_designs(cells, [0, 1])) == cells
    ```
    """
    if not designs:
        raise ValueError("No designs to write")
    resolutions = {cell.resolution for cell in designs}
    if len(resolutions) != 1:
        raise ValueError(f"Designs mix resolutions {sorted(resolutions)}")
    chosen = templates if templates is not None else [None] * len(designs)
    if len(chosen) != len(designs):
        raise ValueError(f"Got {len(designs)} designs but {len(chosen)} template indices")

    buf = io.StringIO()
    buf.write(f"{_DESIGNS_HEADER}\n# resolution = {resolutions.pop()}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["draw", "design", "template"])
    for k, (cell, j) in enumerate(zip(designs, chosen)):
        writer.writerow([k, cell.to_string(), "" if j is None else j])
    return buf.getvalue()


def write_designs(designs: Sequence[UnitCell], path: Path, templates: Sequence[int | None] | None = None):
    path.write_text(render_designs(designs, templates))


def parse_designs(text: str, source: str = "<string>") -> list[UnitCell]:
    """
    Designs from a designs file. A bare column of coarse design ids is accepted too.
    """
    lines = text.splitlines()
    items: dict[str, str] = {}
    k = 0
    while k < len(lines) and lines[k].startswith("#"):
        key, sep, value = lines[k][1:].partition("=")
        if sep:
            items[key.strip()] = value.strip()
        k += 1
    rows = [row for row in csv.reader(lines[k:]) if row]
    if not rows:
        raise DataFormatError(f"{source} has no designs")
    try:
        resolution = int(items.get("resolution", "10"))
        if rows[0][0] == "draw":
            return [UnitCell.from_string(row[1], resolution) for row in rows[1:]]
        if rows[0][0] == "id":
            rows = rows[1:]
        return [UnitCell.from_id(int(row[0]), resolution) for row in rows]
    except (IndexError, ValueError) as e:
        raise DataFormatError(f"{source}: {e}") from None


def read_designs(path: Path) -> list[UnitCell]:
    try:
        text = path.read_text()
    except OSError as e:
        raise DataFormatError(f"Cannot read designs {path}: {e}") from e
    return parse_designs(text, source=str(path))
