"""Bloch-Floquet dispersion analysis and band-gap extraction."""

import io
import logging
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
import scipy.linalg
import scipy.sparse.linalg as splinalg

from metagap.config import PhysicalConfig, SimulationConfig, config_digest
from metagap.custom_types import Interval
from metagap.dispersion.assembly import FEMAssembly, assemble
from metagap.dispersion.contour import WavevectorContour
from metagap.errors import SolverError
from metagap.unitcell import UnitCell

logger = logging.getLogger(__name__)

# above this many reduced dofs "auto" switches to shift-invert Lanczos
DENSE_DOF_LIMIT = 2000
NEGATIVE_EIG_TOL = 1e-6
# shift for shift-invert in (rad/s)²; any negative value makes K - σM positive definite
_SHIFT = -1.0


@dataclass(frozen=True, eq=False)
class DispersionResult:
    """
    Eigenfrequencies along a contour and the band gaps they leave open.
    """

    frequencies: npt.NDArray[np.float64]
    gaps: tuple[Interval, ...]
    contour: WavevectorContour
    digest: str

    @property
    def num_bands(self) -> int:
        return self.frequencies.shape[1]

    def to_table(self) -> str:
        """
        Plot-ready text table: `k_index, arclength, f_1..f_B` rows then `# gap f_lo f_hi` lines.
        """
        out = io.StringIO()
        header = ", ".join(["k_index", "arclength"] + [f"f_{b + 1}" for b in range(self.num_bands)])
        out.write(f"# {header}\n")
        for k, (s, row) in enumerate(zip(self.contour.arclength, self.frequencies)):
            values = ", ".join(f"{f:.6f}" for f in row)
            out.write(f"{k}, {s:.6f}, {values}\n")
        for lo, hi in self.gaps:
            out.write(f"# gap {lo:.6f} {hi:.6f}\n")
        return out.getvalue()


def solve_wavevector(
    fem: FEMAssembly,
    wavevector: tuple[float, float],
    num_bands: int,
    solver: str = "auto",
) -> npt.NDArray[np.float64]:
    """
    Lowest `num_bands` frequencies in Hz at one wavevector, ascending.
    """
    if num_bands >= fem.num_reduced_dof:
        raise ValueError(f"num_bands ({num_bands}) must be below the reduced dof count ({fem.num_reduced_dof})")
    k_red, m_red = fem.reduced(wavevector)
    use_dense = solver == "dense" or (solver == "auto" and fem.num_reduced_dof <= DENSE_DOF_LIMIT)
    try:
        if use_dense:
            eigs = scipy.linalg.eigh(
                k_red.toarray(),
                m_red.toarray(),
                eigvals_only=True,
                subset_by_index=[0, num_bands - 1],
            )
        else:
            eigs = splinalg.eigsh(
                k_red.tocsc(),
                k=num_bands,
                M=m_red.tocsc(),
                sigma=_SHIFT,
                which="LM",
                return_eigenvectors=False,
            )
    except (np.linalg.LinAlgError, splinalg.ArpackError, splinalg.ArpackNoConvergence) as e:
        raise SolverError(f"Eigen-solver failed: {e}", wavevector) from e

    eigs = np.sort(np.real(eigs))
    tol = NEGATIVE_EIG_TOL * max(float(eigs[-1]), 0.0)
    if eigs[0] < -tol:
        raise SolverError(f"Negative eigenvalue {eigs[0]:.6g} below tolerance {-tol:.6g}", wavevector)
    return np.sqrt(np.clip(eigs, 0.0, None)) / (2 * np.pi)


def extract_gaps(frequencies: npt.NDArray[np.float64], f_max: float, gap_tol: float = 0.0) -> tuple[Interval, ...]:
    """
    Band gaps between consecutive bands over all sampled wavevectors.

    Gap b is (max_k f_b, min_k f_{b+1}) when positive, clipped to [0, f_max]; gaps
    narrower than `gap_tol` are dropped.

    ```python
    import numpy as np
    from metagap.dispersion.solver import extract_gaps
    freqs = np.array([[0.0, 10.0, 30.0], [5.0, 12.0, 31.0]])
    assert extract_gaps(freqs, f_max=100.0) == ((5.0, 10.0), (12.0, 30.0))
    ```
    """
    tops = frequencies.max(axis=0)
    bottoms = frequencies.min(axis=0)
    gaps: list[Interval] = []
    for b in range(frequencies.shape[1] - 1):
        lo = max(float(tops[b]), 0.0)
        hi = min(float(bottoms[b + 1]), f_max)
        if hi - lo > gap_tol and hi > lo:
            gaps.append((lo, hi))
    return tuple(gaps)


def dispersion(
    cell: UnitCell,
    phys: PhysicalConfig,
    contour: WavevectorContour | None = None,
    sim: SimulationConfig | None = None,
) -> DispersionResult:
    """
    Dispersion relation of a cell along a contour (the IBZ path by default).
    """
    sim = sim if sim is not None else SimulationConfig()
    contour = contour if contour is not None else WavevectorContour.ibz(phys.a, sim.kpts)
    fem = assemble(cell, phys, sim.epp)
    if sim.bands >= fem.num_reduced_dof:
        raise ValueError(f"bands ({sim.bands}) must be below the reduced dof count ({fem.num_reduced_dof})")

    rows = [solve_wavevector(fem, (float(gx), float(gy)), sim.bands, sim.solver) for gx, gy in contour.samples]
    frequencies = np.vstack(rows)
    frequencies.setflags(write=False)
    gaps = extract_gaps(frequencies, sim.f_max, sim.gap_tol)
    logger.debug("Design %s: %d gaps", cell.to_string(), len(gaps))
    return DispersionResult(
        frequencies=frequencies,
        gaps=gaps,
        contour=contour,
        digest=config_digest(phys, sim),
    )
