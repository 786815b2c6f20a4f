"""Physical and simulation configuration."""

import hashlib
from dataclasses import asdict, dataclass
from importlib.metadata import PackageNotFoundError, version

from metagap.custom_types import Plane, SolverKind


@dataclass(frozen=True)
class PhysicalConfig:
    """
    Geometry and material properties of the two-phase unit cell.

    Defaults are a 0.1 m cell of a soft (2 GPa, 1000 kg/m³) and a stiff (200 GPa, 8000 kg/m³) phase.
    Poisson's ratio is shared by both phases.

    ```python
    from metagap.config import PhysicalConfig
    phys = PhysicalConfig(nu=0.25)
    assert phys.e_stiff == 200e9
    ```
    """

    a: float = 0.1
    e_soft: float = 2e9
    rho_soft: float = 1000.0
    e_stiff: float = 200e9
    rho_stiff: float = 8000.0
    nu: float = 0.3
    plane: Plane = "strain"

    def __post_init__(self):
        if self.a <= 0:
            raise ValueError(f"Cell side must be positive, got {self.a}")
        for name in ("e_soft", "rho_soft", "e_stiff", "rho_stiff"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not 0 < self.nu < 0.5:
            raise ValueError(f"Poisson's ratio must be in (0, 0.5), got {self.nu}")
        if self.plane not in ("strain", "stress"):
            raise ValueError(f"Unknown plane assumption: {self.plane}")

    def phase(self, stiff: bool) -> tuple[float, float]:
        """
        Return (E, rho) for one phase.
        """
        return (self.e_stiff, self.rho_stiff) if stiff else (self.e_soft, self.rho_soft)


@dataclass(frozen=True)
class SimulationConfig:
    """
    Discretisation and solver settings for a dispersion run.

    `kpts` is the number of subdivisions per contour segment, so each segment is sampled
    at `kpts + 1` points including both ends.
    """

    epp: int = 2
    kpts: int = 16
    bands: int = 10
    f_max: float = 60_000.0
    solver: SolverKind = "auto"
    gap_tol: float = 1.0

    def __post_init__(self):
        if self.epp < 1:
            raise ValueError(f"elements_per_pixel must be >= 1, got {self.epp}")
        if self.kpts < 1:
            raise ValueError(f"kpts must be >= 1, got {self.kpts}")
        if self.bands < 2:
            raise ValueError(f"At least two bands are needed to find a gap, got {self.bands}")
        if self.f_max <= 0:
            raise ValueError(f"f_max must be positive, got {self.f_max}")
        if self.solver not in ("dense", "sparse", "auto"):
            raise ValueError(f"Unknown solver: {self.solver}")
        if self.gap_tol < 0:
            raise ValueError(f"gap_tol must be non-negative, got {self.gap_tol}")


def package_version() -> str:
    """
    Installed version of metagap, or a placeholder when running from a source tree.
    """
    try:
        return version("metagap")
    except PackageNotFoundError:
        return "0+unknown"


def config_digest(*configs: PhysicalConfig | SimulationConfig) -> str:
    """
    Short stable digest of one or more configs, used to tag results and manifests.
    """
    text = ";".join(f"{k}={v!r}" for config in configs for k, v in sorted(asdict(config).items()))
    return hashlib.sha256(text.encode()).hexdigest()[:16]
