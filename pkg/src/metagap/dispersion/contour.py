"""Wavevector contours through the irreducible Brillouin zone."""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import numpy.typing as npt


@dataclass(frozen=True)
class WavevectorContour:
    """
    Piecewise-linear path through wavevector space.

    Each segment between consecutive vertices is split into `points_per_segment` equal
    steps, so with the default square-lattice path and 16 steps there are 49 unique samples.

    ```python
    from metagap.dispersion.contour import WavevectorContour
    contour = WavevectorContour.ibz(a=0.1, points_per_segment=16)
    assert contour.samples.shape == (49, 2)
    ```
    """

    vertices: tuple[tuple[float, float], ...]
    points_per_segment: int
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        if len(self.vertices) < 2:
            raise ValueError("A contour needs at least two vertices")
        if self.points_per_segment < 1:
            raise ValueError(f"points_per_segment must be >= 1, got {self.points_per_segment}")

    @classmethod
    def ibz(cls, a: float, points_per_segment: int = 16) -> WavevectorContour:
        """
        The Γ → X → M → Γ path of a square lattice with side `a`.
        """
        k = np.pi / a
        return cls(
            vertices=((0.0, 0.0), (k, 0.0), (k, k), (0.0, 0.0)),
            points_per_segment=points_per_segment,
            labels=("G", "X", "M", "G"),
        )

    @cached_property
    def samples(self) -> npt.NDArray[np.float64]:
        """
        (num_k, 2) array of wavevectors in rad/m, shared vertices listed once.
        """
        verts = np.asarray(self.vertices, dtype=np.float64)
        steps = np.linspace(0.0, 1.0, self.points_per_segment + 1)
        parts = [verts[0][None, :]]
        for start, end in zip(verts[:-1], verts[1:]):
            parts.append(start + steps[1:, None] * (end - start))
        return np.concatenate(parts)

    @cached_property
    def arclength(self) -> npt.NDArray[np.float64]:
        """
        Cumulative path length at each sample, starting at 0.
        """
        deltas = np.linalg.norm(np.diff(self.samples, axis=0), axis=1)
        return np.concatenate([[0.0], np.cumsum(deltas)])

    def vertex_indices(self) -> list[int]:
        """
        Sample index of each vertex.
        """
        return [i * self.points_per_segment for i in range(len(self.vertices))]
