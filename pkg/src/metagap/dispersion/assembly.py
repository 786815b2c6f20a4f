"""
Finite-element assembly of a pixelated unit cell.

The cell [0, a]² is meshed with (n·epp)² square bilinear quadrilaterals carrying two
displacement dofs per node. Global dof `2·node + c` is component c (0 = x, 1 = y) of
node `iy·(N+1) + ix`.
"""

from dataclasses import dataclass
from functools import cache

import numpy as np
import numpy.typing as npt
import scipy.sparse as sp

from metagap.config import PhysicalConfig
from metagap.custom_types import Plane
from metagap.errors import AssemblyError
from metagap.unitcell import UnitCell, expand

HERMITIAN_TOL = 1e-8

# node positions of the reference element, counter-clockwise from (-1, -1)
_XI = np.array([-1.0, 1.0, 1.0, -1.0])
_ETA = np.array([-1.0, -1.0, 1.0, 1.0])
_GAUSS = 1.0 / np.sqrt(3.0)


def elasticity_matrix(e: float, nu: float, plane: Plane) -> npt.NDArray[np.float64]:
    """
    3x3 isotropic constitutive matrix in Voigt notation (xx, yy, xy engineering shear).
    """
    if plane == "strain":
        c = e / ((1 + nu) * (1 - 2 * nu))
        return c * np.array([[1 - nu, nu, 0.0], [nu, 1 - nu, 0.0], [0.0, 0.0, (1 - 2 * nu) / 2]])
    c = e / (1 - nu**2)
    return c * np.array([[1.0, nu, 0.0], [nu, 1.0, 0.0], [0.0, 0.0, (1 - nu) / 2]])


def _shape_functions(xi: float, eta: float) -> tuple[npt.NDArray, npt.NDArray, npt.NDArray]:
    n = (1 + _XI * xi) * (1 + _ETA * eta) / 4
    dn_dxi = _XI * (1 + _ETA * eta) / 4
    dn_deta = _ETA * (1 + _XI * xi) / 4
    return n, dn_dxi, dn_deta


@cache
def _gauss_points() -> tuple[tuple[float, float], ...]:
    return tuple((sx * _GAUSS, sy * _GAUSS) for sy in (-1, 1) for sx in (-1, 1))


def element_stiffness(nu: float, plane: Plane, e: float = 1.0, h: float = 1.0) -> npt.NDArray[np.float64]:
    """
    8x8 stiffness of a square element of side h, dofs ordered (u0, v0, ..., u3, v3).

    ```python
    import numpy as np
    from metagap.dispersion.assembly import element_stiffness
    ke = element_stiffness(nu=0.3, plane="strain")
    assert np.allclose(ke, ke.T)
    ```
    """
    d = elasticity_matrix(e, nu, plane)
    jac = h / 2
    ke = np.zeros((8, 8))
    for xi, eta in _gauss_points():
        _, dn_dxi, dn_deta = _shape_functions(xi, eta)
        dn_dx, dn_dy = dn_dxi / jac, dn_deta / jac
        b = np.zeros((3, 8))
        b[0, 0::2] = dn_dx
        b[1, 1::2] = dn_dy
        b[2, 0::2] = dn_dy
        b[2, 1::2] = dn_dx
        ke += b.T @ d @ b * jac * jac
    return ke


def element_mass(rho: float = 1.0, h: float = 1.0) -> npt.NDArray[np.float64]:
    """
    8x8 consistent mass matrix of a square element of side h.
    """
    jac = h / 2
    me = np.zeros((8, 8))
    for xi, eta in _gauss_points():
        n, _, _ = _shape_functions(xi, eta)
        nmat = np.zeros((2, 8))
        nmat[0, 0::2] = n
        nmat[1, 1::2] = n
        me += rho * nmat.T @ nmat * jac * jac
    return me


@dataclass(frozen=True, eq=False)
class FEMAssembly:
    """
    Real global matrices of one cell plus the data needed to impose Bloch periodicity.

    Immutable after construction; `reduced` builds fresh matrices for each wavevector.
    """

    a: float
    divisions: int
    nodes: npt.NDArray[np.float64]
    connectivity: npt.NDArray[np.intp]
    element_e: npt.NDArray[np.float64]
    element_rho: npt.NDArray[np.float64]
    nu: float
    plane: Plane
    stiffness: sp.csr_array
    mass: sp.csr_array
    # per full dof: reduced dof it copies and the lattice shift (sx, sy) in {0, 1}
    reduced_dof: npt.NDArray[np.intp]
    shift: npt.NDArray[np.intp]

    @property
    def num_elements(self) -> int:
        return len(self.connectivity)

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def num_reduced_dof(self) -> int:
        return 2 * self.divisions**2

    def element_matrices(self, e: int) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
        """
        Stiffness and mass of element e.
        """
        h = self.a / self.divisions
        ke = element_stiffness(self.nu, self.plane, e=float(self.element_e[e]), h=h)
        me = element_mass(float(self.element_rho[e]), h=h)
        return ke, me

    def bloch_map(self, wavevector: tuple[float, float]) -> sp.csr_array:
        """
        Complex map P from reduced to full dofs, u_full = P u_red.

        A node one period to the right (top) of its source carries the phase exp(-i γ·a_n).
        """
        gx, gy = wavevector
        phase = np.exp(-1j * self.a * (gx * self.shift[:, 0] + gy * self.shift[:, 1]))
        rows = np.arange(len(self.reduced_dof))
        return sp.csr_array((phase, (rows, self.reduced_dof)), shape=(len(rows), self.num_reduced_dof))

    def reduced(self, wavevector: tuple[float, float]) -> tuple[sp.csr_array, sp.csr_array]:
        """
        Bloch-reduced (K(γ), M(γ)) = (PᴴKP, PᴴMP).

        Raises `AssemblyError` if either is not Hermitian to a relative 1e-8.
        """
        p = self.bloch_map(wavevector)
        ph = p.conj().T
        k_red = (ph @ self.stiffness @ p).tocsr()
        m_red = (ph @ self.mass @ p).tocsr()
        for name, mat in (("stiffness", k_red), ("mass", m_red)):
            scale = abs(mat).max()
            skew = abs(mat - mat.conj().T).max()
            if skew > HERMITIAN_TOL * scale:
                raise AssemblyError(f"Reduced {name} matrix is not Hermitian (relative skew {skew / scale:.3g})")
        return k_red, m_red


def assemble(cell: UnitCell, phys: PhysicalConfig, elements_per_pixel: int = 1) -> FEMAssembly:
    """
    Mesh a cell and assemble its global stiffness and mass matrices.

    ```python
    from metagap.config import PhysicalConfig
    from metagap.dispersion.assembly import assemble
    from metagap.unitcell import UnitCell
    fem = assemble(UnitCell.from_id(0), PhysicalConfig(), elements_per_pixel=1)
    assert fem.num_elements == 100
    assert fem.num_nodes == 121
    ```
    """
    if elements_per_pixel < 1:
        raise ValueError(f"elements_per_pixel must be >= 1, got {elements_per_pixel}")
    n = cell.resolution
    epp = elements_per_pixel
    div = n * epp
    h = phys.a / div

    ix, iy = np.meshgrid(np.arange(div + 1), np.arange(div + 1))
    nodes = np.column_stack([ix.ravel() * h, iy.ravel() * h])

    ex, ey = np.meshgrid(np.arange(div), np.arange(div))
    ex, ey = ex.ravel(), ey.ravel()
    n0 = ey * (div + 1) + ex
    connectivity = np.column_stack([n0, n0 + 1, n0 + div + 2, n0 + div + 1])

    stiff = expand(cell)[ey // epp, ex // epp].astype(bool)
    element_e = np.where(stiff, phys.e_stiff, phys.e_soft)
    element_rho = np.where(stiff, phys.rho_stiff, phys.rho_soft)

    ke0 = element_stiffness(phys.nu, phys.plane, e=1.0, h=h)
    me0 = element_mass(1.0, h=h)
    edof = np.empty((len(connectivity), 8), dtype=np.intp)
    edof[:, 0::2] = 2 * connectivity
    edof[:, 1::2] = 2 * connectivity + 1
    rows = np.repeat(edof, 8, axis=1).ravel()
    cols = np.tile(edof, (1, 8)).ravel()
    ndof = 2 * len(nodes)
    stiffness = sp.csr_array(
        ((element_e[:, None, None] * ke0).ravel(), (rows, cols)),
        shape=(ndof, ndof),
    )
    mass = sp.csr_array(
        ((element_rho[:, None, None] * me0).ravel(), (rows, cols)),
        shape=(ndof, ndof),
    )

    node_ix, node_iy = ix.ravel(), iy.ravel()
    red_node = (node_iy % div) * div + (node_ix % div)
    node_shift = np.column_stack([node_ix == div, node_iy == div]).astype(np.intp)
    reduced_dof = np.empty(ndof, dtype=np.intp)
    reduced_dof[0::2] = 2 * red_node
    reduced_dof[1::2] = 2 * red_node + 1
    shift = np.repeat(node_shift, 2, axis=0)

    for arr in (nodes, connectivity, element_e, element_rho, reduced_dof, shift):
        arr.setflags(write=False)

    return FEMAssembly(
        a=phys.a,
        divisions=div,
        nodes=nodes,
        connectivity=connectivity,
        element_e=element_e,
        element_rho=element_rho,
        nu=phys.nu,
        plane=phys.plane,
        stiffness=stiffness,
        mass=mass,
        reduced_dof=reduced_dof,
        shift=shift,
    )
