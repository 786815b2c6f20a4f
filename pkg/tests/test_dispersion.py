import numpy as np
import pytest

from metagap.config import PhysicalConfig, SimulationConfig
from metagap.dispersion.assembly import assemble
from metagap.dispersion.contour import WavevectorContour
from metagap.dispersion.solver import DispersionResult, dispersion, extract_gaps, solve_wavevector
from metagap.unitcell import UnitCell

PHYS = PhysicalConfig()


def test_ibz_contour():
    contour = WavevectorContour.ibz(a=0.1, points_per_segment=16)
    k = np.pi / 0.1
    assert contour.samples.shape == (49, 2)
    assert np.allclose(contour.samples[contour.vertex_indices()], [(0, 0), (k, 0), (k, k), (0, 0)])
    assert contour.arclength[-1] == pytest.approx(k * (2 + np.sqrt(2)))
    assert np.all(np.diff(contour.arclength) > 0)


def test_contour_rejects_bad_input():
    with pytest.raises(ValueError):
        WavevectorContour(((0.0, 0.0),), 4)
    with pytest.raises(ValueError):
        WavevectorContour(((0.0, 0.0), (1.0, 0.0)), 0)


def test_rigid_body_modes_at_gamma():
    fem = assemble(UnitCell.from_id(12345), PHYS)
    f = solve_wavevector(fem, (0.0, 0.0), 4)
    assert np.all(np.diff(f) >= 0)
    assert f[1] < 1e-4 * f[2]


def test_time_reversal_symmetry():
    fem = assemble(UnitCell.from_id(4242), PHYS)
    g = (13.0, 21.0)
    assert np.allclose(solve_wavevector(fem, g, 6), solve_wavevector(fem, (-g[0], -g[1]), 6), rtol=1e-6)


def test_dense_and_sparse_solvers_agree():
    fem = assemble(UnitCell.from_id(999), PHYS)
    g = (10.0, 5.0)
    dense = solve_wavevector(fem, g, 5, solver="dense")
    sparse = solve_wavevector(fem, g, 5, solver="sparse")
    assert np.allclose(dense, sparse, rtol=1e-6)


def test_soft_shear_speed_near_gamma():
    phys = PhysicalConfig()
    c_s = np.sqrt(phys.e_soft / (2 * (1 + phys.nu)) / phys.rho_soft)
    step = np.pi / phys.a / 16
    contour = WavevectorContour(((0.0, 0.0), (step, 0.0)), 1)
    result = dispersion(UnitCell.from_id(0), phys, contour, SimulationConfig(epp=2, bands=4))
    slope = 2 * np.pi * result.frequencies[1, 0] / step
    assert slope == pytest.approx(c_s, rel=0.02)


def test_too_many_bands():
    with pytest.raises(ValueError):
        dispersion(UnitCell.from_id(0, 2), PHYS, sim=SimulationConfig(epp=1, bands=8))


def test_extract_gaps():
    freqs = np.array([[0.0, 10.0, 30.0], [5.0, 12.0, 31.0]])
    assert extract_gaps(freqs, f_max=100.0) == ((5.0, 10.0), (12.0, 30.0))
    assert extract_gaps(freqs, f_max=20.0) == ((5.0, 10.0), (12.0, 20.0))
    assert extract_gaps(freqs, f_max=100.0, gap_tol=10.0) == ((12.0, 30.0),)
    # overlapping bands leave no gap
    assert extract_gaps(np.array([[0.0, 10.0], [11.0, 12.0]]), f_max=100.0) == ()


def test_table_format():
    contour = WavevectorContour(((0.0, 0.0), (1.0, 0.0)), 1)
    result = DispersionResult(np.array([[0.0, 2.0], [1.0, 3.0]]), ((1.0, 2.0),), contour, "abc")
    lines = result.to_table().splitlines()
    assert lines[0] == "# k_index, arclength, f_1, f_2"
    assert lines[1].startswith("0, 0.000000, 0.000000")
    assert lines[-1] == "# gap 1.000000 2.000000"


def test_result_records_config_digest():
    contour = WavevectorContour(((0.0, 0.0), (1.0, 0.0)), 1)
    a = dispersion(UnitCell.from_id(0, 2), PHYS, contour, SimulationConfig(epp=2, bands=3))
    b = dispersion(UnitCell.from_id(0, 2), PhysicalConfig(nu=0.25), contour, SimulationConfig(epp=2, bands=3))
    assert a.digest != b.digest


@pytest.mark.slow
@pytest.mark.parametrize("design_id", [0, (1 << 15) - 1])
def test_homogeneous_cells_have_no_gaps(design_id: int):
    result = dispersion(UnitCell.from_id(design_id), PHYS, sim=SimulationConfig(epp=2))
    assert [g for g in result.gaps if g[0] < 50_000] == []


@pytest.mark.slow
def test_contour_density_stability(rng: np.random.Generator):
    sim = SimulationConfig(epp=2)
    for design_id in rng.integers(0, 1 << 15, size=20):
        cell = UnitCell.from_id(int(design_id))
        coarse = dispersion(cell, PHYS, sim=sim)
        fine = dispersion(cell, PHYS, sim=SimulationConfig(epp=2, kpts=32))
        if len(coarse.gaps) != len(fine.gaps):
            continue
        for (a, b), (c, d) in zip(coarse.gaps, fine.gaps):
            assert abs(a - c) <= 0.01 * max(a, c)
            assert abs(b - d) <= 0.01 * max(b, d)


@pytest.mark.slow
def test_mesh_refinement(rng: np.random.Generator):
    contour = WavevectorContour.ibz(PHYS.a, 4)
    for design_id in rng.integers(0, 1 << 15, size=5):
        cell = UnitCell.from_id(int(design_id))
        f2 = dispersion(cell, PHYS, contour, SimulationConfig(epp=2, bands=5)).frequencies
        f4 = dispersion(cell, PHYS, contour, SimulationConfig(epp=4, bands=5)).frequencies
        nonzero = f4 > 1.0
        assert np.all(np.abs(f2 - f4)[nonzero] <= 0.03 * f4[nonzero])
