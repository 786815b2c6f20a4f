from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from metagap.errors import DataFormatError
from metagap.sff import (
    Shape,
    ShapeLibrary,
    default_library,
    featurize_ids,
    parse_library,
    read_features,
    read_library,
    render_library,
    sff_coarse,
    sff_fine,
    shape_counts,
    shape_counts_fine,
    write_features,
)
from metagap.unitcell import UnitCell, expand, refine

LIB = default_library()
ids_10 = st.integers(min_value=0, max_value=(1 << 15) - 1)


def naive_counts(m: np.ndarray, lib: ShapeLibrary) -> list[int]:
    n = len(m)
    out = []
    for shape in lib.shapes:
        count = 0
        for i in range(n):
            for j in range(n):
                if all(m[(i + r) % n][(j + c) % n] == 0 for r, c in shape.offsets):
                    count += 1
        out.append(count)
    return out


def naive_fine_counts(m: np.ndarray, lib: ShapeLibrary, base: int) -> list[int]:
    scale = len(m) // base
    out = []
    for shape in lib.shapes:
        count = 0
        for i in range(base):
            for j in range(base):
                stiff = 0
                for r, c in shape.wrapped(base):
                    bi, bj = (i + r) % base, (j + c) % base
                    stiff += int(m[bi * scale : (bi + 1) * scale, bj * scale : (bj + 1) * scale].sum())
                count += stiff < scale
        out.append(count)
    return out


def _random_cells(rng: np.random.Generator, resolution: int, count: int) -> list[UnitCell]:
    t = resolution * (resolution + 2) // 8
    return [UnitCell.from_bits(rng.integers(0, 2, size=t), resolution) for _ in range(count)]


def test_bit_parallel_matches_naive(rng: np.random.Generator):
    cells = _random_cells(rng, 10, 300)
    got = shape_counts(np.stack([expand(c) for c in cells]), LIB)
    for cell, row in zip(cells, got):
        assert row.tolist() == naive_counts(expand(cell), LIB)


def test_fine_matches_naive(rng: np.random.Generator):
    cells = _random_cells(rng, 20, 40)
    got = shape_counts_fine(np.stack([expand(c) for c in cells]), LIB, 10)
    for cell, row in zip(cells, got):
        assert row.tolist() == naive_fine_counts(expand(cell), LIB, 10)


@pytest.mark.slow
def test_oracles_at_full_size(rng: np.random.Generator):
    for cell in _random_cells(rng, 10, 1000):
        assert sff_coarse(cell, LIB).counts == tuple(naive_counts(expand(cell), LIB))
    for cell in _random_cells(rng, 20, 200):
        assert sff_fine(cell, LIB).counts == tuple(naive_fine_counts(expand(cell), LIB, 10))


def test_all_soft_and_all_stiff():
    soft = sff_coarse(UnitCell.from_id(0), LIB)
    stiff = sff_coarse(UnitCell.from_id((1 << 15) - 1), LIB)
    assert soft.values == (1.0,) * len(LIB)
    assert stiff.values == (0.0,) * len(LIB)
    assert soft.denominator == 100


def test_single_pixel_shape_counts_soft_pixels():
    cell = UnitCell.from_id(12345)
    assert sff_coarse(cell, LIB).counts[0] == 100 - int(expand(cell).sum())


@given(ids_10, st.sampled_from([2, 4]))
@settings(max_examples=25, deadline=None)
def test_refined_cells_keep_coarse_features(design_id: int, factor: int):
    cell = UnitCell.from_id(design_id)
    assert sff_fine(refine(cell, factor), LIB).counts == sff_coarse(cell, LIB).counts


@given(ids_10)
@settings(max_examples=50)
def test_transposed_shapes_count_alike(design_id: int):
    lib = ShapeLibrary((Shape.of("h", [(0, 0), (0, 1), (0, 2)]), Shape.of("v", [(0, 0), (1, 0), (2, 0)])))
    h, v = sff_coarse(UnitCell.from_id(design_id), lib).counts
    assert h == v


def test_features_are_monotone_in_shape():
    # a larger shape can only fit where its sub-shapes fit
    counts = featurize_ids(range(0, 1 << 15, 97), LIB).counts
    names = LIB.names
    assert np.all(counts[:, names.index("rect2x2")] <= counts[:, names.index("rect1x2")])
    assert np.all(counts[:, names.index("rect4x4")] <= counts[:, names.index("rect3x3")])


def test_fine_rejects_non_multiple():
    with pytest.raises(ValueError):
        shape_counts_fine(np.zeros((1, 15, 15)), LIB, 10)


def test_featurize_ids_matches_matrices():
    ids = [0, 5, 999, 32767]
    table = featurize_ids(ids, LIB, dataset_digest="abc")
    assert table.denominator == 100
    assert np.array_equal(table.counts, shape_counts(np.stack([expand(UnitCell.from_id(i)) for i in ids]), LIB))
    assert np.array_equal(table.rows_for([999, 0]), table.counts[[2, 0]])
    with pytest.raises(DataFormatError):
        table.rows_for([1])


def test_featurize_fine_ids():
    table = featurize_ids([3, 7], LIB, resolution=20, base_n=10)
    assert table.denominator == 100
    assert table.counts.shape == (2, len(LIB))


def test_feature_file_round_trip(tmp_path: Path):
    table = featurize_ids(range(10), LIB, dataset_digest="abc")
    write_features(table, tmp_path / "f.csv")
    back = read_features(tmp_path / "f.csv")
    assert np.array_equal(back.ids, table.ids)
    assert np.array_equal(back.counts, table.counts)
    assert (back.denominator, back.names, back.dataset_digest) == (100, LIB.names, "abc")


def test_read_features_rejects_other_files(tmp_path: Path):
    path = tmp_path / "f.csv"
    path.write_text("id,a\n1,2\n")
    with pytest.raises(DataFormatError):
        read_features(path)


def test_library_round_trip(tmp_path: Path):
    path = tmp_path / "lib.txt"
    path.write_text(render_library(LIB))
    assert read_library(path) == LIB


@pytest.mark.parametrize("text", ["bar (0,0)\n", "bar:\n", "a: (0,0)\na: (1,1)\n", ""])
def test_parse_library_rejects(text: str):
    with pytest.raises(DataFormatError):
        parse_library(text)


def test_shape_rotation():
    bar = Shape.of("bar", [(0, 0), (0, 1), (0, 2)])
    assert (bar.height, bar.width) == (1, 3)
    assert bar.rotate90().offsets == ((0, 0), (1, 0), (2, 0))


@given(ids_10, st.integers(0, 9), st.integers(0, 9))
@settings(max_examples=50)
def test_counts_ignore_toroidal_translation(design_id: int, di: int, dj: int):
    m = expand(UnitCell.from_id(design_id))
    shifted = np.roll(m, shift=(di, dj), axis=(0, 1))
    assert shape_counts(shifted[None], LIB).tolist() == shape_counts(m[None], LIB).tolist()


@given(st.integers(0, 19), st.integers(0, 19))
@settings(max_examples=25)
def test_one_stiff_pixel_is_tolerated_at_twice_the_base(i: int, j: int):
    m = np.zeros((20, 20), dtype=np.uint8)
    m[i, j] = 1
    counts = shape_counts_fine(m[None], LIB, 10)[0]
    assert (counts / 100).tolist() == [1.0] * len(LIB)
