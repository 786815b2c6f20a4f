import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from metagap.errors import DataFormatError
from metagap.templates.io import parse_template_set, read_template_set, render_template_set, write_template_set
from metagap.templates.template import (
    SYMBOLS,
    Template,
    TemplateSet,
    match_matrix,
    matches,
    meets_precision,
    predict_set,
    specialize,
    transfer_template,
)
from metagap.unitcell import UnitCell, refine

patterns_10 = st.text(alphabet=SYMBOLS, min_size=15, max_size=15)
ids_10 = st.integers(0, (1 << 15) - 1)


def _entrywise(pattern: str, cell: UnitCell) -> bool:
    return all(ch == "*" or int(ch) == b for ch, b in zip(pattern, cell.bits, strict=True))


def _check_against_entrywise(rng: np.random.Generator, templates: int, designs: int):
    ids = rng.integers(0, 1 << 15, size=designs)
    cells = [UnitCell.from_id(int(i)) for i in ids]
    for _ in range(templates):
        pattern = "".join(rng.choice(list(SYMBOLS), size=15, p=[0.15, 0.15, 0.7]))
        t = Template(pattern)
        expected = np.array([_entrywise(pattern, cell) for cell in cells])
        assert (t.matches_ids(ids) == expected).all()
        assert all(t.matches(cell) == e for cell, e in zip(cells, expected, strict=True))


def test_matches_agrees_with_entrywise_check(rng: np.random.Generator):
    _check_against_entrywise(rng, 200, 100)


@pytest.mark.slow
def test_matches_agrees_with_entrywise_check_on_1e5_pairs(rng: np.random.Generator):
    _check_against_entrywise(rng, 1000, 100)


def test_matches_at_finer_resolution(rng: np.random.Generator):
    for _ in range(50):
        pattern = "".join(rng.choice(list(SYMBOLS), size=55, p=[0.05, 0.05, 0.9]))
        cell = UnitCell.from_bits(rng.integers(0, 2, size=55), 20)
        assert matches(Template(pattern, 20), cell) == _entrywise(pattern, cell)


def test_matches_rejects_other_resolution():
    with pytest.raises(ValueError):
        matches(Template.free(10), UnitCell.from_bits([0] * 55, 20))


def test_free_and_exact_templates(rng: np.random.Generator):
    ids = rng.integers(0, 1 << 15, size=500)
    assert Template.free().matches_ids(ids).all()
    cell = UnitCell.from_id(int(ids[0]))
    hit = Template.of_cell(cell).matches_ids(ids)
    assert (hit == (ids == ids[0])).all()


@pytest.mark.parametrize("pattern", ["01*", "2" * 15, "0" * 14])
def test_template_rejects_bad_pattern(pattern: str):
    with pytest.raises(ValueError):
        Template(pattern)


def test_care_value_and_index():
    t = Template("1*0" + "*" * 12)
    assert t.care == 0b101
    assert t.value == 0b001
    assert t.free_count == 13
    assert t.ternary_index == 1 + 2 * 3 + sum(2 * 3**i for i in range(3, 15))
    assert Template("0" * 15).ternary_index == 0


@given(patterns_10, st.integers(0, 14), st.sampled_from("01"))
@settings(max_examples=100, deadline=None)
def test_specializing_only_shrinks_matches(pattern: str, index: int, symbol: str):
    t = Template(pattern)
    if pattern[index] != "*":
        with pytest.raises(ValueError):
            specialize(t, index, symbol)
        return
    narrow = specialize(t, index, symbol)
    ids = np.arange(1 << 15)
    wide_hits = t.matches_ids(ids)
    narrow_hits = narrow.matches_ids(ids)
    assert not (narrow_hits & ~wide_hits).any()
    assert narrow_hits.sum() * 2 == wide_hits.sum()


@given(patterns_10, ids_10, st.sampled_from([2, 4]))
@settings(max_examples=50, deadline=None)
def test_transfer_preserves_matching(pattern: str, design_id: int, factor: int):
    t = Template(pattern)
    cell = UnitCell.from_id(design_id)
    fine = transfer_template(t, factor)
    assert fine.resolution == 10 * factor
    assert fine.matches(refine(cell, factor)) == t.matches(cell)


def test_transfer_of_free_template_is_free():
    assert transfer_template(Template.free(), 4) == Template.free(40)
    t = Template("1" * 15)
    assert transfer_template(t, 1) is t
    with pytest.raises(ValueError):
        transfer_template(t, 0)


def test_full_grid_is_symmetric():
    grid = Template("01" + "*" * 13).full_grid()
    assert grid.shape == (10, 10)
    assert (grid == grid.T).all() and (grid == grid[::-1, :]).all()
    assert grid[0, 0] == "0"


def test_match_matrix_columns(rng: np.random.Generator):
    templates = [Template("1" + "*" * 14), Template("*0" + "*" * 13)]
    ids = rng.integers(0, 1 << 15, size=64)
    m = match_matrix(templates, ids)
    assert m.shape == (64, 2)
    assert (m[:, 0] == ((ids & 1) == 1)).all()
    assert (m[:, 1] == ((ids & 2) == 0)).all()


def test_template_set_predicts_union(rng: np.random.Generator):
    a, b = Template("1" + "*" * 14), Template("*1" + "*" * 13)
    tset = TemplateSet((a, b), supports=(1, 1))
    ids = rng.integers(0, 1 << 15, size=200)
    assert (tset.predict_ids(ids) == ((ids & 0b11) != 0)).all()
    assert all(tset.predict(UnitCell.from_id(int(i))) == predict_set(tset, UnitCell.from_id(int(i))) for i in ids[:20])
    assert (TemplateSet(()).predict_ids(ids) == 0).all()


def test_template_set_validation():
    with pytest.raises(ValueError):
        TemplateSet((Template.free(),), supports=(1, 2))
    with pytest.raises(ValueError):
        TemplateSet((Template.free(10), Template.free(20)))


def test_template_set_scores():
    tset = TemplateSet((Template.free(),), support=40, positives=30, bound=45)
    assert tset.precision == 0.75
    assert tset.gap == 5
    assert len(tset) == 1
    assert TemplateSet(()).precision == 0.0


def test_meets_precision_boundary():
    assert meets_precision(95, 100, 0.95)
    assert not meets_precision(94, 100, 0.95)
    assert meets_precision(0, 0, 0.95)


def test_template_set_file_roundtrip(tmp_path):
    tset = TemplateSet(
        (Template("01" + "*" * 13), Template("*" * 14 + "1")),
        supports=(300, 210),
        support=480,
        positives=460,
        s=5,
        p=0.95,
        optimal=False,
        bound=520,
        target=(10_000.0, 20_000.0),
        dataset_digest="abc123",
    )
    path = tmp_path / "tset.txt"
    write_template_set(tset, path)
    assert read_template_set(path) == tset


def test_infeasible_set_roundtrip():
    tset = TemplateSet((), s=3, p=0.99, feasible=False)
    assert parse_template_set(render_template_set(tset)) == tset


@pytest.mark.parametrize(
    "text",
    [
        "",
        "not a template file\n",
        "# metagap templates\n# s = five\n",
        "# metagap templates\n# missing separator\n",
        "# metagap templates\n# resolution = 10\n0120\n",
    ],
)
def test_parse_template_set_errors(text: str):
    with pytest.raises(DataFormatError):
        parse_template_set(text)


def test_read_missing_template_set(tmp_path):
    with pytest.raises(DataFormatError):
        read_template_set(tmp_path / "nope.txt")


@pytest.mark.parametrize("factor", [2, 4, 8])
def test_transfer_scales_free_area(factor: int):
    t = Template("10*1*0**1*0****")
    fine = transfer_template(t, factor)
    assert (fine.full_grid() == "*").sum() == factor**2 * (t.full_grid() == "*").sum()
