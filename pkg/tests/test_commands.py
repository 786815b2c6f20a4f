import os
import tomllib
from pathlib import Path
from types import SimpleNamespace
from typing import TYPE_CHECKING
from unittest.mock import patch

import numpy as np
import pytest

from metagap.dataset import LabeledDataset, read_dataset, write_dataset
from metagap.errors import DataFormatError, UsageError
from metagap.sampler import read_designs
from metagap.templates.io import read_template_set
from metagap.templates.template import transfer_template
from metagap.tools.commands import _dataset_ranges, _parse_ids, _parser, main
from metagap.tools.utils import load_config, load_env_file, manifest_path, resolve_path

from .conftest import make_dataset

if TYPE_CHECKING:
    from pytest import CaptureFixture

QUICK_SIM = ["--epp", "1", "--kpts", "2", "--bands", "4"]


@pytest.fixture(autouse=True)
def isolated(tmp_path: Path, monkeypatch: pytest.MonkeyPatch):
    """Run every command from an empty directory with no config in the environment."""
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("METAGAP_CONFIG", raising=False)
    monkeypatch.delenv("METAGAP_DATA_DIR", raising=False)


@pytest.fixture
def data_file(tmp_path: Path, pixel0_dataset: LabeledDataset) -> Path:
    path = tmp_path / "data.csv"
    write_dataset(pixel0_dataset, path)
    return path


def _exit_code(argv: list[str]) -> int:
    with pytest.raises(SystemExit) as info:
        main(argv)
    return int(info.value.code)


def test_mine_templates_writes_set_and_manifest(data_file: Path, tmp_path: Path):
    """mine-templates finds the single pure template and records how it was made."""
    out = tmp_path / "tset.txt"
    main(["mine-templates", "--dataset", str(data_file), "--range", "10k-20k", "--psi-pre", "4096", "--s", "1"]
         + ["--p", "0.9", "--jobs", "1", "--out", str(out)])

    tset = read_template_set(out)
    assert [t.pattern for t in tset.templates] == ["10" + "*" * 13]
    assert tset.support == 1 << 13 and tset.optimal

    run = tomllib.loads(manifest_path(out).read_text())
    assert run["subcommand"] == "mine-templates"
    assert run["flags"]["psi_pre"] == "4096"
    assert str(data_file) in run["inputs"]


def test_mine_templates_sweep_writes_one_file_per_s(data_file: Path, tmp_path: Path):
    out = tmp_path / "tset.txt"
    main(["mine-templates", "--dataset", str(data_file), "--range", "10k-20k", "--psi-pre", "4096"]
         + ["--s", "1", "--s", "2", "--jobs", "1", "--out", str(out)])
    assert (tmp_path / "tset.s1.txt").exists()
    assert (tmp_path / "tset.s2.txt").exists()
    assert not out.exists()


def test_mine_templates_infeasible_exit_code(data_file: Path):
    argv = ["mine-templates", "--dataset", str(data_file), "--range", "10k-20k", "--psi-pre", "100000", "--jobs", "1"]
    assert _exit_code(argv) == 4


def test_evaluate_template_set(data_file: Path, tmp_path: Path, capsys: "CaptureFixture[str]"):
    out = tmp_path / "tset.txt"
    main(["mine-templates", "--dataset", str(data_file), "--range", "10k-20k", "--psi-pre", "4096", "--s", "1"]
         + ["--jobs", "1", "--out", str(out)])
    capsys.readouterr()

    main(["evaluate", "--model", str(out), "--dataset", str(data_file), "--range", "10k-20k", "--jobs", "1"])
    report = capsys.readouterr().out
    assert "precision = 1.000000" in report
    assert "support = 8192" in report


def test_sample_from_template_set(data_file: Path, tmp_path: Path):
    tset_path = tmp_path / "tset.txt"
    main(["mine-templates", "--dataset", str(data_file), "--range", "10k-20k", "--psi-pre", "4096", "--s", "1"]
         + ["--jobs", "1", "--out", str(tset_path)])
    out = tmp_path / "designs.csv"
    main(["sample", "--model", str(tset_path), "--count", "8", "--resolution", "20", "--seed", "3"]
         + ["--law", "matern", "--l", "3", "--jobs", "1", "--out", str(out)])

    cells = read_designs(out)
    fine = transfer_template(read_template_set(tset_path).templates[0], 2)
    assert len(cells) == 8
    assert all(fine.matches(cell) for cell in cells)
    assert tomllib.loads(manifest_path(out).read_text())["seed"] == 3


def test_featurize_train_and_evaluate_tree(tmp_path: Path, capsys: "CaptureFixture[str]"):
    rng = np.random.default_rng(1)
    ids = rng.choice(1 << 15, size=300, replace=False)
    # positive when the cell is mostly soft, which the single-pixel shape feature sees directly
    dataset = make_dataset(ids, lambda i: int(i).bit_count() <= 5)
    data = tmp_path / "data.csv"
    write_dataset(dataset, data)

    feats = tmp_path / "feats.csv"
    tree = tmp_path / "tree.json"
    main(["featurize", "--dataset", str(data), "--jobs", "1", "--out", str(feats)])
    main(["train-tree", "--feats", str(feats), "--labels", str(data), "--range", "10k-20k", "--depth", "2"]
         + ["--max-thresholds", "4", "--time-limit", "60", "--jobs", "1", "--out", str(tree)])
    assert tree.exists() and manifest_path(tree).exists()
    assert "Training precision" in capsys.readouterr().out

    main(["evaluate", "--model", str(tree), "--dataset", str(data), "--feats", str(feats), "--range", "10k-20k"]
         + ["--jobs", "1"])
    assert "balanced_accuracy = " in capsys.readouterr().out


def test_transfer_eval_with_stubbed_solver(data_file: Path, tmp_path: Path, monkeypatch: pytest.MonkeyPatch):
    def odd_ids_have_gaps(cell, phys, sim=None):
        return SimpleNamespace(gaps=((12_000.0, 14_000.0),) if cell.design_id % 2 else ())

    monkeypatch.setattr("metagap.sampler.dispersion", odd_ids_have_gaps)
    out = tmp_path / "transfer.csv"
    main(["transfer-eval", "--dataset", str(data_file), "--range", "10k-20k", "--psi-pre", "4096", "--s", "1"]
         + ["--resolution", "20", "--resolution", "40", "--count", "5", "--jobs", "1", "--out", str(out)])

    lines = out.read_text().splitlines()
    assert lines[0] == "resolution,designs,failed,precision,lo,hi"
    assert [line.split(",")[:4] for line in lines[1:]] == [["20", "5", "0", "1.000000"], ["40", "5", "0", "1.000000"]]


def test_gen_dataset_and_simulate(tmp_path: Path, capsys: "CaptureFixture[str]"):
    out = tmp_path / "small.csv"
    main(["gen-dataset", "--ids", "0..2", "--ranges", "10k-20k", "--jobs", "1", "--out", str(out), *QUICK_SIM])
    dataset = read_dataset(out)
    assert dataset.ids.tolist() == [0, 1, 2]
    assert dataset.manifest.sim.epp == 1
    assert manifest_path(out).exists()
    capsys.readouterr()

    main(["simulate", "--id", "1", "--jobs", "1", *QUICK_SIM])
    assert capsys.readouterr().out.startswith("# k_index, arclength, f_1")


def test_simulate_needs_one_design():
    assert _exit_code(["simulate", "--jobs", "1"]) == UsageError.exit_code
    assert _exit_code(["simulate", "--id", "1", "--bits", "1" * 15, "--jobs", "1"]) == UsageError.exit_code


def test_evaluate_needs_inputs():
    assert _exit_code(["evaluate", "--range", "10k-20k", "--jobs", "1"]) == UsageError.exit_code


def test_bad_range_is_usage_error(data_file: Path):
    argv = ["mine-templates", "--dataset", str(data_file), "--range", "20k-10k", "--jobs", "1"]
    assert _exit_code(argv) == UsageError.exit_code


def test_missing_dataset_is_format_error(tmp_path: Path):
    argv = ["featurize", "--dataset", str(tmp_path / "nope.csv"), "--jobs", "1"]
    assert _exit_code(argv) == DataFormatError.exit_code


def test_missing_config_from_environment():
    with patch.dict(os.environ, {"METAGAP_CONFIG": "missing.toml"}):
        assert _exit_code(["simulate", "--id", "1", "--jobs", "1"]) == UsageError.exit_code


@pytest.mark.parametrize("text", ["5..2", "a,b", "0..40000", "-1"])
def test_parse_ids_errors(text: str):
    with pytest.raises(UsageError):
        _parse_ids(text, 10)


def test_parse_ids_all():
    assert len(_parse_ids("all", 10)) == 1 << 15


def test_load_config(tmp_path: Path):
    path = tmp_path / "metagap.toml"
    path.write_text(
        """
data_dir = "runs"

[physics]
nu = 0.25

[simulation]
epp = 1
kpts = 4

[labels]
mode = "cover"
ranges = ["10k-20k"]
"""
    )
    config = load_config(str(path))
    assert config.physics.nu == 0.25
    assert config.simulation is not None and config.simulation.kpts == 4
    assert config.labels.mode == "cover"
    assert config.labels.ranges == ["10k-20k"]
    assert resolve_path("out.csv", config) == Path("runs/out.csv")
    assert resolve_path("/abs/out.csv", config) == Path("/abs/out.csv")


def test_default_config_without_file():
    config = load_config()
    assert config.simulation is None
    assert config.labels.mode == "intersect"


@pytest.mark.parametrize("body", ["[physics\n", "unknown = 1\n", "[physics]\nnu = 0.7\n"])
def test_invalid_config(tmp_path: Path, body: str):
    path = tmp_path / "bad.toml"
    path.write_text(body)
    with pytest.raises(DataFormatError):
        load_config(str(path))


def test_env_file_sets_only_path_variables(tmp_path: Path):
    (tmp_path / ".env").write_text("METAGAP_DATA_DIR=/data\nOTHER=1\n")
    with patch.dict(os.environ, {}):
        load_env_file()
        assert os.environ["METAGAP_DATA_DIR"] == "/data"
        assert "OTHER" not in os.environ
        assert resolve_path("x.csv") == Path("/data/x.csv")


def test_reruns_are_byte_identical(data_file: Path, tmp_path: Path):
    tset_a, tset_b = tmp_path / "a.txt", tmp_path / "b.txt"
    for out in (tset_a, tset_b):
        main(["mine-templates", "--dataset", str(data_file), "--range", "10k-20k", "--psi-pre", "4096", "--s", "2"]
             + ["--jobs", "1", "--out", str(out)])
    assert tset_a.read_bytes() == tset_b.read_bytes()

    designs_a, designs_b = tmp_path / "a.csv", tmp_path / "b.csv"
    main(["sample", "--model", str(tset_a), "--count", "6", "--seed", "9", "--jobs", "1", "--out", str(designs_a)])
    main(["sample", "--model", str(tset_b), "--count", "6", "--seed", "9", "--jobs", "2", "--out", str(designs_b)])
    assert designs_a.read_bytes() == designs_b.read_bytes()


@pytest.mark.parametrize(
    "argv",
    [
        ["--ranges", "10k-20k", "20k-30k"],
        ["--ranges", "10k-20k", "--ranges", "20k-30k"],
        ["--range", "10k-20k", "--range", "20k-30k"],
    ],
)
def test_gen_dataset_accepts_ranges_and_range(argv: list[str]):
    args = _parser().parse_args(["gen-dataset", *argv])
    assert _dataset_ranges(args, load_config()) == ((10_000.0, 20_000.0), (20_000.0, 30_000.0))
