import argparse
import logging
import os
import sys
import time
from collections.abc import Sequence
from dataclasses import replace
from functools import partial
from pathlib import Path

import numpy as np
import numpy.typing as npt

from metagap.config import PhysicalConfig, SimulationConfig, package_version
from metagap.custom_types import Interval
from metagap.dataset import (
    DEFAULT_RANGES,
    DatasetManifest,
    LabeledDataset,
    generate,
    read_dataset,
    relabel,
    split,
)
from metagap.dispersion.label import LABEL_MODES, LabelPolicy, parse_range
from metagap.dispersion.solver import dispersion
from metagap.errors import InfeasibleError, MetagapError, UsageError
from metagap.metrics import Confusion
from metagap.sampler import (
    DEFAULT_MAX_ATTEMPTS,
    RESOLUTIONS,
    FreeLaw,
    Independent,
    Matern,
    PrecisionReport,
    SamplerConfig,
    evaluate_designs,
    evaluate_sampler,
    read_designs,
    sample_many,
    sample_rejection_tree,
    sample_template,
    template_draw,
    write_designs,
)
from metagap.sff import ShapeLibrary, default_library, featurize_ids, read_features, read_library, write_features
from metagap.templates.ilp import DEFAULT_TIME_LIMIT, ILPInstance, sweep_sparsity
from metagap.templates.io import read_template_set, write_template_set
from metagap.templates.preselect import DEFAULT_MIN_SUPPORT, preselect
from metagap.templates.template import TemplateSet
from metagap.tools.fmt import format_confusion, format_precision, format_transfer_rows, green, red_bold, yellow
from metagap.tools.models import ProjectConfig, RunManifest
from metagap.tools.utils import file_digest, load_config, load_env_file, resolve_path, write_run_manifest
from metagap.tree.binarize import DEFAULT_MAX_THRESHOLDS, binarize
from metagap.tree.model import TreeArtifact, read_tree, write_tree
from metagap.tree.objective import OBJECTIVE_KINDS, Objective
from metagap.tree.search import DEFAULT_DEPTH, fit_optimal_tree
from metagap.tree.search import DEFAULT_TIME_LIMIT as TREE_TIME_LIMIT
from metagap.unitcell import UnitCell, irreducible_count

logger = logging.getLogger(__name__)

_PHYSICS_FLAGS = ("a", "e_soft", "rho_soft", "e_stiff", "rho_stiff", "nu", "plane")
_SIMULATION_FLAGS = ("epp", "kpts", "bands", "f_max", "solver", "gap_tol")
_NOT_FLAGS = ("func", "started", "verbose", "quiet")

type Model = TreeArtifact | TemplateSet


def _cmd_gen_dataset(args: argparse.Namespace, project: ProjectConfig):
    """Simulate and label designs into a dataset CSV."""
    resolution = args.n
    ids = _parse_ids(args.ids, resolution) if args.ids else None
    if args.sample is not None:
        space = 1 << irreducible_count(resolution)
        if not 0 < args.sample <= space:
            raise UsageError(f"--sample must be in 1..{space}, got {args.sample}")
        rng = np.random.default_rng(args.seed)
        ids = sorted(int(i) for i in rng.choice(space, size=args.sample, replace=False))

    ranges = _dataset_ranges(args, project)
    mode = args.policy or project.labels.mode
    min_width = args.min_width if args.min_width is not None else project.labels.min_width
    manifest = DatasetManifest(
        resolution=resolution,
        phys=_physics(args, project),
        sim=_simulation(args, project, SimulationConfig(epp=1)),
        mode=mode,
        min_width=min_width,
        ranges=ranges,
        version=package_version(),
    )

    out = resolve_path(args.out, project)
    print(f"Generating dataset into {out}")
    dataset, report = generate(ids, manifest, out, jobs=args.jobs, resume=args.resume)
    print(green(f"✓ {len(dataset)} designs in {out} ({report.written} new, {report.skipped} already present)"))
    if report.failed:
        print(yellow(f"{len(report.failed)} designs failed to simulate: {report.failed[:10]}"))
    _record(args, out, {})


def _cmd_featurize(args: argparse.Namespace, project: ProjectConfig):
    """Count shape placements for every design of a dataset."""
    dataset_path = resolve_path(args.dataset, project)
    dataset = read_dataset(dataset_path)
    lib = _library(args, project)
    resolution = dataset.manifest.resolution
    table = featurize_ids(
        dataset.ids.tolist(),
        lib,
        resolution=resolution,
        base_n=args.base,
        dataset_digest=dataset.digest(),
    )
    out = resolve_path(args.out, project)
    write_features(table, out)
    print(green(f"✓ {len(table.ids)} x {len(lib)} features written to {out}"))
    _record(args, out, _inputs(dataset_path, args.shapes and resolve_path(args.shapes, project)))


def _cmd_train_tree(args: argparse.Namespace, project: ProjectConfig):
    """Fit an optimal sparse decision tree on shape features."""
    feats_path = resolve_path(args.feats, project)
    labels_path = resolve_path(args.labels, project)
    features = read_features(feats_path)
    dataset = read_dataset(labels_path)
    if features.dataset_digest and features.dataset_digest != dataset.digest():
        print(yellow(f"Warning: {feats_path} was computed from a different dataset"))
    target = parse_range(args.range)
    train, _ = _split(dataset, args)
    y = _labels(train, target)

    counts = features.rows_for(train.ids.tolist())
    data = binarize(counts, features.denominator, features.names, args.max_thresholds)
    objective = Objective(args.objective, K=args.K, eps=args.eps, lam=args.lam)
    fit = fit_optimal_tree(data, y, objective, args.depth, args.time_limit)

    artifact = TreeArtifact(
        tree=fit.tree,
        objective=objective,
        target=target,
        depth_limit=args.depth,
        value=fit.value,
        bound=fit.bound,
        optimal=fit.optimal,
        dataset_digest=dataset.digest(),
    )
    out = resolve_path(args.out, project)
    write_tree(artifact, out)
    score = Confusion.of(y, fit.tree.predict_counts(counts, features.denominator))
    print(green(f"✓ Tree with {fit.tree.num_leaves} leaves written to {out}"))
    print(f"Training precision {score.precision:.4f}, support {score.support}, objective {fit.value:.6f}")
    if not fit.optimal:
        print(yellow(f"Time limit reached: best {fit.value:.6f}, bound {fit.bound:.6f}, gap {fit.gap:.6f}"))
    _record(args, out, _inputs(feats_path, labels_path))


def _cmd_mine_templates(args: argparse.Namespace, project: ProjectConfig):
    """Mine a sparse template set by pre-selection and exact selection."""
    dataset_path = resolve_path(args.dataset, project)
    dataset = read_dataset(dataset_path)
    target = parse_range(args.range)
    train, _ = _split(dataset, args)
    y = _labels(train, target)
    s_values = args.s or [5]
    p_pre = args.p_pre if args.p_pre is not None else max(0.0, args.p - 0.05)

    report = preselect(
        train.ids,
        y,
        min_support=args.psi_pre,
        min_precision=p_pre,
        resolution=dataset.manifest.resolution,
        jobs=args.jobs,
    )
    print(f"Pre-selection kept {len(report.candidates)} of {report.enumerated} templates")
    if not report.candidates:
        raise InfeasibleError(f"No template has support >= {args.psi_pre} and precision >= {p_pre}")

    instance = ILPInstance.from_candidates(
        report.candidates, train.ids, y, s_values[0], args.p, target, dataset.digest()
    )
    out = resolve_path(args.out, project)
    written = 0
    for s, tset in zip(s_values, sweep_sparsity(instance, s_values, args.time_limit)):
        if not tset.feasible:
            print(yellow(f"s={s}: no template set reaches precision {args.p}"))
            continue
        path = out if len(s_values) == 1 else out.with_name(f"{out.stem}.s{s}{out.suffix}")
        write_template_set(tset, path)
        written += 1
        status = "optimal" if tset.optimal else f"time limit, bound {tset.bound}"
        print(
            green(f"✓ s={s}: {len(tset)} templates, support {tset.support}, precision {tset.precision:.4f} ({status})")
        )
        _record(args, path, _inputs(dataset_path))
    if not written:
        raise InfeasibleError(f"No template set reaches precision {args.p} at s in {s_values}")


def _cmd_sample(args: argparse.Namespace, project: ProjectConfig):
    """Generate designs from a tree or template set."""
    model_path = resolve_path(args.model, project)
    model = _read_model(model_path)
    config = _sampler_config(args)
    out = resolve_path(args.out, project)
    if isinstance(model, TreeArtifact):
        lib = _library(args, project)
        cells = sample_many(partial(sample_rejection_tree, model.tree, lib, config), args.count, args.jobs)
        write_designs(cells, out)
    else:
        draws = sample_many(partial(template_draw, model, config), args.count, args.jobs)
        write_designs([cell for _, cell in draws], out, [j for j, _ in draws])
    print(green(f"✓ {args.count} designs at {config.resolution}x{config.resolution} written to {out}"))
    _record(args, out, _inputs(model_path), seed=args.seed)


def _cmd_simulate(args: argparse.Namespace, project: ProjectConfig):
    """Print one design's dispersion table."""
    if (args.id is None) == (args.bits is None):
        raise UsageError("Give exactly one of --id or --bits")
    cell = UnitCell.from_id(args.id, args.n) if args.id is not None else UnitCell.from_string(args.bits, args.n)
    result = dispersion(cell, _physics(args, project), sim=_simulation(args, project, SimulationConfig()))
    table = result.to_table()
    if args.out is None:
        sys.stdout.write(table)
        return
    out = resolve_path(args.out, project)
    out.write_text(table)
    print(green(f"✓ Dispersion table with {len(result.gaps)} gaps written to {out}"), file=sys.stderr)
    _record(args, out, {})


def _cmd_evaluate(args: argparse.Namespace, project: ProjectConfig):
    """Score designs by simulation, or a model against held-out labels."""
    target = parse_range(args.range)
    if args.designs is not None:
        designs_path = resolve_path(args.designs, project)
        cells = read_designs(designs_path)
        report = evaluate_designs(
            cells,
            _physics(args, project),
            _simulation(args, project, SimulationConfig()),
            _policy(args, project, target),
            jobs=args.jobs,
        )
        text = format_precision(report)
        inputs = _inputs(designs_path)
    elif args.model is not None and args.dataset is not None:
        model_path = resolve_path(args.model, project)
        dataset_path = resolve_path(args.dataset, project)
        model = _read_model(model_path)
        dataset = read_dataset(dataset_path)
        train, test = _split(dataset, args)
        # without a held-out fraction every split is the whole dataset
        part = dataset if args.test_fraction is None else {"train": train, "test": test, "all": dataset}[args.split]
        y = _labels(part, target)
        predicted = _predict(model, part, args, project)
        text = format_confusion(Confusion.of(y, predicted))
        inputs = _inputs(model_path, dataset_path)
    else:
        raise UsageError("evaluate needs --designs, or --model together with --dataset")

    sys.stdout.write(text)
    if args.out is not None:
        out = resolve_path(args.out, project)
        out.write_text(text)
        _record(args, out, inputs)


def _cmd_transfer_eval(args: argparse.Namespace, project: ProjectConfig):
    """Sample a coarse model at finer resolutions and score the samples by simulation."""
    target = parse_range(args.range)
    inputs: dict[str, str] = {}
    if args.model is not None:
        model_path = resolve_path(args.model, project)
        model = _read_model(model_path)
        inputs = _inputs(model_path)
    else:
        if args.dataset is None:
            raise UsageError("transfer-eval needs --model or --dataset")
        dataset_path = resolve_path(args.dataset, project)
        model = _mine_one(read_dataset(dataset_path), target, args)
        inputs = _inputs(dataset_path)

    phys = _physics(args, project)
    sim = _simulation(args, project, SimulationConfig())
    policy = _policy(args, project, target)
    rows: list[tuple[int, PrecisionReport]] = []
    for resolution in args.resolution or [20]:
        config = replace(_sampler_config(args), resolution=resolution)
        if isinstance(model, TreeArtifact):
            generator = partial(sample_rejection_tree, model.tree, _library(args, project), config)
        else:
            generator = partial(sample_template, model, config)
        report = evaluate_sampler(generator, args.count, phys, sim, policy, jobs=args.jobs)
        lo, hi = report.interval
        print(
            green(f"✓ {resolution}x{resolution}: precision {report.precision:.4f} [{lo:.3f}, {hi:.3f}]"),
            file=sys.stderr,
        )
        rows.append((resolution, report))

    text = format_transfer_rows(rows)
    sys.stdout.write(text)
    if args.out is not None:
        out = resolve_path(args.out, project)
        out.write_text(text)
        _record(args, out, inputs, seed=args.seed)


def _mine_one(dataset: LabeledDataset, target: Interval, args: argparse.Namespace) -> TemplateSet:
    train, _ = _split(dataset, args)
    y = _labels(train, target)
    p_pre = args.p_pre if args.p_pre is not None else max(0.0, args.p - 0.05)
    report = preselect(train.ids, y, args.psi_pre, p_pre, dataset.manifest.resolution, args.jobs)
    if not report.candidates:
        raise InfeasibleError(f"No template has support >= {args.psi_pre} and precision >= {p_pre}")
    instance = ILPInstance.from_candidates(report.candidates, train.ids, y, args.s, args.p, target, dataset.digest())
    (tset,) = sweep_sparsity(instance, [args.s], args.time_limit)
    if not tset.feasible:
        raise InfeasibleError(f"No template set reaches precision {args.p} with s={args.s}")
    print(f"Mined {len(tset)} templates, support {tset.support}, precision {tset.precision:.4f}", file=sys.stderr)
    return tset


def _predict(
    model: Model, dataset: LabeledDataset, args: argparse.Namespace, project: ProjectConfig
) -> npt.NDArray[np.uint8]:
    if isinstance(model, TemplateSet):
        if model.resolution != dataset.manifest.resolution:
            raise UsageError(
                f"Template set is {model.resolution}x{model.resolution} "
                f"but the dataset is {dataset.manifest.resolution}x{dataset.manifest.resolution}"
            )
        return model.predict_ids(dataset.ids)
    if args.feats is not None:
        features = read_features(resolve_path(args.feats, project))
        counts, denominator = features.rows_for(dataset.ids.tolist()), features.denominator
    else:
        table = featurize_ids(dataset.ids.tolist(), _library(args, project), dataset.manifest.resolution)
        counts, denominator = table.counts, table.denominator
    return model.tree.predict_counts(counts, denominator)


def _read_model(path: Path) -> Model:
    try:
        head = path.read_text().lstrip()[:1]
    except OSError as e:
        raise UsageError(f"Cannot read model {path}: {e}") from e
    return read_tree(path) if head == "{" else read_template_set(path)


def _library(args: argparse.Namespace, project: ProjectConfig) -> ShapeLibrary:
    shapes = getattr(args, "shapes", None)
    return read_library(resolve_path(shapes, project)) if shapes else default_library()


def _labels(dataset: LabeledDataset, target: Interval) -> npt.NDArray[np.uint8]:
    """
    Labels for `target`, recomputed from stored gaps when the dataset was labeled for other ranges.
    """
    try:
        return dataset.label_vector(dataset.manifest.range_index(*target))
    except ValueError:
        logger.info("Range %g-%g not in the dataset manifest, relabeling from stored gaps", *target)
        m = dataset.manifest
        return relabel(dataset, m.mode, [target], m.min_width).label_vector(0)


def _split(dataset: LabeledDataset, args: argparse.Namespace) -> tuple[LabeledDataset, LabeledDataset]:
    if args.test_fraction is None:
        return dataset, LabeledDataset(dataset.manifest, ())
    return split(dataset, args.test_fraction, args.seed)


def _dataset_ranges(args: argparse.Namespace, project: ProjectConfig) -> tuple[Interval, ...]:
    if args.ranges:
        return tuple(parse_range(r) for r in args.ranges)
    if project.labels.ranges:
        return tuple(parse_range(r) for r in project.labels.ranges)
    return DEFAULT_RANGES


def _physics(args: argparse.Namespace, project: ProjectConfig) -> PhysicalConfig:
    overrides = {k: getattr(args, k) for k in _PHYSICS_FLAGS if getattr(args, k, None) is not None}
    return replace(project.physics, **overrides)


def _simulation(args: argparse.Namespace, project: ProjectConfig, fallback: SimulationConfig) -> SimulationConfig:
    base = project.simulation if project.simulation is not None else fallback
    overrides = {k: getattr(args, k) for k in _SIMULATION_FLAGS if getattr(args, k, None) is not None}
    return replace(base, **overrides)


def _policy(args: argparse.Namespace, project: ProjectConfig, target: Interval) -> LabelPolicy:
    mode = args.policy or project.labels.mode
    min_width = args.min_width if args.min_width is not None else project.labels.min_width
    return LabelPolicy(mode, target[0], target[1], min_width)


def _sampler_config(args: argparse.Namespace) -> SamplerConfig:
    law: FreeLaw = Matern(args.l) if args.law == "matern" else Independent(args.p_stiff)
    return SamplerConfig(seed=args.seed, resolution=args.resolution_one, max_attempts=args.max_attempts, law=law)


def _parse_ids(text: str, resolution: int) -> list[int]:
    """
    `a..b` (inclusive), a comma list, or `all`.

    ```python
    from metagap.tools.commands import _parse_ids
    assert _parse_ids("0..3", 10) == [0, 1, 2, 3]
    assert _parse_ids("7,2", 10) == [2, 7]
    ```
    """
    limit = 1 << irreducible_count(resolution)
    try:
        if text == "all":
            return list(range(limit))
        if ".." in text:
            lo, hi = (int(v) for v in text.split(".."))
            ids = list(range(lo, hi + 1))
        else:
            ids = sorted({int(v) for v in text.split(",")})
    except ValueError:
        raise UsageError(f"--ids must look like '0..15' or '1,5,7', got {text!r}") from None
    if not ids or ids[0] < 0 or ids[-1] >= limit:
        raise UsageError(f"--ids must lie in 0..{limit - 1}, got {text!r}")
    return ids


def _inputs(*paths: Path | str | None) -> dict[str, str]:
    return {str(p): file_digest(Path(p)) for p in paths if p}


def _record(args: argparse.Namespace, output: Path, inputs: dict[str, str], seed: int | None = None):
    flags = {k: str(v) for k, v in sorted(vars(args).items()) if k not in _NOT_FLAGS and v is not None}
    manifest = RunManifest(
        subcommand=args.command,
        flags=flags,
        inputs=inputs,
        seed=seed if seed is not None else getattr(args, "seed", None),
        version=package_version(),
        elapsed=time.monotonic() - args.started,
        jobs=getattr(args, "jobs", 1),
    )
    write_run_manifest(output, manifest)


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="Config file (default: $METAGAP_CONFIG or ./metagap.toml)")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="Worker processes")
    p.add_argument("-v", "--verbose", action="count", default=0)
    p.add_argument("-q", "--quiet", action="store_true")


def _add_physics(p: argparse.ArgumentParser):
    g = p.add_argument_group("physics and discretisation")
    g.add_argument("--a", type=float, help="Cell side in m")
    g.add_argument("--e-soft", type=float)
    g.add_argument("--rho-soft", type=float)
    g.add_argument("--e-stiff", type=float)
    g.add_argument("--rho-stiff", type=float)
    g.add_argument("--nu", type=float, help="Poisson's ratio of both phases")
    g.add_argument("--plane", choices=("strain", "stress"))
    g.add_argument("--epp", type=int, help="Finite elements per pixel side")
    g.add_argument("--kpts", type=int, help="Subdivisions per contour segment")
    g.add_argument("--bands", type=int)
    g.add_argument("--f-max", type=float)
    g.add_argument("--solver", choices=("dense", "sparse", "auto"))
    g.add_argument("--gap-tol", type=float)


def _add_policy(p: argparse.ArgumentParser):
    p.add_argument("--policy", choices=LABEL_MODES, help="Label policy (default from config, else intersect)")
    p.add_argument("--min-width", type=float)


def _add_split(p: argparse.ArgumentParser, default_split: str | None = None):
    p.add_argument("--test-fraction", type=float, help="Hold out this fraction with a seeded split")
    p.add_argument("--seed", type=int, default=0)
    if default_split is not None:
        p.add_argument("--split", choices=("train", "test", "all"), default=default_split)


def _add_mining(p: argparse.ArgumentParser, many: bool):
    if many:
        p.add_argument("--s", type=int, action="append", help="Maximum templates; repeat to sweep")
    else:
        p.add_argument("--s", type=int, default=5, help="Maximum templates")
    p.add_argument("--p", type=float, default=0.95, help="Minimum precision of the union")
    p.add_argument("--psi-pre", type=int, default=DEFAULT_MIN_SUPPORT, help="Pre-selection minimum support")
    p.add_argument("--p-pre", type=float, help="Pre-selection minimum precision (default p - 0.05)")
    p.add_argument("--time-limit", type=float, default=DEFAULT_TIME_LIMIT)


def _add_sampling(p: argparse.ArgumentParser):
    p.add_argument("--law", choices=("independent", "matern"), default="independent")
    p.add_argument("--l", type=float, default=6.0, help="Matern length scale in pixels")
    p.add_argument("--p-stiff", type=float, default=0.5)
    p.add_argument("--max-attempts", type=int, default=DEFAULT_MAX_ATTEMPTS)
    p.add_argument("--shapes", help="Shape library of a tree model (default: built-in)")


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="metagap", description="Band-gap metamaterial design from simulation data")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-dataset", help="Simulate and label designs")
    _add_common(p)
    _add_physics(p)
    _add_policy(p)
    p.add_argument("--n", type=int, default=10, help="Pixels per side")
    p.add_argument("--ids", help="'a..b', '1,5,7' or 'all' (default: all)")
    p.add_argument("--sample", type=int, help="Random subset of this many designs")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--ranges",
        "--range",
        dest="ranges",
        nargs="+",
        action="extend",
        help="Target ranges such as 10k-20k; repeatable",
    )
    p.add_argument("--resume", action="store_true")
    p.add_argument("--out", default="data.csv")
    p.set_defaults(func=_cmd_gen_dataset)

    p = sub.add_parser("featurize", help="Shape-frequency features of a dataset")
    _add_common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--shapes", help="Shape library file (default: built-in)")
    p.add_argument("--base", type=int, help="Count against this base resolution (default: the dataset's)")
    p.add_argument("--out", default="feats.csv")
    p.set_defaults(func=_cmd_featurize)

    p = sub.add_parser("train-tree", help="Fit an optimal sparse decision tree")
    _add_common(p)
    _add_split(p)
    p.add_argument("--feats", required=True)
    p.add_argument("--labels", required=True, help="Dataset file holding the labels")
    p.add_argument("--range", required=True)
    p.add_argument("--objective", choices=OBJECTIVE_KINDS, default="prec-support")
    p.add_argument("--K", type=float, default=1.0, help="Support weight")
    p.add_argument("--eps", type=float, default=1e-9)
    p.add_argument("--lambda", dest="lam", type=float, default=0.005, help="Per-leaf penalty")
    p.add_argument("--depth", type=int, default=DEFAULT_DEPTH)
    p.add_argument("--max-thresholds", type=int, default=DEFAULT_MAX_THRESHOLDS)
    p.add_argument(
        "--time-limit", type=float, default=TREE_TIME_LIMIT, help="Seconds before reporting the best tree and its gap"
    )
    p.add_argument("--out", default="tree.json")
    p.set_defaults(func=_cmd_train_tree)

    p = sub.add_parser("mine-templates", help="Mine a sparse high-precision template set")
    _add_common(p)
    _add_split(p)
    _add_mining(p, many=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--range", required=True)
    p.add_argument("--out", default="tset.txt")
    p.set_defaults(func=_cmd_mine_templates)

    p = sub.add_parser("sample", help="Generate designs from a model")
    _add_common(p)
    _add_sampling(p)
    p.add_argument("--model", required=True, help="Tree (.json) or template set file")
    p.add_argument("--resolution", dest="resolution_one", type=int, choices=RESOLUTIONS, default=10)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="designs.csv")
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("simulate", help="Dispersion table of one design")
    _add_common(p)
    _add_physics(p)
    p.add_argument("--id", type=int)
    p.add_argument("--bits", help="Irreducible pixels as a 0/1 string")
    p.add_argument("--n", type=int, default=10, help="Pixels per side")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("evaluate", help="Precision of designs or of a model")
    _add_common(p)
    _add_physics(p)
    _add_policy(p)
    _add_split(p, default_split="test")
    p.add_argument("--range", required=True)
    p.add_argument("--designs")
    p.add_argument("--model")
    p.add_argument("--dataset")
    p.add_argument("--feats", help="Precomputed features for a tree model")
    p.add_argument("--shapes", help="Shape library of a tree model (default: built-in)")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("transfer-eval", help="Simulated precision of a coarse model sampled at finer resolutions")
    _add_common(p)
    _add_physics(p)
    _add_policy(p)
    _add_split(p)
    _add_mining(p, many=False)
    _add_sampling(p)
    p.add_argument("--range", required=True)
    p.add_argument("--model")
    p.add_argument("--dataset")
    p.add_argument("--resolution", type=int, choices=RESOLUTIONS, action="append")
    p.add_argument("--count", type=int, default=50)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_transfer_eval, resolution_one=20)

    return parser


def _setup_logging(verbose: int, quiet: bool):
    if quiet:
        level = logging.ERROR
    else:
        level = {0: logging.WARNING, 1: logging.INFO}.get(verbose, logging.DEBUG)
    logging.basicConfig(
        level=level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def main(argv: Sequence[str] | None = None):
    """Main entry point for the metagap CLI."""
    load_env_file()
    args = _parser().parse_args(argv)
    args.started = time.monotonic()
    _setup_logging(args.verbose, args.quiet)

    try:
        project = load_config(args.config)
        args.func(args, project)
    except MetagapError as e:
        print(red_bold(f"Error: {e}"), file=sys.stderr)
        sys.exit(e.exit_code)
    except ValueError as e:
        print(red_bold(f"Error: {e}"), file=sys.stderr)
        sys.exit(UsageError.exit_code)


if __name__ == "__main__":
    main()
