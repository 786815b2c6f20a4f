"""
Sparse decision trees over shape-frequency thresholds, and their JSON model file.
"""

from collections.abc import Iterator
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Annotated, Literal

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, Field, ValidationError

from metagap.errors import DataFormatError
from metagap.sff import SFFVector
from metagap.tree.binarize import BinaryColumn
from metagap.tree.objective import Objective, ObjectiveKind


@dataclass(frozen=True)
class Leaf:
    prediction: int
    positives: int = 0
    negatives: int = 0


@dataclass(frozen=True)
class Split:
    """
    Internal node; `left` takes designs with feature <= threshold, `right` the rest.
    """

    column: BinaryColumn
    left: Node
    right: Node


type Node = Leaf | Split


@dataclass(frozen=True)
class SparseTree:
    """
    A fitted tree and the feature layout it was trained on.

    ```python
    from fractions import Fraction
    from metagap.sff import SFFVector
    from metagap.tree.binarize import BinaryColumn
    from metagap.tree.model import Leaf, SparseTree, Split

    root = Split(BinaryColumn(0, "plus", Fraction(1, 5)), Leaf(0), Leaf(1))
    tree = SparseTree(root, names=("plus",))
    assert tree.predict(SFFVector((30,), 100, 10)) == 1
    assert tree.predict(SFFVector((20,), 100, 10)) == 0
    ```
    """

    root: Node
    names: tuple[str, ...]

    @property
    def depth(self) -> int:
        return _depth(self.root)

    @property
    def num_leaves(self) -> int:
        return sum(1 for _ in self.leaves())

    def leaves(self) -> Iterator[Leaf]:
        stack: list[Node] = [self.root]
        while stack:
            node = stack.pop()
            if isinstance(node, Leaf):
                yield node
            else:
                stack.extend((node.right, node.left))

    def splits(self) -> Iterator[Split]:
        stack: list[Node] = [self.root]
        while stack:
            node = stack.pop()
            if isinstance(node, Split):
                yield node
                stack.extend((node.right, node.left))

    def predict(self, sff: SFFVector) -> int:
        return predict(self, sff)

    def predict_counts(self, counts: npt.NDArray[np.integer], denominator: int) -> npt.NDArray[np.uint8]:
        """
        Predictions for an (N, F) matrix of feature numerators over `denominator`.
        """
        counts = np.asarray(counts, dtype=np.int64)
        if counts.ndim != 2 or counts.shape[1] != len(self.names):
            raise ValueError(f"Expected an (N, {len(self.names)}) matrix, got shape {counts.shape}")
        return np.array([_walk(self.root, row, denominator) for row in counts], dtype=np.uint8)


def predict(tree: SparseTree, sff: SFFVector) -> int:
    if len(sff.counts) != len(tree.names):
        raise ValueError(f"Feature vector has {len(sff.counts)} entries, the tree expects {len(tree.names)}")
    return _walk(tree.root, sff.counts, sff.denominator)


def _walk(node: Node, counts, denominator: int) -> int:
    while isinstance(node, Split):
        t = node.column.threshold
        above = int(counts[node.column.feature]) * t.denominator > t.numerator * denominator
        node = node.right if above else node.left
    return node.prediction


def _depth(node: Node) -> int:
    if isinstance(node, Leaf):
        return 0
    return 1 + max(_depth(node.left), _depth(node.right))


class LeafModel(BaseModel):
    kind: Literal["leaf"] = "leaf"
    prediction: int
    positives: int
    negatives: int


class SplitModel(BaseModel):
    kind: Literal["split"] = "split"
    shape: str
    feature: int
    threshold_num: int
    threshold_den: int
    left: NodeModel
    right: NodeModel


NodeModel = Annotated[LeafModel | SplitModel, Field(discriminator="kind")]

SplitModel.model_rebuild()


class ObjectiveModel(BaseModel):
    kind: ObjectiveKind
    K: float
    eps: float
    lam: float


class TreeFile(BaseModel):
    """
    On-disk tree model: the tree plus what it was trained for.
    """

    format: Literal["metagap-tree"] = "metagap-tree"
    names: list[str]
    objective: ObjectiveModel
    target: tuple[float, float]
    depth_limit: int
    value: float
    bound: float
    optimal: bool
    dataset: str = ""
    root: NodeModel


@dataclass(frozen=True)
class TreeArtifact:
    """
    A tree with its training context, as written to and read from a model file.
    """

    tree: SparseTree
    objective: Objective
    target: tuple[float, float]
    depth_limit: int
    value: float
    bound: float
    optimal: bool
    dataset_digest: str = ""


def render_tree(artifact: TreeArtifact) -> str:
    obj = artifact.objective
    doc = TreeFile(
        names=list(artifact.tree.names),
        objective=ObjectiveModel(kind=obj.kind, K=obj.K, eps=obj.eps, lam=obj.lam),
        target=artifact.target,
        depth_limit=artifact.depth_limit,
        value=artifact.value,
        bound=artifact.bound,
        optimal=artifact.optimal,
        dataset=artifact.dataset_digest,
        root=_to_model(artifact.tree.root),
    )
    return doc.model_dump_json(indent=2) + "\n"


def write_tree(artifact: TreeArtifact, path: Path):
    path.write_text(render_tree(artifact))


def parse_tree(text: str, source: str = "<string>") -> TreeArtifact:
    try:
        doc = TreeFile.model_validate_json(text)
    except ValidationError as e:
        raise DataFormatError(f"{source} is not a valid tree model: {e}") from None
    names = tuple(doc.names)
    root = _from_model(doc.root, names, source)
    return TreeArtifact(
        tree=SparseTree(root, names),
        objective=Objective(doc.objective.kind, doc.objective.K, doc.objective.eps, doc.objective.lam),
        target=doc.target,
        depth_limit=doc.depth_limit,
        value=doc.value,
        bound=doc.bound,
        optimal=doc.optimal,
        dataset_digest=doc.dataset,
    )


def read_tree(path: Path) -> TreeArtifact:
    try:
        text = path.read_text()
    except OSError as e:
        raise DataFormatError(f"Cannot read tree model {path}: {e}") from e
    return parse_tree(text, source=str(path))


def _to_model(node: Node) -> LeafModel | SplitModel:
    if isinstance(node, Leaf):
        return LeafModel(prediction=node.prediction, positives=node.positives, negatives=node.negatives)
    t = node.column.threshold
    return SplitModel(
        shape=node.column.name,
        feature=node.column.feature,
        threshold_num=t.numerator,
        threshold_den=t.denominator,
        left=_to_model(node.left),
        right=_to_model(node.right),
    )


def _from_model(model: LeafModel | SplitModel, names: tuple[str, ...], source: str) -> Node:
    if isinstance(model, LeafModel):
        if model.prediction not in (0, 1):
            raise DataFormatError(f"{source}: leaf prediction must be 0 or 1, got {model.prediction}")
        return Leaf(model.prediction, model.positives, model.negatives)
    if not 0 <= model.feature < len(names) or names[model.feature] != model.shape:
        raise DataFormatError(f"{source}: split on {model.shape!r} does not match feature {model.feature}")
    if model.threshold_den <= 0:
        raise DataFormatError(f"{source}: threshold denominator must be positive")
    column = BinaryColumn(model.feature, model.shape, Fraction(model.threshold_num, model.threshold_den))
    return Split(column, _from_model(model.left, names, source), _from_model(model.right, names, source))
