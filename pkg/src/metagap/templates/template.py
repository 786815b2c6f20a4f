"""
Unit-cell templates: ternary masks over the irreducible pixels.

Character i of a template constrains irreducible pixel i to soft (`0`), stiff (`1`),
or leaves it free (`*`). A cell matches when every constrained pixel agrees, which
for design ids is one AND and one compare: `(id & care) == value`.
"""

from collections.abc import Sequence
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import numpy.typing as npt

from metagap.unitcell import UnitCell, expansion_map, irreducible_count, representative_pixels

SYMBOLS = "01*"

# widest template whose masks still fit a signed 64-bit id
_INT64_BITS = 62


@dataclass(frozen=True)
class Template:
    """
    ```python
    from metagap.templates.template import Template
    from metagap.unitcell import UnitCell
    t = Template("1" + "*" * 14)
    assert t.care == 1 and t.value == 1
    assert t.matches(UnitCell.from_id(3))
    assert not t.matches(UnitCell.from_id(2))
    ```
    """

    pattern: str
    resolution: int = 10

    def __post_init__(self):
        if any(ch not in SYMBOLS for ch in self.pattern):
            raise ValueError(f"Template may only contain {SYMBOLS!r}, got {self.pattern!r}")
        expected = irreducible_count(self.resolution)
        if len(self.pattern) != expected:
            raise ValueError(f"A {self.resolution}x{self.resolution} template needs {expected} entries")

    @classmethod
    def free(cls, resolution: int = 10) -> Template:
        return cls("*" * irreducible_count(resolution), resolution)

    @classmethod
    def of_cell(cls, cell: UnitCell) -> Template:
        return cls(cell.to_string(), cell.resolution)

    @cached_property
    def care(self) -> int:
        return sum(1 << i for i, ch in enumerate(self.pattern) if ch != "*")

    @cached_property
    def value(self) -> int:
        return sum(1 << i for i, ch in enumerate(self.pattern) if ch == "1")

    @property
    def free_count(self) -> int:
        return self.pattern.count("*")

    @property
    def ternary_index(self) -> int:
        """
        Position in mixed-radix enumeration order: digit i is 0, 1 or 2 (`*`) with weight 3**i.
        """
        return sum(SYMBOLS.index(ch) * 3**i for i, ch in enumerate(self.pattern))

    def matches(self, cell: UnitCell) -> bool:
        return matches(self, cell)

    def matches_ids(self, ids: npt.NDArray[np.integer]) -> npt.NDArray[np.bool_]:
        """
        Vectorised match over design ids at this template's resolution.
        """
        ids = np.asarray(ids, dtype=np.int64)
        if len(self.pattern) > _INT64_BITS:
            return np.array([(int(i) & self.care) == self.value for i in ids], dtype=bool)
        return (ids & np.int64(self.care)) == np.int64(self.value)

    def full_grid(self) -> npt.NDArray[np.str_]:
        """
        n x n array of symbols, each pixel showing the entry of the irreducible pixel it copies.
        """
        return np.array(list(self.pattern))[expansion_map(self.resolution)]


def matches(template: Template, cell: UnitCell) -> bool:
    if template.resolution != cell.resolution:
        raise ValueError(f"Template is {template.resolution}x{template.resolution}, cell is {cell.resolution}")
    return (cell.design_id & template.care) == template.value


def transfer_template(template: Template, factor: int) -> Template:
    """
    Template at `factor` times the resolution: every entry becomes a factor x factor block.

    ```python
    from metagap.templates.template import Template, transfer_template
    fine = transfer_template(Template("0" + "*" * 14), 2)
    assert fine.resolution == 20
    assert fine.pattern.count("0") == 3  # one coarse corner pixel covers 2x2 fine pixels, 3 irreducible
    ```
    """
    if factor < 1:
        raise ValueError(f"factor must be >= 1, got {factor}")
    if factor == 1:
        return template
    fine = template.full_grid().repeat(factor, axis=0).repeat(factor, axis=1)
    reps = representative_pixels(template.resolution * factor)
    return Template("".join(fine[reps[:, 0], reps[:, 1]]), template.resolution * factor)


def match_matrix(templates: Sequence[Template], ids: npt.NDArray[np.integer]) -> npt.NDArray[np.bool_]:
    """
    (len(ids), len(templates)) boolean matrix, entry (i, j) true iff design i matches template j.
    """
    out = np.zeros((len(ids), len(templates)), dtype=bool)
    for j, t in enumerate(templates):
        out[:, j] = t.matches_ids(ids)
    return out


@dataclass(frozen=True)
class TemplateSet:
    """
    A disjunction of templates and how it scored on the data it was mined from.

    `supports[j]` is the number of training designs template j matches; `support` and
    `positives` count the designs at least one template matches. `feasible` is false
    when no set met the precision constraint, in which case `templates` is empty.
    """

    templates: tuple[Template, ...]
    supports: tuple[int, ...] = ()
    support: int = 0
    positives: int = 0
    s: int = 0
    p: float = 0.0
    optimal: bool = True
    bound: int = 0
    feasible: bool = True
    target: tuple[float, float] = (0.0, 0.0)
    dataset_digest: str = ""

    def __post_init__(self):
        if self.supports and len(self.supports) != len(self.templates):
            raise ValueError("supports must have one entry per template")
        if len({t.resolution for t in self.templates}) > 1:
            raise ValueError("All templates in a set must share a resolution")

    def __len__(self) -> int:
        return len(self.templates)

    @property
    def resolution(self) -> int:
        return self.templates[0].resolution if self.templates else 10

    @property
    def precision(self) -> float:
        return self.positives / self.support if self.support else 0.0

    @property
    def gap(self) -> int:
        return max(self.bound - self.support, 0)

    def predict(self, cell: UnitCell) -> int:
        return predict_set(self, cell)

    def predict_ids(self, ids: npt.NDArray[np.integer]) -> npt.NDArray[np.uint8]:
        if not self.templates:
            return np.zeros(len(ids), dtype=np.uint8)
        return match_matrix(self.templates, ids).any(axis=1).astype(np.uint8)


def predict_set(tset: TemplateSet, cell: UnitCell) -> int:
    """
    1 if the cell matches at least one template of the set.

    ```python
    from metagap.templates.template import Template, TemplateSet, predict_set
    from metagap.unitcell import UnitCell
    assert predict_set(TemplateSet(()), UnitCell.from_id(5)) == 0
    assert predict_set(TemplateSet((Template.free(),)), UnitCell.from_id(5)) == 1
    ```
    """
    return int(any(matches(t, cell) for t in tset.templates))


def specialize(template: Template, index: int, symbol: str) -> Template:
    """
    Copy of `template` with a free entry fixed to `symbol`.
    """
    if template.pattern[index] != "*" or symbol not in ("0", "1"):
        raise ValueError(f"Can only fix a free entry to 0 or 1, got {template.pattern[index]!r} -> {symbol!r}")
    return Template(template.pattern[:index] + symbol + template.pattern[index + 1 :], template.resolution)


def meets_precision(positives: int, support: int, p: float) -> bool:
    """
    `positives / support >= p`, tolerant of `p` not being exactly representable.

    ```python
    from metagap.templates.template import meets_precision
    assert meets_precision(93, 100, 0.93)
    assert not meets_precision(92, 100, 0.93)
    ```
    """
    return positives >= p * support - 1e-9 * support
