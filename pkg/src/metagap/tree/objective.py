"""Tree objectives over confusion counts."""

from dataclasses import dataclass
from typing import Literal

import numpy as np
import numpy.typing as npt

type ObjectiveKind = Literal["prec-support", "balanced-accuracy"]

OBJECTIVE_KINDS: tuple[ObjectiveKind, ...] = ("prec-support", "balanced-accuracy")


@dataclass(frozen=True)
class Objective:
    """
    What the tree search maximizes, before the per-leaf penalty `lam`.

    `prec-support` is `TP/(TP+FP+eps) - K/(TP+eps)`, trading precision against the
    number of positives found. `balanced-accuracy` is `(TPR + TNR) / 2`.
    Both decrease as FP or FN grow, which is what the search bound relies on.

    ```python
    from metagap.tree.objective import Objective
    obj = Objective("prec-support", K=1.0, eps=1e-9)
    assert abs(obj.value(tp=10, fp=0, fn=0, pos=10, neg=5) - 0.9) < 1e-6
    ```
    """

    kind: ObjectiveKind = "prec-support"
    K: float = 1.0
    eps: float = 1e-9
    lam: float = 0.005

    def __post_init__(self):
        if self.kind not in OBJECTIVE_KINDS:
            raise ValueError(f"Unknown objective {self.kind!r}, expected one of {OBJECTIVE_KINDS}")
        if self.K < 0:
            raise ValueError(f"K must be non-negative, got {self.K}")
        if self.eps <= 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.lam < 0:
            raise ValueError(f"lam must be non-negative, got {self.lam}")

    def value(self, tp: int, fp: int, fn: int, pos: int, neg: int) -> float:
        return objective_value(tp, fp, fn, pos, neg, self)

    def penalized(self, fp: int, fn: int, leaves: int, pos: int, neg: int) -> float:
        """
        Objective of a whole tree with `leaves` leaves, minus the sparsity penalty.
        """
        return objective_value(pos - fn, fp, fn, pos, neg, self) - self.lam * leaves

    def best_split_of_errors(self, fp: int, fn: int, floor: int, pos: int, neg: int) -> float:
        """
        Largest objective reachable when `floor` more errors are unavoidable but may be
        assigned freely between false positives and false negatives.
        """
        if floor == 0:
            return self.value(pos - fn, fp, fn, pos, neg)
        x = np.arange(floor + 1)
        extra_fn = np.minimum(floor - x, pos - fn)
        return float(np.max(self.values(pos - fn - extra_fn, fp + x, fn + extra_fn, pos, neg)))

    def values(
        self, tp: npt.NDArray[np.integer], fp: npt.NDArray[np.integer], fn: npt.NDArray[np.integer], pos: int, neg: int
    ) -> npt.NDArray[np.float64]:
        """
        Vectorised `value`.
        """
        tp = np.asarray(tp, dtype=np.float64)
        fp = np.asarray(fp, dtype=np.float64)
        fn = np.asarray(fn, dtype=np.float64)
        match self.kind:
            case "prec-support":
                return tp / (tp + fp + self.eps) - self.K / (tp + self.eps)
            case "balanced-accuracy":
                tpr = tp / pos if pos else np.ones_like(tp)
                tnr = (neg - fp) / neg if neg else np.ones_like(fp)
                return (tpr + tnr) / 2
            case _:
                raise ValueError(f"Unknown objective {self.kind!r}")


def objective_value(tp: int, fp: int, fn: int, pos: int, neg: int, obj: Objective) -> float:
    """
    Objective for one set of confusion counts, without the leaf penalty.

    ```python
    from metagap.tree.objective import Objective, objective_value
    obj = Objective("prec-support", K=1.0, eps=1e-9)
    assert abs(objective_value(9, 1, 0, 9, 5, obj) - (0.9 - 1 / 9)) < 1e-6
    assert objective_value(0, 0, 9, 9, 5, obj) < -1e8
    ```
    """
    if min(tp, fp, fn) < 0 or tp + fn != pos or fp > neg:
        raise ValueError(f"Inconsistent counts: TP={tp} FP={fp} FN={fn} P={pos} N={neg}")
    match obj.kind:
        case "prec-support":
            return tp / (tp + fp + obj.eps) - obj.K / (tp + obj.eps)
        case "balanced-accuracy":
            tpr = tp / pos if pos else 1.0
            tnr = (neg - fp) / neg if neg else 1.0
            return (tpr + tnr) / 2
        case _:
            raise ValueError(f"Unknown objective {obj.kind!r}")
