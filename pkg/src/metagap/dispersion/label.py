"""Binary band-gap labels from gap intervals."""

from collections.abc import Sequence
from dataclasses import dataclass

from metagap.custom_types import Interval, LabelMode

LABEL_MODES: tuple[LabelMode, ...] = ("intersect", "min-width", "cover")


@dataclass(frozen=True)
class LabelPolicy:
    """
    How a list of gaps is turned into a 0/1 label for a target range (f_a, f_b) in Hz.

    - `intersect`: some gap overlaps the range with positive measure
    - `min-width`: some gap's overlap with the range is wider than `min_width`
    - `cover`: some gap contains the whole range

    ```python
    from metagap.dispersion.label import LabelPolicy
    policy = LabelPolicy("intersect", 10_000, 20_000)
    assert policy.label([(12_000, 14_000)]) == 1
    assert LabelPolicy("cover", 10_000, 20_000).label([(12_000, 14_000)]) == 0
    ```
    """

    mode: LabelMode
    f_a: float
    f_b: float
    min_width: float = 0.0

    def __post_init__(self):
        if self.mode not in LABEL_MODES:
            raise ValueError(f"Unknown label mode {self.mode!r}, expected one of {LABEL_MODES}")
        if not self.f_a < self.f_b:
            raise ValueError(f"Target range must satisfy f_a < f_b, got ({self.f_a}, {self.f_b})")
        if self.mode == "min-width" and self.min_width <= 0:
            raise ValueError("min-width policy needs a positive width")

    def label(self, gaps: Sequence[Interval]) -> int:
        return label(gaps, self)


def label(gaps: Sequence[Interval], policy: LabelPolicy) -> int:
    """
    Label gaps under a policy.
    """
    for lo, hi in gaps:
        overlap = min(hi, policy.f_b) - max(lo, policy.f_a)
        match policy.mode:
            case "intersect":
                hit = overlap > 0
            case "min-width":
                hit = overlap > policy.min_width
            case "cover":
                hit = lo <= policy.f_a and hi >= policy.f_b
            case _:
                raise ValueError(f"Unknown label mode {policy.mode!r}")
        if hit:
            return 1
    return 0


def parse_range(text: str) -> tuple[float, float]:
    """
    Parse a frequency range such as `10k-20k` or `10000-20000` into Hz.

    ```python
    from metagap.dispersion.label import parse_range
    assert parse_range("10k-20k") == (10_000.0, 20_000.0)
    assert parse_range("0-6.5k") == (0.0, 6_500.0)
    ```
    """
    parts = text.strip().split("-")
    if len(parts) != 2:
        raise ValueError(f"Range must look like '10k-20k', got {text!r}")
    lo, hi = (_parse_freq(p) for p in parts)
    if not lo < hi:
        raise ValueError(f"Range must be increasing, got {text!r}")
    return lo, hi


def format_range(lo: float, hi: float) -> str:
    """
    Inverse of `parse_range`, using a `k` suffix when exact.
    """
    return f"{_format_freq(lo)}-{_format_freq(hi)}"


def _parse_freq(text: str) -> float:
    text = text.strip().lower()
    scale = 1.0
    if text.endswith("khz"):
        text, scale = text[:-3], 1000.0
    elif text.endswith("k"):
        text, scale = text[:-1], 1000.0
    elif text.endswith("hz"):
        text = text[:-2]
    return float(text) * scale


def _format_freq(f: float) -> str:
    if f % 1000 == 0:
        return f"{int(f // 1000)}k"
    return f"{f:g}"
