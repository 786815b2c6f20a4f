from metagap.metrics import Confusion
from metagap.sampler import PrecisionReport


def red_bold(text: str) -> str:
    """Return text in red and bold for terminal."""
    return f"\033[1;31m{text}\033[0m"


def green(text: str) -> str:
    """Return text in green for terminal."""
    return f"\033[32m{text}\033[0m"


def yellow(text: str) -> str:
    """Return text in yellow for terminal."""
    return f"\033[33m{text}\033[0m"


def format_confusion(c: Confusion) -> str:
    """
    Report lines for a model scored against stored labels.

    ```python
    from metagap.metrics import Confusion
    from metagap.tools.fmt import format_confusion
    text = format_confusion(Confusion(tp=9, fp=1, fn=5, tn=85))
    assert "precision = 0.900000" in text and "support = 10" in text
    ```
    """
    lines = [
        f"support = {c.support}",
        f"precision = {c.precision:.6f}",
        f"recall = {c.recall:.6f}",
        f"accuracy = {c.accuracy:.6f}",
        f"balanced_accuracy = {c.balanced_accuracy:.6f}",
        f"tp = {c.tp}",
        f"fp = {c.fp}",
        f"fn = {c.fn}",
        f"tn = {c.tn}",
    ]
    return "\n".join(lines) + "\n"


def format_precision(report: PrecisionReport) -> str:
    """Report lines for simulated designs."""
    lo, hi = report.interval
    lines = [
        f"designs = {len(report.designs)}",
        f"evaluated = {report.evaluated}",
        f"failed = {len(report.failed)}",
        f"positives = {report.positives}",
        f"precision = {report.precision:.6f}",
        f"interval = {lo:.6f}:{hi:.6f}",
    ]
    return "\n".join(lines) + "\n"


def format_transfer_rows(rows: list[tuple[int, PrecisionReport]]) -> str:
    """
    One CSV row per resolution: `resolution, designs, failed, precision, lo, hi`.
    """
    out = ["resolution,designs,failed,precision,lo,hi"]
    for resolution, report in rows:
        lo, hi = report.interval
        out.append(
            f"{resolution},{len(report.designs)},{len(report.failed)},{report.precision:.6f},{lo:.6f},{hi:.6f}"
        )
    return "\n".join(out) + "\n"
