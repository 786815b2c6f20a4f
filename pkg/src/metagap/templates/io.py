"""
Template set files: `# key = value` header lines, then one template per line.
"""

from pathlib import Path

from metagap.errors import DataFormatError
from metagap.templates.template import Template, TemplateSet

_HEADER = "# metagap templates"


def render_template_set(tset: TemplateSet) -> str:
    """
    ```python
    from metagap.templates.io import parse_template_set, render_template_set
    from metagap.templates.template import Template, TemplateSet
    tset = TemplateSet((Template("01" + "*" * 13),), supports=(120,), support=120, positives=118, s=5, p=0.95)
    text = render_template_set(tset)
    assert text.splitlines()[-1] == "01" + "*" * 13
    assert parse_template_set(text) == tset
    ```
    """
    lo, hi = tset.target
    lines = [
        _HEADER,
        f"# resolution = {tset.resolution}",
        f"# target = {lo!r}:{hi!r}",
        f"# s = {tset.s}",
        f"# p = {tset.p!r}",
        f"# support = {tset.support}",
        f"# positives = {tset.positives}",
        f"# precision = {tset.precision:.6f}",
        f"# optimal = {str(tset.optimal).lower()}",
        f"# bound = {tset.bound}",
        f"# feasible = {str(tset.feasible).lower()}",
        f"# dataset = {tset.dataset_digest}",
        f"# supports = {' '.join(str(v) for v in tset.supports)}",
        *(t.pattern for t in tset.templates),
    ]
    return "\n".join(lines) + "\n"


def write_template_set(tset: TemplateSet, path: Path):
    path.write_text(render_template_set(tset))


def parse_template_set(text: str, source: str = "<string>") -> TemplateSet:
    lines = text.splitlines()
    if not lines or lines[0].strip() != _HEADER:
        raise DataFormatError(f"{source} is not a metagap template set")
    items: dict[str, str] = {}
    patterns: list[str] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if line.startswith("#"):
            key, sep, value = line[1:].partition("=")
            if not sep:
                raise DataFormatError(f"{source}:{lineno}: expected 'key = value' in header")
            items[key.strip()] = value.strip()
        elif line.strip():
            patterns.append(line.strip())

    try:
        resolution = int(items.get("resolution", "10"))
        lo, hi = (float(v) for v in items.get("target", "0.0:0.0").split(":"))
        templates = tuple(Template(p, resolution) for p in patterns)
        supports = tuple(int(v) for v in items.get("supports", "").split())
        return TemplateSet(
            templates=templates,
            supports=supports,
            support=int(items.get("support", "0")),
            positives=int(items.get("positives", "0")),
            s=int(items.get("s", "0")),
            p=float(items.get("p", "0")),
            optimal=items.get("optimal", "true") == "true",
            bound=int(items.get("bound", "0")),
            feasible=items.get("feasible", "true") == "true",
            target=(lo, hi),
            dataset_digest=items.get("dataset", ""),
        )
    except ValueError as e:
        raise DataFormatError(f"{source}: {e}") from None


def read_template_set(path: Path) -> TemplateSet:
    try:
        text = path.read_text()
    except OSError as e:
        raise DataFormatError(f"Cannot read template set {path}: {e}") from e
    return parse_template_set(text, source=str(path))
