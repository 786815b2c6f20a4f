"""Generate the API reference pages for the metagap package."""

# Based on https://mkdocstrings.github.io/recipes/#automatic-code-reference-pages

from pathlib import Path

import mkdocs_gen_files

ROOT = Path(__file__).parent.parent
PACKAGE = ROOT / "src" / "metagap"


def _is_public(parts: tuple[str, ...]) -> bool:
    # private helpers and the __main__ shim get no page of their own
    return not any(p.startswith("_") and p != "__init__" for p in parts)


def main():
    nav = mkdocs_gen_files.Nav()
    src = PACKAGE.parent

    for path in sorted(PACKAGE.rglob("*.py")):
        parts = path.relative_to(src).with_suffix("").parts
        if not _is_public(parts):
            continue

        doc_path = Path(*parts).with_suffix(".md")
        if parts[-1] == "__init__":
            parts = parts[:-1]
            doc_path = doc_path.with_name("index.md")

        nav[parts] = doc_path.as_posix()
        full_doc_path = Path("reference", doc_path)
        with mkdocs_gen_files.open(full_doc_path, "w") as fd:
            fd.write(f"::: {'.'.join(parts)}\n")
        mkdocs_gen_files.set_edit_path(full_doc_path, path.relative_to(ROOT))

    with mkdocs_gen_files.open("reference/SUMMARY.md", "w") as nav_file:
        nav_file.writelines(nav.build_literate_nav())


main()
