"""Pattern files and the built-in corpus.

A pattern file is UTF-8 text: optional ``#`` header lines (``# name: ...``,
``# id: 0x...``) followed by exactly one pattern.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .ast import PatternAst
from .parser import parse_pattern
from .render import pattern_id, render_pattern


@dataclass(frozen=True)
class PatternSource:
    name: str
    text: str
    ast: PatternAst
    declared_id: str | None = None
    path: str | None = None

    @property
    def id(self) -> bytes:
        return pattern_id(self.ast)

    @property
    def canonical(self) -> str:
        return render_pattern(self.ast)


def split_header(text: str) -> tuple[dict[str, str], str]:
    meta = {}
    lines = text.splitlines()
    body_start = 0
    for i, line in enumerate(lines):
        stripped = line.strip()
        if not stripped:
            continue
        if not stripped.startswith("#"):
            body_start = i
            break
        key, sep, value = stripped.lstrip("#").partition(":")
        if sep:
            meta.setdefault(key.strip().lower(), value.strip())
    else:
        body_start = len(lines)
    # Blank out the header instead of dropping it so error positions keep
    # pointing at the right line of the file.
    body = "\n" * body_start + "\n".join(lines[body_start:])
    return meta, body


def parse_pattern_text(text: str, name: str = "", path: str | None = None) -> PatternSource:
    meta, body = split_header(text)
    ast = parse_pattern(body)
    return PatternSource(meta.get("name", name), text, ast, meta.get("id"), path)


def load_pattern_file(path) -> PatternSource:
    p = Path(path)
    return parse_pattern_text(p.read_text(encoding="utf-8"), p.stem, str(p))


def load_pattern_dir(path) -> list[PatternSource]:
    return [load_pattern_file(p) for p in sorted(Path(path).glob("*.pattern"))]


def builtin_dir() -> Path:
    return Path(str(resources.files("aegis.dsl") / "patterns"))


def builtin_patterns() -> list[PatternSource]:
    """The twelve shipped patterns, in file order."""
    return load_pattern_dir(builtin_dir())


def builtin_by_name() -> dict[str, PatternSource]:
    return {Path(p.path).stem.split("_", 1)[1]: p for p in builtin_patterns()}
