"""Java source ingestion: comment stripping, top-level type discovery, snippets.

Only a lexer-level view of Java is needed here. Sources are handed to the
model as text, so nothing beyond comments, literals, braces and the handful of
keywords that introduce top-level types is interpreted.
"""

from __future__ import annotations

import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Mapping

from .errors import EmptySnippetError, IngestError, LexError
from .names import in_package

log = logging.getLogger(__name__)

_INTERESTING = re.compile(r"[\"'/]")
_EOL = re.compile(r"[\r\n]")
_LITERAL = {
    '"': re.compile(r'"(?:[^"\\\r\n]|\\.)*"'),
    "'": re.compile(r"'(?:[^'\\\r\n]|\\.)*'"),
}
_TOKEN = re.compile(
    r"""
      (?P<ws>\s+)
    | (?P<lit>"(?:[^"\\\r\n]|\\.)*"|'(?:[^'\\\r\n]|\\.)*')
    | (?P<id>(?:[^\W\d]|\$)(?:\w|\$)*)
    | (?P<num>\d[\w.]*)
    | (?P<op>.)
    """,
    re.VERBOSE | re.DOTALL,
)
_TYPE_KEYWORDS = frozenset({"class", "interface", "enum"})


def _byte_offset(text: str, index: int) -> int:
    return len(text[:index].encode("utf-8", "surrogatepass"))


def strip_comments(source: str) -> str:
    """Remove ``//`` and ``/* */`` comments, leaving literals and code untouched.

    The newline that terminates a line comment is kept. Raises
    :class:`LexError` for an unterminated block comment or literal.
    """
    out: list[str] = []
    i = 0
    while True:
        m = _INTERESTING.search(source, i)
        if m is None:
            out.append(source[i:])
            break
        j = m.start()
        ch = source[j]
        if ch == "/":
            nxt = source[j + 1 : j + 2]
            if nxt == "/":
                out.append(source[i:j])
                eol = _EOL.search(source, j)
                i = eol.start() if eol else len(source)
            elif nxt == "*":
                out.append(source[i:j])
                end = source.find("*/", j + 2)
                if end < 0:
                    raise LexError("unterminated block comment", _byte_offset(source, j))
                i = end + 2
            else:
                out.append(source[i : j + 1])
                i = j + 1
        else:
            lit = _LITERAL[ch].match(source, j)
            if lit is None:
                kind = "string" if ch == '"' else "char"
                raise LexError(f"unterminated {kind} literal", _byte_offset(source, j))
            out.append(source[i : lit.end()])
            i = lit.end()
    return "".join(out)


@dataclass(frozen=True)
class _TypeDecl:
    name: str
    start: int
    end: int


def _tokens(text: str):
    for m in _TOKEN.finditer(text):
        if m.lastgroup != "ws":
            yield m.lastgroup, m.group(), m.start()


def _scan(clean: str) -> tuple[str, list[_TypeDecl]]:
    toks = list(_tokens(clean))
    package = ""
    decls: list[_TypeDecl] = []
    depth = 0
    start: int | None = None
    current: tuple[str, int] | None = None
    prev = ""
    i = 0
    while i < len(toks):
        kind, text, pos = toks[i]
        if depth == 0:
            if start is None:
                start = pos
            if kind == "id" and text == "package" and prev not in (".", "@") and current is None:
                i, package = _read_package(toks, i, clean)
                start, prev = None, ";"
                continue
            if kind == "id" and text in _TYPE_KEYWORDS and prev != "." and current is None:
                if i + 1 < len(toks) and toks[i + 1][0] == "id":
                    current = (toks[i + 1][1], start)
                    prev = toks[i + 1][1]
                    i += 2
                    continue
            if text == ";" and current is None:
                start = None
        if text == "{":
            depth += 1
        elif text == "}" and depth > 0:
            depth -= 1
            if depth == 0:
                if current is not None:
                    decls.append(_TypeDecl(current[0], current[1], pos + 1))
                    current = None
                start = None
        prev = text
        i += 1
    return package, decls


def _read_package(toks, i: int, clean: str) -> tuple[int, str]:
    pos = toks[i][2]
    parts: list[str] = []
    j = i + 1
    expect_id = True
    while j < len(toks):
        kind, text, _ = toks[j]
        if text == ";" and not expect_id and parts:
            return j + 1, ".".join(parts)
        if expect_id and kind == "id":
            parts.append(text)
        elif not expect_id and text == ".":
            pass
        else:
            break
        expect_id = not expect_id
        j += 1
    raise LexError("malformed package declaration", _byte_offset(clean, pos))


def extract_decls(source: str) -> tuple[str, list[str]]:
    """Return the declared package and top-level type names of stripped source."""
    package, decls = _scan(source)
    return package, [d.name for d in decls]


@dataclass(frozen=True)
class ClassUnit:
    fqn: str
    file_path: str
    raw_source: str
    clean_source: str

    def __post_init__(self) -> None:
        if not self.fqn or any(c.isspace() for c in self.fqn):
            raise ValueError(f"invalid fully qualified name: {self.fqn!r}")


@dataclass(frozen=True)
class ClassIndex:
    project_id: str
    units: Mapping[str, ClassUnit]
    skipped: tuple[tuple[str, str], ...] = ()

    def __post_init__(self) -> None:
        for key, unit in self.units.items():
            if key != unit.fqn:
                raise ValueError(f"index key {key!r} does not match unit {unit.fqn!r}")
        ordered = dict(sorted(self.units.items()))
        object.__setattr__(self, "units", MappingProxyType(ordered))

    def __len__(self) -> int:
        return len(self.units)

    def __contains__(self, fqn: object) -> bool:
        return fqn in self.units

    def select(self, package_prefix: str) -> list[ClassUnit]:
        return [u for fqn, u in self.units.items() if in_package(fqn, package_prefix)]

    def manifest(self) -> dict:
        return {
            "project_id": self.project_id,
            "units": [
                {"fqn": u.fqn, "path": u.file_path, "byte_len": len(u.clean_source.encode("utf-8"))}
                for u in self.units.values()
            ],
        }


def _read_text(path: Path) -> str:
    data = path.read_bytes()
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError:
        return data.decode("latin-1")


def units_from_source(raw: str, file_path: str) -> list[ClassUnit]:
    """Lex one compilation unit into one ClassUnit per top-level type.

    When a file declares several top-level types, each unit carries the file's
    package/import prologue followed by its own declaration.
    """
    clean = strip_comments(raw)
    package, decls = _scan(clean)
    if not decls:
        return []
    if len(decls) == 1:
        bodies = [clean]
    else:
        prologue = clean[: decls[0].start]
        bodies = [prologue + clean[d.start : d.end] for d in decls]
    return [
        ClassUnit(
            fqn=f"{package}.{d.name}" if package else d.name,
            file_path=file_path,
            raw_source=raw,
            clean_source=body,
        )
        for d, body in zip(decls, bodies)
    ]


def index_project(
    root: str | Path,
    project_id: str,
    *,
    lenient: bool = False,
    workers: int = 8,
) -> ClassIndex:
    root = Path(root)
    if not root.is_dir():
        raise IngestError(f"project root {root} is not a directory")
    files = sorted(root.rglob("*.java"), key=lambda p: p.relative_to(root).as_posix())

    def lex(path: Path):
        rel = path.relative_to(root).as_posix()
        try:
            return rel, units_from_source(_read_text(path), rel), None
        except OSError as exc:
            raise IngestError(f"cannot read {path}: {exc}") from exc
        except LexError as exc:
            if not lenient:
                raise LexError(exc.reason, exc.offset, rel) from exc
            return rel, [], str(exc)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(lex, files))

    units: dict[str, ClassUnit] = {}
    skipped: list[tuple[str, str]] = []
    for rel, file_units, problem in results:
        if problem is not None:
            log.warning("skipping %s: %s", rel, problem)
            skipped.append((rel, problem))
            continue
        for unit in file_units:
            if unit.fqn in units:
                raise IngestError(
                    f"duplicate type {unit.fqn} in {units[unit.fqn].file_path} and {unit.file_path}"
                )
            units[unit.fqn] = unit
    return ClassIndex(project_id, units, tuple(skipped))


def _render(entries: tuple[tuple[str, str], ...]) -> str:
    return "\n\n".join(f"File: {fqn}\n```java\n{src.strip()}\n```" for fqn, src in entries)


@dataclass(frozen=True)
class Snippet:
    entries: tuple[tuple[str, str], ...]
    rendered: str = field(init=False, repr=False)

    def __post_init__(self) -> None:
        entries = tuple(sorted(self.entries))
        object.__setattr__(self, "entries", entries)
        object.__setattr__(self, "rendered", _render(entries))

    @property
    def classes(self) -> frozenset[str]:
        return frozenset(fqn for fqn, _ in self.entries)

    def __len__(self) -> int:
        return len(self.entries)


def assemble_snippet(index: ClassIndex, package_prefix: str) -> Snippet:
    units = index.select(package_prefix)
    if not units:
        raise EmptySnippetError(
            f"no classes under package {package_prefix!r} in project {index.project_id}"
        )
    return Snippet(tuple((u.fqn, u.clean_source) for u in units))
