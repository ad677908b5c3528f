"""Sectioned key:value text documents.

Every data file this package ships or reads (knowledge corpora, agent
specs, personas, policy rules, mock scripts, run configs) uses one format:
a file holds one or more sections separated by lines of three or more
dashes. A section starts with a header block of ``key: value`` lines,
ends the header at the first blank line, and carries everything after it
as a verbatim body (outer blank lines trimmed).
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

_SEPARATOR = re.compile(r"^-{3,}\s*$")
_HEADER = re.compile(r"^([A-Za-z0-9_-]+):[ \t]?(.*)$")


class ParseError(Exception):
    """A malformed sectioned document."""

    def __init__(self, source: str, line: int, message: str):
        super().__init__(f"{source}:{line}: {message}")
        self.source = source
        self.line = line
        self.message = message


@dataclass
class Section:
    """One header block plus its body, with the 1-based line it starts on."""

    fields: dict[str, str] = field(default_factory=dict)
    body: str = ""
    line: int = 0
    source: str = "<string>"

    def get(self, key: str, default: str | None = None) -> str | None:
        return self.fields.get(key, default)

    def require(self, key: str) -> str:
        try:
            return self.fields[key]
        except KeyError:
            raise ParseError(self.source, self.line, f"missing required field {key!r}") from None

    def split_list(self, key: str) -> list[str]:
        """Comma-separated field value as a list, empty field -> []."""
        raw = self.fields.get(key, "")
        return [part.strip() for part in raw.split(",") if part.strip()]


def parse_sections(text: str, source: str = "<string>") -> list[Section]:
    """Split a document into sections; raise ParseError on malformed headers."""
    sections: list[Section] = []
    lines = text.split("\n")
    i = 0
    total = len(lines)
    while i < total:
        # skip blank lines and separators between sections
        while i < total and (not lines[i].strip() or _SEPARATOR.match(lines[i])):
            i += 1
        if i >= total:
            break
        section = Section(line=i + 1, source=source)
        # header block: key: value lines until a blank line or separator
        while i < total and lines[i].strip():
            if _SEPARATOR.match(lines[i]):
                break
            match = _HEADER.match(lines[i])
            if not match:
                raise ParseError(source, i + 1, f"expected 'key: value' header line, got {lines[i]!r}")
            key = match.group(1).lower()
            if key in section.fields:
                raise ParseError(source, i + 1, f"duplicate header field {key!r}")
            section.fields[key] = match.group(2).strip()
            i += 1
        # body: everything up to the next separator
        body_lines: list[str] = []
        if i < total and not _SEPARATOR.match(lines[i]):
            i += 1  # the blank line that closed the header
            while i < total and not _SEPARATOR.match(lines[i]):
                body_lines.append(lines[i])
                i += 1
        section.body = "\n".join(body_lines).strip("\n")
        sections.append(section)
    return sections


def parse_file(path, source: str | None = None) -> list[Section]:
    with open(path, encoding="utf-8") as handle:
        return parse_sections(handle.read(), source=source or str(path))


def render_section(fields: dict[str, str], body: str = "") -> str:
    """Inverse of parse_sections for a single section."""
    out = [f"{key}: {value}" for key, value in fields.items()]
    if body:
        out.append("")
        out.append(body)
    return "\n".join(out)
