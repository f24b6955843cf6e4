"""Minimal line-oriented ``key = value`` reader with ``[section]`` headers.

Unlike :mod:`configparser` it keeps the line number of every key so that
validation errors can point at the offending line, and it supports
indented continuation rows for tabular values.
"""

from __future__ import annotations

from dataclasses import dataclass, field


class ConfigError(ValueError):
    """Malformed or invalid configuration text."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass
class Entry:
    value: str
    line: int
    rows: list[str] = field(default_factory=list)


def parse_sections(text: str, allow_rows: bool = False) -> dict[str, dict[str, Entry]]:
    """Split text into ``{section: {key: Entry}}``.

    Keys before any header land in section ``""``. ``#`` and ``;`` start
    comments. With ``allow_rows`` indented lines after a key are collected
    into ``Entry.rows``.
    """
    doc: dict[str, dict[str, Entry]] = {"": {}}
    section = ""
    last: Entry | None = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0].split(";", 1)[0].rstrip()
        if not stripped.strip():
            continue
        if raw[:1] in (" ", "\t") and last is not None and "=" not in stripped:
            if not allow_rows:
                raise ConfigError("unexpected indented line", lineno)
            last.rows.append(stripped.strip())
            continue
        s = stripped.strip()
        if s.startswith("["):
            if not s.endswith("]") or len(s) < 3:
                raise ConfigError(f"malformed section header {s!r}", lineno)
            section = s[1:-1].strip()
            if section in doc and section:
                raise ConfigError(f"duplicate section [{section}]", lineno)
            doc.setdefault(section, {})
            last = None
            continue
        if "=" not in s:
            raise ConfigError(f"expected 'key = value', got {s!r}", lineno)
        key, value = (p.strip() for p in s.split("=", 1))
        if not key:
            raise ConfigError("empty key", lineno)
        if key in doc[section]:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        last = Entry(value, lineno)
        doc[section][key] = last
    return doc
