"""Flat key=value text files used for template and synthetic-array specs."""

from __future__ import annotations

__all__ = ["parse_keyvals"]


def parse_keyvals(text: str) -> dict[str, str]:
    """Parse ``key=value`` lines; '#' starts a comment, blanks are skipped."""
    fields: dict[str, str] = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        fields[key.strip()] = value.strip()
    return fields
