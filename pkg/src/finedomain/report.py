"""Structured-text certificate reports.

One report per run: `[section]` headers with `key: value` lines, schema
version pinned in the first line.  Reports are byte-identical across runs
with the same config and seeds; the single `generated:` line carries the
timestamp and is excluded from determinism comparisons.  Floats are written
with repr (shortest round-tripping form).
"""

from __future__ import annotations

import datetime
from collections import OrderedDict

SCHEMA = "finedomain-report v1"


def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, complex):
        return f"{v.real!r} {v.imag!r}"
    if isinstance(v, (list, tuple)):
        return " ".join(format_value(x) for x in v)
    return str(v)


def write_report(sections, path=None, timestamp=True) -> str:
    """sections: iterable of (section_name, ordered key->value mapping)."""
    lines = [SCHEMA]
    if timestamp:
        lines.append(
            "generated: "
            + datetime.datetime.now(datetime.timezone.utc).isoformat()
        )
    for name, kv in sections:
        lines.append(f"[{name}]")
        for k, v in kv.items():
            lines.append(f"{k}: {format_value(v)}")
    text = "\n".join(lines) + "\n"
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def read_report(text: str):
    """Inverse of write_report, values kept as strings."""
    lines = text.strip().split("\n")
    if lines[0] != SCHEMA:
        raise ValueError(f"unknown report schema {lines[0]!r}")
    sections: list[tuple[str, OrderedDict]] = []
    current = None
    for line in lines[1:]:
        if line.startswith("generated:"):
            continue
        if line.startswith("[") and line.endswith("]"):
            current = OrderedDict()
            sections.append((line[1:-1], current))
            continue
        if ":" in line and current is not None:
            k, v = line.split(":", 1)
            current[k.strip()] = v.strip()
    return sections


def strip_timestamps(text: str) -> str:
    return "\n".join(
        ln for ln in text.split("\n") if not ln.startswith("generated:")
    )
