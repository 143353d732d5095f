"""Input loaders: task spec JSON, generated text files, prompt templates."""

from __future__ import annotations

import json
from pathlib import Path

from .errors import EncodeError


def _read_json(path: str | Path, what: str) -> dict:
    p = Path(path)
    if not p.is_file():
        raise EncodeError(f"{what} file {p} is missing")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise EncodeError(f"{what} file is not valid JSON: {e}") from e


def load_task(path: str | Path) -> dict:
    """Load {"dataset", "classes", "domain", "task"}; classes keep file order."""
    d = _read_json(path, "task spec")
    try:
        spec = {
            "dataset": d["dataset"],
            "classes": list(d["classes"]),
            "domain": d["domain"],
            "task": d["task"],
        }
    except KeyError as e:
        raise EncodeError(f"task spec: missing field {e}") from e
    classes = spec["classes"]
    if len(classes) < 2:
        raise EncodeError(f"task spec: need at least 2 classes, got {len(classes)}")
    if any(not isinstance(c, str) or not c for c in classes):
        raise EncodeError("task spec: class names must be non-empty strings")
    if len(set(classes)) != len(classes):
        raise EncodeError("task spec: class names must be unique")
    return spec


def load_text_dataset(path: str | Path, kind: str, classes: list[str]) -> dict[str, list[str]]:
    """Load a generated-text file and check it covers every class.

    The file shape is {"kind": ..., "classes": {class name: [strings]}}; the
    kind field must match so captions and synonyms cannot be swapped.
    """
    d = _read_json(path, kind)
    if d.get("kind") != kind:
        raise EncodeError(f"{path}: expected kind {kind!r}, got {d.get('kind')!r}")
    per = d.get("classes")
    if not isinstance(per, dict):
        raise EncodeError(f"{path}: 'classes' must map class names to string lists")
    out = {}
    for name in classes:
        entries = per.get(name, [])
        if not entries:
            raise EncodeError(f"{kind}: class {name!r} has no entries")
        if any(not isinstance(s, str) or not s.strip() for s in entries):
            raise EncodeError(f"{kind}: class {name!r} has an empty entry")
        out[name] = [s.strip() for s in entries]
    return out


def load_templates(path: str | Path) -> list[str]:
    """One template per non-blank line; each must contain a {} placeholder."""
    p = Path(path)
    if not p.is_file():
        raise EncodeError(f"template file {p} is missing")
    templates = []
    for i, raw in enumerate(p.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if "{}" not in line:
            raise EncodeError(f"template line {i} has no {{}} placeholder: {line!r}")
        templates.append(line)
    if not templates:
        raise EncodeError(f"template file {p} has no templates")
    return templates


def fill(template: str, name: str) -> str:
    return template.replace("{}", name)
