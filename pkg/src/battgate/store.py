"""Versioned structured-text documents for models and parameter sets.

Every artifact (equivalent-circuit parameters, NARX nets, OCSVM/hull
boundary models) is stored as a YAML document with a ``format`` tag and a
``version`` integer wrapping a ``payload`` mapping.  Floats are written with
``repr`` precision, so a load followed by a save reproduces the file byte
for byte and loaded values equal the originals bit for bit.
"""

from __future__ import annotations

import numpy as np
import yaml

from .errors import SchemaError

FORMAT_PREFIX = "battgate"


def pyify(obj):
    """Recursively convert numpy scalars/arrays to plain Python objects."""
    if isinstance(obj, np.ndarray):
        return pyify(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)) and not isinstance(obj, bool):
        return int(obj)
    if isinstance(obj, dict):
        return {k: pyify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [pyify(v) for v in obj]
    return obj


def save_document(path, kind: str, payload: dict, version: int = 1) -> None:
    doc = {
        "format": f"{FORMAT_PREFIX}/{kind}",
        "version": int(version),
        "payload": pyify(payload),
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        yaml.safe_dump(doc, fh, sort_keys=False, default_flow_style=None)


def load_document(path, kind: str | None = None) -> tuple[str, int, dict]:
    """Load a document, optionally checking its kind. Returns (kind, version, payload)."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict) or "format" not in doc:
        raise SchemaError(f"{path}: not a battgate document")
    fmt = str(doc["format"])
    prefix = FORMAT_PREFIX + "/"
    if not fmt.startswith(prefix):
        raise SchemaError(f"{path}: unknown format {fmt!r}")
    found = fmt[len(prefix):]
    if kind is not None and found != kind:
        raise SchemaError(f"{path}: expected kind {kind!r}, found {found!r}")
    version = int(doc.get("version", 0))
    payload = doc.get("payload")
    if not isinstance(payload, dict):
        raise SchemaError(f"{path}: missing payload mapping")
    return found, version, payload
