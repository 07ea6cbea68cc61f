"""JSON and CSV artifacts with a reproducibility header."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

GENERATOR = f"numpy PCG64 (numpy {np.__version__})"


class ArtifactError(OSError):
    """Unreadable or malformed input file."""


def header(config: dict) -> dict:
    return {
        "config": config,
        "generator": GENERATOR,
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }


def fmt(x) -> str:
    """17 significant digits: enough for an exact double round trip."""
    if x is None:
        return ""
    if isinstance(x, (str, bool)):
        return str(x)
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_atomic(path, text: str):
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps(doc) -> str:
    return json.dumps(doc, indent=2, allow_nan=True) + "\n"


def csv_text(columns, rows, comments=()) -> str:
    buf = io.StringIO()
    for line in comments:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def read_json(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ArtifactError(f"cannot read {path}: {exc.strerror or exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ArtifactError(
            f"{path}: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc


def strip_header(doc, key):
    """Accept both a bare payload and a {"header": ..., key: payload} wrapper."""
    if isinstance(doc, dict) and key in doc and "header" in doc:
        return doc[key]
    return doc


def stack_to_json(W) -> list:
    return [np.asarray(w, dtype=float).tolist() for w in W]


def stack_from_json(doc, shapes=None) -> list:
    doc = strip_header(doc, "stack")
    if not isinstance(doc, list):
        raise ValueError("stack must be a JSON list of matrices")
    out = []
    for l, m in enumerate(doc):
        a = np.array(m, dtype=float)
        if shapes is not None and l < len(shapes):
            a = a.reshape(shapes[l])  # allows zero-size layers stored as []
        if a.ndim != 2:
            raise ValueError(f"stack layer {l + 1} is not a matrix")
        out.append(a)
    return out
