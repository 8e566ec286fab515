"""CSV ingestion and atomic file output."""

import csv
import hashlib
import os
from pathlib import Path
import tempfile

import numpy as np


class InputError(ValueError):
    """Malformed input file; the message names the offending line."""


def atomic_write_text(path, text: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def _is_number(s):
    try:
        float(s)
    except ValueError:
        return False
    return True


def read_series_csv(path, label_column=None):
    """Read a series from a one- or two-column CSV file.

    A single column holds the values.  With two columns one of them is a
    date/label column: the first by default, or the one named (or indexed)
    by ``label_column``.  The first row is a header when none of its fields
    is numeric.

    Returns ``(values, labels, header)`` where ``labels`` is ``None`` for a
    single column.
    """
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [(i, [c.strip() for c in row]) for i, row in enumerate(csv.reader(fh), 1)
                    if row and any(c.strip() for c in row)]
    except (OSError, UnicodeDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise InputError(f"{path}: no data")
    width = len(rows[0][1])
    if width not in (1, 2):
        raise InputError(f"{path}:{rows[0][0]}: expected 1 or 2 columns, found {width}")

    header = None
    label_idx = None
    if width == 2:
        label_idx = 0
    first = rows[0][1]
    if not any(_is_number(c) for c in first):
        header = first
        rows = rows[1:]
    if width == 2 and label_column is not None:
        if header is not None and label_column in header:
            label_idx = header.index(label_column)
        elif str(label_column) in ("0", "1"):
            label_idx = int(label_column)
        else:
            raise InputError(f"{path}: no column {label_column!r}")
    value_idx = 0 if width == 1 else 1 - label_idx

    values, labels = [], []
    for line, row in rows:
        if len(row) != width:
            raise InputError(f"{path}:{line}: expected {width} columns, found {len(row)}")
        try:
            v = float(row[value_idx])
        except ValueError:
            raise InputError(f"{path}:{line}: not a number: {row[value_idx]!r}") from None
        if not np.isfinite(v):
            raise InputError(f"{path}:{line}: non-finite value {row[value_idx]!r}")
        values.append(v)
        if label_idx is not None:
            labels.append(row[label_idx])
    if len(values) < 2:
        raise InputError(f"{path}: need at least 2 observations, found {len(values)}")
    return np.asarray(values), (labels if label_idx is not None else None), header
