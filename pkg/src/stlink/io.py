"""CSV output with a fixed schema, written atomically."""

import csv
import io
import os
import tempfile
from pathlib import Path

import numpy as np


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))  # shortest round-trip representation
    return str(v)


def format_csv(records, columns):
    columns = list(columns)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for rec in records:
        missing = [c for c in columns if c not in rec]
        if missing:
            raise ValueError(f"record is missing columns {missing}")
        w.writerow([_cell(rec[c]) for c in columns])
    return buf.getvalue()


def emit_results(records, columns, path):
    """Write ``records`` (mappings) as CSV with header ``columns`` to ``path``.

    The file is written to a temporary sibling and renamed into place, so a
    reader never sees a partial file.
    """
    text = format_csv(records, columns)
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise
