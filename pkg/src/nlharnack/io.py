"""Plain-text artifacts: field files, CSV tables, plot tables.

Every writer goes through :func:`atomic_write` (temporary file plus
``os.replace``) and formats floats with ``repr`` so reruns are byte-identical.
"""
from __future__ import annotations

import csv
import io
import math
import os
import tempfile

import numpy as np


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return repr(x)
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None:
        return ""
    return str(x)


# read once at import: os.umask can only be queried by setting it, which races with threads
_UMASK = os.umask(0o022)
os.umask(_UMASK)


def atomic_write(path, text: str) -> None:
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as f:
            f.write(text)
        # mkstemp creates 0600; use the permissions a plain open() would give
        os.chmod(tmp, 0o666 & ~_UMASK)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_field(path) -> np.ndarray:
    """One float per line; blank lines and ``#`` comments are skipped."""
    vals = []
    with open(path) as f:
        for k, line in enumerate(f, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                vals.append(float(line))
            except ValueError:
                raise ValueError(f"{path}:{k}: not a float: {line!r}") from None
    return np.array(vals)


def field_text(values) -> str:
    return "".join(fmt(float(v)) + "\n" for v in np.asarray(values, dtype=float))


def write_field(path, values) -> None:
    atomic_write(path, field_text(values))


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def write_csv(path, header, rows) -> None:
    atomic_write(path, csv_text(header, rows))


def plot_table_text(x, values) -> str:
    return "".join(f"{fmt(float(a))} {fmt(float(b))}\n" for a, b in zip(x, values))


def slice_1d(grid, values, axis: int = 0, at=None):
    """Nodes on a line parallel to ``axis``: returns (coordinates, values).

    In 2-D the line passes through the lattice row nearest to ``at``
    (default the middle of the other axis).
    """
    values = np.asarray(values, dtype=float)
    pts = grid.points
    if grid.d == 1:
        return pts[:, 0], values
    other = 1 - axis
    lo, hi = grid.bounds[other]
    target = 0.5 * (lo + hi) if at is None else float(at)
    col = np.unique(pts[:, other])
    c = col[np.argmin(np.abs(col - target))]
    sel = np.flatnonzero(np.isclose(pts[:, other], c, atol=1e-9 * grid.h, rtol=0))
    order = np.argsort(pts[sel, axis], kind="stable")
    sel = sel[order]
    return pts[sel, axis], values[sel]
