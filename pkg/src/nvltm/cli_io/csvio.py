"""CSV tables with unit-tagged headers, ``name [unit]``, 17 significant digits."""

from __future__ import annotations

import csv
import re

import numpy as np

from ..errors import InvalidInputError

_HEADER = re.compile(r"^\s*(.*?)\s*\[(.*)\]\s*$")


def export_csv(path, columns) -> None:
    """Write ``columns``, a sequence of ``(name, unit, values)``, to ``path``."""
    columns = list(columns)
    if not columns:
        raise InvalidInputError("no columns to export")
    arrays = [np.atleast_1d(np.asarray(v, dtype=float)) for _, _, v in columns]
    n = arrays[0].size
    if any(a.ndim != 1 or a.size != n for a in arrays):
        raise InvalidInputError("columns must be one-dimensional and of equal length")
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([f"{name} [{unit}]" for name, unit, _ in columns])
            stacked = np.column_stack(arrays)
            for row in stacked:
                w.writerow(["%.17g" % v for v in row])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def load_csv(path) -> dict[str, tuple[str, np.ndarray]]:
    """Read a table written by :func:`export_csv`; returns ``{name: (unit, values)}``."""
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise InvalidInputError(f"{path}: empty file")
    names, units = [], []
    for h in rows[0]:
        m = _HEADER.match(h)
        if not m:
            raise InvalidInputError(f"{path}: header {h!r} is not 'name [unit]'")
        names.append(m.group(1))
        units.append(m.group(2))
    data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float).reshape(-1, len(names))
    return {n: (u, data[:, k].copy()) for k, (n, u) in enumerate(zip(names, units))}


def load_spectrum(path, freq_column: str = "frequency"):
    """Load a spectral table and check that its frequency axis is strictly increasing."""
    table = load_csv(path)
    if freq_column not in table:
        raise InvalidInputError(f"{path}: no {freq_column!r} column")
    f = table[freq_column][1]
    if np.any(np.diff(f) <= 0):
        raise InvalidInputError(f"{path}: frequency column is not strictly increasing")
    return table
