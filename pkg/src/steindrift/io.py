"""Flat CSV tables with ``#`` metadata headers."""
from __future__ import annotations

import csv
import io
import os
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import __version__


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def format_table(
    columns: Sequence[str],
    rows: Iterable[Sequence],
    meta: Mapping[str, object] | None = None,
) -> str:
    buf = io.StringIO()
    buf.write(f"# steindrift {__version__}\n")
    for key, value in (meta or {}).items():
        buf.write(f"# {key} = {fmt(value)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    writer.writerows([fmt(v) for v in row] for row in rows)
    return buf.getvalue()


def write_table(
    path: str | os.PathLike,
    columns: Sequence[str],
    rows: Iterable[Sequence],
    meta: Mapping[str, object] | None = None,
) -> None:
    text = format_table(columns, rows, meta)
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(text)


def read_table(path: str | os.PathLike) -> tuple[dict[str, str], list[str], list[list[str]]]:
    meta: dict[str, str] = {}
    body = []
    with open(path, encoding="utf-8", newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                key, sep, value = line[1:].partition("=")
                if sep:
                    meta[key.strip()] = value.strip()
            elif line.strip():
                body.append(line)
    table = list(csv.reader(body))
    return meta, table[0] if table else [], table[1:]


def read_columns(path, *names: str) -> list[np.ndarray]:
    _, columns, rows = read_table(path)
    idx = [columns.index(n) for n in names]
    data = np.array([[float(r[i]) for i in idx] for r in rows]).reshape(len(rows), len(idx))
    return [data[:, j] for j in range(len(idx))]
