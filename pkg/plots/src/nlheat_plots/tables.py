"""Reader for the delimited artifact format: # key=value comments, then CSV."""

from __future__ import annotations

import numpy as np


class SchemaError(ValueError):
    """Input file does not match the documented schema."""


def read_table(path: str) -> tuple[dict, dict]:
    meta: dict = {}
    header = None
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                meta[key.strip()] = val.strip()
            elif header is None:
                header = line.split(",")
            else:
                rows.append(line.split(","))
    if header is None:
        raise SchemaError(f"{path}: no header row")
    columns: dict = {}
    for j, name in enumerate(header):
        col = [row[j] if j < len(row) else "" for row in rows]
        try:
            columns[name] = np.array([float(v) for v in col])
        except ValueError:
            columns[name] = col
    return meta, columns


def need_columns(path: str, columns: dict, names) -> None:
    for name in names:
        if name not in columns:
            raise SchemaError(f"{path}: missing required column {name!r} "
                              f"(found {sorted(columns)})")


def need_meta(path: str, meta: dict, names) -> None:
    for name in names:
        if name not in meta:
            raise SchemaError(f"{path}: missing required header key {name!r}")
