"""Deterministic CSV and manifest output.

Floats are written with ``repr`` (shortest round-trip decimal), so the same
config and build produce byte-identical artifacts.  Run parameters ride as
``# key=value`` comment lines ahead of the header row; readers that do not
care can skip them.
"""

from __future__ import annotations

import hashlib
import json
import os
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = ["fmt", "write_csv", "read_csv", "config_sha256", "write_manifest"]


def fmt(value) -> str:
    if isinstance(value, (np.floating, np.integer)):
        value = value.item()
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path: str, columns: Sequence[tuple[str, Iterable]],
              meta: Mapping | None = None) -> str:
    names = [name for name, _ in columns]
    arrays = [list(vals) for _, vals in columns]
    n = len(arrays[0]) if arrays else 0
    if any(len(a) != n for a in arrays):
        raise ValueError("columns have unequal lengths")
    lines = []
    for key in (meta or {}):
        lines.append(f"# {key}={fmt(meta[key])}")
    lines.append(",".join(names))
    for i in range(n):
        lines.append(",".join(fmt(a[i]) for a in arrays))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def read_csv(path: str) -> tuple[dict, dict]:
    """Returns (meta, columns); numeric columns come back as float arrays."""
    meta: dict = {}
    header: list[str] | None = None
    rows: list[list[str]] = []
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
        raise ValueError(f"{path}: no header row")
    columns: dict = {}
    for j, name in enumerate(header):
        col = [row[j] for row in rows]
        try:
            columns[name] = np.array([float(v) for v in col])
        except ValueError:
            columns[name] = col
    return meta, columns


def config_sha256(config: Mapping[str, str]) -> str:
    text = "\n".join(f"{k}={config[k]}" for k in sorted(config))
    return hashlib.sha256(text.encode()).hexdigest()


def write_manifest(outdir: str, kind: str, config: Mapping[str, str],
                   artifacts: Sequence[str]) -> str:
    payload = {
        "kind": kind,
        "config": {k: str(config[k]) for k in sorted(config)},
        "config_sha256": config_sha256(config),
        "artifacts": sorted(os.path.basename(a) for a in artifacts),
    }
    path = os.path.join(outdir, "manifest.json")
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
