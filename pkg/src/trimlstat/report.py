"""CSV and manifest output.

Every CSV starts with one ``# {json}`` line holding volatile metadata (wall
time, timestamp); the rest of the file depends only on the resolved config.
Floats are written with 17 significant digits so values round-trip exactly.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import asdict, dataclass

import numpy as np


def format_value(value):
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return format(value, ".17g")
    if value is None:
        return ""
    return str(value)


def _plain(value):
    """JSON-safe copy: numpy scalars unwrapped, non-finite floats as strings."""
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return format_value(value)
    return value


def write_csv(path, columns, rows, meta=None):
    """Write ``rows`` (mappings) with a metadata comment line; returns ``path``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if meta is not None:
            fh.write("# " + json.dumps(_plain(meta), sort_keys=True) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_value(row[c]) for c in columns])
    return path


def read_body(path):
    """CSV text without ``#`` comment lines (what determinism checks compare)."""
    with open(path, encoding="utf-8") as fh:
        return "".join(line for line in fh if not line.startswith("#"))


@dataclass(frozen=True)
class RunManifest:
    config_path: str
    config: dict
    command: str
    out_dir: str
    timestamp: str
    config_hash: str
    backend: str
    workers: int

    def write(self):
        os.makedirs(self.out_dir, exist_ok=True)
        path = os.path.join(self.out_dir, "manifest.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(_plain(asdict(self)), fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path
