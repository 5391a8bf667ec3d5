"""CSV and run-manifest output.

All CSVs are comma separated with '.' decimals and a single header line
prefixed by '#', so they load directly into gnuplot, numpy.genfromtxt, or
pandas. Floats are written with repr (shortest round-trip form), which
makes reruns byte-identical. Every output directory gets a manifest.json
recording the resolved configuration, the master seed, the tool version,
and a sha256 checksum per file; rerunning a command with the manifest as
its config reproduces every CSV bit-exactly.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path

import numpy as np

__all__ = ["format_value", "write_csv", "read_csv", "sha256_file", "write_manifest", "read_manifest"]


def format_value(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(x)
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def write_csv(path, columns: list[str], rows) -> None:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# " + ",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(format_value(x) for x in row) + "\n")


def read_csv(path) -> tuple[list[str], list[list[float]]]:
    """Parse one of our CSVs back; 'inf' strings become floats."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        if not header.startswith("#"):
            raise ValueError(f"{path}: missing '#' header line")
        columns = [c.strip() for c in header[1:].strip().split(",")]
        rows = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rows.append([float(tok) for tok in line.split(",")])
    for row in rows:
        if len(row) != len(columns):
            raise ValueError(f"{path}: row width does not match header")
    return columns, rows


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(out_dir, command: str, config_dict: dict, seed: int, version: str) -> Path:
    """Checksum every file in out_dir and write manifest.json beside them."""
    out_dir = Path(out_dir)
    outputs = {
        p.name: sha256_file(p)
        for p in sorted(out_dir.iterdir())
        if p.is_file() and p.name != "manifest.json"
    }
    manifest = {
        "tool": "popsim",
        "version": version,
        "command": command,
        "seed": seed,
        "config": config_dict,
        "outputs": outputs,
    }
    path = out_dir / "manifest.json"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def read_manifest(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
