"""
Common utility functions for output tables and files
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
from pathlib import Path

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)

# 17 significant digits round-trip every 64-bit float
FLOAT_FORMAT = "%.17g"

MANIFEST = "manifest.csv"

# relative to the working directory when neither the config nor --out names one
DEFAULT_OUTPUT_DIR = "cvqkdadapt_out"


def ensure_dir(path):
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def config_hash(raw):
    """
    sha256 of the canonical JSON form of a config dict
    """
    canonical = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf8")).hexdigest()


def to_csv_text(table):
    """
    CSV text of a table: fixed column order, 17-digit reals, unix line endings
    """
    return table.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def write_atomic(path, text):
    """
    Writes text to path via a temporary file in the same directory and a rename
    """
    path = Path(path)
    ensure_dir(path.parent)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix="." + path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise
    return path


def write_table(out_dir, pipeline, name, table):
    """
    Writes <pipeline>_<name>.csv and returns its manifest row
    """
    filename = "%s_%s.csv" % (pipeline, name)
    write_atomic(Path(out_dir) / filename, to_csv_text(table))
    logger.info("wrote %s (%d rows)", filename, len(table))
    return {"PIPELINE": pipeline, "FILE": filename, "ROWS": len(table)}


def write_manifest(out_dir, rows, digest):
    manifest = pd.DataFrame(rows, columns=["PIPELINE", "FILE", "ROWS"])
    manifest["CONFIG_HASH"] = digest
    write_atomic(Path(out_dir) / MANIFEST, to_csv_text(manifest))
    return manifest


def linspace_range(bounds, points):
    """
    Evenly spaced grid over inclusive [low, high] bounds
    """
    low, high = bounds
    if points < 2:
        raise ValueError("a sweep needs at least 2 points")
    if not 0.0 < low < high:
        raise ValueError("sweep bounds must satisfy 0 < low < high, got %s" % (bounds,))
    return np.linspace(low, high, points)
