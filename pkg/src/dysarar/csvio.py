"""CSV ingestion and artifact emission.

All numeric artifacts print floats with 17 significant digits so a replayed
run is byte-identical and values round-trip through ingestion. Writes are
atomic: a temporary file in the target directory is renamed into place.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import tempfile

import numpy as np

from . import errors


def format_value(v) -> str:
    if isinstance(v, (float, np.floating)):
        if math.isnan(v):
            return "nan"
        return f"{float(v):.17g}"
    if v is None:
        return ""
    return str(v)


def atomic_write_text(path, text: str) -> None:
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, header: list | None, rows) -> None:
    lines = []
    if header is not None:
        lines.append(",".join(str(h) for h in header))
    for row in rows:
        lines.append(",".join(format_value(v) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_matrix_csv(path, matrix: np.ndarray) -> None:
    write_csv(path, None, np.asarray(matrix, dtype=float))


def ingest_panel(path, log_diff: bool = False):
    """Read a labeled panel CSV: header (date, unit labels), numeric body.

    Returns (values, labels, dates). With ``log_diff`` the body is treated as
    price levels and transformed to log first differences (length T-1).
    """
    if not os.path.exists(path):
        raise errors.MissingInput(f"no such file: {path}")
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise errors.EmptyPanel(f"{path} is empty") from None
        labels = [h.strip() for h in header[1:]]
        width = len(header)
        dates = []
        body = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise errors.RaggedRows(
                    f"{path}:{lineno}: expected {width} cells, found {len(row)}")
            dates.append(row[0])
            try:
                body.append([float(c) for c in row[1:]])
            except ValueError as exc:
                raise errors.NonNumericCell(f"{path}:{lineno}: {exc}") from exc
    if not body:
        raise errors.EmptyPanel(f"{path} has a header but no data rows")
    values = np.asarray(body, dtype=float)
    if not np.all(np.isfinite(values)):
        raise errors.NonNumericCell(f"{path}: non-finite cell in body")
    if log_diff:
        if np.any(values <= 0.0):
            raise errors.NonNumericCell(f"{path}: log-diff requires positive levels")
        values = np.diff(np.log(values), axis=0)
        dates = dates[1:]
    return values, labels, dates


def write_panel_csv(path, values: np.ndarray, labels: list | None = None,
                    dates: list | None = None) -> None:
    values = np.asarray(values, dtype=float)
    t_len, n = values.shape
    labels = labels or [f"u{i + 1}" for i in range(n)]
    dates = dates or [str(t + 1) for t in range(t_len)]
    header = ["date"] + list(labels)
    rows = ([d] + list(row) for d, row in zip(dates, values))
    write_csv(path, header, rows)


def config_hash(config: dict) -> str:
    canon = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(canon).hexdigest()


def write_manifest(path, command: str, config: dict, seed, version: str,
                   backend: str) -> None:
    manifest = {
        "command": command,
        "config": config,
        "config_sha256": config_hash(config),
        "seed": seed,
        "version": version,
        "backend": backend,
    }
    atomic_write_text(path, json.dumps(manifest, sort_keys=True, indent=2, default=str) + "\n")


def write_json(path, payload: dict) -> None:
    atomic_write_text(path, json.dumps(payload, sort_keys=True, indent=2, default=str) + "\n")
