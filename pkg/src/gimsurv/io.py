"""Dataset ingestion and artifact writing."""

from __future__ import annotations

import csv
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .exceptions import DataFormatError
from .models import Side, SurvivalDataset


def parse_dataset(path, side=Side.RIGHT) -> SurvivalDataset:
    """Read a headered CSV with ``time`` and ``status`` columns.

    Row numbers in error messages count the header as row 1. Extra columns
    are ignored; blank lines are skipped.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc.strerror}") from None
    return parse_dataset_text(text, side, source=str(path))


def parse_dataset_text(text: str, side=Side.RIGHT, source: str = "<input>") -> SurvivalDataset:
    reader = csv.reader(text.splitlines())
    header = None
    times, statuses = [], []
    for rownum, row in enumerate(reader, start=1):
        if not row or all(not cell.strip() for cell in row):
            continue
        if header is None:
            header = [cell.strip().lower() for cell in row]
            missing = [c for c in ("time", "status") if c not in header]
            if missing:
                raise DataFormatError(f"{source}: missing column(s) {', '.join(missing)}")
            ti, si = header.index("time"), header.index("status")
            continue
        if len(row) <= max(ti, si):
            raise DataFormatError(f"{source}: row {rownum}: expected {len(header)} fields")
        raw_t, raw_s = row[ti].strip(), row[si].strip()
        try:
            t = float(raw_t)
        except ValueError:
            raise DataFormatError(f"{source}: row {rownum}: time {raw_t!r} is not a number") from None
        if not np.isfinite(t) or t <= 0:
            raise DataFormatError(f"{source}: row {rownum}: time must be positive, got {raw_t}")
        if raw_s not in ("0", "1"):
            raise DataFormatError(f"{source}: row {rownum}: status must be 0 or 1, got {raw_s!r}")
        times.append(t)
        statuses.append(int(raw_s))
    if header is None:
        raise DataFormatError(f"{source}: file is empty")
    if not times:
        raise DataFormatError(f"{source}: no data rows")
    return SurvivalDataset(np.array(times), np.array(statuses), side)


def dataset_to_csv(data: SurvivalDataset) -> str:
    lines = ["time,status"]
    lines += [f"{t!r},{int(d)}" for t, d in zip(data.time.tolist(), data.status)]
    return "\n".join(lines) + "\n"


def dumps_json(payload) -> str:
    return json.dumps(payload, indent=2, sort_keys=False, allow_nan=False) + "\n"


def write_atomic(path, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file in the same directory."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
