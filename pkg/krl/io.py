"""Atomic output files: a failed run never leaves a truncated certificate."""
import csv
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

SWEEP_HEADER = ["value", "lambda0", "residual", "iters", "status"]


def atomic_write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_json(path, data) -> Path:
    return atomic_write_text(path, json.dumps(data, indent=2) + "\n")


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return atomic_write_text(path, out.getvalue())


def write_trace(path, trace) -> Path:
    return atomic_write_text(path, trace.to_csv())
