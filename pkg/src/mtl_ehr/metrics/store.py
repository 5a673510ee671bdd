"""Append-only JSON-lines results store with file-level locking."""
from __future__ import annotations

import fcntl
import json
import os

from ..errors import DataError


class ResultStore:
    """One JSON object per line; writers take an exclusive ``flock``."""

    def __init__(self, path):
        self.path = path

    def append(self, rows):
        rows = list(rows)
        if not rows:
            return
        d = os.path.dirname(os.path.abspath(self.path))
        os.makedirs(d, exist_ok=True)
        text = "".join(json.dumps(r, sort_keys=True) + "\n" for r in rows)
        with open(self.path, "a") as fh:
            fcntl.flock(fh, fcntl.LOCK_EX)
            try:
                fh.write(text)
                fh.flush()
                os.fsync(fh.fileno())
            finally:
                fcntl.flock(fh, fcntl.LOCK_UN)

    def read(self):
        if not os.path.exists(self.path):
            return []
        rows = []
        with open(self.path) as fh:
            fcntl.flock(fh, fcntl.LOCK_SH)
            try:
                lines = fh.readlines()
            finally:
                fcntl.flock(fh, fcntl.LOCK_UN)
        for i, line in enumerate(lines, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError:
                if i == len(lines):
                    # a torn final line from an interrupted writer; the cell reruns
                    continue
                raise DataError(f"{self.path}:{i}: not a JSON record") from None
        return rows

    def completed_cells(self):
        return {r["cell"] for r in self.read() if "cell" in r}

    def __len__(self):
        return len(self.read())
