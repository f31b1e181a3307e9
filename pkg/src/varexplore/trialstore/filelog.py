"""Append-only, newline-delimited JSON log shared by processes on one host.

Record schema (version 1), one JSON object per line, every record carrying
``"v": 1`` and ``"op"``:

=================  ==========================================================
op                 other fields
=================  ==========================================================
create_study       study, space, directions, metric_names, sampler_assignments
begin_trial        study, trial_id, agent_id, params, ts, request_id
complete_trial     study, trial_id, values, ts, request_id
fail_trial         study, trial_id, reason, ts, request_id
set_trial_attr     study, trial_id, key, value
append_snapshot    study, trial_count, reports
=================  ==========================================================

Writers hold an exclusive ``flock`` on the log while they catch up with
records appended by other processes, validate, and append.  A trailing line
without a newline can only be debris from a writer that died mid-append; it
is cut off the next time the lock is taken.
"""
from __future__ import annotations

import fcntl
import json
import os
from contextlib import contextmanager
from pathlib import Path

from ..errors import CorruptLog
from .base import LocalStore


class FileStore(LocalStore):
    def __init__(self, path, fsync: bool = True):
        super().__init__()
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fsync = fsync
        self._fh = open(self.path, "a+b")
        self._offset = 0
        self._depth = 0
        with self._locked():
            self._sync()

    @contextmanager
    def _locked(self):
        with self._lock:
            if self._depth == 0:
                fcntl.flock(self._fh.fileno(), fcntl.LOCK_EX)
            self._depth += 1
            try:
                yield
            finally:
                self._depth -= 1
                if self._depth == 0:
                    fcntl.flock(self._fh.fileno(), fcntl.LOCK_UN)

    def _sync(self):
        fh = self._fh
        fh.seek(0, os.SEEK_END)
        size = fh.tell()
        if size < self._offset:
            raise CorruptLog(f"{self.path} shrank from {self._offset} to {size} bytes")
        if size == self._offset:
            return
        fh.seek(self._offset)
        data = fh.read(size - self._offset)
        end = data.rfind(b"\n") + 1
        if end < len(data):
            fh.truncate(self._offset + end)
            fh.flush()
        for lineno, line in enumerate(data[:end].splitlines(), 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except ValueError as exc:
                raise CorruptLog(f"{self.path}: undecodable record after byte {self._offset}: {exc}") from exc
            self._apply(rec)
        self._offset += end

    def _persist(self, record):
        line = json.dumps(record, allow_nan=False, separators=(",", ":")).encode() + b"\n"
        self._fh.write(line)
        self._fh.flush()
        if self._fsync:
            os.fsync(self._fh.fileno())
        self._offset += len(line)

    def close(self):
        if not self._fh.closed:
            self._fh.close()
