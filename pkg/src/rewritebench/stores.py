"""Append-only JSON-Lines stores for run records and diagnostics reports.

Each line carries a schema version field ``v``. Appends are serialized
through an in-process lock (single-writer discipline); reads take a
snapshot of the file.
"""

from __future__ import annotations

import json
import threading
from pathlib import Path
from typing import Any, Iterator

from .errors import StoreError
from .models import RunRecord

SCHEMA_VERSION = 1


def _dump(obj: dict[str, Any]) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False)


class RunStore:
    """Append-only store of RunRecords, one JSON object per line."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()

    def _count(self) -> int:
        if not self.path.exists():
            return 0
        with open(self.path, "r", encoding="utf-8") as fh:
            return sum(1 for line in fh if line.strip())

    def append(self, record: RunRecord) -> str:
        with self._lock:
            run_id = f"run-{self._count():06d}"
            line = _dump({"v": SCHEMA_VERSION, "run_id": run_id, **record.to_dict()})
            try:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(line + "\n")
            except OSError as exc:
                raise StoreError(f"cannot append run record to {self.path}: {exc}") from exc
            return run_id

    def read(self) -> list[tuple[str, RunRecord]]:
        if not self.path.exists():
            return []
        out = []
        try:
            with open(self.path, "r", encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    obj = json.loads(line)
                    out.append((obj["run_id"], RunRecord.from_dict(obj)))
        except OSError as exc:
            raise StoreError(f"cannot read run store {self.path}: {exc}") from exc
        return out

    def records(self) -> list[RunRecord]:
        return [rec for _, rec in self.read()]


def persist_run(record: RunRecord, store_path: str | Path) -> str:
    """Append one record to the store at *store_path*; returns its run id."""
    return RunStore(store_path).append(record)


class DiagnosticsStore:
    """Mixed store of lexical and geometry reports, tagged by ``kind``."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()

    def append(self, kind: str, payload: dict[str, Any]) -> None:
        if kind not in ("lexical", "geometry"):
            raise StoreError(f"unknown diagnostics kind {kind!r}")
        line = _dump({"v": SCHEMA_VERSION, "kind": kind, **payload})
        with self._lock:
            try:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(line + "\n")
            except OSError as exc:
                raise StoreError(f"cannot append diagnostics to {self.path}: {exc}") from exc

    def read(self) -> Iterator[dict[str, Any]]:
        if not self.path.exists():
            return iter(())
        try:
            with open(self.path, "r", encoding="utf-8") as fh:
                lines = [json.loads(line) for line in fh if line.strip()]
        except OSError as exc:
            raise StoreError(f"cannot read diagnostics store {self.path}: {exc}") from exc
        return iter(lines)

    def by_kind(self, kind: str) -> list[dict[str, Any]]:
        return [obj for obj in self.read() if obj.get("kind") == kind]
