"""File-backed tape store.

One tape per file — ``<root>/<tape_id>.tape.json`` in the canonical
pretty format, so a store directory stays greppable and diffable with
ordinary tools. ``<root>/index.json`` is a cache of listing metadata;
it is rebuilt from the files on demand, so deleting or hand-editing it
never loses data. Saves are atomic (temp file + rename) and serialized
by a per-store lock.

The tape id is the filename, so ids are restricted to filename-safe
characters. ``created_at`` is the save time recorded in the index; for
files that appear without an index entry it falls back to the file's
modification time.
"""

from __future__ import annotations

import json
import os
import re
import tempfile
import threading
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path

from tapeloop.core.serialize import deserialize_tape, serialize_tape
from tapeloop.core.tape import Tape
from tapeloop.errors import StoreError

STORE_DIR_VAR = "TAPE_STORE_DIR"
_SUFFIX = ".tape.json"
_SAFE_ID = re.compile(r"^[A-Za-z0-9._-]+$")


def _now_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="microseconds")


def _mtime_iso(path: Path) -> str:
    return datetime.fromtimestamp(path.stat().st_mtime, timezone.utc).isoformat(timespec="microseconds")


@dataclass(frozen=True)
class TapeIndexEntry:
    """One listing row: where a tape lives and what it is."""

    tape_id: str
    file: str  # filename relative to the store root
    parent_id: str | None
    author: str
    steps: int
    created_at: str


class TapeStore:
    """Tapes on disk under one root directory."""

    def __init__(self, root: str | Path | None = None):
        if root is None:
            root = os.environ.get(STORE_DIR_VAR, "tapes")
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    # -- paths ------------------------------------------------------------

    def _path(self, tape_id: str) -> Path:
        if not _SAFE_ID.match(tape_id):
            raise StoreError(f"invalid tape id {tape_id!r}")
        return self.root / f"{tape_id}{_SUFFIX}"

    @property
    def _index_path(self) -> Path:
        return self.root / "index.json"

    # -- operations -------------------------------------------------------

    def save(self, tape: Tape) -> TapeIndexEntry:
        """Write the tape atomically and record it in the index."""
        path = self._path(tape.metadata.id)
        text = serialize_tape(tape)
        with self._lock:
            fd, tmp_name = tempfile.mkstemp(dir=self.root, prefix=".save-", suffix=".tmp")
            try:
                with os.fdopen(fd, "w", encoding="utf-8") as handle:
                    handle.write(text)
                os.replace(tmp_name, path)
            finally:
                if os.path.exists(tmp_name):
                    os.unlink(tmp_name)
            entries = self._read_index()
            kept = entries.get(tape.metadata.id)
            entry = TapeIndexEntry(
                tape_id=tape.metadata.id,
                file=path.name,
                parent_id=tape.metadata.parent_id,
                author=tape.metadata.author,
                steps=len(tape.steps),
                created_at=kept.created_at if kept else _now_iso(),
            )
            entries[entry.tape_id] = entry
            self._write_index(entries)
        return entry

    def load(self, tape_id: str) -> Tape:
        """Read one tape back; unknown ids and corrupt files are errors."""
        path = self._path(tape_id)
        if not path.exists():
            raise StoreError(f"no tape {tape_id!r} under {self.root}")
        try:
            tape = deserialize_tape(path.read_text(encoding="utf-8"))
        except Exception as exc:
            raise StoreError(f"corrupt tape file {path}: {exc}") from exc
        if tape.metadata.id != tape_id:
            raise StoreError(
                f"corrupt tape file {path}: document id {tape.metadata.id!r} "
                f"does not match the filename"
            )
        return tape

    def list(self) -> list[TapeIndexEntry]:
        """All stored tapes, oldest first; rebuilds the index from the files."""
        with self._lock:
            known = self._read_index()
            entries: dict[str, TapeIndexEntry] = {}
            for path in self.root.glob(f"*{_SUFFIX}"):
                tape_id = path.name[: -len(_SUFFIX)]
                kept = known.get(tape_id)
                try:
                    tape = deserialize_tape(path.read_text(encoding="utf-8"))
                except Exception as exc:
                    raise StoreError(f"corrupt tape file {path}: {exc}") from exc
                entries[tape_id] = TapeIndexEntry(
                    tape_id=tape_id,
                    file=path.name,
                    parent_id=tape.metadata.parent_id,
                    author=tape.metadata.author,
                    steps=len(tape.steps),
                    created_at=kept.created_at if kept else _mtime_iso(path),
                )
            self._write_index(entries)
        return sorted(entries.values(), key=lambda e: (e.created_at, e.tape_id))

    def __contains__(self, tape_id: str) -> bool:
        return bool(_SAFE_ID.match(tape_id)) and self._path(tape_id).exists()

    # -- the index cache ----------------------------------------------------

    def _read_index(self) -> dict[str, TapeIndexEntry]:
        if not self._index_path.exists():
            return {}
        try:
            doc = json.loads(self._index_path.read_text(encoding="utf-8"))
            return {
                tape_id: TapeIndexEntry(**fields) for tape_id, fields in doc["tapes"].items()
            }
        except Exception:
            return {}  # the index is only a cache; a bad one is rebuilt

    def _write_index(self, entries: dict[str, TapeIndexEntry]) -> None:
        doc = {"tapes": {tape_id: asdict(e) for tape_id, e in sorted(entries.items())}}
        self._index_path.write_text(
            json.dumps(doc, indent=2, ensure_ascii=False, sort_keys=True) + "\n",
            encoding="utf-8",
        )
