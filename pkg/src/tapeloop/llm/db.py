"""SQLite store of completed LLM calls, keyed by prompt id.

The table layout is part of the package's external surface — other tooling
reads these files directly — so it stays exactly:

    llm_calls(prompt_id TEXT PRIMARY KEY, model TEXT,
              prompt_json TEXT NOT NULL, output_json TEXT NOT NULL,
              input_tokens INTEGER, output_tokens INTEGER, created_at TEXT)

created_at is ISO-8601 UTC. A fresh connection per operation keeps the
store safe to use from several threads and processes at once.
"""

from __future__ import annotations

import json
import os
import sqlite3
from datetime import datetime, timezone
from pathlib import Path

from tapeloop.errors import CallNotFoundError, DuplicateCallError
from tapeloop.llm.base import LLMCallRecord

ENV_DB_PATH = "TAPEAGENTS_DB_PATH"
DEFAULT_DB_FILENAME = "llm_calls.sqlite"

_SCHEMA = """\
CREATE TABLE IF NOT EXISTS llm_calls (
    prompt_id TEXT PRIMARY KEY,
    model TEXT,
    prompt_json TEXT NOT NULL,
    output_json TEXT NOT NULL,
    input_tokens INTEGER,
    output_tokens INTEGER,
    created_at TEXT
)
"""


def default_db_path() -> str:
    return os.environ.get(ENV_DB_PATH, f"./{DEFAULT_DB_FILENAME}")


def _now_iso() -> str:
    return datetime.now(timezone.utc).isoformat()


class CallDatabase:
    """Append-only log of LLM calls."""

    def __init__(self, path: str | Path | None = None):
        self.path = str(path if path is not None else default_db_path())
        parent = Path(self.path).parent
        if parent and not parent.exists():
            parent.mkdir(parents=True, exist_ok=True)
        with self._connect() as conn:
            conn.execute(_SCHEMA)

    def _connect(self) -> sqlite3.Connection:
        return sqlite3.connect(self.path, timeout=30.0)

    @staticmethod
    def _row_to_record(row: tuple) -> LLMCallRecord:
        prompt_id, model, prompt_json, output_json, in_tok, out_tok, created = row
        return LLMCallRecord(
            prompt_id=prompt_id,
            model=model or "",
            prompt=json.loads(prompt_json),
            output=json.loads(output_json),
            input_tokens=in_tok,
            output_tokens=out_tok,
            created_at=created or "",
        )

    _COLS = "prompt_id, model, prompt_json, output_json, input_tokens, output_tokens, created_at"

    def insert(self, record: LLMCallRecord) -> LLMCallRecord:
        """Store one call; rejects reuse of a prompt_id. Returns the record
        actually stored (with created_at filled in if it was blank)."""
        stored = record if record.created_at else LLMCallRecord(
            prompt_id=record.prompt_id,
            model=record.model,
            prompt=record.prompt,
            output=record.output,
            input_tokens=record.input_tokens,
            output_tokens=record.output_tokens,
            created_at=_now_iso(),
        )
        try:
            with self._connect() as conn:
                conn.execute(
                    f"INSERT INTO llm_calls ({self._COLS}) VALUES (?, ?, ?, ?, ?, ?, ?)",
                    (
                        stored.prompt_id,
                        stored.model,
                        json.dumps(stored.prompt, sort_keys=True, ensure_ascii=False),
                        json.dumps(stored.output, sort_keys=True, ensure_ascii=False),
                        stored.input_tokens,
                        stored.output_tokens,
                        stored.created_at,
                    ),
                )
        except sqlite3.IntegrityError as exc:
            raise DuplicateCallError(f"call with prompt_id {stored.prompt_id!r} already recorded") from exc
        return stored

    def get(self, prompt_id: str) -> LLMCallRecord:
        with self._connect() as conn:
            row = conn.execute(
                f"SELECT {self._COLS} FROM llm_calls WHERE prompt_id = ?", (prompt_id,)
            ).fetchone()
        if row is None:
            raise CallNotFoundError(f"no call recorded under prompt_id {prompt_id!r}")
        return self._row_to_record(row)

    def __contains__(self, prompt_id: str) -> bool:
        with self._connect() as conn:
            row = conn.execute("SELECT 1 FROM llm_calls WHERE prompt_id = ?", (prompt_id,)).fetchone()
        return row is not None

    def all_calls(self) -> list[LLMCallRecord]:
        """Every record in insertion order (created_at, then rowid for ties)."""
        with self._connect() as conn:
            rows = conn.execute(
                f"SELECT {self._COLS} FROM llm_calls ORDER BY created_at, rowid"
            ).fetchall()
        return [self._row_to_record(r) for r in rows]

    def count(self) -> int:
        with self._connect() as conn:
            (n,) = conn.execute("SELECT COUNT(*) FROM llm_calls").fetchone()
        return n
