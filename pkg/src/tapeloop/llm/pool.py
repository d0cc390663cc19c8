"""Provider construction from config documents, with instance caching.

Agents name their provider via a small config dict. The pool hands out one
instance per distinct config so scripted state (a mock's cursor, a
replay's queues) survives across multiple runs in the same process, and
every instance records into the pool's shared call database.
"""

from __future__ import annotations

import json
from typing import Any

from tapeloop.errors import TapeloopError
from tapeloop.llm.base import LLM
from tapeloop.llm.db import CallDatabase
from tapeloop.llm.http import HttpLLM
from tapeloop.llm.mock import MockLLM
from tapeloop.llm.replay import ReplayLLM


def provider_from_config(config: dict[str, Any], db: CallDatabase | None = None) -> LLM:
    """Build a provider from its config document.

    ``db`` is the call database handed to the instance for recording; the
    replay provider additionally reads its recordings from there unless the
    config points at a separate ``source_db`` path.
    """
    kind = config.get("provider")
    opts = {k: v for k, v in config.items() if k != "provider"}
    if kind == "mock":
        return MockLLM(
            script=opts.get("script"),
            patterns=[tuple(p) for p in opts["patterns"]] if "patterns" in opts else None,
            model=opts.get("model", "mock"),
            chunk_size=opts.get("chunk_size", 0),
            db=db,
        )
    if kind == "replay":
        source = CallDatabase(opts["source_db"]) if "source_db" in opts else db
        record_db = db if opts.get("record", False) else None
        return ReplayLLM(
            source_db=source,
            model=opts.get("model", "replay"),
            chunk_size=opts.get("chunk_size", 0),
            db=record_db,
        )
    if kind == "http":
        return HttpLLM(
            base_url=opts.get("base_url"),
            api_key=opts.get("api_key"),
            model=opts.get("model"),
            chunk_size=opts.get("chunk_size", 0),
            timeout=opts.get("timeout", 60.0),
            db=db,
        )
    raise TapeloopError(f"unknown LLM provider {kind!r}")


class ProviderPool:
    """Cache of provider instances keyed by their canonical config."""

    def __init__(self, db: CallDatabase | None = None):
        self.db = db if db is not None else CallDatabase()
        self._instances: dict[str, LLM] = {}

    def get(self, config: dict[str, Any]) -> LLM:
        key = json.dumps(config, sort_keys=True, ensure_ascii=False)
        if key not in self._instances:
            self._instances[key] = provider_from_config(config, db=self.db)
        return self._instances[key]
