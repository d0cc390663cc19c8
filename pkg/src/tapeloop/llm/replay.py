"""Provider that serves previously recorded outputs instead of calling a model.

Prompts are matched content-wise — ids and other volatile fields are
masked — against a snapshot of the call database taken at construction.
Several recordings of the same prompt are served in recording order. A
prompt with no recording is a replay mismatch, reported with the index of
the first message that differs from the closest recorded prompt.
"""

from __future__ import annotations

from collections import deque
from typing import Any, Generator, Sequence

from tapeloop.errors import ReplayMismatchError
from tapeloop.llm.base import (
    LLM,
    LLMCallRecord,
    LLMOutput,
    Prompt,
    masked_prompt_document,
    masked_prompt_key,
)
from tapeloop.llm.db import CallDatabase


def _record_key(record: LLMCallRecord) -> str:
    return masked_prompt_key(Prompt.from_document(record.prompt))


class ReplayLLM(LLM):
    def __init__(
        self,
        records: Sequence[LLMCallRecord] | None = None,
        source_db: CallDatabase | None = None,
        model: str = "replay",
        db: CallDatabase | None = None,
        chunk_size: int = 0,
    ):
        """``records`` or ``source_db`` supplies the recordings (db is
        snapshotted here; later inserts are invisible). ``db`` is where the
        replayed calls themselves get recorded, if anywhere."""
        super().__init__(model=model, db=db)
        self.chunk_size = chunk_size
        if records is None:
            records = source_db.all_calls() if source_db is not None else []
        self._records = list(records)
        self._queues: dict[str, deque[LLMCallRecord]] = {}
        for rec in self._records:
            self._queues.setdefault(_record_key(rec), deque()).append(rec)

    @property
    def remaining(self) -> int:
        return sum(len(q) for q in self._queues.values())

    def _mismatch(self, prompt: Prompt) -> ReplayMismatchError:
        if not self._records:
            return ReplayMismatchError("no recorded calls to replay against", message_index=None)
        doc = masked_prompt_document(prompt)
        messages: list[Any] = doc["messages"]
        best_prefix = -1
        best: LLMCallRecord | None = None
        for rec in self._records:
            rec_messages = (rec.prompt.get("messages") or [])
            prefix = 0
            for a, b in zip(messages, rec_messages):
                if a != b:
                    break
                prefix += 1
            if prefix > best_prefix:
                best_prefix, best = prefix, rec
        assert best is not None
        detail = f"first differing message index {best_prefix}"
        if best_prefix >= len(messages) and best_prefix >= len(best.prompt.get("messages") or []):
            detail = "messages match a recording whose outputs were all replayed already"
        return ReplayMismatchError(
            f"prompt {prompt.id} not found among recorded calls ({detail}; "
            f"closest recording {best.prompt_id})",
            message_index=best_prefix,
        )

    def _generate(self, prompt: Prompt) -> Generator[str, None, LLMOutput]:
        queue = self._queues.get(masked_prompt_key(prompt))
        if not queue:
            raise self._mismatch(prompt)
        record = queue.popleft()
        output = LLMOutput.from_document(record.output)
        for chunk in self._chunked(output.content or "", self.chunk_size):
            yield chunk
        return output
