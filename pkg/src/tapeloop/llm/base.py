"""Prompt/output types, the consume-once stream, and the provider base.

Every LLM interaction flows through one funnel: a Prompt with a unique id
goes in, an LLMStream comes out, and when the stream finishes the complete
call is recorded to the call database. That record is what makes replay,
resumption checks, and training-data extraction possible.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Any, Callable, Generator, Iterator, Sequence

from pydantic import BaseModel, ConfigDict, Field

from tapeloop.core.steps import new_id
from tapeloop.errors import LLMError


def estimate_tokens(text: str) -> int:
    """Crude deterministic token estimate (whitespace words); good enough
    for the accounting columns, not for billing."""
    return len(text.split())


class Prompt(BaseModel):
    """One LLM request: chat messages plus optional tool declarations.

    The id doubles as the prompt_id stamped onto every step generated from
    this call — the linkage between tape and call database.
    """

    model_config = ConfigDict(frozen=True)

    id: str = Field(default_factory=new_id)
    messages: tuple[dict[str, Any], ...] = ()
    tools: tuple[dict[str, Any], ...] | None = None

    def to_document(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "messages": [dict(m) for m in self.messages],
            "tools": [dict(t) for t in self.tools] if self.tools is not None else None,
        }

    @classmethod
    def from_document(cls, doc: dict[str, Any]) -> "Prompt":
        return cls(
            id=doc.get("id") or new_id(),
            messages=tuple(doc.get("messages") or ()),
            tools=tuple(doc["tools"]) if doc.get("tools") is not None else None,
        )

    def token_estimate(self) -> int:
        return sum(estimate_tokens(str(m.get("content") or "")) for m in self.messages)


class LLMOutput(BaseModel):
    """What came back: assistant text and/or requested tool calls."""

    model_config = ConfigDict(frozen=True)

    content: str | None = None
    tool_calls: tuple[dict[str, Any], ...] | None = None

    def to_document(self) -> dict[str, Any]:
        return {
            "content": self.content,
            "tool_calls": [dict(c) for c in self.tool_calls] if self.tool_calls is not None else None,
        }

    @classmethod
    def from_document(cls, doc: dict[str, Any]) -> "LLMOutput":
        return cls(
            content=doc.get("content"),
            tool_calls=tuple(doc["tool_calls"]) if doc.get("tool_calls") is not None else None,
        )

    def token_estimate(self) -> int:
        n = estimate_tokens(self.content or "")
        for call in self.tool_calls or ():
            n += estimate_tokens(json.dumps(call, sort_keys=True))
        return n


def masked_prompt_document(prompt: Prompt) -> dict[str, Any]:
    """The prompt minus its volatile id — the identity used for replay matching."""
    doc = prompt.to_document()
    doc.pop("id", None)
    return doc


def masked_prompt_key(prompt: Prompt) -> str:
    blob = json.dumps(masked_prompt_document(prompt), sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class LLMCallRecord:
    """One completed LLM call as stored in the call database."""

    prompt_id: str
    model: str
    prompt: dict[str, Any]
    output: dict[str, Any]
    input_tokens: int | None = None
    output_tokens: int | None = None
    created_at: str = ""

    def to_document(self) -> dict[str, Any]:
        return {
            "prompt_id": self.prompt_id,
            "model": self.model,
            "prompt": self.prompt,
            "output": self.output,
            "input_tokens": self.input_tokens,
            "output_tokens": self.output_tokens,
            "created_at": self.created_at,
        }


class LLMStream:
    """Single-use iterator over completion chunks.

    Iterate to receive text deltas; call ``output()`` to drain whatever is
    left and get the final LLMOutput. A second iteration attempt raises —
    the stream mirrors the one-shot nature of the underlying call.
    """

    def __init__(
        self,
        prompt: Prompt,
        generator: Generator[str, None, LLMOutput],
        on_complete: Callable[[Prompt, LLMOutput], None] | None = None,
    ):
        self.prompt = prompt
        self._gen = generator
        self._on_complete = on_complete
        self._started = False
        self._output: LLMOutput | None = None

    @property
    def prompt_id(self) -> str:
        return self.prompt.id

    def _drain(self) -> Iterator[str]:
        if self._started:
            raise LLMError("LLM stream already consumed; call generate() again for a new one")
        self._started = True
        while True:
            try:
                chunk = next(self._gen)
            except StopIteration as stop:
                self._output = stop.value if isinstance(stop.value, LLMOutput) else LLMOutput()
                break
            yield chunk
        if self._on_complete is not None:
            self._on_complete(self.prompt, self._output)

    def __iter__(self) -> Iterator[str]:
        return self._drain()

    def output(self) -> LLMOutput:
        """Finish the stream (discarding unread chunks) and return the result."""
        if self._output is None:
            for _ in self._drain() if not self._started else ():
                pass
            if self._output is None:
                raise LLMError("stream ended without producing an output")
        return self._output


class LLM:
    """Base provider: subclasses implement ``_generate``; this class owns
    prompt construction helpers and call recording."""

    def __init__(self, model: str = "", db: "CallDatabase | None" = None):
        self.model = model
        self.db = db

    # subclass contract: yield str chunks, return the final LLMOutput
    def _generate(self, prompt: Prompt) -> Generator[str, None, LLMOutput]:
        raise NotImplementedError

    def generate(self, prompt: Prompt) -> LLMStream:
        return LLMStream(prompt, self._generate(prompt), on_complete=self._record)

    def _record(self, prompt: Prompt, output: LLMOutput) -> None:
        if self.db is None:
            return
        self.db.insert(
            LLMCallRecord(
                prompt_id=prompt.id,
                model=self.model,
                prompt=prompt.to_document(),
                output=output.to_document(),
                input_tokens=prompt.token_estimate(),
                output_tokens=output.token_estimate(),
            )
        )

    @staticmethod
    def _chunked(text: str, chunk_size: int) -> Sequence[str]:
        if chunk_size <= 0 or not text:
            return [text] if text else []
        return [text[i : i + chunk_size] for i in range(0, len(text), chunk_size)]
