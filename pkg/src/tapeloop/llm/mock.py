"""Scripted provider for tests, demos, and anything that must run offline.

Two modes:

* script — a fixed list of outputs served in order; running past the end
  is an error (it means the agent asked for more than the scenario allows).
* patterns — (regex, output) pairs tried in order against the concatenated
  message contents of the prompt; first match wins.
"""

from __future__ import annotations

import re
from typing import Any, Generator, Sequence

from tapeloop.errors import ScriptExhaustedError
from tapeloop.llm.base import LLM, LLMOutput, Prompt
from tapeloop.llm.db import CallDatabase


def coerce_output(entry: Any) -> LLMOutput:
    """Accept a plain string, an output document, or an LLMOutput."""
    if isinstance(entry, LLMOutput):
        return entry
    if isinstance(entry, str):
        return LLMOutput(content=entry)
    if isinstance(entry, dict):
        return LLMOutput.from_document(entry)
    raise TypeError(f"cannot interpret scripted output {entry!r}")


class MockLLM(LLM):
    def __init__(
        self,
        script: Sequence[Any] | None = None,
        patterns: Sequence[tuple[str, Any]] | None = None,
        model: str = "mock",
        db: CallDatabase | None = None,
        chunk_size: int = 0,
    ):
        if (script is None) == (patterns is None):
            raise ValueError("provide exactly one of script= or patterns=")
        super().__init__(model=model, db=db)
        self.chunk_size = chunk_size
        self._script = [coerce_output(e) for e in script] if script is not None else None
        self._cursor = 0
        self._patterns = (
            [(re.compile(rx, re.DOTALL), coerce_output(out)) for rx, out in patterns]
            if patterns is not None
            else None
        )

    @property
    def remaining(self) -> int | None:
        """Unserved script entries; None in pattern mode."""
        if self._script is None:
            return None
        return len(self._script) - self._cursor

    def _pick(self, prompt: Prompt) -> LLMOutput:
        if self._script is not None:
            if self._cursor >= len(self._script):
                raise ScriptExhaustedError(
                    f"mock script exhausted after {len(self._script)} responses"
                )
            out = self._script[self._cursor]
            self._cursor += 1
            return out
        assert self._patterns is not None
        haystack = "\n".join(str(m.get("content") or "") for m in prompt.messages)
        for rx, out in self._patterns:
            if rx.search(haystack):
                return out
        raise ScriptExhaustedError(f"no mock pattern matched prompt {prompt.id}")

    def _generate(self, prompt: Prompt) -> Generator[str, None, LLMOutput]:
        output = self._pick(prompt)
        for chunk in self._chunked(output.content or "", self.chunk_size):
            yield chunk
        return output
