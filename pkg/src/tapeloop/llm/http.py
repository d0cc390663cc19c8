"""Provider speaking the OpenAI-compatible chat completions protocol.

Configuration comes from the environment unless passed explicitly:
LLM_API_BASE (service root), LLM_API_KEY, LLM_MODEL. The request is made
without server-side streaming; the response text is re-chunked locally so
consumers see the same stream interface as every other provider.
"""

from __future__ import annotations

import os
from typing import Any, Generator

import httpx

from tapeloop.errors import TransportError
from tapeloop.llm.base import LLM, LLMOutput, Prompt
from tapeloop.llm.db import CallDatabase

ENV_API_BASE = "LLM_API_BASE"
ENV_API_KEY = "LLM_API_KEY"
ENV_MODEL = "LLM_MODEL"


class HttpLLM(LLM):
    def __init__(
        self,
        base_url: str | None = None,
        api_key: str | None = None,
        model: str | None = None,
        db: CallDatabase | None = None,
        chunk_size: int = 0,
        timeout: float = 60.0,
        transport: httpx.BaseTransport | None = None,
    ):
        base_url = base_url or os.environ.get(ENV_API_BASE, "")
        if not base_url:
            raise TransportError(f"no API base url: pass base_url= or set {ENV_API_BASE}")
        super().__init__(model=model or os.environ.get(ENV_MODEL, ""), db=db)
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key if api_key is not None else os.environ.get(ENV_API_KEY, "")
        self.chunk_size = chunk_size
        self.timeout = timeout
        self._transport = transport  # injectable for tests

    def _request_body(self, prompt: Prompt) -> dict[str, Any]:
        body: dict[str, Any] = {"model": self.model, "messages": [dict(m) for m in prompt.messages]}
        if prompt.tools is not None:
            body["tools"] = [dict(t) for t in prompt.tools]
        return body

    def _call(self, prompt: Prompt) -> LLMOutput:
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            with httpx.Client(transport=self._transport, timeout=self.timeout) as client:
                resp = client.post(
                    f"{self.base_url}/chat/completions",
                    json=self._request_body(prompt),
                    headers=headers,
                )
                resp.raise_for_status()
                data = resp.json()
        except httpx.HTTPStatusError as exc:
            raise TransportError(
                f"chat completion failed with HTTP {exc.response.status_code}: {exc.response.text[:200]}"
            ) from exc
        except httpx.HTTPError as exc:
            raise TransportError(f"chat completion request failed: {exc}") from exc

        try:
            message = data["choices"][0]["message"]
        except (KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"malformed chat completion response: {data!r:.200}") from exc

        tool_calls = None
        if message.get("tool_calls"):
            tool_calls = tuple(
                {
                    "id": tc.get("id", ""),
                    "name": tc.get("function", {}).get("name", ""),
                    "arguments": tc.get("function", {}).get("arguments", ""),
                }
                for tc in message["tool_calls"]
            )
        return LLMOutput(content=message.get("content"), tool_calls=tool_calls)

    def _generate(self, prompt: Prompt) -> Generator[str, None, LLMOutput]:
        output = self._call(prompt)
        for chunk in self._chunked(output.content or "", self.chunk_size):
            yield chunk
        return output
