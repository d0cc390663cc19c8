"""LLM gateway: prompts, streamed outputs, call recording, providers."""

from tapeloop.llm.base import (
    LLM,
    LLMCallRecord,
    LLMOutput,
    LLMStream,
    Prompt,
    estimate_tokens,
    masked_prompt_document,
    masked_prompt_key,
)
from tapeloop.llm.db import CallDatabase, default_db_path
from tapeloop.llm.http import HttpLLM
from tapeloop.llm.mock import MockLLM
from tapeloop.llm.pool import ProviderPool, provider_from_config
from tapeloop.llm.replay import ReplayLLM

__all__ = [
    "LLM",
    "CallDatabase",
    "HttpLLM",
    "LLMCallRecord",
    "LLMOutput",
    "LLMStream",
    "MockLLM",
    "Prompt",
    "ProviderPool",
    "ReplayLLM",
    "default_db_path",
    "estimate_tokens",
    "masked_prompt_document",
    "masked_prompt_key",
    "provider_from_config",
]
