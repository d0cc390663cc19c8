"""Step model: the atomic unit of a tape.

A step is a flat record with a ``kind`` discriminator, a ``category``
(thought / action / observation / control), an arbitrary JSON payload, and
a metadata block that records which agent and node produced it and under
which prompt. Steps are immutable once constructed; every edit produces a
new step.
"""

from __future__ import annotations

import uuid
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field

Category = Literal["thought", "action", "observation", "control"]

CATEGORIES: tuple[str, ...] = ("thought", "action", "observation", "control")

# Built-in step kinds. Communication between agents happens through call /
# respond; set_next_node steers node selection inside one agent.
CALL = "call"
RESPOND = "respond"
SET_NEXT_NODE = "set_next_node"
USER_MESSAGE = "user_message"
ASSISTANT_MESSAGE = "assistant_message"
TOOL_CALLS = "tool_calls"
TOOL_RESULT = "tool_result"
ACTION_FAILURE = "action_failure"
PARSE_FAILURE = "parse_failure"

BUILTIN_KINDS: tuple[str, ...] = (
    CALL,
    RESPOND,
    SET_NEXT_NODE,
    USER_MESSAGE,
    ASSISTANT_MESSAGE,
    TOOL_CALLS,
    TOOL_RESULT,
    ACTION_FAILURE,
    PARSE_FAILURE,
)

# Payload keys that would collide with the flat serialized form.
RESERVED_PAYLOAD_KEYS = frozenset({"kind", "category", "metadata"})


def new_id() -> str:
    """Return a fresh UUID4 string; the id scheme for steps, tapes and prompts."""
    return str(uuid.uuid4())


class StepMetadata(BaseModel):
    """Provenance of one step.

    ``agent`` is the slash-joined path of the producing agent within its
    tree (empty for external input), ``node`` the producing node's name,
    and ``prompt_id`` links the step to the LLM call that generated it
    (None when no LLM was consulted). ``other`` is a free-form annex.
    """

    model_config = ConfigDict(frozen=True)

    id: str = Field(default_factory=new_id)
    agent: str = ""
    node: str = ""
    prompt_id: str | None = None
    other: dict[str, Any] = Field(default_factory=dict)


class Step(BaseModel):
    """One immutable tape entry.

    The payload is kept as a plain dict rather than per-kind subclasses so
    that tapes round-trip through JSON without import-order coupling; the
    step registry owns payload validation.
    """

    model_config = ConfigDict(frozen=True)

    kind: str
    category: Category
    payload: dict[str, Any] = Field(default_factory=dict)
    metadata: StepMetadata = Field(default_factory=StepMetadata)

    def with_metadata(self, **changes: Any) -> "Step":
        """Return a copy whose metadata fields are replaced by ``changes``."""
        meta = self.metadata.model_copy(update=changes)
        return self.model_copy(update={"metadata": meta})

    def get(self, field: str, default: Any = None) -> Any:
        return self.payload.get(field, default)


class PartialStep(BaseModel):
    """A chunk of a step under construction, surfaced while streaming."""

    model_config = ConfigDict(frozen=True)

    step: Step


# ---------------------------------------------------------------------------
# Constructors for the built-in kinds. These do not consult the registry;
# they produce payloads that the built-in schemas accept by construction.


def call_step(agent_name: str, content: str = "", **meta: Any) -> Step:
    """Thought that activates ``agent_name``; ``content`` is its task."""
    return Step(
        kind=CALL,
        category="thought",
        payload={"agent_name": agent_name, "content": content},
        metadata=StepMetadata(**meta),
    )


def respond_step(content: str = "", **meta: Any) -> Step:
    """Thought that ends the current agent's activity and answers its caller."""
    return Step(kind=RESPOND, category="thought", payload={"content": content}, metadata=StepMetadata(**meta))


def set_next_node_step(next_node: int, **meta: Any) -> Step:
    """Control step: run node ``next_node`` on the next iteration."""
    return Step(
        kind=SET_NEXT_NODE,
        category="control",
        payload={"next_node": next_node},
        metadata=StepMetadata(**meta),
    )


def user_message_step(content: str, **meta: Any) -> Step:
    return Step(kind=USER_MESSAGE, category="observation", payload={"content": content}, metadata=StepMetadata(**meta))


def assistant_message_step(content: str, **meta: Any) -> Step:
    return Step(kind=ASSISTANT_MESSAGE, category="action", payload={"content": content}, metadata=StepMetadata(**meta))


def tool_calls_step(calls: list[dict[str, Any]], **meta: Any) -> Step:
    """Action requesting tool executions.

    Each call is ``{"id": str, "name": str, "arguments": str}`` with
    arguments carried as a JSON-encoded string, mirroring chat APIs.
    """
    return Step(kind=TOOL_CALLS, category="action", payload={"calls": calls}, metadata=StepMetadata(**meta))


def tool_result_step(call_id: str, tool_name: str, result: Any, text: str, **meta: Any) -> Step:
    return Step(
        kind=TOOL_RESULT,
        category="observation",
        payload={"call_id": call_id, "tool_name": tool_name, "result": result, "text": text},
        metadata=StepMetadata(**meta),
    )


def action_failure_step(reason: str, call_id: str | None = None, **meta: Any) -> Step:
    payload: dict[str, Any] = {"reason": reason}
    if call_id is not None:
        payload["call_id"] = call_id
    return Step(kind=ACTION_FAILURE, category="observation", payload=payload, metadata=StepMetadata(**meta))


def parse_failure_step(raw: str, reason: str = "", **meta: Any) -> Step:
    """Observation recording an LLM completion the agent could not parse."""
    return Step(
        kind=PARSE_FAILURE,
        category="observation",
        payload={"raw": raw, "reason": reason},
        metadata=StepMetadata(**meta),
    )
