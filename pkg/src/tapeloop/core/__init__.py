"""Tape data model: typed steps, append-only tapes, canonical JSON, diffs."""

from tapeloop.core.diff import (
    DiffEntry,
    DiffReport,
    content_equal,
    diff_steps,
    diff_tapes,
    steps_content_equal,
)
from tapeloop.core.registry import (
    PayloadField,
    StepKindSpec,
    StepRegistry,
    builtin_registry,
    default_registry,
    register_step_kind,
)
from tapeloop.core.serialize import (
    deserialize_tape,
    dump_tapes,
    parse_tape_lines,
    serialize_tape,
    serialize_tape_line,
    step_from_document,
    step_to_document,
    tape_from_document,
    tape_to_document,
)
from tapeloop.core.steps import (
    ACTION_FAILURE,
    ASSISTANT_MESSAGE,
    CALL,
    CATEGORIES,
    PARSE_FAILURE,
    RESPOND,
    SET_NEXT_NODE,
    TOOL_CALLS,
    TOOL_RESULT,
    USER_MESSAGE,
    PartialStep,
    Step,
    StepMetadata,
    action_failure_step,
    assistant_message_step,
    call_step,
    new_id,
    parse_failure_step,
    respond_step,
    set_next_node_step,
    tool_calls_step,
    tool_result_step,
    user_message_step,
)
from tapeloop.core.tape import Tape, TapeMetadata, append, fork, pending_action, tape_of

__all__ = [
    "ACTION_FAILURE",
    "ASSISTANT_MESSAGE",
    "CALL",
    "CATEGORIES",
    "PARSE_FAILURE",
    "RESPOND",
    "SET_NEXT_NODE",
    "TOOL_CALLS",
    "TOOL_RESULT",
    "USER_MESSAGE",
    "DiffEntry",
    "DiffReport",
    "PartialStep",
    "PayloadField",
    "Step",
    "StepKindSpec",
    "StepMetadata",
    "StepRegistry",
    "Tape",
    "TapeMetadata",
    "action_failure_step",
    "append",
    "assistant_message_step",
    "builtin_registry",
    "call_step",
    "content_equal",
    "default_registry",
    "deserialize_tape",
    "diff_steps",
    "diff_tapes",
    "dump_tapes",
    "fork",
    "new_id",
    "parse_failure_step",
    "parse_tape_lines",
    "pending_action",
    "register_step_kind",
    "respond_step",
    "serialize_tape",
    "serialize_tape_line",
    "set_next_node_step",
    "step_from_document",
    "step_to_document",
    "steps_content_equal",
    "tape_from_document",
    "tape_of",
    "tape_to_document",
    "user_message_step",
]
