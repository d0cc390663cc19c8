"""Tape construction, append, and fork semantics."""

import pytest

from tapeloop.core import (
    Step,
    Tape,
    append,
    assistant_message_step,
    call_step,
    content_equal,
    fork,
    respond_step,
    tape_of,
    tool_calls_step,
    tool_result_step,
    user_message_step,
)
from tapeloop.errors import StepValidationError


def three_steps():
    return [user_message_step("hi"), call_step("worker", "go"), respond_step("done")]


def test_append_returns_new_tape_with_lineage():
    base = tape_of([user_message_step("hi")], author="env")
    extra = [call_step("worker", "go"), respond_step("done")]
    out = append(base, extra, author="root")

    assert len(out) == 3
    assert out.metadata.id != base.metadata.id
    assert out.metadata.parent_id is None
    assert out.metadata.author == "root"
    assert out.metadata.n_added == 2
    # input untouched, prefix shared by identity
    assert len(base) == 1
    assert out.steps[0] is base.steps[0]


def test_append_nothing_is_content_equal():
    base = tape_of(three_steps())
    out = append(base, [], author="noop")
    assert content_equal(base, out)
    assert out.metadata.id != base.metadata.id
    assert out.metadata.n_added == 0


def test_append_validates_against_registry():
    base = tape_of([])
    bogus = Step(kind="call", category="thought", payload={"agent_name": 3, "content": ""})
    with pytest.raises(StepValidationError):
        append(base, [bogus])


def test_append_rejects_duplicate_step_id():
    step = user_message_step("hi")
    base = tape_of([step])
    with pytest.raises(StepValidationError, match="already present"):
        append(base, [step])


def test_tape_constructor_rejects_duplicate_ids():
    step = user_message_step("hi")
    with pytest.raises(ValueError, match="duplicate step id"):
        Tape(steps=(step, step))


def test_fork_keeps_prefix_swaps_step_drops_suffix():
    steps = three_steps()
    base = tape_of(steps)
    replacement = call_step("other_worker", "go elsewhere")
    out = fork(base, 1, replacement, author="editor")

    assert len(out) == 2
    assert out.steps[0] is base.steps[0]
    assert out.steps[1].payload["agent_name"] == "other_worker"
    assert out.metadata.parent_id == base.metadata.id
    assert out.metadata.author == "editor"
    # original untouched
    assert len(base) == 3


def test_fork_index_bounds():
    base = tape_of(three_steps())
    with pytest.raises(IndexError):
        fork(base, 3, user_message_step("x"))
    with pytest.raises(IndexError):
        fork(base, -1, user_message_step("x"))


def test_fork_validates_replacement():
    base = tape_of(three_steps())
    bogus = Step(kind="respond", category="thought", payload={})
    with pytest.raises(StepValidationError):
        fork(base, 2, bogus)


def test_last_action_index():
    tape = tape_of(
        [
            user_message_step("q"),
            assistant_message_step("a"),
            user_message_step("q2"),
        ]
    )
    assert tape.last_action_index() == 1
    assert tape_of([user_message_step("q")]).last_action_index() is None


def test_pending_tool_calls():
    pending = tool_calls_step([{"id": "1", "name": "calc", "arguments": "{}"}])
    tape = tape_of([user_message_step("q"), pending])
    assert tape.pending_tool_calls() is pending

    fulfilled = append(tape, [tool_result_step("1", "calc", 4, "4")])
    assert fulfilled.pending_tool_calls() is None

    # a trailing assistant_message is an action but not a tool request
    chatty = tape_of([user_message_step("q"), assistant_message_step("a")])
    assert chatty.pending_tool_calls() is None
