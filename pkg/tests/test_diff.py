"""Tape diff: masking, paths, positional statuses."""

from tapeloop.core import (
    append,
    assistant_message_step,
    call_step,
    content_equal,
    diff_steps,
    diff_tapes,
    tape_of,
    tool_calls_step,
    user_message_step,
)


def sample_tape():
    return tape_of(
        [
            user_message_step("hello"),
            call_step("worker", "solve"),
            tool_calls_step([{"id": "1", "name": "calc", "arguments": "{}"}]),
            assistant_message_step("done"),
        ]
    )


def rebuilt(tape):
    """Same content, entirely fresh ids — what a faithful replay produces."""
    copies = [s.model_copy(update={"metadata": s.metadata.model_copy(update={"id": f"re-{i}"})})
              for i, s in enumerate(tape.steps)]
    return tape_of(copies)


def test_diff_reflexive():
    tape = sample_tape()
    report = diff_tapes(tape, tape)
    assert report.empty
    assert report.first_divergence is None
    assert report.to_document()["equal"] is True


def test_volatile_metadata_masked_by_default():
    a = sample_tape()
    b = rebuilt(a)
    assert content_equal(a, b)
    assert diff_tapes(a, b).empty
    assert diff_tapes(a, b, mode="provenance").empty  # same agents/nodes produced them
    full = diff_tapes(a, b, mode="full")
    assert not full.empty
    assert all(e.changed_paths == ("metadata.id",) for e in full.entries)


def test_changed_payload_path():
    a = sample_tape()
    mutated = a.steps[3].model_copy(update={"payload": {"content": "different"}})
    b = tape_of(a.steps[:3] + (mutated,))
    report = diff_tapes(a, b)
    assert [e.index for e in report.entries] == [3]
    assert report.entries[0].changed_paths == ("content",)
    assert report.first_divergence == 3


def test_kind_change_reported():
    a = tape_of([user_message_step("x")])
    b = tape_of([assistant_message_step("x")])
    (entry,) = diff_tapes(a, b).entries
    assert set(entry.changed_paths) == {"kind", "category"}


def test_nested_list_paths():
    a = tape_of([tool_calls_step([{"id": "1", "name": "calc", "arguments": "{}"}])])
    b = tape_of([tool_calls_step([{"id": "1", "name": "search", "arguments": "{}"}])])
    (entry,) = diff_tapes(a, b).entries
    assert entry.changed_paths == ("calls[0].name",)


def test_list_length_change_points_at_list():
    a = tape_of([tool_calls_step([{"id": "1", "name": "calc", "arguments": "{}"}])])
    b = tape_of([tool_calls_step([])])
    (entry,) = diff_tapes(a, b).entries
    assert entry.changed_paths == ("calls",)


def test_missing_payload_field_path():
    a = tape_of([user_message_step("x")])
    stripped = a.steps[0].model_copy(update={"payload": {}})
    b = tape_of([stripped])
    (entry,) = diff_tapes(a, b).entries
    assert entry.changed_paths == ("content",)


def test_length_mismatch_statuses():
    a = sample_tape()
    b = tape_of(a.steps[:2])
    report = diff_tapes(a, b)
    assert [(e.index, e.status) for e in report.entries] == [(2, "only_in_a"), (3, "only_in_a")]
    flipped = diff_tapes(b, a)
    assert [(e.index, e.status) for e in flipped.entries] == [(2, "only_in_b"), (3, "only_in_b")]


def test_append_then_diff_localizes_suffix():
    a = sample_tape()
    b = append(a, [user_message_step("more")])
    report = diff_tapes(a, b)
    assert report.first_divergence == 4
    assert report.entries[0].status == "only_in_b"


def test_step_diff_modes_cover_provenance_then_ids():
    x = sample_tape().steps[1]
    y = x.with_metadata(agent="root", node="n0", prompt_id="p")
    assert diff_steps(x, y) == ()
    assert set(diff_steps(x, y, mode="provenance")) == {"metadata.agent", "metadata.node"}
    assert set(diff_steps(x, y, mode="full")) == {
        "metadata.agent",
        "metadata.node",
        "metadata.prompt_id",
    }


def test_type_flip_is_a_change():
    a = tape_of([tool_calls_step([{"id": "1", "name": "calc", "arguments": "{}"}])])
    flipped = a.steps[0].model_copy(update={"payload": {"calls": [{"id": 1, "name": "calc", "arguments": "{}"}]}})
    b = tape_of([flipped])
    (entry,) = diff_tapes(a, b).entries
    assert entry.changed_paths == ("calls[0].id",)
