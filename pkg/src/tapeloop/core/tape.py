"""Tape: an immutable, append-only sequence of steps plus lineage metadata.

A tape is never mutated. ``append`` yields a new tape with a fresh id;
``fork`` yields an edited prefix whose metadata points back at the
original. The tape is simultaneously the session record and the state an
agent resumes from.
"""

from __future__ import annotations

from typing import Any, Iterable, Iterator, Sequence

from pydantic import BaseModel, ConfigDict, Field, model_validator

from tapeloop.core.registry import StepRegistry, default_registry
from tapeloop.core.steps import Step, TOOL_CALLS, new_id
from tapeloop.errors import StepValidationError


class TapeMetadata(BaseModel):
    """Lineage of one tape instance.

    ``parent_id`` is set only when the tape was derived by editing another
    tape (fork); plain appends start a fresh lineage entry. ``n_added``
    counts the steps contributed by the operation that produced this tape.
    """

    model_config = ConfigDict(frozen=True)

    id: str = Field(default_factory=new_id)
    parent_id: str | None = None
    author: str = ""
    n_added: int = 0


class Tape(BaseModel):
    """Immutable step sequence. Supports len/iteration/indexing over steps."""

    model_config = ConfigDict(frozen=True)

    steps: tuple[Step, ...] = ()
    metadata: TapeMetadata = Field(default_factory=TapeMetadata)

    @model_validator(mode="after")
    def _check_unique_step_ids(self) -> "Tape":
        seen: set[str] = set()
        for i, step in enumerate(self.steps):
            sid = step.metadata.id
            if sid in seen:
                raise ValueError(f"duplicate step id {sid!r} at index {i}")
            seen.add(sid)
        return self

    def __len__(self) -> int:
        return len(self.steps)

    def __iter__(self) -> Iterator[Step]:  # type: ignore[override]
        return iter(self.steps)

    def __getitem__(self, index: int | slice) -> Step | tuple[Step, ...]:
        return self.steps[index]

    def last_action_index(self) -> int | None:
        """Index of the most recent action step, if any."""
        for i in range(len(self.steps) - 1, -1, -1):
            if self.steps[i].category == "action":
                return i
        return None

    def pending_tool_calls(self) -> Step | None:
        """The trailing tool_calls action awaiting results, if one exists.

        An action is pending when no observation follows it on the tape.
        """
        for i in range(len(self.steps) - 1, -1, -1):
            step = self.steps[i]
            if step.category == "observation":
                return None
            if step.category == "action":
                return step if step.kind == TOOL_CALLS else None
        return None


def _validated(steps: Iterable[Step], registry: StepRegistry) -> tuple[Step, ...]:
    out = []
    for step in steps:
        registry.validate_step(step)
        out.append(step)
    return tuple(out)


def append(
    tape: Tape,
    steps: Sequence[Step],
    author: str = "",
    registry: StepRegistry | None = None,
) -> Tape:
    """Return a new tape extending ``tape`` with ``steps``.

    The result carries a fresh id and records ``author`` and the number of
    appended steps; the input tape is untouched. Steps are validated
    against the registry and must not reuse an existing step id.
    """
    registry = registry or default_registry
    new_steps = _validated(steps, registry)
    existing = {s.metadata.id for s in tape.steps}
    for step in new_steps:
        if step.metadata.id in existing:
            raise StepValidationError(f"step id {step.metadata.id!r} already present on tape")
    return Tape(
        steps=tape.steps + new_steps,
        metadata=TapeMetadata(id=new_id(), parent_id=None, author=author, n_added=len(new_steps)),
    )


def fork(
    tape: Tape,
    edit_index: int,
    replacement: Step,
    author: str = "",
    registry: StepRegistry | None = None,
) -> Tape:
    """Branch ``tape`` at ``edit_index``: keep the prefix, swap in ``replacement``.

    Everything after the edited position is dropped — the point of a fork
    is to re-run the future from an altered past. The new tape's metadata
    points back at the original via ``parent_id``.
    """
    registry = registry or default_registry
    if not 0 <= edit_index < len(tape.steps):
        raise IndexError(f"edit index {edit_index} out of range for tape of length {len(tape.steps)}")
    registry.validate_step(replacement)
    prefix = tape.steps[:edit_index]
    for step in prefix:
        if step.metadata.id == replacement.metadata.id:
            raise StepValidationError(f"step id {replacement.metadata.id!r} already present on tape")
    return Tape(
        steps=prefix + (replacement,),
        metadata=TapeMetadata(id=new_id(), parent_id=tape.metadata.id, author=author, n_added=1),
    )


def tape_of(steps: Sequence[Step] | None = None, **meta: Any) -> Tape:
    """Convenience constructor used all over the tests."""
    return Tape(steps=tuple(steps or ()), metadata=TapeMetadata(**meta))


def pending_action(tape: Tape) -> Step | None:
    """The trailing action no observation has answered yet.

    Thoughts and control steps after an action leave it pending; an
    observation means the outside world already reacted. Both the
    environment (to know what to execute) and the run loop (to know the
    agent must wait) share this notion, so a tape cut anywhere remains a
    consistent resume point.
    """
    for step in reversed(tape.steps):
        if step.category == "observation":
            return None
        if step.category == "action":
            return step
    return None
