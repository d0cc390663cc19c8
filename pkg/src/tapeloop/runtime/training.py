"""Rebuild (prompt, completion) pairs from a finished tape.

Steps sharing a prompt_id came from one LLM call. For each such group the
producing node can rebuild the prompt (from the tape prefix, exactly as it
did live) and the completion (from the steps themselves). Every rebuilt
pair is validated by running it back through the node and checking the
same steps come out — a sample that does not regenerate its tape is a bug,
not training data.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Generator

from tapeloop.core.diff import diff_steps
from tapeloop.core.steps import Step
from tapeloop.core.tape import Tape, tape_of
from tapeloop.errors import ReconstructionError
from tapeloop.llm.base import LLMOutput, LLMStream, Prompt
from tapeloop.llm.db import CallDatabase
from tapeloop.runtime.agent import Agent
from tapeloop.runtime.views import compute_view_stack, resolve_lineage, select_next_node, view_tape


@dataclass(frozen=True)
class TrainingText:
    """One supervised example: the chat messages in, the completion out."""

    messages: tuple[dict[str, Any], ...]
    tools: tuple[dict[str, Any], ...] | None
    completion: dict[str, Any]  # LLMOutput document
    prompt_id: str  # original call's id, for provenance
    agent: str
    node: str

    def to_document(self) -> dict[str, Any]:
        return {
            "messages": [dict(m) for m in self.messages],
            "tools": [dict(t) for t in self.tools] if self.tools is not None else None,
            "completion": dict(self.completion),
            "prompt_id": self.prompt_id,
            "agent": self.agent,
            "node": self.node,
        }

    @property
    def prompt_text(self) -> str:
        """The prompt side as plain text, one line per message."""
        return "\n".join(f"{m.get('role', '?')}: {m.get('content') or ''}" for m in self.messages)

    @property
    def completion_text(self) -> str:
        """The completion side as plain text, tool calls spelled out."""
        completion = self.completion.get("content") or ""
        if self.completion.get("tool_calls"):
            calls = ", ".join(f"{c.get('name')}({c.get('arguments')})" for c in self.completion["tool_calls"])
            completion = (completion + "\n" if completion else "") + f"[tool calls: {calls}]"
        return completion

    @property
    def text(self) -> str:
        """Plain-text rendering, for eyeballing and simple trainers."""
        return f"{self.prompt_text}\n### assistant:\n{self.completion_text}"


def _echo_stream(prompt: Prompt, output: LLMOutput) -> LLMStream:
    """A stream that simply serves an already-known output."""

    def gen() -> Generator[str, None, LLMOutput]:
        if output.content:
            yield output.content
        return output

    return LLMStream(prompt, gen())


def _prompt_groups(tape: Tape) -> list[tuple[int, int]]:
    """(start, end) of each maximal run of steps sharing a non-null prompt_id."""
    groups = []
    i = 0
    while i < len(tape.steps):
        pid = tape.steps[i].metadata.prompt_id
        if pid is None:
            i += 1
            continue
        j = i + 1
        while j < len(tape.steps) and tape.steps[j].metadata.prompt_id == pid:
            j += 1
        groups.append((i, j))
        i = j
    return groups


def _regenerate(agent, node, visible: Tape, prompt: Prompt, output: LLMOutput) -> list[Step]:
    steps = []
    for item in node.generate_steps(agent, visible, _echo_stream(prompt, output)):
        if isinstance(item, Step):
            steps.append(item)
    return steps


def make_training_text(
    agent: Agent,
    tape: Tape,
    db: CallDatabase | None = None,
) -> list[TrainingText]:
    """Extract one validated training sample per LLM call on the tape.

    ``db``, when given, supplies the recorded calls as an extra
    cross-check: a rebuilt prompt or completion that disagrees with the
    recording is rejected. Nodes that cannot rebuild completions raise
    UnsupportedNodeError; steps that do not regenerate raise
    ReconstructionError pointing at the first offending step.
    """
    samples = []
    for start, end in _prompt_groups(tape):
        first = tape.steps[start]
        group = list(tape.steps[start:end])
        prefix = tape_of(tape.steps[:start])

        stack = compute_view_stack(prefix, agent.name)
        if stack.empty or stack.top.agent != first.metadata.agent:
            active_path = "<none>" if stack.empty else stack.top.agent
            raise ReconstructionError(
                f"step {start} was produced by {first.metadata.agent!r} but the active agent "
                f"at that point is {active_path!r}",
                step_index=start,
            )
        view = stack.top
        active = resolve_lineage(agent, view.agent)[-1]
        node_names = [n.name for n in active.nodes]
        if first.metadata.node not in node_names:
            raise ReconstructionError(
                f"step {start} names node {first.metadata.node!r}, unknown to agent {view.agent!r}",
                step_index=start,
            )
        selected = select_next_node(view, prefix, node_names)
        if node_names[selected] != first.metadata.node:
            raise ReconstructionError(
                f"node selection at step {start} yields {node_names[selected]!r}, "
                f"but the tape was produced by {first.metadata.node!r}",
                step_index=start,
            )
        node = active.nodes[selected]

        visible = view_tape(prefix, view)
        prompt = node.make_prompt(active, visible)
        output = node.make_llm_output(active, tape, start)

        regenerated = _regenerate(active, node, visible, prompt, output)
        if len(regenerated) != len(group):
            raise ReconstructionError(
                f"completion rebuilt at step {start} regenerates {len(regenerated)} steps, "
                f"tape has {len(group)}",
                step_index=start,
            )
        for offset, (ours, theirs) in enumerate(zip(regenerated, group)):
            paths = diff_steps(ours, theirs)
            if paths:
                raise ReconstructionError(
                    f"regenerated step {start + offset} differs from the tape at {', '.join(paths)}",
                    step_index=start + offset,
                )

        if db is not None and first.metadata.prompt_id in db:
            record = db.get(first.metadata.prompt_id)
            recorded_messages = record.prompt.get("messages") or []
            if [dict(m) for m in prompt.messages] != recorded_messages:
                raise ReconstructionError(
                    f"rebuilt prompt for step {start} differs from the recorded call "
                    f"{first.metadata.prompt_id}",
                    step_index=start,
                )
            if output.to_document() != record.output:
                raise ReconstructionError(
                    f"rebuilt completion for step {start} differs from the recorded call "
                    f"{first.metadata.prompt_id}",
                    step_index=start,
                )

        samples.append(
            TrainingText(
                messages=prompt.messages,
                tools=prompt.tools,
                completion=output.to_document(),
                prompt_id=first.metadata.prompt_id or "",
                agent=first.metadata.agent,
                node=first.metadata.node,
            )
        )
    return samples
