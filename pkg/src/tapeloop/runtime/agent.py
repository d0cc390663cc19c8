"""Agent trees and the reasoning loop.

An agent is a named bundle of nodes plus optional subagents. Running it
against a tape repeats one pure move — pick the active agent, pick its
next node, prompt, parse steps, stamp provenance — until an action step
hands control back to the caller. The run never mutates its input tape;
all generated steps land in a single append at the end.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Generator, Iterator

from pydantic import BaseModel, ConfigDict, Field, model_validator

from tapeloop.core.registry import StepRegistry, default_registry
from tapeloop.core.steps import CALL, PARSE_FAILURE, RESPOND, PartialStep, Step, action_failure_step
from tapeloop.core.tape import Tape, append, pending_action
from tapeloop.errors import (
    LLMError,
    MalformedStepSequenceError,
    NodeExhaustedError,
    ReplayMismatchError,
    RunawayAgentError,
)
from tapeloop.llm.pool import ProviderPool
from tapeloop.runtime.node import Node
from tapeloop.runtime.views import (
    compute_view_stack,
    resolve_lineage,
    select_next_node,
    view_tape,
)

DEFAULT_ITERATION_CAP = 16


class Agent(BaseModel):
    """A named agent: nodes that act, subagents it may call, an LLM config.

    ``llm`` is a provider config document; subagents without one inherit
    the nearest ancestor's. ``max_iterations`` caps loop iterations per run
    when this agent is the root.
    """

    model_config = ConfigDict(frozen=True)

    name: str
    nodes: tuple[Node, ...] = ()
    subagents: tuple["Agent", ...] = ()
    llm: dict[str, Any] | None = None
    max_iterations: int = Field(default=DEFAULT_ITERATION_CAP, ge=1)

    @model_validator(mode="after")
    def _check_names(self) -> "Agent":
        if not self.name or "/" in self.name:
            raise ValueError(f"agent name {self.name!r} must be non-empty and slash-free")
        node_names = [n.name for n in self.nodes]
        if any(not n for n in node_names):
            raise ValueError(f"agent {self.name!r} has a node without a name")
        if len(set(node_names)) != len(node_names):
            raise ValueError(f"agent {self.name!r} has duplicate node names")
        sub_names = [s.name for s in self.subagents]
        if len(set(sub_names)) != len(sub_names):
            raise ValueError(f"agent {self.name!r} has duplicate subagent names")
        return self

    def find_node(self, name: str) -> Node:
        for node in self.nodes:
            if node.name == name:
                return node
        raise KeyError(f"agent {self.name!r} has no node named {name!r}")

    def find_subagent(self, name: str) -> "Agent":
        for sub in self.subagents:
            if sub.name == name:
                return sub
        raise KeyError(f"agent {self.name!r} has no subagent named {name!r}")

    def run(
        self,
        tape: Tape,
        pool: ProviderPool | None = None,
        registry: StepRegistry | None = None,
        max_iterations: int | None = None,
    ) -> "AgentStream":
        return run(self, tape, pool=pool, registry=registry, max_iterations=max_iterations)


@dataclass(frozen=True)
class AgentEvent:
    """One item of a run's event stream; exactly one field is set."""

    step: Step | None = None
    partial_step: PartialStep | None = None
    final_tape: Tape | None = None


class AgentStream:
    """Iterator over AgentEvents with access to the run's final tape."""

    def __init__(self, events: Generator[AgentEvent, None, None]):
        self._events = events
        self._final: Tape | None = None
        self.failed = False  # set when the run ended on a failure observation

    def __iter__(self) -> Iterator[AgentEvent]:
        for event in self._events:
            if event.final_tape is not None:
                self._final = event.final_tape
            yield event

    def get_final_tape(self) -> Tape:
        if self._final is None:
            for _ in self:
                pass
        if self._final is None:
            raise RuntimeError("agent run ended without a final tape")
        return self._final


def _provider_for(root: Agent, path: str, pool: ProviderPool | None, node_name: str):
    lineage = resolve_lineage(root, path)
    config = next((a.llm for a in reversed(lineage) if a.llm is not None), None)
    if config is None:
        raise LLMError(f"agent {path!r} has no LLM configured but node {node_name!r} built a prompt")
    if pool is None:
        raise LLMError(f"node {node_name!r} of {path!r} needs an LLM call but no provider pool was given")
    return pool.get(config)


def run(
    agent: Agent,
    tape: Tape,
    pool: ProviderPool | None = None,
    registry: StepRegistry | None = None,
    max_iterations: int | None = None,
) -> AgentStream:
    """Run ``agent`` on ``tape`` until it produces an action (or fails).

    Returns a stream of events: stamped steps as they are generated,
    partial steps while text is streaming, and finally the new tape — the
    input plus everything generated, appended in one move.
    """
    registry = registry or default_registry
    cap = max_iterations if max_iterations is not None else agent.max_iterations
    stream = AgentStream(_run_events(agent, tape, pool, registry, cap, stream_ref := []))
    stream_ref.append(stream)
    return stream


def _run_events(
    root: Agent,
    start_tape: Tape,
    pool: ProviderPool | None,
    registry: StepRegistry,
    cap: int,
    stream_ref: list,
) -> Generator[AgentEvent, None, None]:
    def mark_failed() -> None:
        if stream_ref:
            stream_ref[0].failed = True

    if pending_action(start_tape) is not None:
        # An action already awaits the outside world. Running the agent now
        # would prompt it with an unanswered action in view; instead the run
        # ends at once with the tape untouched, making any recorded
        # intermediate tape a valid resume point.
        yield AgentEvent(final_tape=start_tape)
        return

    new_steps: list[Step] = []
    work = start_tape
    done = False
    for _ in range(cap):
        stack = compute_view_stack(work, root.name)
        if stack.empty:
            done = True  # the root itself responded: nothing left to do
            break
        view = stack.top
        active = resolve_lineage(root, view.agent)[-1]
        if not active.nodes:
            raise NodeExhaustedError(f"agent {view.agent!r} has no nodes to run")
        node_idx = select_next_node(view, work, [n.name for n in active.nodes])
        node = active.nodes[node_idx]
        visible = view_tape(work, view)

        iteration_steps: list[Step] = []
        turn_over = False  # a call or respond must be the iteration's last step
        try:
            prompt = node.make_prompt(active, visible)
            llm_stream = None
            if prompt.messages:
                llm = _provider_for(root, view.agent, pool, node.name)
                llm_stream = llm.generate(prompt)
            for item in node.generate_steps(active, visible, llm_stream):
                if isinstance(item, PartialStep):
                    yield AgentEvent(partial_step=item)
                    continue
                if turn_over:
                    raise MalformedStepSequenceError(
                        f"node {node.name!r} yielded more steps after a call/respond"
                    )
                stamped = item.with_metadata(
                    agent=view.agent,
                    node=node.name,
                    prompt_id=prompt.id if prompt.messages else None,
                )
                registry.validate_step(stamped)
                if stamped.kind in (CALL, RESPOND):
                    turn_over = True
                iteration_steps.append(stamped)
                yield AgentEvent(step=stamped)
        except ReplayMismatchError:
            raise  # replay divergence is a harness-level failure, not an agent one
        except LLMError as exc:
            failure = action_failure_step(reason=str(exc)).with_metadata(
                agent=view.agent, node=node.name
            )
            new_steps.append(failure)
            yield AgentEvent(step=failure)
            mark_failed()
            done = True
            break

        if not iteration_steps:
            raise MalformedStepSequenceError(
                f"node {node.name!r} of {view.agent!r} produced no steps; the loop cannot advance"
            )
        new_steps.extend(iteration_steps)
        work = Tape(steps=work.steps + tuple(iteration_steps), metadata=work.metadata)

        if any(s.kind == PARSE_FAILURE for s in iteration_steps):
            mark_failed()
            done = True
            break
        if any(s.category == "action" for s in iteration_steps):
            done = True  # control goes back outside: the environment acts next
            break

    if not done:
        raise RunawayAgentError(
            f"agent {root.name!r} ran {cap} iterations without producing an action"
        )
    yield AgentEvent(final_tape=append(start_tape, new_steps, author=root.name, registry=registry))
