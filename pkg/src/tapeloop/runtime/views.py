"""Tape views: what each agent in the hierarchy can see, and who acts next.

The view stack is recomputed from the tape alone. A call step pushes a
view for the callee (whose visible window starts at that call); a respond
step closes the callee's view and surfaces the response to the caller.
The agent whose view sits on top of the stack — the most recently called
agent that has not yet responded — is the active one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence

from tapeloop.core.steps import CALL, RESPOND, SET_NEXT_NODE, Step
from tapeloop.core.tape import Tape, tape_of
from tapeloop.errors import MalformedTapeError, NodeExhaustedError, UnknownAgentError

if TYPE_CHECKING:
    from tapeloop.runtime.agent import Agent


@dataclass
class TapeView:
    """One agent's window onto the tape.

    ``agent`` is the slash-joined path from the root; ``visible`` holds the
    tape indexes this agent may read, in order. A view covers one
    activation: calling the same agent again later opens a fresh view.
    """

    agent: str
    visible: list[int] = field(default_factory=list)


@dataclass
class TapeViewStack:
    views: list[TapeView] = field(default_factory=list)

    @property
    def empty(self) -> bool:
        return not self.views

    @property
    def top(self) -> TapeView:
        if not self.views:
            raise MalformedTapeError("view stack is empty: the root agent already responded")
        return self.views[-1]

    def view_for(self, agent_path: str) -> TapeView | None:
        for view in reversed(self.views):
            if view.agent == agent_path:
                return view
        return None


def compute_view_stack(tape: Tape, root_name: str) -> TapeViewStack:
    """Replay the tape's call/respond structure into a stack of views."""
    stack = TapeViewStack(views=[TapeView(agent=root_name)])
    for i, step in enumerate(tape.steps):
        if stack.empty:
            raise MalformedTapeError(
                f"step {i} appears after the root agent responded; nothing is active"
            )
        if step.kind == CALL:
            stack.top.visible.append(i)  # the caller authored and sees the call
            callee_path = f"{stack.top.agent}/{step.payload['agent_name']}"
            stack.views.append(TapeView(agent=callee_path, visible=[i]))
        elif step.kind == RESPOND:
            stack.top.visible.append(i)  # the response closes the callee's own view
            stack.views.pop()
            if stack.views:
                stack.top.visible.append(i)  # ... and surfaces to the caller
        else:
            stack.top.visible.append(i)
    return stack


def view_tape(tape: Tape, view: TapeView) -> Tape:
    """The visible steps as a standalone tape (ephemeral; never persisted)."""
    return tape_of([tape.steps[i] for i in view.visible])


def select_next_node(view: TapeView, tape: Tape, node_names: Sequence[str]) -> int:
    """Index of the node the view's agent should run next.

    A fresh view starts at node 0. Otherwise look at the agent's latest
    iteration — the trailing run of its own steps sharing one prompt_id and
    node: an explicit set_next_node there wins; absent one, the node after
    the iteration's node runs. Selecting past the last node is an error —
    an agent that wants to stop must say so with an action, not fall off
    the end of its node list.
    """
    own = [i for i in view.visible if tape.steps[i].metadata.agent == view.agent]
    if not own:
        return 0
    last = tape.steps[own[-1]]
    group = []
    for idx in reversed(own):
        step = tape.steps[idx]
        if step.metadata.node == last.metadata.node and step.metadata.prompt_id == last.metadata.prompt_id:
            group.append(step)
        else:
            break
    override = next((s for s in group if s.kind == SET_NEXT_NODE), None)
    if override is not None:
        chosen = override.payload["next_node"]
    else:
        if last.metadata.node not in node_names:
            raise MalformedTapeError(
                f"step by {view.agent!r} references unknown node {last.metadata.node!r}"
            )
        chosen = node_names.index(last.metadata.node) + 1
    if chosen >= len(node_names):
        raise NodeExhaustedError(
            f"agent {view.agent!r} has no node {chosen} to run (has {len(node_names)}); "
            "it finished its node sequence without producing an action or response"
        )
    return chosen


def resolve_lineage(root: "Agent", path: str) -> list["Agent"]:
    """Agents along a view path, root first.

    Paths are syntactic (caller path + '/' + called name), but the called
    agent may live anywhere up the caller's ancestry — a manager calling a
    sibling worker is the normal case — so each segment is resolved against
    the current agent's subagents first, then its ancestors' (lexical
    scoping).
    """
    parts = path.split("/")
    if not parts or parts[0] != root.name:
        raise UnknownAgentError(f"path {path!r} does not start at root agent {root.name!r}")
    lineage = [root]
    for name in parts[1:]:
        found = None
        for ancestor in reversed(lineage):
            found = next((s for s in ancestor.subagents if s.name == name), None)
            if found is not None:
                break
        if found is None:
            raise UnknownAgentError(
                f"no agent named {name!r} reachable from {'/'.join(p.name for p in lineage)!r}"
            )
        lineage.append(found)
    return lineage


def resolve_agent(root: "Agent", path: str) -> "Agent":
    """The agent object a view path refers to."""
    return resolve_lineage(root, path)[-1]
