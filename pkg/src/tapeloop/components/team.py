"""Initiator/manager/worker teams collaborating on one tape.

The initiator opens the session by delegating the user's task to the
manager; the manager repeatedly picks the next team member to speak and
delegates to it; workers contribute and respond; when the manager decides
the task is done it responds to the initiator, which turns the result
into the session's answer. Every hand-off is an ordinary call/respond
pair, so the whole discussion is one tape.
"""

from __future__ import annotations

from typing import Generator, Literal, Mapping

from pydantic import BaseModel, ConfigDict

from tapeloop.core.steps import (
    CALL,
    RESPOND,
    USER_MESSAGE,
    PartialStep,
    Step,
    assistant_message_step,
    call_step,
    respond_step,
    set_next_node_step,
)
from tapeloop.core.tape import Tape
from tapeloop.errors import ComponentConfigError, MalformedStepSequenceError
from tapeloop.llm.base import LLMStream, Prompt
from tapeloop.runtime.agent import Agent
from tapeloop.runtime.node import Node

from tapeloop.components.mono import render_step_text

DEFAULT_TERMINATE = "TERMINATE"


class TeamRole(BaseModel):
    """One member's place in the team.

    ``team`` is meaningful only for the manager: the speaking roster, in
    round-robin order. An empty roster defaults to every worker in
    declaration order.
    """

    model_config = ConfigDict(frozen=True)

    role: Literal["initiator", "manager", "worker"]
    system_prompt: str = ""
    team: tuple[str, ...] = ()


def select_speaker(text: str, team: tuple[str, ...], last_speaker: str | None = None) -> str:
    """Resolve the manager's choice of the next speaker.

    Exact name match wins; then case-insensitive containment in roster
    order; otherwise round-robin after the last speaker.
    """
    if not team:
        raise ComponentConfigError("cannot select a speaker from an empty team")
    stripped = text.strip()
    for member in team:
        if stripped == member:
            return member
    lowered = text.lower()
    for member in team:
        if member.lower() in lowered:
            return member
    if last_speaker in team:
        return team[(team.index(last_speaker) + 1) % len(team)]
    return team[0]


class TeamManagerNode(Node):
    """Chooses the next speaker, or responds when the task is complete.

    The completion is read as a speaker choice unless it contains the
    terminate token, in which case the remaining text is the final
    result handed back to the initiator.
    """

    system_prompt: str = ""
    team: tuple[str, ...] = ()
    terminate: str = DEFAULT_TERMINATE

    def make_prompt(self, agent: Agent, tape: Tape) -> Prompt:
        roster = ", ".join(self.team)
        messages = [{"role": "system", "content": self.system_prompt}]
        messages += [{"role": "user", "content": render_step_text(step)} for step in tape.steps]
        messages.append(
            {
                "role": "user",
                "content": (
                    f"Name the next team member to speak ({roster}), and tell them what to do. "
                    f"Say {self.terminate} followed by the final result when the task is complete."
                ),
            }
        )
        return Prompt(messages=tuple(messages))

    def generate_steps(
        self, agent: Agent, tape: Tape, llm_stream: LLMStream | None
    ) -> Generator[Step | PartialStep, None, None]:
        text = (llm_stream.output().content or "").strip() if llm_stream is not None else ""
        if self.terminate in text:
            result = text.replace(self.terminate, "", 1).strip(" :\n")
            yield respond_step(content=result)
            return
        member = select_speaker(text, self.team, last_speaker=self._last_speaker(tape))
        yield set_next_node_step(0)
        yield call_step(member, content=text)

    def _last_speaker(self, tape: Tape) -> str | None:
        for step in reversed(tape.steps):
            if step.kind == CALL and step.payload.get("agent_name") in self.team:
                return step.payload["agent_name"]
        return None


class TeamWorkerNode(Node):
    """Contributes once per activation and hands control back."""

    system_prompt: str = ""

    def make_prompt(self, agent: Agent, tape: Tape) -> Prompt:
        messages = [{"role": "system", "content": self.system_prompt}]
        messages += [{"role": "user", "content": render_step_text(step)} for step in tape.steps]
        return Prompt(messages=tuple(messages))

    def generate_steps(
        self, agent: Agent, tape: Tape, llm_stream: LLMStream | None
    ) -> Generator[Step | PartialStep, None, None]:
        text = (llm_stream.output().content or "") if llm_stream is not None else ""
        yield respond_step(content=text)


class TeamStartNode(Node):
    """Opens the team session: delegates the user's task to the manager."""

    manager: str = ""

    def generate_steps(
        self, agent: Agent, tape: Tape, llm_stream: LLMStream | None
    ) -> Generator[Step | PartialStep, None, None]:
        task = None
        for step in reversed(tape.steps):
            if step.kind == USER_MESSAGE:
                task = step.payload.get("content", "")
                break
        if task is None:
            raise MalformedStepSequenceError(
                "a team session must start from a tape with a user_message"
            )
        yield call_step(self.manager, content=task)


class TeamConcludeNode(Node):
    """Turns the manager's final response into the session's answer."""

    def generate_steps(
        self, agent: Agent, tape: Tape, llm_stream: LLMStream | None
    ) -> Generator[Step | PartialStep, None, None]:
        for step in reversed(tape.steps):
            if step.kind == RESPOND:
                yield assistant_message_step(step.payload.get("content", ""))
                return
        raise MalformedStepSequenceError("no team response to conclude from")


def team_agent(
    roles: Mapping[str, TeamRole | Mapping],
    llm: dict | None = None,
    max_iterations: int = 16,
    terminate: str = DEFAULT_TERMINATE,
) -> Agent:
    """Assemble a team from named roles.

    Exactly one initiator (it becomes the root agent) and exactly one
    manager are required, plus at least one worker. The manager's roster
    must name workers only; an empty roster means all workers in
    declaration order. Workers are the manager's siblings, so its calls
    resolve through the ordinary agent-path rules.
    """
    coerced: dict[str, TeamRole] = {
        name: role if isinstance(role, TeamRole) else TeamRole.model_validate(role)
        for name, role in roles.items()
    }
    initiators = [name for name, role in coerced.items() if role.role == "initiator"]
    managers = [name for name, role in coerced.items() if role.role == "manager"]
    workers = [name for name, role in coerced.items() if role.role == "worker"]
    if len(initiators) != 1:
        raise ComponentConfigError(f"a team needs exactly one initiator, got {len(initiators)}")
    if len(managers) != 1:
        raise ComponentConfigError(f"a team needs exactly one manager, got {len(managers)}")
    if not workers:
        raise ComponentConfigError("a team needs at least one worker")

    manager_name = managers[0]
    roster = coerced[manager_name].team or tuple(workers)
    unknown = [name for name in roster if name not in workers]
    if unknown:
        raise ComponentConfigError(
            f"manager roster names non-workers: {', '.join(sorted(unknown))}"
        )

    subagents = [
        Agent(
            name=manager_name,
            nodes=(
                TeamManagerNode(
                    name="select",
                    system_prompt=coerced[manager_name].system_prompt,
                    team=roster,
                    terminate=terminate,
                ),
            ),
        )
    ]
    subagents += [
        Agent(
            name=worker,
            nodes=(TeamWorkerNode(name="speak", system_prompt=coerced[worker].system_prompt),),
        )
        for worker in workers
    ]
    return Agent(
        name=initiators[0],
        nodes=(
            TeamStartNode(name="start", manager=manager_name),
            TeamConcludeNode(name="conclude"),
        ),
        subagents=tuple(subagents),
        llm=llm,
        max_iterations=max_iterations,
    )
