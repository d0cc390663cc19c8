"""Schema-driven monolithic agents.

A MonoNode builds one comprehensive prompt — system text, the visible
tape, the JSON schemas of the step kinds it may emit, and a closing
guidance message — and parses the completion against those schemas.
Agents made of such nodes are configuration all the way down: no custom
prompt or parsing code per node.
"""

from __future__ import annotations

import json
from typing import Generator, Sequence

from tapeloop.core.registry import StepRegistry, default_registry
from tapeloop.core.steps import (
    SET_NEXT_NODE,
    PartialStep,
    Step,
    parse_failure_step,
    set_next_node_step,
)
from tapeloop.core.tape import Tape
from tapeloop.errors import ComponentConfigError, StepValidationError
from tapeloop.llm.base import LLMOutput, LLMStream, Prompt
from tapeloop.runtime.agent import Agent
from tapeloop.runtime.node import Node


def render_step_text(step: Step) -> str:
    """One step as compact prompt text: the kind, then the payload."""
    payload = {key: step.payload[key] for key in sorted(step.payload)}
    return f"{step.kind}: {json.dumps(payload, ensure_ascii=False, sort_keys=True)}"


def kind_schema(kind: str, registry: StepRegistry | None = None) -> dict:
    """The payload schema of a step kind, as shown to the LLM."""
    spec = (registry or default_registry).spec(kind)
    payload = {}
    for field in spec.fields:
        note = field.type if field.required else f"{field.type} (optional)"
        payload[field.name] = note
    doc = {"kind": spec.kind, "category": spec.category, "payload": payload}
    if spec.description:
        doc["description"] = spec.description
    return doc


def parse_mono_completion(
    text: str,
    allowed_steps: Sequence[str],
    registry: StepRegistry | None = None,
) -> list[Step]:
    """Parse a completion into steps, or into a single parse_failure step.

    The completion must be one JSON step document or an array of them,
    each discriminated by its "kind"; the category comes from the
    registry (an explicit category must agree). At most one of the parsed
    steps may be an action. Any violation yields exactly one
    parse_failure step carrying the raw text — parsing never raises.
    """
    reg = registry or default_registry

    def failure(reason: str) -> list[Step]:
        return [parse_failure_step(raw=text, reason=reason)]

    try:
        data = json.loads(text)
    except (json.JSONDecodeError, TypeError) as exc:
        return failure(f"completion is not valid JSON: {exc}")
    if isinstance(data, dict):
        data = [data]
    if not isinstance(data, list):
        return failure("completion must be a step document or an array of them")
    if not data:
        return failure("completion contains no steps")

    steps: list[Step] = []
    actions = 0
    for position, doc in enumerate(data):
        if not isinstance(doc, dict):
            return failure(f"step {position} is not a document")
        kind = doc.get("kind")
        if not isinstance(kind, str):
            return failure(f"step {position} has no kind")
        if kind not in allowed_steps:
            return failure(f"step kind {kind!r} is not allowed here")
        spec = reg.spec(kind)
        declared = doc.get("category")
        if declared is not None and declared != spec.category:
            return failure(
                f"step {position} declares category {declared!r} but {kind!r} is a {spec.category}"
            )
        if "metadata" in doc:
            return failure(f"step {position} must not carry metadata")
        payload = {k: v for k, v in doc.items() if k not in ("kind", "category")}
        try:
            steps.append(reg.make_step(kind, payload))
        except StepValidationError as exc:
            return failure(f"step {position}: {exc}")
        if spec.category == "action":
            actions += 1
    if actions > 1:
        return failure(f"completion contains {actions} actions; at most one is allowed")
    return steps


class MonoNode(Node):
    """One comprehensive-prompt node.

    The prompt is: the system template; each visible step rendered on its
    own message; the schemas of ``allowed_steps``; and ``guidance`` as the
    final user message. The completion is parsed with
    :func:`parse_mono_completion`. When ``next_node_hint`` names another
    node and the completion carries no control step, a set_next_node step
    pointing at the hinted node is appended automatically.
    """

    system_template: str = ""
    guidance: str = ""
    allowed_steps: tuple[str, ...] = ()
    next_node_hint: str | None = None

    def make_prompt(self, agent: Agent, tape: Tape) -> Prompt:
        schemas = [kind_schema(kind) for kind in self.allowed_steps]
        schema_text = "Respond with a JSON array of step documents. Allowed step kinds:\n" + "\n".join(
            json.dumps(schema, ensure_ascii=False, sort_keys=True) for schema in schemas
        )
        messages = [{"role": "system", "content": self.system_template}]
        messages += [{"role": "user", "content": render_step_text(step)} for step in tape.steps]
        messages.append({"role": "user", "content": schema_text})
        messages.append({"role": "user", "content": self.guidance})
        return Prompt(messages=tuple(messages))

    def generate_steps(
        self, agent: Agent, tape: Tape, llm_stream: LLMStream | None
    ) -> Generator[Step | PartialStep, None, None]:
        text = (llm_stream.output().content or "") if llm_stream is not None else ""
        steps = parse_mono_completion(text, self.allowed_steps)
        parsed_ok = not (len(steps) == 1 and steps[0].kind == "parse_failure")
        if (
            parsed_ok
            and self.next_node_hint is not None
            and not any(step.category == "control" for step in steps)
        ):
            steps.append(set_next_node_step(_node_index(agent, self.next_node_hint)))
        yield from steps

    def make_llm_output(self, agent: Agent, tape: Tape, index: int) -> LLMOutput:
        prompt_id = tape.steps[index].metadata.prompt_id
        group = []
        for step in tape.steps[index:]:
            if step.metadata.prompt_id != prompt_id:
                break
            group.append(step)
        if (
            self.next_node_hint is not None
            and group
            and group[-1].kind == SET_NEXT_NODE
            and group[-1].payload.get("next_node") == _node_index(agent, self.next_node_hint)
        ):
            group = group[:-1]
        docs = [{"kind": step.kind, **step.payload} for step in group]
        return LLMOutput(content=json.dumps(docs, ensure_ascii=False, sort_keys=True))


def _node_index(agent: Agent, node_name: str) -> int:
    for position, node in enumerate(agent.nodes):
        if node.name == node_name:
            return position
    raise ComponentConfigError(
        f"next_node_hint {node_name!r} is not a node of agent {agent.name!r}"
    )


def mono_agent(
    name: str,
    nodes: Sequence[Node],
    llm: dict | None = None,
    subagents: Sequence[Agent] = (),
    max_iterations: int = 16,
) -> Agent:
    """Assemble an agent of MonoNodes, checking node hints resolve."""
    agent = Agent(
        name=name,
        nodes=tuple(nodes),
        subagents=tuple(subagents),
        llm=llm,
        max_iterations=max_iterations,
    )
    names = {node.name for node in agent.nodes}
    for node in agent.nodes:
        if isinstance(node, MonoNode):
            for kind in node.allowed_steps:
                kind_schema(kind)  # raises UnknownKindError for unregistered kinds
            if node.next_node_hint is not None and node.next_node_hint not in names:
                raise ComponentConfigError(
                    f"next_node_hint {node.next_node_hint!r} of node {node.name!r} "
                    f"is not a node of agent {name!r}"
                )
    return agent
