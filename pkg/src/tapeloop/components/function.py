"""Function-style prompt templates with tunable demonstrations.

An LLMFunctionTemplate names labeled input and output fields around an
instruction. Rendering lists recorded demonstrations before the live
inputs as few-shot examples; parsing splits the completion back into the
output fields by their labels. Because demonstrations are plain data on
the template, an optimizer can swap them without touching any code.

Text layout, pinned for parseability: every field is one "Label: value"
line; blocks (instruction, each demonstration, the live request) are
separated by a blank line, a ``---`` rule, and another blank line; the
live block ends with the first output label left open for the LLM.
"""

from __future__ import annotations

from typing import Any, Generator, Mapping, Sequence

from pydantic import BaseModel, ConfigDict, field_validator, model_validator

from tapeloop.core.registry import default_registry
from tapeloop.core.steps import PartialStep, Step, parse_failure_step
from tapeloop.core.tape import Tape
from tapeloop.errors import ComponentConfigError, StepValidationError, TemplateError
from tapeloop.llm.base import LLMOutput, LLMStream, Prompt
from tapeloop.runtime.agent import Agent
from tapeloop.runtime.node import Node

BLOCK_RULE = "\n\n---\n\n"


class FunctionField(BaseModel):
    """One labeled input or output of a template."""

    model_config = ConfigDict(frozen=True)

    name: str
    label: str = ""
    description: str = ""

    @model_validator(mode="before")
    @classmethod
    def _coerce(cls, data: Any) -> Any:
        if isinstance(data, str):
            data = {"name": data}
        if isinstance(data, dict) and not data.get("label") and isinstance(data.get("name"), str):
            data = {**data, "label": data["name"].replace("_", " ").strip().capitalize()}
        return data

    @field_validator("name")
    @classmethod
    def _name_nonempty(cls, value: str) -> str:
        if not value:
            raise ValueError("field name must be non-empty")
        return value


class Demonstration(BaseModel):
    """A recorded input/output binding, shown to the LLM as an example."""

    model_config = ConfigDict(frozen=True)

    bindings: dict[str, str]
    source_tape_id: str = ""
    source_prompt_id: str = ""


class LLMFunctionTemplate(BaseModel):
    """A named prompt function: instruction, fields, demonstrations."""

    model_config = ConfigDict(frozen=True)

    name: str
    instruction: str = ""
    inputs: tuple[FunctionField, ...] = ()
    outputs: tuple[FunctionField, ...]
    demos: tuple[Demonstration, ...] = ()

    @model_validator(mode="after")
    def _check(self) -> "LLMFunctionTemplate":
        if not self.outputs:
            raise ValueError("a template needs at least one output field")
        names = [f.name for f in self.inputs] + [f.name for f in self.outputs]
        if len(set(names)) != len(names):
            raise ValueError("input/output field names must be unique")
        for position, demo in enumerate(self.demos):
            missing = [name for name in names if name not in demo.bindings]
            if missing:
                raise ValueError(
                    f"demonstration {position} is missing bindings: {', '.join(missing)}"
                )
        return self

    @property
    def field_names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.inputs) + tuple(f.name for f in self.outputs)

    def with_demos(self, demos: Sequence[Demonstration]) -> "LLMFunctionTemplate":
        return self.model_copy(update={"demos": tuple(demos)})

    def to_document(self) -> dict[str, Any]:
        return self.model_dump()

    @classmethod
    def from_document(cls, doc: Mapping[str, Any]) -> "LLMFunctionTemplate":
        return cls.model_validate(dict(doc))


def _render_block(
    template: LLMFunctionTemplate, bindings: Mapping[str, str], open_output: bool
) -> str:
    lines = [f"{f.label}: {bindings[f.name]}" for f in template.inputs]
    if open_output:
        lines.append(f"{template.outputs[0].label}:")
    else:
        lines += [f"{f.label}: {bindings[f.name]}" for f in template.outputs]
    return "\n".join(lines)


def fn_render(template: LLMFunctionTemplate, bindings: Mapping[str, str]) -> Prompt:
    """Render the template over live input bindings.

    Demonstrations come before the live block; the live block leaves the
    first output label open for the completion to continue.
    """
    missing = [f.name for f in template.inputs if f.name not in bindings]
    if missing:
        raise TemplateError(f"missing input bindings: {', '.join(missing)}")
    blocks = [template.instruction] if template.instruction else []
    blocks += [_render_block(template, demo.bindings, open_output=False) for demo in template.demos]
    blocks.append(_render_block(template, bindings, open_output=True))
    return Prompt(messages=({"role": "user", "content": BLOCK_RULE.join(blocks)},))


def _walk_labels(
    text: str, fields: Sequence[FunctionField], stop_label: str | None = None
) -> dict[str, str]:
    """Split a block that starts with fields[0]'s label into field values."""
    first = f"{fields[0].label}:"
    if not text.startswith(first):
        raise TemplateError(f"text does not start with the {fields[0].label!r} label")
    work = text[len(first):]
    markers = [(f.name, f"\n{f.label}:") for f in fields[1:]]
    if stop_label is not None:
        markers.append((None, f"\n{stop_label}:"))
    values: dict[str, str] = {}
    cursor = 0
    pending = fields[0].name
    for name, marker in markers:
        position = work.find(marker, cursor)
        if position < 0:
            raise TemplateError(f"missing the {marker[1:-1]!r} label")
        values[pending] = work[cursor:position].strip()
        cursor = position + len(marker)
        pending = name
    if pending is not None:
        values[pending] = work[cursor:].strip()
    return values


def fn_parse(template: LLMFunctionTemplate, completion: str) -> dict[str, str]:
    """Split a completion into the template's output bindings.

    The completion may or may not repeat the first output label (the
    prompt leaves it open); every further output label must appear at the
    start of a line.
    """
    work = completion.strip()
    first = f"{template.outputs[0].label}:"
    if not work.startswith(first):
        work = f"{first} {work}"
    return _walk_labels(work, template.outputs)


def parse_live_inputs(template: LLMFunctionTemplate, prompt_text: str) -> dict[str, str]:
    """Recover the live input bindings from a rendered prompt's text."""
    block = prompt_text.rsplit(BLOCK_RULE, 1)[-1].strip()
    if not template.inputs:
        return {}
    return _walk_labels(block, template.inputs, stop_label=template.outputs[0].label)


class LLMFunctionNode(Node):
    """Runs one template: fills its inputs from the tape, emits its outputs as steps.

    ``input_from`` says where each input value comes from — a selector
    ``{"kind": step kind, "field": payload field, "which": "first"|"last"}``
    over the visible tape (field defaults to "content", which to "last").
    ``output_steps`` maps each output to the step kind (and payload field)
    it becomes, in template order.
    """

    template: LLMFunctionTemplate
    input_from: dict[str, dict[str, str]] = {}
    output_steps: dict[str, Any] = {}

    @model_validator(mode="after")
    def _check_wiring(self) -> "LLMFunctionNode":
        input_names = {f.name for f in self.template.inputs}
        unknown = set(self.input_from) - input_names
        if unknown:
            raise ComponentConfigError(
                f"input_from names unknown inputs: {', '.join(sorted(unknown))}"
            )
        uncovered = input_names - set(self.input_from)
        if uncovered:
            raise ComponentConfigError(
                f"inputs without a selector: {', '.join(sorted(uncovered))}"
            )
        for field in self.template.outputs:
            self._output_mapping(field.name)  # raises if missing or unresolvable
        return self

    def _output_mapping(self, output_name: str) -> tuple[str, str]:
        """The (step kind, payload field) an output value becomes."""
        raw = self.output_steps.get(output_name)
        if raw is None:
            raise ComponentConfigError(f"output {output_name!r} has no step mapping")
        if isinstance(raw, str):
            kind, field = raw, None
        else:
            kind, field = raw.get("kind"), raw.get("field")
        if not isinstance(kind, str):
            raise ComponentConfigError(f"output {output_name!r} mapping needs a step kind")
        spec = default_registry.spec(kind)
        if field is None:
            required = [f.name for f in spec.fields if f.required]
            if len(required) != 1:
                raise ComponentConfigError(
                    f"output {output_name!r} must name a payload field of {kind!r} explicitly"
                )
            field = required[0]
        return kind, field

    def _select(self, tape: Tape, input_name: str) -> str:
        selector = self.input_from[input_name]
        kind = selector.get("kind")
        field = selector.get("field", "content")
        which = selector.get("which", "last")
        matching = [step for step in tape.steps if step.kind == kind]
        if not matching:
            raise TemplateError(
                f"no {kind!r} step on the tape to fill input {input_name!r}"
            )
        step = matching[0] if which == "first" else matching[-1]
        if field not in step.payload:
            raise TemplateError(
                f"step kind {kind!r} has no payload field {field!r} for input {input_name!r}"
            )
        return str(step.payload[field])

    def make_prompt(self, agent: Agent, tape: Tape) -> Prompt:
        bindings = {f.name: self._select(tape, f.name) for f in self.template.inputs}
        return fn_render(self.template, bindings)

    def generate_steps(
        self, agent: Agent, tape: Tape, llm_stream: LLMStream | None
    ) -> Generator[Step | PartialStep, None, None]:
        text = (llm_stream.output().content or "") if llm_stream is not None else ""
        try:
            values = fn_parse(self.template, text)
        except TemplateError as exc:
            yield parse_failure_step(raw=text, reason=str(exc))
            return
        steps = []
        for field in self.template.outputs:
            kind, payload_field = self._output_mapping(field.name)
            try:
                steps.append(default_registry.make_step(kind, {payload_field: values[field.name]}))
            except StepValidationError as exc:
                yield parse_failure_step(raw=text, reason=str(exc))
                return
        yield from steps

    def make_llm_output(self, agent: Agent, tape: Tape, index: int) -> LLMOutput:
        prompt_id = tape.steps[index].metadata.prompt_id
        group = []
        for step in tape.steps[index:]:
            if step.metadata.prompt_id != prompt_id:
                break
            group.append(step)
        outputs = self.template.outputs
        if len(group) != len(outputs):
            raise TemplateError(
                f"expected {len(outputs)} steps for template {self.template.name!r}, "
                f"found {len(group)} at index {index}"
            )
        parts = []
        for position, field in enumerate(outputs):
            _, payload_field = self._output_mapping(field.name)
            value = str(group[position].payload.get(payload_field, ""))
            parts.append(value if position == 0 else f"\n{field.label}: {value}")
        return LLMOutput(content="".join(parts))
