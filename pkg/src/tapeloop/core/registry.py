"""Step kind registry: per-kind payload schemas and validation.

The registry is assembled at startup and treated as read-only afterwards.
Each kind fixes a category and a flat payload schema; validation rejects
unknown payload fields so typos fail fast instead of silently riding along
on a tape.
"""

from __future__ import annotations

from typing import Any, Iterable, Literal, Mapping, Sequence

from pydantic import BaseModel, ConfigDict, Field

from tapeloop.core.steps import (
    ACTION_FAILURE,
    ASSISTANT_MESSAGE,
    BUILTIN_KINDS,
    CALL,
    CATEGORIES,
    PARSE_FAILURE,
    RESERVED_PAYLOAD_KEYS,
    RESPOND,
    SET_NEXT_NODE,
    TOOL_CALLS,
    TOOL_RESULT,
    USER_MESSAGE,
    Category,
    Step,
    StepMetadata,
)
from tapeloop.errors import (
    DuplicateKindError,
    ReservedKindError,
    StepValidationError,
    UnknownKindError,
)

FieldType = Literal["string", "integer", "number", "boolean", "object", "array", "any"]

_TYPE_CHECKS = {
    "string": lambda v: isinstance(v, str),
    # bool is an int subclass; a boolean is never an acceptable integer here
    "integer": lambda v: isinstance(v, int) and not isinstance(v, bool),
    "number": lambda v: isinstance(v, (int, float)) and not isinstance(v, bool),
    "boolean": lambda v: isinstance(v, bool),
    "object": lambda v: isinstance(v, dict),
    "array": lambda v: isinstance(v, list),
    "any": lambda v: True,
}


class PayloadField(BaseModel):
    """Schema of one payload field."""

    model_config = ConfigDict(frozen=True)

    name: str
    type: FieldType = "any"
    required: bool = True
    minimum: int | None = None  # only meaningful for integer/number fields
    description: str = ""


class StepKindSpec(BaseModel):
    """Registered description of a step kind: fixed category plus payload schema."""

    model_config = ConfigDict(frozen=True)

    kind: str
    category: Category
    fields: tuple[PayloadField, ...] = ()
    description: str = ""

    def field_names(self) -> set[str]:
        return {f.name for f in self.fields}


def _coerce_fields(schema: Any) -> tuple[PayloadField, ...]:
    """Accept several schema spellings and normalize to PayloadField tuples.

    Supported inputs: a sequence of PayloadField/dicts, or a mapping of
    field name to either a type string or an option dict.
    """
    if isinstance(schema, Mapping):
        fields = []
        for name, spec in schema.items():
            if isinstance(spec, str):
                fields.append(PayloadField(name=name, type=spec))
            elif isinstance(spec, Mapping):
                fields.append(PayloadField(name=name, **spec))
            else:
                raise StepValidationError(f"cannot interpret schema entry for field {name!r}")
        return tuple(fields)
    if isinstance(schema, Sequence):
        out = []
        for item in schema:
            if isinstance(item, PayloadField):
                out.append(item)
            elif isinstance(item, Mapping):
                out.append(PayloadField(**item))
            else:
                raise StepValidationError(f"cannot interpret schema entry {item!r}")
        return tuple(out)
    raise StepValidationError(f"cannot interpret payload schema {schema!r}")


class StepRegistry:
    """Maps step kinds to their specs and validates payloads against them."""

    def __init__(self, specs: Iterable[StepKindSpec] = ()):
        self._specs: dict[str, StepKindSpec] = {}
        for spec in specs:
            self._register_spec(spec)

    # -- registration ------------------------------------------------------

    def _register_spec(self, spec: StepKindSpec) -> None:
        if spec.kind in self._specs:
            raise DuplicateKindError(f"step kind {spec.kind!r} is already registered")
        bad = RESERVED_PAYLOAD_KEYS & spec.field_names()
        if bad:
            raise StepValidationError(
                f"step kind {spec.kind!r} uses reserved payload field(s): {sorted(bad)}"
            )
        self._specs[spec.kind] = spec

    def register(
        self,
        kind: str,
        category: Category,
        schema: Any = (),
        description: str = "",
    ) -> "StepRegistry":
        """Register a new kind; returns the registry for chaining."""
        if kind in BUILTIN_KINDS:
            raise ReservedKindError(f"step kind {kind!r} is built in and cannot be redefined")
        if category not in CATEGORIES:
            raise StepValidationError(f"unknown category {category!r} for kind {kind!r}")
        self._register_spec(
            StepKindSpec(kind=kind, category=category, fields=_coerce_fields(schema), description=description)
        )
        return self

    def copy(self) -> "StepRegistry":
        return StepRegistry(self._specs.values())

    # -- lookup ------------------------------------------------------------

    def __contains__(self, kind: str) -> bool:
        return kind in self._specs

    def kinds(self) -> list[str]:
        return sorted(self._specs)

    def spec(self, kind: str) -> StepKindSpec:
        try:
            return self._specs[kind]
        except KeyError:
            raise UnknownKindError(f"step kind {kind!r} is not registered") from None

    def category_of(self, kind: str) -> Category:
        return self.spec(kind).category

    # -- validation --------------------------------------------------------

    def validate_payload(self, kind: str, payload: Mapping[str, Any]) -> None:
        spec = self.spec(kind)
        known = spec.field_names()
        unknown = set(payload) - known
        if unknown:
            raise StepValidationError(f"{kind}: unknown payload field(s) {sorted(unknown)}")
        for f in spec.fields:
            if f.name not in payload:
                if f.required:
                    raise StepValidationError(f"{kind}: missing required payload field {f.name!r}")
                continue
            value = payload[f.name]
            if value is None and not f.required:
                continue  # optional fields may be explicitly null
            if not _TYPE_CHECKS[f.type](value):
                raise StepValidationError(
                    f"{kind}: payload field {f.name!r} expects {f.type}, got {type(value).__name__}"
                )
            if f.minimum is not None and isinstance(value, (int, float)) and value < f.minimum:
                raise StepValidationError(f"{kind}: payload field {f.name!r} must be >= {f.minimum}")

    def validate_step(self, step: Step) -> None:
        """Check kind is known, category matches its StepSpec, payload conforms."""
        spec = self.spec(step.kind)
        if step.category != spec.category:
            raise StepValidationError(
                f"step kind {step.kind!r} is registered as {spec.category}, got {step.category}"
            )
        self.validate_payload(step.kind, step.payload)

    def make_step(
        self,
        kind: str,
        payload: Mapping[str, Any] | None = None,
        metadata: StepMetadata | None = None,
    ) -> Step:
        """Construct a validated step of a registered kind."""
        spec = self.spec(kind)
        payload = dict(payload or {})
        self.validate_payload(kind, payload)
        return Step(kind=kind, category=spec.category, payload=payload, metadata=metadata or StepMetadata())


def _builtin_specs() -> list[StepKindSpec]:
    def f(name: str, type_: FieldType = "string", required: bool = True, minimum: int | None = None) -> PayloadField:
        return PayloadField(name=name, type=type_, required=required, minimum=minimum)

    return [
        StepKindSpec(
            kind=CALL,
            category="thought",
            fields=(f("agent_name"), f("content")),
            description="activate another agent with a task",
        ),
        StepKindSpec(
            kind=RESPOND,
            category="thought",
            fields=(f("content"),),
            description="finish the active agent's work and answer its caller",
        ),
        StepKindSpec(
            kind=SET_NEXT_NODE,
            category="control",
            fields=(f("next_node", "integer", minimum=0),),
            description="override sequential node selection on the next iteration",
        ),
        StepKindSpec(
            kind=USER_MESSAGE,
            category="observation",
            fields=(f("content"),),
            description="message from the outside user",
        ),
        StepKindSpec(
            kind=ASSISTANT_MESSAGE,
            category="action",
            fields=(f("content"),),
            description="message addressed to the outside user",
        ),
        StepKindSpec(
            kind=TOOL_CALLS,
            category="action",
            fields=(f("calls", "array"),),
            description="request one or more tool executions",
        ),
        StepKindSpec(
            kind=TOOL_RESULT,
            category="observation",
            fields=(f("call_id"), f("tool_name"), f("result", "any"), f("text")),
            description="result of one tool execution",
        ),
        StepKindSpec(
            kind=ACTION_FAILURE,
            category="observation",
            fields=(f("reason"), f("call_id", required=False)),
            description="an action could not be fulfilled",
        ),
        StepKindSpec(
            kind=PARSE_FAILURE,
            category="observation",
            fields=(f("raw"), f("reason", required=False)),
            description="an LLM completion could not be parsed into steps",
        ),
    ]


def builtin_registry() -> StepRegistry:
    """A fresh registry holding exactly the built-in kinds."""
    return StepRegistry(_builtin_specs())


# Shared default used when an operation is not handed an explicit registry.
# Custom kinds registered here are visible process-wide; build a private
# registry via builtin_registry() when isolation matters (tests do).
default_registry = builtin_registry()


def register_step_kind(
    registry: StepRegistry,
    kind: str,
    category: Category,
    schema: Any = (),
    description: str = "",
) -> StepRegistry:
    """Functional spelling of StepRegistry.register."""
    return registry.register(kind, category, schema, description)
