"""Exception taxonomy shared across the package.

Everything raised on purpose derives from TapeloopError so callers can
catch framework failures without swallowing programming errors.
"""

from __future__ import annotations


class TapeloopError(Exception):
    """Base class for all errors raised by this package."""


# ---------------------------------------------------------------------------
# Step / tape layer


class StepValidationError(TapeloopError):
    """A step payload does not satisfy the schema registered for its kind."""


class DuplicateKindError(TapeloopError):
    """Attempt to register a step kind that already exists."""


class ReservedKindError(TapeloopError):
    """Attempt to register over a built-in step kind."""


class UnknownKindError(TapeloopError):
    """A step kind is not present in the registry (strict parsing only)."""


class MalformedDocumentError(TapeloopError):
    """A serialized tape document cannot be parsed."""


class MalformedTapeError(TapeloopError):
    """The step sequence violates tape structure rules (e.g. an unmatched respond)."""


# ---------------------------------------------------------------------------
# LLM gateway


class LLMError(TapeloopError):
    """Base class for provider failures."""


class TransportError(LLMError):
    """The HTTP provider could not complete a request."""


class ScriptExhaustedError(LLMError):
    """A scripted provider has no response left (or no pattern matched)."""


class ReplayMismatchError(LLMError):
    """A replayed prompt does not match any recorded call.

    ``message_index`` is the index of the first differing message against
    the closest recorded prompt.
    """

    def __init__(self, msg: str, message_index: int | None = None):
        super().__init__(msg)
        self.message_index = message_index


class DuplicateCallError(TapeloopError):
    """A call record with this prompt_id is already stored."""


class CallNotFoundError(TapeloopError):
    """No call record stored under this prompt_id."""


# ---------------------------------------------------------------------------
# Agent runtime


class UnknownAgentError(TapeloopError):
    """A call step names an agent that cannot be resolved in the agent tree."""


class NodeExhaustedError(TapeloopError):
    """Sequential node selection ran past the last node without an action."""


class RunawayAgentError(TapeloopError):
    """The reasoning loop exceeded its iteration cap without emitting an action."""


class MalformedStepSequenceError(TapeloopError):
    """A node yielded steps after a call or respond ended its turn."""


class UnsupportedNodeError(TapeloopError):
    """A node does not implement LLM-output reconstruction."""


class ReconstructionError(TapeloopError):
    """Replaying a reconstructed LLM output did not regenerate the tape steps.

    ``step_index`` points at the first offending step on the source tape.
    """

    def __init__(self, msg: str, step_index: int | None = None):
        super().__init__(msg)
        self.step_index = step_index


# ---------------------------------------------------------------------------
# Environment / orchestration / storage


class ToolRegistrationError(TapeloopError):
    """Duplicate or invalid tool registration."""


class ReplayObservationError(TapeloopError):
    """Recorded observations do not line up with the tape being replayed."""


class StoreError(TapeloopError):
    """Tape store failure: unknown id or corrupt file (path in the message)."""


# ---------------------------------------------------------------------------
# Prebuilt components


class ComponentConfigError(TapeloopError):
    """A prebuilt component is wired wrong (team roster, node hints, field maps)."""


class TemplateError(TapeloopError):
    """A prompt template cannot render (missing input) or parse (missing label)."""


class ConfigError(TapeloopError):
    """An agent or environment config document cannot be interpreted."""
