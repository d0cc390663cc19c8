"""Node: one unit of agent behavior.

A node is pure with respect to the tape: it turns the visible tape into a
prompt, and an LLM completion into new steps. All nondeterminism lives in
the provider behind the stream. ``make_llm_output`` is the inverse used
for training-data extraction: given a tape position where this node acted,
rebuild the completion that would regenerate those steps.
"""

from __future__ import annotations

from typing import TYPE_CHECKING, Any, Generator

from pydantic import BaseModel, ConfigDict

from tapeloop.core.steps import PartialStep, Step
from tapeloop.core.tape import Tape
from tapeloop.errors import UnsupportedNodeError
from tapeloop.llm.base import LLMOutput, LLMStream, Prompt

if TYPE_CHECKING:
    from tapeloop.runtime.agent import Agent


class Node(BaseModel):
    """Base node; subclasses override the three hooks below.

    Nodes are pydantic models so an agent tree (agents, nodes, and their
    settings) serializes to a plain config document.
    """

    model_config = ConfigDict(frozen=True)

    name: str = ""

    def make_prompt(self, agent: "Agent", tape: Tape) -> Prompt:
        """Build the LLM request from the visible tape.

        Return a prompt with no messages to skip the LLM this iteration —
        ``generate_steps`` then receives None instead of a stream.
        """
        return Prompt()

    def generate_steps(
        self, agent: "Agent", tape: Tape, llm_stream: LLMStream | None
    ) -> Generator[Step | PartialStep, None, None]:
        """Turn the completion into steps. Yield steps in tape order."""
        raise NotImplementedError(f"node {self.name!r} does not implement generate_steps")

    def make_llm_output(self, agent: "Agent", tape: Tape, index: int) -> LLMOutput:
        """Rebuild the LLM completion whose steps start at ``tape[index]``."""
        raise UnsupportedNodeError(
            f"node {type(self).__name__}({self.name!r}) cannot reconstruct LLM outputs"
        )


class FixedStepsNode(Node):
    """Emits a fixed list of step documents; no LLM involved.

    Handy for tests and for scripted openings (e.g. a root that always
    starts by delegating). Step documents are flat, as in serialized form.
    """

    steps: tuple[dict[str, Any], ...] = ()

    def make_prompt(self, agent: "Agent", tape: Tape) -> Prompt:
        return Prompt()  # no messages: no LLM call

    def generate_steps(
        self, agent: "Agent", tape: Tape, llm_stream: LLMStream | None
    ) -> Generator[Step | PartialStep, None, None]:
        from tapeloop.core.serialize import step_from_document

        for doc in self.steps:
            yield step_from_document(doc, where=f"fixed step of node {self.name!r}")
