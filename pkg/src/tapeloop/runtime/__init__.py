"""Agent runtime: nodes, agent trees, tape views, the reasoning loop."""

from tapeloop.runtime.agent import Agent, AgentEvent, AgentStream, run
from tapeloop.runtime.node import FixedStepsNode, Node
from tapeloop.runtime.training import TrainingText, make_training_text
from tapeloop.runtime.views import (
    TapeView,
    TapeViewStack,
    compute_view_stack,
    resolve_agent,
    select_next_node,
    view_tape,
)

__all__ = [
    "Agent",
    "AgentEvent",
    "AgentStream",
    "FixedStepsNode",
    "Node",
    "TapeView",
    "TapeViewStack",
    "TrainingText",
    "compute_view_stack",
    "make_training_text",
    "resolve_agent",
    "run",
    "select_next_node",
    "view_tape",
]
