"""Prebuilt agent patterns: mono agents, teams, and function templates.

Everything here is configuration over the same runtime primitives — nodes
that build prompts and parse completions — so agents assembled from these
parts serialize to plain documents and need no custom code.
"""

from tapeloop.components.function import (
    Demonstration,
    FunctionField,
    LLMFunctionNode,
    LLMFunctionTemplate,
    fn_parse,
    fn_render,
    parse_live_inputs,
)
from tapeloop.components.mono import (
    MonoNode,
    kind_schema,
    mono_agent,
    parse_mono_completion,
    render_step_text,
)
from tapeloop.components.team import (
    TeamConcludeNode,
    TeamManagerNode,
    TeamRole,
    TeamStartNode,
    TeamWorkerNode,
    select_speaker,
    team_agent,
)

__all__ = [
    "Demonstration",
    "FunctionField",
    "LLMFunctionNode",
    "LLMFunctionTemplate",
    "MonoNode",
    "TeamConcludeNode",
    "TeamManagerNode",
    "TeamRole",
    "TeamStartNode",
    "TeamWorkerNode",
    "fn_parse",
    "fn_render",
    "kind_schema",
    "mono_agent",
    "parse_live_inputs",
    "parse_mono_completion",
    "render_step_text",
    "select_speaker",
    "team_agent",
]
