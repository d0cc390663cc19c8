"""Agent and environment configuration documents.

An agent config is a plain document — YAML or JSON on disk — with the
keys ``name``, ``llms``, ``templates``, ``nodes``, ``subagents``. Each
node entry carries a ``type`` tag naming one of the registered node
components plus that component's own parameters. Function nodes
reference the document's ``templates`` table by name, so demonstrations
attached by tuning persist as part of the agent and round-trip through
``agent_to_config`` / ``agent_from_config``.

The ``llms`` key maps LLM names to provider config documents; an agent
uses the one named ``default``. Subagent documents nest the same shape.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Mapping

import yaml

from tapeloop.components.function import LLMFunctionNode, LLMFunctionTemplate
from tapeloop.components.mono import MonoNode
from tapeloop.components.team import (
    TeamConcludeNode,
    TeamManagerNode,
    TeamStartNode,
    TeamWorkerNode,
)
from tapeloop.environment import Environment, environment_from_config
from tapeloop.errors import ConfigError
from tapeloop.runtime.agent import DEFAULT_ITERATION_CAP, Agent
from tapeloop.runtime.node import FixedStepsNode, Node

# Node component types addressable from config documents. Each maps a
# type tag to the node class; parameters are the class's own fields.
NODE_TYPES: dict[str, type[Node]] = {
    "fixed_steps": FixedStepsNode,
    "mono": MonoNode,
    "function": LLMFunctionNode,
    "team_start": TeamStartNode,
    "team_manager": TeamManagerNode,
    "team_worker": TeamWorkerNode,
    "team_conclude": TeamConcludeNode,
}


def register_node_type(type_tag: str, node_class: type[Node]) -> None:
    """Make a custom node class addressable from config documents."""
    if type_tag in NODE_TYPES and NODE_TYPES[type_tag] is not node_class:
        raise ConfigError(f"node type {type_tag!r} is already registered")
    NODE_TYPES[type_tag] = node_class


def _type_tag(node: Node) -> str:
    for tag, cls in NODE_TYPES.items():
        if type(node) is cls:
            return tag
    raise ConfigError(
        f"node {node.name!r} ({type(node).__name__}) has no registered config type"
    )


def node_to_config(node: Node) -> dict[str, Any]:
    tag = _type_tag(node)
    params = node.model_dump(mode="json")
    if isinstance(node, LLMFunctionNode):
        params["template"] = node.template.name  # by reference into `templates`
    return {"type": tag, **params}


def node_from_config(
    doc: Mapping[str, Any], templates: Mapping[str, LLMFunctionTemplate]
) -> Node:
    if not isinstance(doc, Mapping) or "type" not in doc:
        raise ConfigError(f"node entry must be a document with a 'type' tag, got {doc!r}")
    tag = doc["type"]
    cls = NODE_TYPES.get(tag)
    if cls is None:
        known = ", ".join(sorted(NODE_TYPES))
        raise ConfigError(f"unknown node type {tag!r} (known: {known})")
    params = {k: v for k, v in doc.items() if k != "type"}
    if cls is LLMFunctionNode:
        ref = params.get("template")
        if ref not in templates:
            raise ConfigError(f"node {params.get('name')!r} references unknown template {ref!r}")
        params["template"] = templates[ref]
    try:
        return cls(**params)
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(f"bad parameters for node type {tag!r}: {exc}") from exc


def agent_to_config(agent: Agent) -> dict[str, Any]:
    """The agent as a plain config document (full round trip, demos included)."""
    templates = {
        node.template.name: node.template.to_document()
        for node in agent.nodes
        if isinstance(node, LLMFunctionNode)
    }
    doc: dict[str, Any] = {
        "name": agent.name,
        "llms": {"default": agent.llm} if agent.llm is not None else {},
        "templates": templates,
        "nodes": [node_to_config(n) for n in agent.nodes],
        "subagents": [agent_to_config(s) for s in agent.subagents],
    }
    if agent.max_iterations != DEFAULT_ITERATION_CAP:
        doc["max_iterations"] = agent.max_iterations
    return doc


def agent_from_config(doc: Mapping[str, Any]) -> Agent:
    """Build an agent from a config document."""
    if not isinstance(doc, Mapping):
        raise ConfigError(f"agent config must be a document, got {type(doc).__name__}")
    if not doc.get("name"):
        raise ConfigError("agent config needs a non-empty 'name'")
    unknown = set(doc) - {"name", "llms", "templates", "nodes", "subagents", "max_iterations"}
    if unknown:
        raise ConfigError(f"unknown agent config keys: {', '.join(sorted(unknown))}")
    try:
        templates = {
            name: LLMFunctionTemplate.from_document(t)
            for name, t in (doc.get("templates") or {}).items()
        }
    except Exception as exc:
        raise ConfigError(f"bad template document: {exc}") from exc
    llms = doc.get("llms") or {}
    if not isinstance(llms, Mapping):
        raise ConfigError("'llms' must map names to provider configs")
    kwargs: dict[str, Any] = {
        "name": doc["name"],
        "nodes": tuple(node_from_config(n, templates) for n in doc.get("nodes") or []),
        "subagents": tuple(agent_from_config(s) for s in doc.get("subagents") or []),
        "llm": llms.get("default"),
    }
    if "max_iterations" in doc:
        kwargs["max_iterations"] = doc["max_iterations"]
    try:
        return Agent(**kwargs)
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(f"bad agent config for {doc.get('name')!r}: {exc}") from exc


# ---------------------------------------------------------------------------
# Files


def load_document(path: str | Path) -> Any:
    """Parse a YAML or JSON config file (YAML accepts both syntaxes)."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text(encoding="utf-8")
    try:
        if path.suffix.lower() in (".yaml", ".yml"):
            return yaml.safe_load(text)
        return json.loads(text)
    except Exception as exc:
        raise ConfigError(f"cannot parse config file {path}: {exc}") from exc


def save_document(doc: Any, path: str | Path) -> None:
    """Write a config document — YAML for .yaml/.yml paths, JSON otherwise."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.suffix.lower() in (".yaml", ".yml"):
        text = yaml.safe_dump(doc, sort_keys=True, allow_unicode=True)
    else:
        text = json.dumps(doc, indent=2, ensure_ascii=False, sort_keys=True) + "\n"
    path.write_text(text, encoding="utf-8")


def load_agent(path: str | Path) -> Agent:
    return agent_from_config(load_document(path))


def save_agent(agent: Agent, path: str | Path) -> None:
    save_document(agent_to_config(agent), path)


def load_environment(path: str | Path) -> Environment:
    doc = load_document(path)
    if not isinstance(doc, Mapping):
        raise ConfigError(f"environment config must be a document, got {type(doc).__name__}")
    try:
        return environment_from_config(dict(doc))
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(f"bad environment config {path}: {exc}") from exc
