"""Environment: the side of the loop that fulfills actions.

Agents ask, environments answer. ``react`` looks at the tape's trailing
action: tool calls are executed (one tool_result per call, in order;
failures become action_failure observations), assistant messages may be
answered by a scripted user, and a tape with nothing to fulfill comes
back as the very same object — react is idempotent by construction.
"""

from __future__ import annotations

import ast
import json
import operator
from pathlib import Path
from typing import Any, Callable, Sequence

from tapeloop.core.serialize import _check_jsonable
from tapeloop.core.steps import (
    ASSISTANT_MESSAGE,
    TOOL_CALLS,
    Step,
    action_failure_step,
    tool_result_step,
    user_message_step,
)
from tapeloop.core.tape import Tape, append, pending_action
from tapeloop.errors import StepValidationError, ToolRegistrationError

ENVIRONMENT_AUTHOR = "environment"


class Environment:
    """A registry of tools plus the react rule that applies them to a tape."""

    def __init__(self, user_replies: Sequence[str] | None = None):
        self._tools: dict[str, Callable[..., Any]] = {}
        self._specs: dict[str, dict[str, Any]] = {}
        self._user_replies = list(user_replies or [])

    # -- tools ---------------------------------------------------------------

    def register_tool(
        self,
        name: str,
        fn: Callable[..., Any],
        description: str = "",
        parameters: dict[str, Any] | None = None,
    ) -> "Environment":
        if name in self._tools:
            raise ToolRegistrationError(f"tool {name!r} is already registered")
        self._tools[name] = fn
        self._specs[name] = {
            "name": name,
            "description": description or (fn.__doc__ or "").strip().split("\n")[0],
            "parameters": parameters or {},
        }
        return self

    def tool_names(self) -> list[str]:
        return sorted(self._tools)

    def tool_specs(self) -> list[dict[str, Any]]:
        """Declarations in prompt-ready form, in registration order."""
        return [dict(self._specs[name]) for name in self._specs]

    # -- reaction ------------------------------------------------------------

    def _pending_action(self, tape: Tape) -> Step | None:
        """The trailing action no observation has answered yet."""
        return pending_action(tape)

    def react(self, tape: Tape) -> Tape:
        """Fulfill the tape's pending action, if any.

        Returns the same tape object untouched when there is nothing to do,
        so callers can detect progress with an identity check.
        """
        action = self._pending_action(tape)
        if action is None:
            return tape
        if action.kind == TOOL_CALLS:
            observations = []
            for call in action.payload.get("calls", []):
                observations.append(self._execute(call))
            if not observations:
                observations.append(
                    action_failure_step(reason="tool_calls action carries no calls")
                )
            return append(tape, observations, author=ENVIRONMENT_AUTHOR)
        if action.kind == ASSISTANT_MESSAGE and self._user_replies:
            reply = self._user_replies.pop(0)
            return append(tape, [user_message_step(reply)], author=ENVIRONMENT_AUTHOR)
        return tape  # an action addressed to the outside world; nothing to run

    def _execute(self, call: dict[str, Any]) -> Step:
        call_id = str(call.get("id", ""))
        name = call.get("name", "")
        fn = self._tools.get(name)
        if fn is None:
            return action_failure_step(reason=f"no such tool: {name}", call_id=call_id)
        raw_args = call.get("arguments") or "{}"
        try:
            args = json.loads(raw_args) if isinstance(raw_args, str) else raw_args
        except json.JSONDecodeError as exc:
            return action_failure_step(
                reason=f"tool {name}: arguments are not valid JSON ({exc})", call_id=call_id
            )
        if not isinstance(args, dict):
            return action_failure_step(
                reason=f"tool {name}: arguments must be a JSON object", call_id=call_id
            )
        try:
            result = fn(**args)
        except Exception as exc:  # noqa: BLE001 - a tool may raise anything
            return action_failure_step(reason=f"tool {name} failed: {exc}", call_id=call_id)
        try:
            _check_jsonable(result, f"result of tool {name}")
        except StepValidationError as exc:
            return action_failure_step(reason=str(exc), call_id=call_id)
        text = result if isinstance(result, str) else json.dumps(result, ensure_ascii=False, sort_keys=True)
        return tool_result_step(call_id=call_id, tool_name=name, result=result, text=text)


# ---------------------------------------------------------------------------
# Built-in tools


_BIN_OPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.FloorDiv: operator.floordiv,
    ast.Mod: operator.mod,
    ast.Pow: operator.pow,
}
_UNARY_OPS = {ast.UAdd: operator.pos, ast.USub: operator.neg}


def _eval_node(node: ast.AST) -> int | float:
    if isinstance(node, ast.Expression):
        return _eval_node(node.body)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        return node.value
    if isinstance(node, ast.BinOp) and type(node.op) in _BIN_OPS:
        return _BIN_OPS[type(node.op)](_eval_node(node.left), _eval_node(node.right))
    if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY_OPS:
        return _UNARY_OPS[type(node.op)](_eval_node(node.operand))
    raise ValueError(f"unsupported expression element: {ast.dump(node)[:60]}")


def calculator(expression: str) -> int | float:
    """Evaluate an arithmetic expression (numbers and + - * / // % ** only)."""
    try:
        tree = ast.parse(expression, mode="eval")
    except SyntaxError as exc:
        raise ValueError(f"cannot parse expression: {exc.msg}") from exc
    result = _eval_node(tree)
    if isinstance(result, float) and result.is_integer() and abs(result) < 1e15:
        return int(result)
    return result


def make_mock_search(corpus: Sequence[dict[str, Any]] | str | Path) -> Callable[..., list[dict[str, Any]]]:
    """Build a search tool over a fixed corpus.

    ``corpus`` is a list of {id, title, text} documents, or a path to a
    file with one such JSON document per line. Ranking is plain word
    overlap, ties broken by corpus order — boring and deterministic.
    """
    if isinstance(corpus, (str, Path)):
        docs = []
        for line in Path(corpus).read_text(encoding="utf-8").split("\n"):
            if line.strip():
                docs.append(json.loads(line))
    else:
        docs = list(corpus)

    def mock_search(query: str, max_results: int = 3) -> list[dict[str, Any]]:
        """Search the corpus; returns [{id, title, snippet}] best-first."""
        words = {w for w in query.lower().split() if w}
        scored = []
        for pos, doc in enumerate(docs):
            haystack = f"{doc.get('title', '')} {doc.get('text', '')}".lower()
            score = sum(1 for w in words if w in haystack)
            if score > 0:
                scored.append((-score, pos, doc))
        scored.sort()
        return [
            {"id": d.get("id", ""), "title": d.get("title", ""), "snippet": (d.get("text") or "")[:200]}
            for _, _, d in scored[:max_results]
        ]

    return mock_search


def environment_from_config(doc: dict[str, Any]) -> Environment:
    """Build an environment from a config document.

    Recognized keys: ``tools`` (names among the built-ins: "calculator",
    "search"), ``search_corpus`` (path or inline list, required for
    "search"), ``user_replies`` (scripted replies to assistant messages).
    """
    env = Environment(user_replies=doc.get("user_replies"))
    for name in doc.get("tools", []):
        if name == "calculator":
            env.register_tool(
                "calculator",
                calculator,
                description="evaluate an arithmetic expression",
                parameters={"expression": "string"},
            )
        elif name == "search":
            corpus = doc.get("search_corpus")
            if corpus is None:
                raise ToolRegistrationError("search tool needs a 'search_corpus' in the environment config")
            env.register_tool(
                "search",
                make_mock_search(corpus),
                description="search a fixed document corpus",
                parameters={"query": "string", "max_results": "integer"},
            )
        else:
            raise ToolRegistrationError(f"unknown built-in tool {name!r} in environment config")
    return env
