"""Environment contract: tool execution, failures, idempotent react."""

import json

import pytest

from tapeloop.core import tape_of, tool_calls_step, user_message_step
from tapeloop.environment import (
    Environment,
    calculator,
    environment_from_config,
    make_mock_search,
)
from tapeloop.errors import ToolRegistrationError


def calc_env():
    return Environment().register_tool(
        "calculator", calculator, parameters={"expression": "string"}
    )


def calls(*specs):
    return tool_calls_step(
        [{"id": f"c{i}", "name": name, "arguments": json.dumps(args)} for i, (name, args) in enumerate(specs)]
    )


def test_calculator_basics():
    assert calculator("2+2") == 4
    assert calculator("2 * (3 + 4)") == 14
    assert calculator("7 / 2") == 3.5
    assert calculator("2 ** 10") == 1024
    assert calculator("-5 % 3") == 1
    assert calculator("10 / 5") == 2  # integral floats come back as ints


def test_calculator_rejects_non_arithmetic():
    with pytest.raises(ValueError):
        calculator("__import__('os')")
    with pytest.raises(ValueError):
        calculator("'a' + 'b'")
    with pytest.raises(ValueError):
        calculator("not even an expression ((")


def test_react_executes_tool_calls_in_order():
    tape = tape_of([user_message_step("compute"), calls(("calculator", {"expression": "2+2"}),
                                                        ("calculator", {"expression": "3*3"}))])
    out = calc_env().react(tape)
    assert len(out) == 4
    first, second = out.steps[2], out.steps[3]
    assert first.kind == "tool_result"
    assert first.payload == {"call_id": "c0", "tool_name": "calculator", "result": 4, "text": "4"}
    assert second.payload["result"] == 9
    assert out.metadata.author == "environment"
    # input untouched
    assert len(tape) == 2


def test_unknown_tool_becomes_action_failure():
    tape = tape_of([calls(("abacus", {"expression": "2+2"}))])
    out = calc_env().react(tape)
    assert out.steps[-1].kind == "action_failure"
    assert out.steps[-1].payload["reason"] == "no such tool: abacus"
    assert out.steps[-1].payload["call_id"] == "c0"


def test_tool_exception_becomes_action_failure():
    tape = tape_of([calls(("calculator", {"expression": "1/0"}))])
    out = calc_env().react(tape)
    assert out.steps[-1].kind == "action_failure"
    assert "division by zero" in out.steps[-1].payload["reason"]


def test_bad_arguments_become_action_failure():
    bad_json = tool_calls_step([{"id": "x", "name": "calculator", "arguments": "{oops"}])
    out = calc_env().react(tape_of([bad_json]))
    assert "not valid JSON" in out.steps[-1].payload["reason"]

    not_object = tool_calls_step([{"id": "x", "name": "calculator", "arguments": "[1,2]"}])
    out = calc_env().react(tape_of([not_object]))
    assert "must be a JSON object" in out.steps[-1].payload["reason"]


def test_react_noop_when_nothing_pending():
    env = calc_env()
    no_action = tape_of([user_message_step("hi")])
    assert env.react(no_action) is no_action

    fulfilled = env.react(tape_of([calls(("calculator", {"expression": "2+2"}))]))
    assert env.react(fulfilled) is fulfilled  # idempotent: same object back


def test_react_empty_calls_list():
    out = calc_env().react(tape_of([tool_calls_step([])]))
    assert out.steps[-1].kind == "action_failure"
    assert "no calls" in out.steps[-1].payload["reason"]


def test_scripted_user_replies():
    from tapeloop.core import assistant_message_step

    env = Environment(user_replies=["yes please", "that's all"])
    t1 = env.react(tape_of([assistant_message_step("shall I?")]))
    assert t1.steps[-1].kind == "user_message"
    assert t1.steps[-1].payload["content"] == "yes please"
    t2 = env.react(tape_of([assistant_message_step("more?")]))
    assert t2.steps[-1].payload["content"] == "that's all"
    # script exhausted: nothing to say
    t3 = tape_of([assistant_message_step("hello?")])
    assert env.react(t3) is t3


def test_duplicate_tool_registration():
    env = calc_env()
    with pytest.raises(ToolRegistrationError):
        env.register_tool("calculator", calculator)


def test_mock_search_ranking_and_shape(tmp_path):
    corpus = [
        {"id": "d1", "title": "Coffee brewing", "text": "Grind size matters for espresso."},
        {"id": "d2", "title": "Tea steeping", "text": "Water temperature matters for green tea."},
        {"id": "d3", "title": "Espresso machines", "text": "Espresso espresso espresso."},
    ]
    search = make_mock_search(corpus)
    hits = search("espresso grind")
    assert [h["id"] for h in hits] == ["d1", "d3"]  # d1 matches both words
    assert set(hits[0]) == {"id", "title", "snippet"}
    assert search("quantum chromodynamics") == []

    # file-backed corpus behaves identically
    path = tmp_path / "corpus.jsonl"
    path.write_text("\n".join(json.dumps(d) for d in corpus), encoding="utf-8")
    assert make_mock_search(path)("espresso grind") == hits


def test_environment_from_config(tmp_path):
    corpus = tmp_path / "c.jsonl"
    corpus.write_text(json.dumps({"id": "d", "title": "t", "text": "body"}), encoding="utf-8")
    env = environment_from_config(
        {"tools": ["calculator", "search"], "search_corpus": str(corpus), "user_replies": ["ok"]}
    )
    assert env.tool_names() == ["calculator", "search"]
    specs = env.tool_specs()
    assert specs[0]["name"] == "calculator"
    assert specs[0]["parameters"] == {"expression": "string"}

    with pytest.raises(ToolRegistrationError, match="search_corpus"):
        environment_from_config({"tools": ["search"]})
    with pytest.raises(ToolRegistrationError, match="unknown built-in"):
        environment_from_config({"tools": ["teleporter"]})
