"""The reasoning loop: stamping, stopping, delegation, failure handling."""

import json

import pytest

from tapeloop.core import (
    CALL,
    PARSE_FAILURE,
    append,
    content_equal,
    parse_failure_step,
    tape_of,
    user_message_step,
)
from tapeloop.errors import (
    MalformedStepSequenceError,
    NodeExhaustedError,
    RunawayAgentError,
)
from tapeloop.llm import CallDatabase, ProviderPool
from tapeloop.runtime import Agent, run
from tapeloop.runtime.node import FixedStepsNode

from .toys import JsonStepsNode, StreamingEchoNode, completion


@pytest.fixture
def pool(tmp_path):
    return ProviderPool(db=CallDatabase(tmp_path / "calls.sqlite"))


def mono(name, script, nodes=None, subagents=(), max_iterations=16):
    return Agent(
        name=name,
        nodes=nodes or (JsonStepsNode(name="main"),),
        subagents=tuple(subagents),
        llm={"provider": "mock", "script": script},
        max_iterations=max_iterations,
    )


def start():
    return tape_of([user_message_step("what is the answer?")])


ANSWER = {"kind": "assistant_message", "category": "action", "content": "42"}
STAY = {"kind": "set_next_node", "category": "control", "next_node": 0}


def call_doc(agent_name, content=""):
    return {"kind": "call", "category": "thought", "agent_name": agent_name, "content": content}


def respond_doc(content):
    return {"kind": "respond", "category": "thought", "content": content}


def test_thoughts_continue_actions_stop(pool):
    agent = Agent(
        name="root",
        nodes=(JsonStepsNode(name="plan"), JsonStepsNode(name="act")),
        llm={
            "provider": "mock",
            "script": [
                completion({"kind": "set_next_node", "category": "control", "next_node": 1}),
                completion(ANSWER),
            ],
        },
    )
    final = run(agent, start(), pool).get_final_tape()
    assert [s.kind for s in final.steps] == ["user_message", "set_next_node", "assistant_message"]
    assert final.steps[1].metadata.node == "plan"
    assert final.steps[2].metadata.node == "act"
    assert final.steps[2].payload["content"] == "42"


def test_stamping_and_single_append(pool):
    agent = mono("root", [completion(ANSWER)])
    tape = start()
    stream = run(agent, tape, pool)
    events = list(stream)
    final = stream.get_final_tape()

    step_events = [e for e in events if e.step is not None]
    assert len(step_events) == 1
    stamped = step_events[0].step
    assert stamped.metadata.agent == "root"
    assert stamped.metadata.node == "main"
    assert stamped.metadata.prompt_id  # an LLM was consulted
    assert pool.db.get(stamped.metadata.prompt_id).output["content"] == completion(ANSWER)

    assert final.metadata.author == "root"
    assert final.metadata.n_added == 1
    assert final.metadata.parent_id is None
    assert len(tape) == 1  # input untouched
    assert events[-1].final_tape is final


def test_null_prompt_node_skips_llm(pool):
    agent = Agent(
        name="root",
        nodes=(
            FixedStepsNode(
                name="fixed",
                steps=({"kind": "assistant_message", "category": "action", "content": "canned"},),
            ),
        ),
    )
    final = run(agent, start(), pool).get_final_tape()
    assert final.steps[1].payload["content"] == "canned"
    assert final.steps[1].metadata.prompt_id is None
    assert pool.db.count() == 0


def test_partial_steps_stream_through(pool):
    agent = Agent(
        name="root",
        nodes=(StreamingEchoNode(name="echo"),),
        llm={"provider": "mock", "script": ["streamed answer"], "chunk_size": 4},
    )
    stream = run(agent, start(), pool)
    events = list(stream)
    partials = [e.partial_step for e in events if e.partial_step is not None]
    assert len(partials) == 4  # ceil(15 / 4)
    assert partials[0].step.payload["content"] == "stre"
    assert partials[-1].step.payload["content"] == "streamed answer"
    final = stream.get_final_tape()
    assert final.steps[-1].payload["content"] == "streamed answer"
    # partial steps never land on the tape
    assert len(final.steps) == 2


def delegation_script():
    # the caller pins its own next node before handing off, so control
    # returns to the same node once the helper responds
    return [
        completion(STAY, call_doc("helper", "dig")),
        completion(respond_doc("nugget")),
        completion(ANSWER),
    ]


def test_delegation_roundtrip_with_inherited_provider(pool):
    worker = Agent(name="helper", nodes=(JsonStepsNode(name="answer"),))  # no llm: inherits
    agent = mono("root", delegation_script(), subagents=[worker])
    final = run(agent, start(), pool).get_final_tape()
    kinds = [s.kind for s in final.steps]
    assert kinds == ["user_message", "set_next_node", "call", "respond", "assistant_message"]
    assert final.steps[2].metadata.agent == "root"
    assert final.steps[3].metadata.agent == "root/helper"
    assert final.steps[3].metadata.node == "answer"
    assert final.steps[4].metadata.agent == "root"
    # three LLM calls, all recorded
    assert pool.db.count() == 3


def test_subagent_own_provider_wins(pool):
    worker = Agent(
        name="helper",
        nodes=(JsonStepsNode(name="answer"),),
        llm={"provider": "mock", "script": [completion(respond_doc("from my own llm"))]},
    )
    agent = mono(
        "root",
        [completion(STAY, call_doc("helper", "dig")), completion(ANSWER)],
        subagents=[worker],
    )
    final = run(agent, start(), pool).get_final_tape()
    assert final.steps[3].payload["content"] == "from my own llm"


def test_root_respond_ends_run(pool):
    agent = mono("root", [completion(respond_doc("all yours"))])
    final = run(agent, start(), pool).get_final_tape()
    assert [s.kind for s in final.steps] == ["user_message", "respond"]


def test_parse_failure_stops_run_as_failed(pool):
    class TolerantNode(JsonStepsNode):
        def generate_steps(self, agent, tape, llm_stream):
            text = llm_stream.output().content or ""
            try:
                json.loads(text)
            except ValueError as exc:
                yield parse_failure_step(raw=text, reason=str(exc))
                return
            yield from super().generate_steps(agent, tape, llm_stream)

    agent = Agent(
        name="root",
        nodes=(TolerantNode(name="main"),),
        llm={"provider": "mock", "script": ["this is not json"]},
    )
    stream = run(agent, start(), pool)
    final = stream.get_final_tape()
    assert stream.failed
    assert final.steps[-1].kind == PARSE_FAILURE
    assert final.steps[-1].payload["raw"] == "this is not json"
    assert final.steps[-1].metadata.node == "main"


def test_provider_error_becomes_action_failure(pool):
    agent = mono("root", [])  # empty script: the first call already fails
    stream = run(agent, start(), pool)
    final = stream.get_final_tape()
    assert stream.failed
    assert final.steps[-1].kind == "action_failure"
    assert "exhausted" in final.steps[-1].payload["reason"]


def test_runaway_loop_capped(pool):
    agent = mono("root", [completion(STAY)] * 50, max_iterations=5)
    with pytest.raises(RunawayAgentError, match="5 iterations"):
        run(agent, start(), pool).get_final_tape()


def test_steps_after_call_rejected(pool):
    agent = mono(
        "root",
        [completion(call_doc("helper", "x"), respond_doc("sneaky extra"))],
        subagents=[Agent(name="helper", nodes=(JsonStepsNode(name="n"),))],
    )
    with pytest.raises(MalformedStepSequenceError, match="after a call/respond"):
        run(agent, start(), pool).get_final_tape()


def test_node_yielding_nothing_rejected(pool):
    agent = mono("root", [completion()])
    with pytest.raises(MalformedStepSequenceError, match="produced no steps"):
        run(agent, start(), pool).get_final_tape()


def test_agent_without_nodes_rejected(pool):
    agent = Agent(name="root")
    with pytest.raises(NodeExhaustedError, match="no nodes"):
        run(agent, start(), pool).get_final_tape()


def test_resume_from_intermediate_tape(pool):
    """A run cut short mid-delegation continues from the intermediate tape
    and lands content-equal to the uninterrupted run."""
    worker = Agent(name="helper", nodes=(JsonStepsNode(name="answer"),))

    full = run(mono("root", delegation_script(), subagents=[worker]), start(), pool).get_final_tape()

    fresh_pool = ProviderPool(db=CallDatabase(pool.db.path + ".2"))
    agent2 = mono("root", delegation_script(), subagents=[worker])
    taken = []
    for event in run(agent2, start(), fresh_pool):
        if event.step is not None:
            taken.append(event.step)
            if event.step.kind == CALL:
                break  # abandon the run right after the delegation step
    intermediate = append(start(), taken, author="root")

    resumed = run(agent2, intermediate, fresh_pool).get_final_tape()
    assert content_equal(resumed, full)
