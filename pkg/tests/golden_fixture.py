"""A fixture tape with every id pinned, for byte-stability checks.

``python3 -m tests.golden_fixture`` prints the tape's serialized document.
The serialization test runs this module in two fresh interpreter processes
and compares both outputs — and the committed ``tests/data/stability.tape.json``
— byte for byte: same tape, same bytes, in any process, forever.
"""

from __future__ import annotations

import json
import sys

from tapeloop.core import (
    Step,
    StepMetadata,
    Tape,
    TapeMetadata,
    serialize_tape,
)


def _step(kind: str, category: str, payload: dict, n: int, **meta) -> Step:
    return Step(
        kind=kind,
        category=category,
        payload=payload,
        metadata=StepMetadata(id=f"step-{n:04d}", **meta),
    )


def golden_tape() -> Tape:
    args = json.dumps({"query": "grind size — espresso"}, ensure_ascii=False)
    steps = (
        _step("user_message", "observation", {"content": "Qué molienda — how fine?"}, 0),
        _step(
            "call",
            "thought",
            {"agent_name": "searcher", "content": "grind size"},
            1,
            agent="planner",
            node="plan",
            prompt_id="prompt-0001",
        ),
        _step(
            "tool_calls",
            "action",
            {"calls": [{"id": "call-1", "name": "search", "arguments": args}]},
            2,
            agent="planner/searcher",
            node="main",
            prompt_id="prompt-0002",
        ),
        _step(
            "set_next_node",
            "control",
            {"next_node": 0},
            3,
            agent="planner/searcher",
            node="main",
            prompt_id="prompt-0002",
        ),
        _step(
            "tool_result",
            "observation",
            {
                "call_id": "call-1",
                "tool_name": "search",
                "result": [{"id": "g1", "title": "Grind basics", "snippet": "fine for espresso"}],
                "text": '[{"id": "g1"}]',
            },
            4,
        ),
        _step(
            "respond",
            "thought",
            {"content": "Espresso wants a fine grind."},
            5,
            agent="planner/searcher",
            node="main",
            prompt_id="prompt-0003",
        ),
        _step(
            "assistant_message",
            "action",
            {"content": "Grind fine — около 300 µm."},
            6,
            agent="planner",
            node="answer",
            prompt_id="prompt-0004",
            other={"confidence": 0.75},
        ),
        _step("action_failure", "observation", {"reason": "no such tool: teleporter"}, 7),
        _step("parse_failure", "observation", {"raw": "not json", "reason": "bad"}, 8),
    )
    return Tape(
        steps=steps,
        metadata=TapeMetadata(id="tape-golden-0001", parent_id=None, author="fixture", n_added=9),
    )


def main() -> None:
    sys.stdout.write(serialize_tape(golden_tape()))


if __name__ == "__main__":
    main()
