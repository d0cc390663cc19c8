"""Tape-driven agent improvement.

Recorded sessions are the raw material here: a metric filters them down
to the good ones, demonstrations are extracted from the good ones through
the call database, and templates are re-fitted with sampled demonstration
sets — either directly (``add_demos``) or by scored random search
(``tune_by_search``). ``export_training_data`` turns validated sessions
into a supervised fine-tuning file.

A metric is a callable ``tape -> {"success": bool, "scores": {name: real}}``,
deterministic for a fixed tape. A tape's scalar score is the mean of its
``scores`` values, or 1.0/0.0 from ``success`` when ``scores`` is empty.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

from pydantic import BaseModel, ConfigDict, Field

from tapeloop.components.function import (
    Demonstration,
    LLMFunctionNode,
    fn_parse,
    parse_live_inputs,
)
from tapeloop.core.tape import Tape
from tapeloop.errors import TapeloopError, TemplateError, UnknownAgentError
from tapeloop.llm.db import CallDatabase
from tapeloop.runtime.agent import Agent
from tapeloop.runtime.training import make_training_text
from tapeloop.runtime.views import resolve_lineage

Metric = Callable[[Tape], Mapping[str, Any]]
Runner = Callable[[Agent, Any], Tape]


def tape_score(verdict: Mapping[str, Any]) -> float:
    """A metric verdict as one number: mean of scores, else success as 0/1."""
    scores = verdict.get("scores") or {}
    if scores:
        return sum(float(v) for v in scores.values()) / len(scores)
    return 1.0 if verdict.get("success") else 0.0


def filter_good_tapes(tapes: Sequence[Tape], metric: Metric) -> list[Tape]:
    """The tapes the metric marks successful, in their original order.

    A metric that raises marks the tape failed; filtering never crashes.
    """
    good = []
    for tape in tapes:
        try:
            verdict = metric(tape)
        except Exception:
            continue
        if verdict.get("success"):
            good.append(tape)
    return good


@dataclass(frozen=True)
class DemoExtraction:
    """Demonstrations per template name, plus how many calls were skipped."""

    demos: dict[str, list[Demonstration]] = field(default_factory=dict)
    skipped: int = 0


def extract_demos(tape: Tape, db: CallDatabase, agent: Agent) -> DemoExtraction:
    """Rebuild template demonstrations from a tape's recorded LLM calls.

    Each group of steps sharing a prompt_id is attributed to the node
    that produced it; when that node runs a function template, the
    recorded prompt and output are parsed back into the template's
    bindings. Calls from other node types — or calls whose recorded text
    no longer matches the template — are skipped and counted. A
    prompt_id missing from the database is an error.
    """
    demos: dict[str, list[Demonstration]] = {}
    skipped = 0
    previous_id: str | None = None
    for step in tape.steps:
        prompt_id = step.metadata.prompt_id
        if prompt_id is None or prompt_id == previous_id:
            previous_id = prompt_id
            continue
        previous_id = prompt_id
        node = _producing_node(agent, step.metadata.agent, step.metadata.node)
        if not isinstance(node, LLMFunctionNode):
            skipped += 1
            continue
        record = db.get(prompt_id)
        prompt_doc = record.prompt
        output_doc = record.output
        template = node.template
        try:
            messages = prompt_doc.get("messages") or []
            inputs = parse_live_inputs(template, str(messages[-1].get("content", "")) if messages else "")
            outputs = fn_parse(template, output_doc.get("content") or "")
        except TemplateError:
            skipped += 1
            continue
        demos.setdefault(template.name, []).append(
            Demonstration(
                bindings={**inputs, **outputs},
                source_tape_id=tape.metadata.id,
                source_prompt_id=prompt_id,
            )
        )
    return DemoExtraction(demos, skipped)


def _producing_node(agent: Agent, agent_path: str, node_name: str):
    try:
        owner = resolve_lineage(agent, agent_path)[-1]
    except UnknownAgentError:
        return None
    for node in owner.nodes:
        if node.name == node_name:
            return node
    return None


def add_demos(
    agent: Agent,
    good_tapes: Sequence[Tape],
    db: CallDatabase,
    max_demos: int = 4,
    seed: int = 0,
) -> Agent:
    """A copy of the agent whose templates carry sampled demonstrations.

    Demonstrations are pooled per template name across the given tapes
    and sampled without replacement (seeded). The input agent is never
    modified; with no tapes, no extractable demos, or ``max_demos=0`` the
    input agent is returned as is.
    """
    pools: dict[str, list[Demonstration]] = {}
    for tape in good_tapes:
        for name, extracted in extract_demos(tape, db, agent).demos.items():
            pools.setdefault(name, []).extend(extracted)
    if max_demos <= 0 or not pools:
        return agent
    rng = random.Random(seed)
    chosen = {
        name: rng.sample(pools[name], min(max_demos, len(pools[name])))
        for name in sorted(pools)
    }
    return _with_demos(agent, chosen)


def _with_demos(agent: Agent, chosen: Mapping[str, list[Demonstration]]) -> Agent:
    nodes = tuple(
        node.model_copy(
            update={"template": node.template.with_demos(tuple(chosen[node.template.name]))}
        )
        if isinstance(node, LLMFunctionNode) and node.template.name in chosen
        else node
        for node in agent.nodes
    )
    subagents = tuple(_with_demos(sub, chosen) for sub in agent.subagents)
    return agent.model_copy(update={"nodes": nodes, "subagents": subagents})


class TuneConfig(BaseModel):
    """Random-search settings for demonstration tuning."""

    model_config = ConfigDict(frozen=True)

    n_trials: int = Field(default=10, ge=1)
    tapes_per_trial: int = Field(default=4, ge=1)
    max_demos_per_template: int = Field(default=4, ge=0)
    seed: int = 0


@dataclass(frozen=True)
class TuneResult:
    best_agent: Agent
    trial_scores: tuple[float, ...]
    warning: str | None = None


def tune_by_search(
    agent: Agent,
    train_tapes: Sequence[Tape],
    val_tasks: Sequence[Any],
    metric: Metric,
    db: CallDatabase,
    runner: Runner,
    config: TuneConfig | None = None,
) -> TuneResult:
    """Pick the best demonstration set by scored random search.

    Each trial samples ``tapes_per_trial`` good tapes, builds a candidate
    via ``add_demos``, runs it on every validation task, and scores the
    resulting tapes with the metric (aggregate = mean over tasks). The
    candidate with the highest aggregate wins; ties go to the earlier
    trial. All sampling is pre-drawn from the seed, so trials could run
    in any order — or concurrently — without changing the outcome.
    """
    config = config or TuneConfig()
    good = filter_good_tapes(train_tapes, metric)
    if not good:
        return TuneResult(agent, (), warning="no good tapes to tune from")

    rng = random.Random(config.seed)
    draws = []
    for _ in range(config.n_trials):
        indices = rng.sample(range(len(good)), min(config.tapes_per_trial, len(good)))
        draws.append((indices, rng.randrange(2**32)))

    best_agent = agent
    best_score = float("-inf")
    trial_scores: list[float] = []
    for indices, demo_seed in draws:
        candidate = add_demos(
            agent,
            [good[i] for i in indices],
            db,
            max_demos=config.max_demos_per_template,
            seed=demo_seed,
        )
        if val_tasks:
            score = sum(tape_score(metric(runner(candidate, task))) for task in val_tasks) / len(val_tasks)
        else:
            score = 0.0
        trial_scores.append(score)
        if score > best_score:
            best_agent, best_score = candidate, score
    return TuneResult(best_agent, tuple(trial_scores))


def export_training_data(
    agent: Agent,
    tapes: Sequence[Tape],
    db: CallDatabase | None,
    destination: str | Path,
) -> int:
    """Write validated training records, one JSON document per line.

    Every sample of every tape that passes reconstruction becomes one
    record {prompt_text, completion_text, source_tape_id,
    source_prompt_id}. Tapes that fail validation are left out and named
    in the ``.rejects.json`` sidecar next to the output file. Returns the
    number of records written.
    """
    destination = Path(destination)
    records: list[dict[str, str]] = []
    rejects: list[dict[str, str]] = []
    for tape in tapes:
        try:
            samples = make_training_text(agent, tape, db=db)
        except TapeloopError as exc:
            rejects.append({"tape_id": tape.metadata.id, "error": str(exc)})
            continue
        records.extend(
            {
                "prompt_text": sample.prompt_text,
                "completion_text": sample.completion_text,
                "source_tape_id": tape.metadata.id,
                "source_prompt_id": sample.prompt_id,
            }
            for sample in samples
        )
    destination.parent.mkdir(parents=True, exist_ok=True)
    with destination.open("w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")
    sidecar = destination.with_suffix(".rejects.json")
    sidecar.write_text(
        json.dumps({"rejected": rejects}, ensure_ascii=False, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    return len(records)
