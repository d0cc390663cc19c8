"""Orchestration: alternate the agent and the environment over one tape.

``main_loop`` is the outer engine: run the agent until it acts, let the
environment react, repeat — until a stopping action, a failure, or the
round cap. Because the tape is the only state, the loop can start from a
fresh tape or any intermediate one; resumption is the same code path.

``replay_tape`` re-runs a recorded session with the LLM swapped for its
recordings and the environment swapped for the recorded observations,
then diffs what comes out against what was recorded.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Generator, Iterator

from pydantic import BaseModel, ConfigDict, Field

from tapeloop.core.diff import DiffMode, DiffReport, diff_tapes
from tapeloop.core.steps import Step
from tapeloop.core.tape import Tape, append, tape_of
from tapeloop.environment import ENVIRONMENT_AUTHOR, Environment
from tapeloop.errors import ReplayMismatchError
from tapeloop.llm.db import CallDatabase
from tapeloop.llm.pool import ProviderPool
from tapeloop.llm.replay import ReplayLLM
from tapeloop.runtime.agent import Agent, AgentEvent, run

DEFAULT_MAX_ROUNDS = 32
DEFAULT_STOP_ON = ("assistant_message",)


class LoopConfig(BaseModel):
    """Outer-loop settings.

    ``stop_on`` names the action kinds that end the session (the default
    stops when the agent addresses the outside user). ``max_rounds`` caps
    agent/environment alternations.
    """

    model_config = ConfigDict(frozen=True)

    max_rounds: int = Field(default=DEFAULT_MAX_ROUNDS, ge=1)
    stop_on: tuple[str, ...] = DEFAULT_STOP_ON


@dataclass(frozen=True)
class Finished:
    reason: str  # "stop" | "round_limit" | "error"
    tape: Tape


@dataclass(frozen=True)
class MainLoopEvent:
    """One outer-loop event; exactly one field is set."""

    agent_event: AgentEvent | None = None
    agent_tape: Tape | None = None
    env_tape: Tape | None = None
    finished: Finished | None = None


class MainLoopStream:
    """Iterator over MainLoopEvents with access to the outcome."""

    def __init__(self, events: Generator[MainLoopEvent, None, None]):
        self._events = events
        self._finished: Finished | None = None

    def __iter__(self) -> Iterator[MainLoopEvent]:
        for event in self._events:
            if event.finished is not None:
                self._finished = event.finished
            yield event

    @property
    def result(self) -> Finished:
        if self._finished is None:
            for _ in self:
                pass
        if self._finished is None:
            raise RuntimeError("main loop ended without a finish event")
        return self._finished

    def get_final_tape(self) -> Tape:
        return self.result.tape


def main_loop(
    agent: Agent,
    tape: Tape,
    environment: Environment,
    pool: ProviderPool | None = None,
    config: LoopConfig | None = None,
) -> MainLoopStream:
    return MainLoopStream(_loop_events(agent, tape, environment, pool, config or LoopConfig()))


def _loop_events(
    agent: Agent,
    tape: Tape,
    environment: Environment,
    pool: ProviderPool | None,
    config: LoopConfig,
) -> Generator[MainLoopEvent, None, None]:
    current = tape
    for _ in range(config.max_rounds):
        stream = run(agent, current, pool)
        for event in stream:
            yield MainLoopEvent(agent_event=event)
        current = stream.get_final_tape()
        yield MainLoopEvent(agent_tape=current)
        if stream.failed:
            yield MainLoopEvent(finished=Finished(reason="error", tape=current))
            return
        last = current.steps[-1] if current.steps else None
        if last is not None and last.category == "action" and last.kind in config.stop_on:
            yield MainLoopEvent(finished=Finished(reason="stop", tape=current))
            return
        reacted = environment.react(current)
        if reacted is not current:
            current = reacted
            yield MainLoopEvent(env_tape=current)
        else:
            # the agent acted, the environment has nothing to add: a natural end
            yield MainLoopEvent(finished=Finished(reason="stop", tape=current))
            return
    yield MainLoopEvent(finished=Finished(reason="round_limit", tape=current))


# ---------------------------------------------------------------------------
# Replay


class ReplayEnvironment(Environment):
    """Feeds back the observations of a recorded tape, positionally.

    When asked to react to a tape of length k, it re-emits the recorded
    observation run starting at index k (fresh step ids, same content).
    """

    def __init__(self, recorded: Tape):
        super().__init__()
        self._recorded = recorded

    def react(self, tape: Tape) -> Tape:
        k = len(tape.steps)
        feed: list[Step] = []
        for step in self._recorded.steps[k:]:
            if step.category != "observation":
                break
            # fresh id, identical content
            feed.append(Step(kind=step.kind, category=step.category, payload=dict(step.payload)))
        if not feed:
            return tape
        return append(tape, feed, author=ENVIRONMENT_AUTHOR)


@dataclass(frozen=True)
class ReplayReport:
    """Outcome of re-running a recorded tape."""

    matched: bool
    recorded_id: str
    replayed_id: str
    diff: DiffReport
    calls_compared: int = 0
    error: str | None = None
    error_message_index: int | None = None

    @property
    def first_divergence(self) -> int | None:
        return self.diff.first_divergence

    def to_document(self) -> dict[str, Any]:
        return {
            "matched": self.matched,
            "recorded": self.recorded_id,
            "replayed": self.replayed_id,
            "first_divergence": self.first_divergence,
            "calls_compared": self.calls_compared,
            "error": self.error,
            "error_message_index": self.error_message_index,
            "diff": self.diff.to_document(),
        }


def leading_observations(tape: Tape) -> Tape:
    """The tape's opening observation run — replay's starting point."""
    steps = []
    for step in tape.steps:
        if step.category != "observation":
            break
        steps.append(step)
    return tape_of(steps)


def replay_tape(
    agent: Agent,
    recorded: Tape,
    db: CallDatabase,
    config: LoopConfig | None = None,
    mode: DiffMode = "content",
) -> ReplayReport:
    """Re-run ``recorded`` against the recorded LLM calls and observations.

    The agent starts from the tape's leading observations; every prompt is
    answered from ``db``; the environment echoes the recorded observations.
    The report says whether the regenerated tape matches the recording at
    the requested diff depth.
    """
    replay_llm = ReplayLLM(source_db=db)
    pool = _FixedPool(replay_llm, db)
    start = leading_observations(recorded)
    loop = main_loop(agent, start, ReplayEnvironment(recorded), pool, config)
    calls_before = replay_llm.remaining
    latest = start
    error: str | None = None
    error_index: int | None = None
    try:
        for event in loop:
            for tape in (event.agent_tape, event.env_tape):
                if tape is not None:
                    latest = tape
    except ReplayMismatchError as exc:
        error = str(exc)
        error_index = exc.message_index
    report_diff = diff_tapes(recorded, latest, mode=mode)
    return ReplayReport(
        matched=error is None and report_diff.empty,
        recorded_id=recorded.metadata.id,
        replayed_id=latest.metadata.id,
        diff=report_diff,
        calls_compared=calls_before - replay_llm.remaining,
        error=error,
        error_message_index=error_index,
    )


class _FixedPool(ProviderPool):
    """A pool that hands every config the same provider instance."""

    def __init__(self, llm, db: CallDatabase):
        super().__init__(db=db)
        self._llm = llm

    def get(self, config: dict) -> Any:
        return self._llm


def replay_pool(source: CallDatabase, db: CallDatabase | None = None) -> ProviderPool:
    """A pool whose every provider serves the calls recorded in ``source``.

    Hand it to ``main_loop`` together with a ``ReplayEnvironment`` to
    resume a recorded session offline from any of its intermediate tapes.
    New calls are recorded into ``db``, if given.
    """
    return _FixedPool(ReplayLLM(source_db=source, db=db), db)
