"""HTTP service over a tape store: browse, fork, diff, and live runs.

Runs execute in background threads; each run buffers its events so any
number of subscribers can attach at any time. A subscriber first gets a
``snapshot`` event carrying the run's current tape, then every later
event live (server-sent events, one JSON document per event:
``{type, run_id, payload}``). The finished tape is saved to the store —
tapes addressable through the API and tapes in the store are the same
set.

Forking a tape that is the input of a running run is allowed but
flagged: the run keeps going on its snapshot and its handle reports the
conflict.
"""

from __future__ import annotations

import json
import threading
import uuid
from typing import Any, Iterator

from fastapi import Body, FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import StreamingResponse

from tapeloop.config import agent_from_config
from tapeloop.environment import environment_from_config
from tapeloop.core.diff import diff_tapes
from tapeloop.core.registry import default_registry
from tapeloop.core.serialize import step_from_document, step_to_document, tape_to_document
from tapeloop.core.tape import Tape, fork
from tapeloop.errors import CallNotFoundError, StoreError, TapeloopError
from tapeloop.llm.db import CallDatabase
from tapeloop.llm.pool import ProviderPool
from tapeloop.orchestrator import LoopConfig, main_loop
from tapeloop.store import TapeStore

_STALL_TIMEOUT = 60.0  # seconds a subscriber waits on a silent run before giving up


class RunState:
    """One run's handle plus its buffered event stream."""

    def __init__(self, run_id: str, input_tape: Tape, config_snapshot: dict[str, Any]):
        self.run_id = run_id
        self.status = "running"  # -> "finished" | "failed", forward only
        self.input_tape_id = input_tape.metadata.id
        self.latest_tape = input_tape
        self.final_tape_id: str | None = None
        self.reason: str | None = None
        self.error: str | None = None
        self.conflict = False
        self.config_snapshot = config_snapshot
        self._events: list[dict[str, Any]] = []
        self._cond = threading.Condition()

    def emit(self, type_: str, payload: Any) -> None:
        with self._cond:
            self._events.append({"type": type_, "run_id": self.run_id, "payload": payload})
            self._cond.notify_all()

    def finish(self, status: str) -> None:
        with self._cond:
            self.status = status
            self._cond.notify_all()

    def subscribe(self) -> Iterator[dict[str, Any]]:
        """A snapshot of the current tape, then the full event history and
        everything live from here on — late subscribers miss nothing."""
        with self._cond:
            cursor = 0
            snapshot = {
                "type": "snapshot",
                "run_id": self.run_id,
                "payload": {"status": self.status, "tape": tape_to_document(self.latest_tape)},
            }
        yield snapshot
        while True:
            with self._cond:
                if cursor >= len(self._events):
                    if self.status != "running":
                        return
                    if not self._cond.wait(timeout=_STALL_TIMEOUT):
                        return  # stalled run; stop streaming rather than hang
                batch = self._events[cursor:]
                cursor = len(self._events)
            yield from batch

    def to_document(self) -> dict[str, Any]:
        return {
            "run_id": self.run_id,
            "status": self.status,
            "reason": self.reason,
            "input_tape_id": self.input_tape_id,
            "current_tape_id": self.latest_tape.metadata.id,
            "final_tape_id": self.final_tape_id,
            "conflict": self.conflict,
            "error": self.error,
            "config": self.config_snapshot,
        }


def _execute_run(run: RunState, agent, tape, environment, pool, loop_config, store) -> None:
    try:
        finished = None
        for event in main_loop(agent, tape, environment, pool, loop_config):
            if event.agent_event is not None:
                inner = event.agent_event
                if inner.step is not None:
                    run.emit("step", step_to_document(inner.step))
                elif inner.partial_step is not None:
                    run.emit("partial_step", step_to_document(inner.partial_step.step))
                continue
            for name in ("agent_tape", "env_tape"):
                new_tape = getattr(event, name)
                if new_tape is not None:
                    run.latest_tape = new_tape
                    run.emit(name, {"tape_id": new_tape.metadata.id, "length": len(new_tape.steps)})
            if event.finished is not None:
                finished = event.finished
        assert finished is not None
        store.save(finished.tape)
        run.latest_tape = finished.tape
        run.final_tape_id = finished.tape.metadata.id
        run.reason = finished.reason
        run.emit(
            "finished",
            {"reason": finished.reason, "tape_id": finished.tape.metadata.id, "conflict": run.conflict},
        )
        run.finish("finished")
    except Exception as exc:  # noqa: BLE001 - a failed run must still report
        run.error = str(exc)
        run.emit("error", {"message": str(exc)})
        run.finish("failed")


def create_app(store: TapeStore | None = None, db: CallDatabase | None = None) -> FastAPI:
    """The service over one tape store and one LLM-call database."""
    store = store or TapeStore()
    db = db or CallDatabase()
    app = FastAPI(title="tapeloop")
    # Browser frontends are served from their own origin (a static file
    # server, or a file:// page); the API itself carries no credentials.
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    runs: dict[str, RunState] = {}
    runs_lock = threading.Lock()
    app.state.store = store
    app.state.db = db

    def _load_tape(tape_id: str) -> Tape:
        try:
            return store.load(tape_id)
        except StoreError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc

    @app.get("/api/tapes")
    def list_tapes() -> dict[str, Any]:
        return {"tapes": [entry.__dict__ for entry in store.list()]}

    @app.get("/api/tapes/{tape_id}")
    def get_tape(tape_id: str) -> dict[str, Any]:
        return tape_to_document(_load_tape(tape_id))

    @app.post("/api/tapes/{tape_id}/fork")
    def fork_tape(tape_id: str, body: dict = Body(...)) -> dict[str, Any]:
        tape = _load_tape(tape_id)
        if "index" not in body or "replacement" not in body:
            raise HTTPException(status_code=400, detail="fork needs 'index' and 'replacement'")
        doc = dict(body["replacement"]) if isinstance(body["replacement"], dict) else body["replacement"]
        if isinstance(doc, dict) and "category" not in doc and doc.get("kind") in default_registry:
            doc["category"] = default_registry.spec(doc["kind"]).category
        try:
            replacement = step_from_document(doc, where="fork replacement")
            child = fork(tape, edit_index=int(body["index"]), replacement=replacement,
                         author=str(body.get("author", "api")))
        except (TapeloopError, ValueError, TypeError, IndexError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        store.save(child)
        with runs_lock:
            conflicting = [
                run for run in runs.values()
                if run.status == "running" and run.input_tape_id == tape_id
            ]
        for run in conflicting:
            run.conflict = True
        return {
            "tape": tape_to_document(child),
            "conflicts_with_runs": [run.run_id for run in conflicting],
        }

    @app.post("/api/runs")
    def start_run(body: dict = Body(...)) -> dict[str, str]:
        for key in ("agent_config", "tape_id"):
            if key not in body:
                raise HTTPException(status_code=400, detail=f"run request needs {key!r}")
        tape = _load_tape(body["tape_id"])
        try:
            agent = agent_from_config(body["agent_config"])
            environment = environment_from_config(dict(body.get("env_config") or {}))
            loop_config = LoopConfig(**(body.get("loop") or {}))
        except (TapeloopError, ValueError, TypeError) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        run_id = uuid.uuid4().hex[:12]
        snapshot = {
            "agent": body["agent_config"].get("name"),
            "tape_id": body["tape_id"],
            "env_config": body.get("env_config") or {},
        }
        run = RunState(run_id, tape, snapshot)
        with runs_lock:
            runs[run_id] = run
        thread = threading.Thread(
            target=_execute_run,
            args=(run, agent, tape, environment, ProviderPool(db=db), loop_config, store),
            name=f"run-{run_id}",
            daemon=True,
        )
        thread.start()
        return {"run_id": run_id}

    def _get_run(run_id: str) -> RunState:
        with runs_lock:
            run = runs.get(run_id)
        if run is None:
            raise HTTPException(status_code=404, detail=f"no run {run_id!r}")
        return run

    @app.get("/api/runs/{run_id}")
    def run_handle(run_id: str) -> dict[str, Any]:
        return _get_run(run_id).to_document()

    @app.get("/api/runs/{run_id}/events")
    def run_events(run_id: str) -> StreamingResponse:
        run = _get_run(run_id)

        def stream() -> Iterator[str]:
            for event in run.subscribe():
                yield f"data: {json.dumps(event, ensure_ascii=False)}\n\n"

        return StreamingResponse(stream(), media_type="text/event-stream")

    @app.get("/api/diff")
    def diff(a: str, b: str, mode: str = "content") -> dict[str, Any]:
        if mode not in ("content", "provenance", "full"):
            raise HTTPException(status_code=400, detail=f"unknown diff mode {mode!r}")
        report = diff_tapes(_load_tape(a), _load_tape(b), mode=mode)  # type: ignore[arg-type]
        return report.to_document()

    @app.get("/api/llm_calls/{prompt_id}")
    def llm_call(prompt_id: str) -> dict[str, Any]:
        try:
            return db.get(prompt_id).to_document()
        except CallNotFoundError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc

    return app
