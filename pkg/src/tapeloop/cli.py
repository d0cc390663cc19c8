"""Command-line interface: run, resume, replay, diff, browse, serve, export, tune.

Tape arguments accept either a file path or a tape id in the store
(``--store``, default from TAPE_STORE_DIR). LLM calls are recorded in
the call database addressed by TAPEAGENTS_DB_PATH. ``replay`` exits 0
exactly when the re-run matches the recording, and prints where the
tapes diverge otherwise.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Any

from tapeloop.config import load_agent, load_document, load_environment, save_agent
from tapeloop.core.diff import DiffReport, diff_tapes
from tapeloop.core.serialize import deserialize_tape, serialize_tape
from tapeloop.core.tape import Tape
from tapeloop.environment import Environment
from tapeloop.errors import TapeloopError
from tapeloop.llm.db import CallDatabase
from tapeloop.llm.pool import ProviderPool
from tapeloop.optimize import TuneConfig, export_training_data, tune_by_search
from tapeloop.orchestrator import LoopConfig, leading_observations, main_loop, replay_tape
from tapeloop.store import TapeStore


def _load_tape_arg(value: str, store_dir: str | None) -> Tape:
    """A tape by file path, or by id in the store."""
    path = Path(value)
    if path.exists():
        return deserialize_tape(path.read_text(encoding="utf-8"))
    store = TapeStore(store_dir)
    if value in store:
        return store.load(value)
    raise TapeloopError(f"{value!r} is neither a tape file nor a tape id under {store.root}")


def _environment(args: argparse.Namespace) -> Environment:
    return load_environment(args.env) if getattr(args, "env", None) else Environment()


def _write_tape(tape: Tape, out: str | None) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(serialize_tape(tape), encoding="utf-8")
    else:
        sys.stdout.write(serialize_tape(tape))


def _finish_loop(agent, tape, args) -> tuple[str, Tape]:
    environment = _environment(args)
    pool = ProviderPool(db=CallDatabase(getattr(args, "db", None)))
    config = LoopConfig(max_rounds=args.max_rounds)
    finished = main_loop(agent, tape, environment, pool, config).result
    return finished.reason, finished.tape


def _print_divergence(report: DiffReport) -> None:
    for entry in report.entries:
        detail = f" ({', '.join(entry.changed_paths)})" if entry.changed_paths else ""
        print(f"  step {entry.index}: {entry.status}{detail}")


# ---------------------------------------------------------------------------
# Commands


def cmd_run(args: argparse.Namespace) -> int:
    agent = load_agent(args.agent)
    tape = _load_tape_arg(args.tape, args.store)
    reason, final = _finish_loop(agent, tape, args)
    _write_tape(final, args.out)
    print(f"finished: {reason} ({len(final.steps)} steps, tape {final.metadata.id})", file=sys.stderr)
    return 0 if reason != "error" else 1


def cmd_resume(args: argparse.Namespace) -> int:
    store = TapeStore(args.store)
    agent = load_agent(args.agent)
    tape = store.load(args.tape)
    reason, final = _finish_loop(agent, tape, args)
    store.save(final)
    if args.out:
        _write_tape(final, args.out)
    print(f"finished: {reason} ({len(final.steps)} steps, tape {final.metadata.id})", file=sys.stderr)
    return 0 if reason != "error" else 1


def cmd_replay(args: argparse.Namespace) -> int:
    agent = load_agent(args.agent)
    recorded = _load_tape_arg(args.tape, args.store)
    db = CallDatabase(args.db)
    mode = "provenance" if args.strict else "content"
    report = replay_tape(agent, recorded, db, mode=mode)
    if report.matched:
        print(f"replay matched ({report.calls_compared} calls compared)")
        return 0
    if report.error is not None:
        where = (
            f" at message index {report.error_message_index}"
            if report.error_message_index is not None
            else ""
        )
        print(f"replay mismatch{where}: {report.error}")
    if not report.diff.empty:
        print(f"replay diverged at step {report.first_divergence}")
        _print_divergence(report.diff)
    return 1


def cmd_diff(args: argparse.Namespace) -> int:
    a = _load_tape_arg(args.a, args.store)
    b = _load_tape_arg(args.b, args.store)
    report = diff_tapes(a, b, mode=args.mode)
    if report.empty:
        print(f"tapes equal ({report.a_length} steps, mode={report.mode})")
        return 0
    print(f"tapes differ at step {report.first_divergence} (mode={report.mode})")
    _print_divergence(report)
    return 1


def cmd_browse(args: argparse.Namespace) -> int:
    entries = TapeStore(args.dir).list()
    print(f"{'id':<34} {'steps':>5} {'author':<12} {'parent':<34} created_at")
    for e in entries:
        print(f"{e.tape_id:<34} {e.steps:>5} {e.author:<12} {e.parent_id or '-':<34} {e.created_at}")
    print(f"{len(entries)} tape(s)", file=sys.stderr)
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from tapeloop.service import create_app

    app = create_app(store=TapeStore(args.store), db=CallDatabase(args.db))
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def cmd_export_training(args: argparse.Namespace) -> int:
    agent = load_agent(args.agent)
    store = TapeStore(args.tapes)
    tapes = [store.load(entry.tape_id) for entry in store.list()]
    count = export_training_data(agent, tapes, CallDatabase(args.db), args.out)
    print(f"wrote {count} training record(s) to {args.out}")
    return 0


def _default_success_metric(tape: Tape) -> dict[str, Any]:
    """Success = the session ended with an answer to the user, no failures."""
    failed = any(step.kind in ("action_failure", "parse_failure") for step in tape.steps)
    answered = bool(tape.steps) and tape.steps[-1].kind == "assistant_message"
    return {"success": answered and not failed}


def cmd_tune_demos(args: argparse.Namespace) -> int:
    agent = load_agent(args.agent)
    db = CallDatabase(args.db)
    train_store, val_store = TapeStore(args.train), TapeStore(args.val)
    train = [train_store.load(e.tape_id) for e in train_store.list()]
    val_tasks = [
        leading_observations(val_store.load(e.tape_id)) for e in val_store.list()
    ]
    env_doc = load_document(args.env) if args.env else {}

    def runner(candidate, task_tape: Tape) -> Tape:
        from tapeloop.environment import environment_from_config

        environment = environment_from_config(dict(env_doc))
        pool = ProviderPool(db=db)
        return main_loop(candidate, task_tape, environment, pool).result.tape

    config = TuneConfig(
        n_trials=args.trials,
        tapes_per_trial=args.tapes_per_trial,
        seed=args.seed,
    )
    result = tune_by_search(agent, train, val_tasks, _default_success_metric, db, runner, config)
    if result.warning:
        print(f"warning: {result.warning}", file=sys.stderr)
    save_agent(result.best_agent, args.out)
    scores = ", ".join(f"{s:.3f}" for s in result.trial_scores)
    print(f"tuned agent written to {args.out} (trial scores: [{scores}])")
    return 0


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tapeloop", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, func, help_: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_)
        p.set_defaults(func=func)
        p.add_argument("--store", default=None, help="tape store root (default: TAPE_STORE_DIR)")
        p.add_argument("--db", default=None, help="LLM-call database path (default: TAPEAGENTS_DB_PATH)")
        return p

    p = add("run", cmd_run, "run an agent on a tape until it stops")
    p.add_argument("--agent", required=True, help="agent config file")
    p.add_argument("--tape", required=True, help="starting tape (file or store id)")
    p.add_argument("--env", default=None, help="environment config file")
    p.add_argument("--out", default=None, help="write the final tape here (default: stdout)")
    p.add_argument("--max-rounds", type=int, default=32)

    p = add("resume", cmd_resume, "continue a stored tape to completion")
    p.add_argument("--tape", required=True, help="tape id in the store")
    p.add_argument("--agent", required=True, help="agent config file")
    p.add_argument("--env", default=None, help="environment config file")
    p.add_argument("--out", default=None, help="also write the final tape here")
    p.add_argument("--max-rounds", type=int, default=32)

    p = add("replay", cmd_replay, "re-run a recorded tape against its recorded calls")
    p.add_argument("--tape", required=True, help="recorded tape (file or store id)")
    p.add_argument("--agent", required=True, help="agent config file")
    p.add_argument("--strict", action="store_true", help="also compare agent/node attribution")

    p = add("diff", cmd_diff, "compare two tapes")
    p.add_argument("a", help="first tape (file or store id)")
    p.add_argument("b", help="second tape (file or store id)")
    p.add_argument("--mode", choices=("content", "provenance", "full"), default="content")

    p = add("browse", cmd_browse, "print the store index")
    p.add_argument("--dir", default=None, help="store root (default: TAPE_STORE_DIR)")

    p = add("serve", cmd_serve, "start the HTTP service")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")

    p = add("export-training", cmd_export_training, "write training records from stored tapes")
    p.add_argument("--tapes", required=True, help="store directory of recorded tapes")
    p.add_argument("--agent", required=True, help="agent config file")
    p.add_argument("--out", required=True, help="output .jsonl path")

    p = add("tune-demos", cmd_tune_demos, "pick the best demonstration set by random search")
    p.add_argument("--agent", required=True, help="agent config file")
    p.add_argument("--train", required=True, help="store directory of training tapes")
    p.add_argument("--val", required=True, help="store directory of validation tapes")
    p.add_argument("--env", default=None, help="environment config for validation runs")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--tapes-per-trial", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="write the tuned agent config here")

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except TapeloopError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
