"""Command-line interface, run end to end through main()."""

import json
import sqlite3

from tapeloop.cli import main
from tapeloop.components import LLMFunctionNode, LLMFunctionTemplate
from tapeloop.config import load_agent, save_agent, save_document
from tapeloop.core import fork, tape_of, user_message_step
from tapeloop.core.serialize import deserialize_tape, serialize_tape
from tapeloop.llm import CallDatabase, ProviderPool
from tapeloop.runtime import Agent, run
from tapeloop.store import TapeStore

from .test_service import calc_agent_config


def calc_setup(tmp_path):
    """Write agent/env configs, a starting tape, and pick a db path."""
    agent_path = tmp_path / "agent.yaml"
    save_document(calc_agent_config(), agent_path)
    env_path = tmp_path / "env.yaml"
    save_document({"tools": ["calculator"]}, env_path)
    tape_path = tmp_path / "start.tape.json"
    tape_path.write_text(serialize_tape(tape_of([user_message_step("what is 2+2?")])), encoding="utf-8")
    return str(agent_path), str(env_path), str(tape_path), str(tmp_path / "calls.sqlite")


def test_run_then_replay_exits_zero(tmp_path, capsys):
    agent, env, tape, db = calc_setup(tmp_path)
    out = str(tmp_path / "final.tape.json")
    assert main(["run", "--agent", agent, "--tape", tape, "--env", env, "--out", out, "--db", db]) == 0
    err = capsys.readouterr().err
    assert "finished: stop" in err

    final = deserialize_tape((tmp_path / "final.tape.json").read_text(encoding="utf-8"))
    assert [s.kind for s in final.steps] == [
        "user_message", "tool_calls", "set_next_node", "tool_result", "assistant_message",
    ]
    assert final.steps[-1].payload["content"] == "It is 4."

    assert main(["replay", "--tape", out, "--agent", agent, "--db", db]) == 0
    assert "replay matched (2 calls compared)" in capsys.readouterr().out


def test_replay_detects_perturbed_recording(tmp_path, capsys):
    agent, env, tape, db = calc_setup(tmp_path)
    out = str(tmp_path / "final.tape.json")
    main(["run", "--agent", agent, "--tape", tape, "--env", env, "--out", out, "--db", db])
    capsys.readouterr()

    conn = sqlite3.connect(db)
    for prompt_id, output_json in conn.execute("SELECT prompt_id, output_json FROM llm_calls"):
        if "It is 4." in output_json:
            conn.execute(
                "UPDATE llm_calls SET output_json = ? WHERE prompt_id = ?",
                (output_json.replace("It is 4.", "It is 5."), prompt_id),
            )
    conn.commit()
    conn.close()

    assert main(["replay", "--tape", out, "--agent", agent, "--db", db]) == 1
    printed = capsys.readouterr().out
    assert "replay diverged at step 4" in printed


def test_replay_strict_mode_still_matches(tmp_path, capsys):
    agent, env, tape, db = calc_setup(tmp_path)
    out = str(tmp_path / "final.tape.json")
    main(["run", "--agent", agent, "--tape", tape, "--env", env, "--out", out, "--db", db])
    assert main(["replay", "--tape", out, "--agent", agent, "--db", db, "--strict"]) == 0


def test_run_prints_tape_to_stdout(tmp_path, capsys):
    agent, env, tape, db = calc_setup(tmp_path)
    assert main(["run", "--agent", agent, "--tape", tape, "--env", env, "--db", db]) == 0
    captured = capsys.readouterr()
    doc = json.loads(captured.out)
    assert [s["kind"] for s in doc["steps"]][-1] == "assistant_message"


def test_resume_stored_tape(tmp_path, capsys):
    agent, env, _, db = calc_setup(tmp_path)
    store_dir = str(tmp_path / "store")
    store = TapeStore(store_dir)
    prefix = tape_of([user_message_step("what is 2+2?")])
    store.save(prefix)

    rc = main([
        "resume", "--tape", prefix.metadata.id, "--agent", agent, "--env", env,
        "--store", store_dir, "--db", db,
    ])
    assert rc == 0
    entries = store.list()
    assert len(entries) == 2
    final_entry = max(entries, key=lambda e: e.steps)
    final = store.load(final_entry.tape_id)
    assert final.steps[-1].kind == "assistant_message"
    assert final.steps[0].payload["content"] == "what is 2+2?"


def test_diff_command(tmp_path, capsys):
    a = tape_of([user_message_step("one"), user_message_step("two")])
    b = fork(a, edit_index=1, replacement=user_message_step("TWO"))
    a_path, b_path = tmp_path / "a.json", tmp_path / "b.json"
    a_path.write_text(serialize_tape(a), encoding="utf-8")
    b_path.write_text(serialize_tape(b), encoding="utf-8")

    assert main(["diff", str(a_path), str(a_path)]) == 0
    assert "tapes equal" in capsys.readouterr().out
    assert main(["diff", str(a_path), str(b_path)]) == 1
    printed = capsys.readouterr().out
    assert "tapes differ at step 1" in printed
    assert "step 1: changed" in printed


def test_browse_prints_index(tmp_path, capsys):
    store_dir = str(tmp_path / "store")
    store = TapeStore(store_dir)
    tape = tape_of([user_message_step("x")])
    store.save(tape)
    assert main(["browse", "--dir", store_dir]) == 0
    printed = capsys.readouterr()
    assert tape.metadata.id in printed.out
    assert "1 tape(s)" in printed.err


def test_export_training_command(tmp_path, capsys):
    agent, env, tape, db = calc_setup(tmp_path)
    store_dir = str(tmp_path / "recorded")
    out_tape = str(tmp_path / "final.tape.json")
    main(["run", "--agent", agent, "--tape", tape, "--env", env, "--out", out_tape, "--db", db])
    TapeStore(store_dir).save(deserialize_tape((tmp_path / "final.tape.json").read_text(encoding="utf-8")))
    capsys.readouterr()

    out = str(tmp_path / "train.jsonl")
    assert main(["export-training", "--tapes", store_dir, "--agent", agent, "--out", out, "--db", db]) == 0
    assert "wrote 2 training record(s)" in capsys.readouterr().out
    lines = [json.loads(line) for line in (tmp_path / "train.jsonl").read_text(encoding="utf-8").splitlines()]
    assert len(lines) == 2
    assert all("prompt_text" in line and "completion_text" in line for line in lines)


QA = LLMFunctionTemplate(name="qa", instruction="Answer.", inputs=("question",), outputs=("answer",))


def qa_agent(llm):
    return Agent(
        name="fn",
        nodes=(
            LLMFunctionNode(
                name="answer",
                template=QA,
                input_from={"question": {"kind": "user_message"}},
                output_steps={"answer": "assistant_message"},
            ),
        ),
        llm=llm,
    )


def test_tune_demos_command(tmp_path, capsys):
    db_path = str(tmp_path / "calls.sqlite")
    agent_path = str(tmp_path / "agent.yaml")
    save_agent(qa_agent({"provider": "mock", "patterns": [[".*", "Paris"]]}), agent_path)

    train_store = TapeStore(tmp_path / "train")
    db = CallDatabase(db_path)
    for i in range(5):
        scripted = qa_agent({"provider": "mock", "script": [f"answer {i}"]})
        final = run(scripted, tape_of([user_message_step(f"q{i}?")]), ProviderPool(db=db)).get_final_tape()
        train_store.save(final)

    val_store = TapeStore(tmp_path / "val")
    for i in range(2):
        val_store.save(tape_of([user_message_step(f"v{i}?")]))

    tuned_path = str(tmp_path / "tuned.yaml")
    rc = main([
        "tune-demos", "--agent", agent_path, "--train", str(tmp_path / "train"),
        "--val", str(tmp_path / "val"), "--trials", "3", "--tapes-per-trial", "2",
        "--seed", "1", "--out", tuned_path, "--db", db_path,
    ])
    assert rc == 0
    printed = capsys.readouterr().out
    assert "tuned agent written to" in printed
    assert "1.000" in printed  # the mock answers every validation task

    tuned = load_agent(tuned_path)
    demos = tuned.nodes[0].template.demos
    assert demos and all(d.source_tape_id in {e.tape_id for e in train_store.list()} for d in demos)


def test_missing_config_is_a_clean_error(tmp_path, capsys):
    assert main(["run", "--agent", str(tmp_path / "ghost.yaml"), "--tape", "x"]) == 2
    assert "error:" in capsys.readouterr().err


def test_unknown_tape_argument(tmp_path, capsys):
    agent, _, _, db = calc_setup(tmp_path)
    assert main(["replay", "--tape", "no-such-id", "--agent", agent, "--db", db,
                 "--store", str(tmp_path / "empty-store")]) == 2
    assert "neither a tape file nor a tape id" in capsys.readouterr().err


def test_replay_without_recordings_fails(tmp_path, capsys):
    agent, env, tape, db = calc_setup(tmp_path)
    out = str(tmp_path / "final.tape.json")
    main(["run", "--agent", agent, "--tape", tape, "--env", env, "--out", out, "--db", db])
    capsys.readouterr()
    rc = main(["replay", "--tape", out, "--agent", agent, "--db", str(tmp_path / "other.sqlite")])
    assert rc == 1
    assert "replay mismatch" in capsys.readouterr().out
