"""Positional diff between two tapes.

Steps are compared index by index at one of three depths:

* ``content`` (default) — kind, category, payload. Volatile metadata (step
  ids, prompt ids) and provenance are masked, so a run and its faithful
  replay diff as equal even though every id differs.
* ``provenance`` — content plus which agent and node produced each step.
* ``full`` — everything, ids included.

Changed paths use the flat serialized layout: ``kind``, ``content``,
``calls[0].name``, ``metadata.id``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Literal

from tapeloop.core.steps import Step
from tapeloop.core.tape import Tape

Status = Literal["changed", "only_in_a", "only_in_b"]
DiffMode = Literal["content", "provenance", "full"]


@dataclass(frozen=True)
class DiffEntry:
    """One differing position. Equal positions are not recorded."""

    index: int
    status: Status
    changed_paths: tuple[str, ...] = ()

    def to_document(self) -> dict[str, Any]:
        return {"index": self.index, "status": self.status, "changed_paths": list(self.changed_paths)}


@dataclass(frozen=True)
class DiffReport:
    a_id: str
    b_id: str
    a_length: int
    b_length: int
    mode: DiffMode = "content"
    entries: tuple[DiffEntry, ...] = field(default_factory=tuple)

    @property
    def empty(self) -> bool:
        return not self.entries

    @property
    def first_divergence(self) -> int | None:
        return self.entries[0].index if self.entries else None

    def to_document(self) -> dict[str, Any]:
        return {
            "a": self.a_id,
            "b": self.b_id,
            "a_length": self.a_length,
            "b_length": self.b_length,
            "mode": self.mode,
            "equal": self.empty,
            "first_divergence": self.first_divergence,
            "entries": [e.to_document() for e in self.entries],
        }


def _diff_values(path: str, a: Any, b: Any, out: list[str]) -> None:
    if isinstance(a, dict) and isinstance(b, dict):
        for key in sorted(set(a) | set(b)):
            sub = f"{path}.{key}" if path else key
            if key not in a or key not in b:
                out.append(sub)
            else:
                _diff_values(sub, a[key], b[key], out)
        return
    if isinstance(a, list) and isinstance(b, list):
        if len(a) != len(b):
            out.append(path)
            return
        for i, (x, y) in enumerate(zip(a, b)):
            _diff_values(f"{path}[{i}]", x, y, out)
        return
    # scalars, or mismatched container types
    if type(a) is not type(b) and not (isinstance(a, (int, float)) and isinstance(b, (int, float))):
        out.append(path)
    elif a != b:
        out.append(path)


def diff_steps(a: Step, b: Step, mode: DiffMode = "content") -> tuple[str, ...]:
    """Paths at which two steps differ; empty means equal at that depth."""
    paths: list[str] = []
    if a.kind != b.kind:
        paths.append("kind")
    if a.category != b.category:
        paths.append("category")
    _diff_values("", dict(a.payload), dict(b.payload), paths)
    if mode in ("provenance", "full"):
        if a.metadata.agent != b.metadata.agent:
            paths.append("metadata.agent")
        if a.metadata.node != b.metadata.node:
            paths.append("metadata.node")
        _diff_values("metadata.other", a.metadata.other, b.metadata.other, paths)
    if mode == "full":
        if a.metadata.id != b.metadata.id:
            paths.append("metadata.id")
        if a.metadata.prompt_id != b.metadata.prompt_id:
            paths.append("metadata.prompt_id")
    return tuple(paths)


def steps_content_equal(a: Step, b: Step) -> bool:
    return not diff_steps(a, b)


def diff_tapes(a: Tape, b: Tape, mode: DiffMode = "content") -> DiffReport:
    entries: list[DiffEntry] = []
    for i in range(max(len(a.steps), len(b.steps))):
        if i >= len(a.steps):
            entries.append(DiffEntry(index=i, status="only_in_b"))
        elif i >= len(b.steps):
            entries.append(DiffEntry(index=i, status="only_in_a"))
        else:
            paths = diff_steps(a.steps[i], b.steps[i], mode=mode)
            if paths:
                entries.append(DiffEntry(index=i, status="changed", changed_paths=paths))
    return DiffReport(
        a_id=a.metadata.id,
        b_id=b.metadata.id,
        a_length=len(a.steps),
        b_length=len(b.steps),
        mode=mode,
        entries=tuple(entries),
    )


def content_equal(a: Tape, b: Tape) -> bool:
    """True when both tapes carry the same steps, ignoring volatile metadata."""
    return diff_tapes(a, b).empty
