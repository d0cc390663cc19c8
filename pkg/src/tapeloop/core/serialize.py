"""Canonical JSON form of tapes.

One tape serializes to a document with a ``metadata`` object and a
``steps`` array; each step is flat (payload fields at top level next to
``kind`` and ``category``) with its own nested ``metadata``. Key order is
fixed and payload objects are emitted with sorted keys, so serializing the
same tape twice — in the same or another process — produces identical
bytes.

Two physical layouts share that canonical form: a pretty-printed multi-line
document for single-tape files, and a compact one-tape-per-line layout for
batches.
"""

from __future__ import annotations

import json
import math
from typing import Any, Iterable, Mapping

from tapeloop.core.registry import StepRegistry, default_registry
from tapeloop.core.steps import CATEGORIES, Step, StepMetadata
from tapeloop.core.tape import Tape, TapeMetadata
from tapeloop.errors import MalformedDocumentError, StepValidationError

_STEP_META_KEYS = ("id", "agent", "node", "prompt_id", "other")
_TAPE_META_KEYS = ("id", "parent_id", "author", "n_added")


def _check_jsonable(value: Any, path: str) -> None:
    """Reject values the canonical writer cannot represent, naming the path."""
    if value is None or isinstance(value, (bool, int, str)):
        return
    if isinstance(value, float):
        if not math.isfinite(value):
            raise StepValidationError(f"{path}: non-finite number {value!r} is not JSON-serializable")
        return
    if isinstance(value, (list, tuple)):
        for i, item in enumerate(value):
            _check_jsonable(item, f"{path}[{i}]")
        return
    if isinstance(value, dict):
        for k, v in value.items():
            if not isinstance(k, str):
                raise StepValidationError(f"{path}: object key {k!r} is not a string")
            _check_jsonable(v, f"{path}.{k}")
        return
    raise StepValidationError(f"{path}: value of type {type(value).__name__} is not JSON-serializable")


def _canon(value: Any) -> Any:
    """Recursively sort object keys; leave scalars and array order alone."""
    if isinstance(value, dict):
        return {k: _canon(value[k]) for k in sorted(value)}
    if isinstance(value, (list, tuple)):
        return [_canon(v) for v in value]
    return value


def step_to_document(step: Step, *, index: int | None = None) -> dict[str, Any]:
    """Flat canonical form of one step: kind, category, payload fields, metadata."""
    where = f"step {index}" if index is not None else f"step {step.metadata.id}"
    doc: dict[str, Any] = {"kind": step.kind, "category": step.category}
    for name in sorted(step.payload):
        if name in ("kind", "category", "metadata"):
            raise StepValidationError(f"{where}: payload field {name!r} collides with a reserved key")
        _check_jsonable(step.payload[name], f"{where}: payload field {name!r}")
        doc[name] = _canon(step.payload[name])
    _check_jsonable(step.metadata.other, f"{where}: metadata.other")
    doc["metadata"] = {
        "id": step.metadata.id,
        "agent": step.metadata.agent,
        "node": step.metadata.node,
        "prompt_id": step.metadata.prompt_id,
        "other": _canon(step.metadata.other),
    }
    return doc


def tape_to_document(tape: Tape) -> dict[str, Any]:
    return {
        "metadata": {
            "id": tape.metadata.id,
            "parent_id": tape.metadata.parent_id,
            "author": tape.metadata.author,
            "n_added": tape.metadata.n_added,
        },
        "steps": [step_to_document(s, index=i) for i, s in enumerate(tape.steps)],
    }


def serialize_tape(tape: Tape) -> str:
    """Pretty canonical document, newline-terminated."""
    return json.dumps(tape_to_document(tape), indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def serialize_tape_line(tape: Tape) -> str:
    """Compact canonical document on a single line (batch layout)."""
    return json.dumps(tape_to_document(tape), separators=(",", ":"), ensure_ascii=False, allow_nan=False)


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise MalformedDocumentError(msg)


def step_from_document(
    doc: Mapping[str, Any],
    registry: StepRegistry | None = None,
    strict: bool = True,
    where: str = "step",
) -> Step:
    """Parse one flat step document.

    Strict mode requires the kind to be registered, the category to match
    the registration, and the payload to validate. Lenient mode lets
    unknown kinds through untouched so tooling can open tapes produced by
    code it does not import.
    """
    registry = registry or default_registry
    _require(isinstance(doc, Mapping), f"{where}: expected an object")
    _require(isinstance(doc.get("kind"), str) and doc["kind"], f"{where}: missing or invalid 'kind'")
    kind = doc["kind"]
    category = doc.get("category")
    _require(category in CATEGORIES, f"{where}: invalid category {category!r} for kind {kind!r}")

    meta_doc = doc.get("metadata", {})
    _require(isinstance(meta_doc, Mapping), f"{where}: 'metadata' must be an object")
    extra_meta = set(meta_doc) - set(_STEP_META_KEYS)
    other = dict(meta_doc.get("other") or {})
    if extra_meta:
        if strict:
            raise MalformedDocumentError(f"{where}: unknown metadata key(s) {sorted(extra_meta)}")
        for k in sorted(extra_meta):
            other[k] = meta_doc[k]
    metadata_kwargs: dict[str, Any] = {"other": other}
    for key in ("id", "agent", "node", "prompt_id"):
        if key in meta_doc and meta_doc[key] is not None:
            metadata_kwargs[key] = meta_doc[key]
    if meta_doc.get("prompt_id") is None:
        metadata_kwargs["prompt_id"] = None

    payload = {k: doc[k] for k in doc if k not in ("kind", "category", "metadata")}

    if kind in registry:
        spec = registry.spec(kind)
        if category != spec.category:
            raise MalformedDocumentError(
                f"{where}: kind {kind!r} is registered as {spec.category}, document says {category}"
            )
        if strict:
            try:
                registry.validate_payload(kind, payload)
            except StepValidationError as exc:
                raise MalformedDocumentError(f"{where}: {exc}") from exc
    elif strict:
        raise MalformedDocumentError(f"{where}: unknown step kind {kind!r}")

    return Step(kind=kind, category=category, payload=payload, metadata=StepMetadata(**metadata_kwargs))


def tape_from_document(
    doc: Mapping[str, Any],
    registry: StepRegistry | None = None,
    strict: bool = True,
) -> Tape:
    _require(isinstance(doc, Mapping), "tape document must be an object")
    _require(isinstance(doc.get("steps"), list), "tape document needs a 'steps' array")
    meta_doc = doc.get("metadata", {})
    _require(isinstance(meta_doc, Mapping), "tape 'metadata' must be an object")
    extra = set(meta_doc) - set(_TAPE_META_KEYS)
    if strict and extra:
        raise MalformedDocumentError(f"tape metadata has unknown key(s) {sorted(extra)}")
    meta_kwargs: dict[str, Any] = {}
    for key in _TAPE_META_KEYS:
        if key in meta_doc and meta_doc[key] is not None:
            meta_kwargs[key] = meta_doc[key]
    if meta_doc.get("parent_id") is None:
        meta_kwargs["parent_id"] = None
    steps = [
        step_from_document(sd, registry=registry, strict=strict, where=f"step {i}")
        for i, sd in enumerate(doc["steps"])
    ]
    try:
        return Tape(steps=tuple(steps), metadata=TapeMetadata(**meta_kwargs))
    except ValueError as exc:
        raise MalformedDocumentError(str(exc)) from exc


def deserialize_tape(
    data: str | bytes,
    registry: StepRegistry | None = None,
    strict: bool = True,
) -> Tape:
    """Parse a canonical tape document (either physical layout)."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise MalformedDocumentError(f"invalid JSON: {exc}") from exc
    return tape_from_document(doc, registry=registry, strict=strict)


def parse_tape_lines(
    text: str,
    registry: StepRegistry | None = None,
    strict: bool = True,
) -> list[Tape]:
    """Parse the one-tape-per-line batch layout; blank lines are skipped.

    Splits on ``\\n`` only: the dump always escapes that byte, while other
    unicode line separators (NEL, LS, PS) pass through raw and must not be
    treated as record boundaries.
    """
    tapes = []
    for lineno, line in enumerate(text.split("\n"), start=1):
        if not line.strip():
            continue
        try:
            tapes.append(deserialize_tape(line, registry=registry, strict=strict))
        except MalformedDocumentError as exc:
            raise MalformedDocumentError(f"line {lineno}: {exc}") from exc
    return tapes


def dump_tapes(tapes: Iterable[Tape]) -> str:
    """Batch layout for a sequence of tapes."""
    return "".join(serialize_tape_line(t) + "\n" for t in tapes)
