"""Line-delimited JSON file format for histories.

One event per line::

    {"index": 0, "kind": "inv", "op_id": 0, "process": 0, "action": "w", "object": "x", "value": 1}

Blank lines and lines starting with ``#`` are ignored.  ``index`` must be
strictly increasing through the file.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable

from .errors import HistoryFormatError
from .history import Action, Event, History, Kind

FIELDS = ("index", "kind", "op_id", "process", "action", "object", "value")


def event_record(index: int, e: Event) -> dict:
    return {
        "index": index,
        "kind": e.kind.value,
        "op_id": e.op_id,
        "process": e.process,
        "action": e.action.value,
        "object": e.object,
        "value": e.value,
    }


def dumps_history(h: History) -> str:
    return "".join(json.dumps(event_record(i, e)) + "\n" for i, e in enumerate(h.events))


def write_history(h: History, path) -> None:
    Path(path).write_text(dumps_history(h), encoding="utf-8")


def _int_field(rec, name, lineno, allow_null=False):
    v = rec[name]
    if v is None and allow_null:
        return None
    if isinstance(v, bool) or not isinstance(v, int):
        raise HistoryFormatError(f"field {name!r} must be an integer, got {v!r}", lineno)
    return v


def _parse_record(rec, lineno) -> tuple[int, Event]:
    if not isinstance(rec, dict):
        raise HistoryFormatError("record is not a JSON object", lineno)
    missing = [f for f in FIELDS if f not in rec]
    if missing:
        raise HistoryFormatError(f"missing fields {missing}", lineno)
    try:
        kind = Kind(rec["kind"])
        action = Action(rec["action"])
    except ValueError as exc:
        raise HistoryFormatError(str(exc), lineno) from None
    obj = rec["object"]
    if not isinstance(obj, str) or not obj:
        raise HistoryFormatError("field 'object' must be a nonempty string", lineno)
    process = _int_field(rec, "process", lineno)
    if process < 0:
        raise HistoryFormatError("field 'process' must be non-negative", lineno)
    value = _int_field(rec, "value", lineno, allow_null=True)
    carries_value = (kind is Kind.INV and action is Action.WRITE) or (kind is Kind.RES and action is Action.READ)
    if carries_value and value is None:
        raise HistoryFormatError(f"{kind.value} of a {action.name.lower()} needs a value", lineno)
    if not carries_value and value is not None:
        raise HistoryFormatError(f"{kind.value} of a {action.name.lower()} must have value null", lineno)
    event = Event(kind, _int_field(rec, "op_id", lineno), process, action, obj, value)
    return _int_field(rec, "index", lineno), event


def parse_history(lines: Iterable[str]) -> History:
    """Parse history records; raises HistoryFormatError naming the bad line."""
    events = []
    last_index = None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise HistoryFormatError(f"invalid JSON ({exc.msg})", lineno) from None
        index, event = _parse_record(rec, lineno)
        if last_index is not None and index <= last_index:
            raise HistoryFormatError(f"index {index} out of order (previous {last_index})", lineno)
        last_index = index
        events.append(event)
    return History(tuple(events))


def read_history(path) -> History:
    with open(path, encoding="utf-8") as fh:
        return parse_history(fh)
