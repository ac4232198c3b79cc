"""Sequencer-based write-order broadcast and checkers for its delivery logs.

A single logical sequencer assigns every broadcast message its slot in the
global sequence at broadcast time.  Replicas deliver that sequence in order,
each at its own pace, so replica lag never reorders anything.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

from .errors import HistoryFormatError, ProtocolError


@dataclass(frozen=True)
class WritePayload:
    object: str
    value: int
    # Set on the state-transfer write that accompanies a change-node message.
    transfer_for: Optional[int] = None


@dataclass(frozen=True)
class ChangeNodePayload:
    object: str
    source: int
    destination: int


Payload = Union[WritePayload, ChangeNodePayload]


@dataclass(frozen=True)
class Message:
    msg_id: int
    sender: int
    payload: Payload

    @property
    def is_write(self) -> bool:
        return isinstance(self.payload, WritePayload)


@dataclass(frozen=True)
class BroadcastLog:
    """The sequencer's global order plus what each process has delivered so far."""

    process_count: int
    sequence: tuple = ()  # msg ids in sequencer order
    messages: dict = field(default_factory=dict)  # msg_id -> Message
    delivered: tuple = ()  # per process: tuple of msg ids in delivery order

    @classmethod
    def empty(cls, process_count: int) -> "BroadcastLog":
        return cls(process_count, (), {}, tuple(() for _ in range(process_count)))

    def cursor(self, process: int) -> int:
        return len(self.delivered[process])

    def backlog(self, process: int) -> int:
        return len(self.sequence) - len(self.delivered[process])

    def position(self, msg_id: int) -> int:
        return self.sequence.index(msg_id)

    def ordered_messages(self) -> list[Message]:
        return [self.messages[m] for m in self.sequence]


def broadcast(log: BroadcastLog, m: Message) -> BroadcastLog:
    """Sequence ``m`` after everything broadcast so far."""
    if m.msg_id in log.messages:
        raise ProtocolError(f"message id {m.msg_id} already broadcast")
    if not 0 <= m.sender < log.process_count:
        raise ProtocolError(f"unknown sender P{m.sender}")
    messages = dict(log.messages)
    messages[m.msg_id] = m
    return BroadcastLog(log.process_count, log.sequence + (m.msg_id,), messages, log.delivered)


def deliver_step(log: BroadcastLog, process: int, count: int) -> BroadcastLog:
    """Advance one replica's delivery cursor by up to ``count`` messages."""
    if count < 0:
        raise ValueError("count must be non-negative")
    done = log.delivered[process]
    take = min(count, len(log.sequence) - len(done))
    if take == 0:
        return log
    delivered = list(log.delivered)
    delivered[process] = done + log.sequence[len(done):len(done) + take]
    return BroadcastLog(log.process_count, log.sequence, log.messages, tuple(delivered))


def deliver_through(log: BroadcastLog, process: int, msg_id: int) -> BroadcastLog:
    """Deliver to ``process`` up to and including ``msg_id``."""
    target = log.position(msg_id) + 1
    return deliver_step(log, process, max(0, target - log.cursor(process)))


def check_integrity(log: BroadcastLog) -> bool:
    """Every delivered message was broadcast, and nothing is sequenced or delivered twice."""
    if len(set(log.sequence)) != len(log.sequence):
        return False
    broadcast_ids = set(log.sequence)
    if set(log.messages) != broadcast_ids:
        return False
    if any(not 0 <= m.sender < log.process_count for m in log.messages.values()):
        return False
    for seq in log.delivered:
        if len(set(seq)) != len(seq) or not broadcast_ids.issuperset(seq):
            return False
    return True


def check_total_order(log: BroadcastLog) -> bool:
    """If any process delivers m before m', every process that delivers m' delivered m first."""
    positions = [{m: k for k, m in enumerate(seq)} for seq in log.delivered]
    for seq in log.delivered:
        for j, later in enumerate(seq):
            earlier = seq[:j]
            for pos in positions:
                at = pos.get(later)
                if at is None:
                    continue
                for m in earlier:
                    k = pos.get(m)
                    if k is None or k >= at:
                        return False
    return True


# -- dump format --------------------------------------------------------------

def _payload_record(p: Payload) -> dict:
    if isinstance(p, WritePayload):
        rec = {"type": "write", "object": p.object, "value": p.value}
        if p.transfer_for is not None:
            rec["transfer_for"] = p.transfer_for
        return rec
    return {"type": "change_node", "object": p.object, "source": p.source, "destination": p.destination}


def _payload_from(rec: dict) -> Payload:
    kind = rec.get("type")
    if kind == "write":
        return WritePayload(rec["object"], rec["value"], rec.get("transfer_for"))
    if kind == "change_node":
        return ChangeNodePayload(rec["object"], rec["source"], rec["destination"])
    raise ValueError(f"unknown payload type {kind!r}")


def dumps_log(log: BroadcastLog) -> str:
    """Serialize as JSON lines: a header, one ``cast`` record per slot, one ``deliver`` record per delivery."""
    lines = [json.dumps({"record": "header", "processes": log.process_count})]
    for seq, msg_id in enumerate(log.sequence):
        m = log.messages[msg_id]
        lines.append(json.dumps({"record": "cast", "seq": seq, "msg_id": msg_id, "sender": m.sender,
                                 "payload": _payload_record(m.payload)}))
    for p, seq in enumerate(log.delivered):
        for cursor, msg_id in enumerate(seq, start=1):
            lines.append(json.dumps({"record": "deliver", "process": p, "msg_id": msg_id, "cursor": cursor}))
    return "\n".join(lines) + "\n"


def parse_log(lines: Iterable[str]) -> BroadcastLog:
    """Inverse of ``dumps_log``; forged logs parse as long as they are syntactically sound.

    Messages recorded in ``cast`` lines twice keep their first payload; the
    sequence keeps both slots so the integrity check can see the duplicate.
    """
    process_count = None
    sequence: list[int] = []
    messages: dict[int, Message] = {}
    delivered: dict[int, list[int]] = {}
    last_seq = -1
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            rec = json.loads(line)
            kind = rec["record"]
            if kind == "header":
                process_count = int(rec["processes"])
            elif kind == "cast":
                if rec["seq"] <= last_seq:
                    raise HistoryFormatError(f"seq {rec['seq']} out of order", lineno)
                last_seq = rec["seq"]
                msg_id = int(rec["msg_id"])
                sequence.append(msg_id)
                messages.setdefault(msg_id, Message(msg_id, int(rec["sender"]), _payload_from(rec["payload"])))
            elif kind == "deliver":
                delivered.setdefault(int(rec["process"]), []).append(int(rec["msg_id"]))
            else:
                raise HistoryFormatError(f"unknown record type {kind!r}", lineno)
        except HistoryFormatError:
            raise
        except (ValueError, KeyError, TypeError) as exc:
            raise HistoryFormatError(f"malformed record ({exc})", lineno) from None
    if process_count is None:
        process_count = max(delivered, default=-1) + 1
    if delivered and max(delivered) >= process_count:
        raise HistoryFormatError(f"delivery for unknown process P{max(delivered)}")
    return BroadcastLog(process_count, tuple(sequence), messages,
                        tuple(tuple(delivered.get(p, ())) for p in range(process_count)))


def read_log(path) -> BroadcastLog:
    with open(path, encoding="utf-8") as fh:
        return parse_log(fh)
