"""Simulation traces: an append-only list of records, stored as JSON lines.

Every record has the keys ``round``, ``actor``, ``event`` and ``payload``,
in that order. The first record is the scenario header. A message is
defined once by a ``message`` record carrying its digest and text record;
later records refer to it by digest.
"""

import json
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, Iterator, List, Optional, TextIO

from ..protocol.codec import CodecError, from_record, to_record
from ..protocol.messages import Message, Proposal, ValidatorIndex
from .scenario import Scenario

WORLD = "world"
ADVERSARY = "adversary"

SCENARIO = "scenario"
MESSAGE = "message"
SEND = "send"
STATE = "state"
FAST_CONFIRM = "fast-confirm"
CORRUPT = "corrupt"
SLEEP = "sleep"
WAKE = "wake"
ACTIVE = "active"
DROPPED = "dropped"
SELF_VIOLATION = "self-violation"
JUSTIFICATION_TIE = "justification-tie"


class TraceError(Exception):
    """A trace file that is malformed, truncated or inconsistent."""


def actor_name(i: ValidatorIndex) -> str:
    return f"v{i}"


def actor_index(actor: str) -> Optional[ValidatorIndex]:
    """Validator index of an actor name, None for non-validator actors."""
    if actor.startswith("v") and actor[1:].isdigit():
        return int(actor[1:])
    return None


@dataclass(frozen=True)
class TraceRecord:
    round: int
    actor: str
    event: str
    payload: Dict[str, Any]

    def to_json(self) -> str:
        return json.dumps(
            {
                "round": self.round,
                "actor": self.actor,
                "event": self.event,
                "payload": self.payload,
            },
            separators=(",", ":"),
        )


@dataclass
class Trace:
    """Records of one run plus the messages they define, by digest."""

    records: List[TraceRecord] = field(default_factory=list)
    messages: Dict[str, Message] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[TraceRecord]:
        return iter(self.records)

    @property
    def scenario(self) -> Scenario:
        if not self.records or self.records[0].event != SCENARIO:
            raise TraceError("Trace does not start with a scenario record.")
        return Scenario.from_dict(self.records[0].payload)

    def add(self, r: int, actor: str, event: str, **payload: Any) -> TraceRecord:
        record = TraceRecord(round=r, actor=actor, event=event, payload=payload)
        self.records.append(record)
        return record

    def define(self, message: Message, r: int, actor: str = WORLD) -> str:
        """Write the definition record of a message, and of the messages of a
        proposed view, unless already defined. Returns the message digest.
        """
        pending = [message]
        while pending:
            current = pending[-1]
            if current.digest in self.messages:
                pending.pop()
                continue
            if isinstance(current, Proposal):
                missing = sorted(
                    (
                        x
                        for x in current.proposed_view
                        if x.digest not in self.messages
                    ),
                    key=lambda x: x.digest,
                )
                if missing:
                    pending.extend(missing)
                    continue
            pending.pop()
            self.messages[current.digest] = current
            self.add(r, actor, MESSAGE, digest=current.digest, **to_record(current))
        return message.digest

    def events(self, *kinds: str) -> Iterator[TraceRecord]:
        return (x for x in self.records if x.event in kinds)

    def sent_messages(self) -> List[Message]:
        """Every message sent during the run, in sending order."""
        return [self.messages[x.payload["message"]] for x in self.events(SEND)]

    def dumps(self) -> str:
        return "".join(x.to_json() + "\n" for x in self.records)

    def dump(self, f: TextIO) -> None:
        for record in self.records:
            f.write(record.to_json() + "\n")

    @classmethod
    def loads(cls, text: str) -> "Trace":
        return cls.from_lines(text.splitlines())

    @classmethod
    def load(cls, f: TextIO) -> "Trace":
        return cls.from_lines(f)

    @classmethod
    def from_lines(cls, lines: Iterable[str]) -> "Trace":
        """Rebuild a trace from its JSON lines.

        :raises TraceError: on malformed lines or undefined message digests.
        """
        trace = cls()
        for line_number, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
                record = TraceRecord(
                    round=int(raw["round"]),
                    actor=str(raw["actor"]),
                    event=str(raw["event"]),
                    payload=dict(raw["payload"]),
                )
            except (ValueError, KeyError, TypeError) as e:
                raise TraceError(
                    f"Malformed trace record on line {line_number}: {e}"
                ) from None

            if record.event == MESSAGE:
                try:
                    message = from_record(record.payload, known=trace.messages)
                except CodecError as e:
                    raise TraceError(f"Line {line_number}: {e}") from None
                if message.digest != record.payload.get("digest"):
                    raise TraceError(
                        f"Line {line_number}: digest mismatch for a "
                        f"{record.payload.get('type')} record."
                    )
                trace.messages[message.digest] = message
            elif record.event == SEND:
                if record.payload.get("message") not in trace.messages:
                    raise TraceError(
                        f"Line {line_number}: send of an undefined message."
                    )
            trace.records.append(record)

        if not trace.records:
            raise TraceError("Empty trace.")
        try:
            _ = trace.scenario
        except (KeyError, ValueError) as e:
            raise TraceError(f"Malformed scenario header: {e!r}") from None
        return trace
