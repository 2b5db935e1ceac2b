"""Canonical encodings of protocol messages.

Two encodings are provided, both with the fields of every message written in
a fixed order:

 * A binary record: one tag byte, a 4 byte big-endian payload length, then
   the payload. Integers are 8 byte signed big-endian, strings and byte
   strings are prefixed by their 4 byte length. A proposal references the
   messages of its proposed view by their digests, in ascending order.
 * A text record: a JSON-serializable dict, used for trace files.

The digest of a message is the sha256 of its binary record.
"""

import hashlib
import struct
from typing import Any, Callable, Dict, List, Mapping, Optional, Tuple

from pyrsistent import pset

from .messages import (
    Acknowledgment,
    Block,
    Checkpoint,
    FfgVote,
    HeadVote,
    Message,
    Proposal,
    message_kind,
)

TAGS: Dict[type, int] = {
    Block: 1,
    HeadVote: 2,
    FfgVote: 3,
    Proposal: 4,
    Acknowledgment: 5,
}
HEADER = struct.Struct(">BI")
INT = struct.Struct(">q")
LENGTH = struct.Struct(">I")
DIGEST_SIZE = 32


class CodecError(ValueError):
    """Error raised when decoding a malformed or truncated record."""


def _int(value: Optional[int]) -> bytes:
    return INT.pack(-1 if value is None else value)


def _bytes(value: bytes) -> bytes:
    return LENGTH.pack(len(value)) + value


def _str(value: Optional[str]) -> bytes:
    return _bytes(b"" if value is None else value.encode("utf8"))


def _checkpoint(checkpoint: Checkpoint) -> bytes:
    return _str(checkpoint.block) + _int(checkpoint.slot)


def _payload(message: Message) -> bytes:
    if isinstance(message, Block):
        return (
            _str(message.parent)
            + _int(message.slot)
            + _int(message.proposer)
            + _bytes(message.body)
        )
    if isinstance(message, HeadVote):
        return _str(message.block) + _int(message.slot) + _int(message.voter)
    if isinstance(message, FfgVote):
        return (
            _checkpoint(message.source)
            + _checkpoint(message.target)
            + _int(message.voter)
        )
    if isinstance(message, Acknowledgment):
        return (
            _checkpoint(message.checkpoint)
            + _int(message.slot)
            + _int(message.voter)
        )
    if isinstance(message, Proposal):
        digests = sorted(x.digest for x in message.proposed_view)
        return (
            encode(message.block)
            + _int(len(digests))
            + b"".join(bytes.fromhex(x) for x in digests)
            + _int(message.slot)
            + _int(message.proposer)
        )
    raise TypeError(f"Cannot encode object of type {type(message).__name__}.")


def encode(message: Message) -> bytes:
    """Binary record of a message."""
    payload = _payload(message)
    return HEADER.pack(TAGS[type(message)], len(payload)) + payload


def digest(message: Message) -> str:
    """Hex digest identifying a message."""
    return hashlib.sha256(encode(message)).hexdigest()


class _Reader:
    """Sequential reader over a binary record."""

    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def take(self, size: int) -> bytes:
        if self.offset + size > len(self.data):
            raise CodecError(
                f"Truncated record: needed {size} bytes at offset {self.offset}, "
                f"only {len(self.data) - self.offset} left."
            )
        chunk = self.data[self.offset : self.offset + size]
        self.offset += size
        return chunk

    def read_int(self) -> int:
        (value,) = INT.unpack(self.take(INT.size))
        return int(value)

    def read_bytes(self) -> bytes:
        (size,) = LENGTH.unpack(self.take(LENGTH.size))
        return self.take(size)

    def read_str(self) -> str:
        return self.read_bytes().decode("utf8")

    def checkpoint(self) -> Checkpoint:
        return Checkpoint(block=self.read_str(), slot=self.read_int())


def _read_message(reader: _Reader, known: Mapping[str, Message]) -> Message:
    tag, size = HEADER.unpack(reader.take(HEADER.size))
    end = reader.offset + size

    if tag == TAGS[Block]:
        parent = reader.read_str() or None
        slot = reader.read_int()
        proposer = reader.read_int()
        message: Message = Block(
            parent=parent,
            slot=slot,
            proposer=None if proposer < 0 else proposer,
            body=reader.read_bytes(),
        )
    elif tag == TAGS[HeadVote]:
        message = HeadVote(
            block=reader.read_str(), slot=reader.read_int(), voter=reader.read_int()
        )
    elif tag == TAGS[FfgVote]:
        message = FfgVote(
            source=reader.checkpoint(),
            target=reader.checkpoint(),
            voter=reader.read_int(),
        )
    elif tag == TAGS[Acknowledgment]:
        message = Acknowledgment(
            checkpoint=reader.checkpoint(),
            slot=reader.read_int(),
            voter=reader.read_int(),
        )
    elif tag == TAGS[Proposal]:
        block = _read_message(reader, known)
        if not isinstance(block, Block):
            raise CodecError("Proposal record does not start with a block record.")
        digests = [reader.take(DIGEST_SIZE).hex() for _ in range(reader.read_int())]
        message = Proposal(
            block=block,
            proposed_view=_resolve(digests, known, extra=block),
            slot=reader.read_int(),
            proposer=reader.read_int(),
        )
    else:
        raise CodecError(f"Unknown message tag: {tag}.")

    if reader.offset != end:
        raise CodecError(
            f"Record length mismatch for {message_kind(message)} record: "
            f"declared {size} bytes, read {size + reader.offset - end}."
        )
    return message


def _resolve(digests: List[str], known: Mapping[str, Message], extra: Message) -> Any:
    missing = [x for x in digests if x not in known and x != extra.digest]
    if missing:
        raise CodecError(
            f"Proposed view references {len(missing)} unknown message(s), "
            f"first: {missing[0]}."
        )
    return pset(extra if x == extra.digest else known[x] for x in digests)


def decode(data: bytes, known: Optional[Mapping[str, Message]] = None) -> Message:
    """Decode a single binary record.

    :param data: the binary record.
    :param known: messages by digest, used to resolve the proposed view of a
        proposal.
    :raises CodecError: if the record is malformed, has trailing bytes or
        references unknown messages.
    """
    reader = _Reader(data)
    message = _read_message(reader, known or {})
    if reader.offset != len(data):
        raise CodecError(f"{len(data) - reader.offset} trailing bytes after record.")
    return message


def _checkpoint_record(checkpoint: Checkpoint) -> Dict[str, Any]:
    return {"block": checkpoint.block, "slot": checkpoint.slot}


def to_record(message: Message) -> Dict[str, Any]:
    """Text record of a message: a dict with fields in canonical order."""
    record: Dict[str, Any] = {"type": message_kind(message)}
    if isinstance(message, Block):
        record.update(
            id=message.id,
            parent=message.parent,
            slot=message.slot,
            proposer=message.proposer,
            body=message.body.hex(),
        )
    elif isinstance(message, HeadVote):
        record.update(block=message.block, slot=message.slot, voter=message.voter)
    elif isinstance(message, FfgVote):
        record.update(
            source=_checkpoint_record(message.source),
            target=_checkpoint_record(message.target),
            voter=message.voter,
        )
    elif isinstance(message, Acknowledgment):
        record.update(
            checkpoint=_checkpoint_record(message.checkpoint),
            slot=message.slot,
            voter=message.voter,
        )
    elif isinstance(message, Proposal):
        record.update(
            block=to_record(message.block),
            proposed_view=sorted(x.digest for x in message.proposed_view),
            slot=message.slot,
            proposer=message.proposer,
        )
    return record


def _checkpoint_from_record(record: Mapping[str, Any]) -> Checkpoint:
    return Checkpoint(block=str(record["block"]), slot=int(record["slot"]))


def _block_from_record(record: Mapping[str, Any], _: Mapping[str, Message]) -> Block:
    block = Block(
        parent=record["parent"],
        slot=int(record["slot"]),
        proposer=record["proposer"],
        body=bytes.fromhex(record["body"]),
    )
    if "id" in record and record["id"] != block.id:
        raise CodecError(
            f"Block id mismatch: record says {record['id']}, content gives {block.id}."
        )
    return block


def _proposal_from_record(
    record: Mapping[str, Any], known: Mapping[str, Message]
) -> Proposal:
    block = _block_from_record(record["block"], known)
    return Proposal(
        block=block,
        proposed_view=_resolve(list(record["proposed_view"]), known, extra=block),
        slot=int(record["slot"]),
        proposer=int(record["proposer"]),
    )


RecordReader = Callable[[Mapping[str, Any], Mapping[str, Message]], Message]

RECORD_READERS: Dict[str, RecordReader] = {
    "block": _block_from_record,
    "head-vote": lambda r, _: HeadVote(
        block=str(r["block"]), slot=int(r["slot"]), voter=int(r["voter"])
    ),
    "ffg-vote": lambda r, _: FfgVote(
        source=_checkpoint_from_record(r["source"]),
        target=_checkpoint_from_record(r["target"]),
        voter=int(r["voter"]),
    ),
    "ack": lambda r, _: Acknowledgment(
        checkpoint=_checkpoint_from_record(r["checkpoint"]),
        slot=int(r["slot"]),
        voter=int(r["voter"]),
    ),
    "propose": _proposal_from_record,
}


def from_record(
    record: Mapping[str, Any], known: Optional[Mapping[str, Message]] = None
) -> Message:
    """Rebuild a message from its text record.

    :raises CodecError: on unknown types, missing fields or unresolvable
        references.
    """
    try:
        reader = RECORD_READERS[record["type"]]
    except KeyError:
        raise CodecError(
            f"Unknown or missing message type in record: {record}"
        ) from None
    try:
        return reader(record, known or {})
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, CodecError):
            raise
        raise CodecError(f"Malformed {record['type']} record: {e!r}") from e


def split_records(data: bytes) -> Tuple[bytes, ...]:
    """Split a concatenation of binary records into individual records."""
    records = []
    offset = 0
    while offset < len(data):
        if offset + HEADER.size > len(data):
            raise CodecError("Truncated record header.")
        _, size = HEADER.unpack_from(data, offset)
        end = offset + HEADER.size + size
        if end > len(data):
            raise CodecError("Truncated record payload.")
        records.append(data[offset:end])
        offset = end
    return tuple(records)
