"""Protocol messages: blocks, checkpoints, votes, proposals and
acknowledgments.

Messages are immutable values. Two messages are the same message if and only
if they have the same digest (see ``codec.digest``), so sets of messages are
deduplicated by content.
"""

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator, Optional, Set, Tuple, Union

from pyrsistent import PSet

BlockId = str
ValidatorIndex = int
Slot = int


class _Digestible:
    """Mixin giving messages content-based identity."""

    @cached_property
    def digest(self) -> str:
        """Hex sha256 of the canonical binary encoding of the message."""
        # pylint: disable=import-outside-toplevel,cyclic-import
        from .codec import digest

        return digest(self)  # type: ignore[arg-type]

    def __eq__(self, other: object) -> bool:
        if type(self) is not type(other):
            return False
        return self.digest == other.digest  # type: ignore[attr-defined]

    def __hash__(self) -> int:
        return hash(self.digest)


@dataclass(frozen=True, eq=False)
class Block(_Digestible):
    """A block. Only genesis has no parent and no proposer."""

    parent: Optional[BlockId]
    slot: Slot
    proposer: Optional[ValidatorIndex]
    body: bytes = b""

    @property
    def id(self) -> BlockId:
        """Block identifier: the digest of the block's encoding."""
        return self.digest

    @property
    def sender(self) -> Optional[ValidatorIndex]:
        return self.proposer


@dataclass(frozen=True)
class Checkpoint:
    """A (block, slot) pair, with slot >= the slot of the block."""

    block: BlockId
    slot: Slot

    @property
    def sort_key(self) -> Tuple[Slot, BlockId]:
        """Deterministic ordering: ascending slot, then block id."""
        return (self.slot, self.block)

    def __str__(self) -> str:
        return f"({self.block[:8]}, {self.slot})"


@dataclass(frozen=True, eq=False)
class HeadVote(_Digestible):
    block: BlockId
    slot: Slot
    voter: ValidatorIndex

    @property
    def sender(self) -> ValidatorIndex:
        return self.voter


@dataclass(frozen=True, eq=False)
class FfgVote(_Digestible):
    """FFG vote for the link source -> target."""

    source: Checkpoint
    target: Checkpoint
    voter: ValidatorIndex

    @property
    def sender(self) -> ValidatorIndex:
        return self.voter


@dataclass(frozen=True, eq=False)
class Proposal(_Digestible):
    """A block together with the view of its proposer."""

    block: Block
    proposed_view: PSet
    slot: Slot
    proposer: ValidatorIndex

    @property
    def sender(self) -> ValidatorIndex:
        return self.proposer


@dataclass(frozen=True, eq=False)
class Acknowledgment(_Digestible):
    checkpoint: Checkpoint
    slot: Slot
    voter: ValidatorIndex

    @property
    def sender(self) -> ValidatorIndex:
        return self.voter


Message = Union[Block, HeadVote, FfgVote, Proposal, Acknowledgment]

GENESIS = Block(parent=None, slot=0, proposer=None, body=b"genesis")


def genesis_checkpoint() -> Checkpoint:
    """The genesis checkpoint (genesis, 0), justified in every view."""
    return Checkpoint(block=GENESIS.id, slot=0)


def message_kind(message: Message) -> str:
    """Short name of the message type, as used in trace files."""
    return {
        Block: "block",
        HeadVote: "head-vote",
        FfgVote: "ffg-vote",
        Proposal: "propose",
        Acknowledgment: "ack",
    }[type(message)]


def flatten(messages: Iterable[Message]) -> Iterator[Message]:
    """Iterate over the given messages and, recursively, over the messages
    contained in the proposed views of proposals. Each message is yielded
    once.
    """
    seen: Set[str] = set()
    stack = list(messages)
    while stack:
        message = stack.pop()
        if message.digest in seen:
            continue
        seen.add(message.digest)
        yield message
        if isinstance(message, Proposal):
            stack.append(message.block)
            stack.extend(x for x in message.proposed_view if x.digest not in seen)


def validate_message(message: Message) -> Optional[str]:
    """Check the field invariants of a message that do not depend on a view.

    :param message: message to check.
    :return: None if the message is well formed, otherwise the reason why it
        is malformed.
    """
    if isinstance(message, Block):
        if message.slot < 0:
            return "negative block slot"
        if message.parent is None:
            return None if message == GENESIS else "block without parent"
        if message.proposer is None or message.slot == 0:
            return "non-genesis block without proposer or at slot 0"

    elif isinstance(message, HeadVote):
        if message.slot < 0:
            return "negative head vote slot"

    elif isinstance(message, FfgVote):
        if message.source.slot < 0:
            return "negative source slot"
        if message.source.slot >= message.target.slot:
            return "ffg vote source slot not below target slot"

    elif isinstance(message, Acknowledgment):
        if message.checkpoint.slot != message.slot:
            return "acknowledged checkpoint slot differs from ack slot"

    elif isinstance(message, Proposal):
        if message.block.slot != message.slot:
            return "proposal slot differs from block slot"
        if message.block.proposer != message.proposer:
            return "proposal sender differs from block proposer"
        if message.block not in message.proposed_view:
            return "proposed view does not contain the proposed block"
        return validate_message(message.block)

    return None
