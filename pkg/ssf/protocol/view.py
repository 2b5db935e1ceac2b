"""Views: the set of protocol messages known to a validator, with the
derived indices (block tree, votes, acknowledgments) that fork choice and
justification read from.
"""

from typing import Any, Dict, Iterable, Iterator, List, Optional, Set, Tuple

from pyrsistent import PSet, pset

from .messages import (
    GENESIS,
    Acknowledgment,
    Block,
    BlockId,
    Checkpoint,
    FfgVote,
    HeadVote,
    Message,
    Proposal,
    Slot,
    ValidatorIndex,
)

Link = Tuple[Checkpoint, Checkpoint]


class UnknownBlockError(Exception):
    """Error raised when a block is absent from a view or not connected to
    genesis.
    """

    def __init__(self, block: BlockId, msg: Optional[str] = None):
        super().__init__(
            f"Unknown block [{block[:12]}]: "
            + (msg if msg else "absent from the view or not connected to genesis.")
        )
        self.block = block


class View:
    """Set of messages with derived indices.

    Blocks whose parent is missing are kept as dangling blocks and enter the
    block tree as soon as their parent does. Blocks carried by proposals are
    indexed like standalone blocks. A view is mutated only through ``add``
    and ``add_all``; ``memo`` holds data derived from the current message
    set and is cleared on every change.

    :param messages: initial messages of the view.
    """

    def __init__(self, messages: Iterable[Message] = ()):
        self.messages: PSet = pset()
        self.blocks: Dict[BlockId, Block] = {}
        self.children: Dict[BlockId, Set[BlockId]] = {}
        self.heights: Dict[BlockId, int] = {}
        self.dangling: Dict[BlockId, List[Block]] = {}
        self.head_votes: Dict[ValidatorIndex, Dict[Slot, Set[HeadVote]]] = {}
        self.equivocators: Set[ValidatorIndex] = set()
        self.ffg_links: Dict[Link, Set[ValidatorIndex]] = {}
        self.acks: Dict[Checkpoint, Set[ValidatorIndex]] = {}
        self.proposals: Dict[Slot, Set[Proposal]] = {}
        self.memo: Dict[Any, Any] = {}
        self.add_all(messages)

    def __len__(self) -> int:
        return len(self.messages)

    def __contains__(self, message: object) -> bool:
        return message in self.messages

    def add(self, message: Message) -> bool:
        """Add a message to the view. Returns False if it was already there."""
        if message in self.messages:
            return False
        self.messages = self.messages.add(message)
        self.memo.clear()
        self._index(message)
        return True

    def add_all(self, messages: Iterable[Message]) -> int:
        """Add messages to the view and return how many were new."""
        return sum(1 for x in messages if self.add(x))

    def _index(self, message: Message) -> None:
        if isinstance(message, Block):
            self._add_block(message)
        elif isinstance(message, Proposal):
            self.proposals.setdefault(message.slot, set()).add(message)
            self._add_block(message.block)
        elif isinstance(message, HeadVote):
            votes = self.head_votes.setdefault(message.voter, {}).setdefault(
                message.slot, set()
            )
            votes.add(message)
            if len(votes) > 1:
                self.equivocators.add(message.voter)
        elif isinstance(message, FfgVote):
            self.ffg_links.setdefault((message.source, message.target), set()).add(
                message.voter
            )
        elif isinstance(message, Acknowledgment):
            self.acks.setdefault(message.checkpoint, set()).add(message.voter)

    def _add_block(self, block: Block) -> None:
        if block.id in self.blocks:
            return
        self.blocks[block.id] = block
        if block.parent is None:
            if block == GENESIS:
                self._connect(block, 0)
            return
        if block.parent in self.heights:
            self._connect(block, self.heights[block.parent] + 1)
        else:
            self.dangling.setdefault(block.parent, []).append(block)

    def _connect(self, block: Block, height: int) -> None:
        pending = [(block, height)]
        while pending:
            block, height = pending.pop()
            if block.parent is not None:
                # Slots must strictly increase along the chain.
                if block.slot <= self.blocks[block.parent].slot:
                    continue
                self.children[block.parent].add(block.id)
            self.heights[block.id] = height
            self.children.setdefault(block.id, set())
            pending.extend((x, height + 1) for x in self.dangling.pop(block.id, ()))

    def copy(self) -> "View":
        """Independent copy of the view."""
        return View(self.messages)

    def is_connected(self, block: BlockId) -> bool:
        """True if the block is in the view and its chain reaches genesis."""
        return block in self.heights

    def _require(self, block: BlockId) -> int:
        try:
            return self.heights[block]
        except KeyError:
            raise UnknownBlockError(block) from None

    def height(self, block: BlockId) -> int:
        """Number of ancestors strictly below the block (genesis: 0).

        :raises UnknownBlockError: if the block is unknown or disconnected.
        """
        return self._require(block)

    def parent(self, block: BlockId) -> Optional[BlockId]:
        self._require(block)
        return self.blocks[block].parent

    def slot(self, block: BlockId) -> Slot:
        self._require(block)
        return self.blocks[block].slot

    def ancestor_at_height(self, block: BlockId, height: int) -> BlockId:
        """Ancestor of ``block`` at the given height (clamped at genesis)."""
        current_height = self._require(block)
        while current_height > max(height, 0):
            block = self.blocks[block].parent  # type: ignore[assignment]
            current_height -= 1
        return block

    def is_ancestor(self, ancestor: BlockId, descendant: BlockId) -> bool:
        """True iff ``ancestor`` lies on the parent path from ``descendant``
        to genesis, both included (a block is its own ancestor).

        :raises UnknownBlockError: if either block is unknown or disconnected.
        """
        ancestor_height = self._require(ancestor)
        descendant_height = self._require(descendant)
        if ancestor_height > descendant_height:
            return False
        return self.ancestor_at_height(descendant, ancestor_height) == ancestor

    def are_comparable(self, a: BlockId, b: BlockId) -> bool:
        """True if one of the blocks is an ancestor of the other."""
        return self.is_ancestor(a, b) or self.is_ancestor(b, a)

    def prefix_at_depth(self, head: BlockId, depth: int) -> BlockId:
        """The ancestor ``depth`` blocks above ``head``, or genesis if the
        chain is shorter than that.
        """
        return self.ancestor_at_height(head, self._require(head) - depth)

    def chain(self, head: BlockId) -> List[BlockId]:
        """Blocks from genesis to ``head``, both included."""
        self._require(head)
        blocks = []
        current: Optional[BlockId] = head
        while current is not None:
            blocks.append(current)
            current = self.blocks[current].parent
        return blocks[::-1]

    def common_ancestor(self, a: BlockId, b: BlockId) -> BlockId:
        """Highest block that is an ancestor of both blocks."""
        height = min(self._require(a), self._require(b))
        a = self.ancestor_at_height(a, height)
        b = self.ancestor_at_height(b, height)
        while a != b:
            a = self.blocks[a].parent  # type: ignore[assignment]
            b = self.blocks[b].parent  # type: ignore[assignment]
        return a

    def higher(self, a: BlockId, b: BlockId) -> BlockId:
        """The higher of two blocks, the first one on equal heights."""
        return b if self.height(b) > self.height(a) else a

    def connected_blocks(self) -> Iterator[BlockId]:
        return iter(self.heights)

    def iter_head_votes(self) -> Iterator[HeadVote]:
        for votes_by_slot in self.head_votes.values():
            for votes in votes_by_slot.values():
                yield from votes

    def is_valid_ffg_link(self, source: Checkpoint, target: Checkpoint) -> bool:
        """Validity of the link of an FFG vote within this view: both blocks
        connected, source.slot < target.slot, every checkpoint slot at least
        its block's slot and the source block an ancestor of the target
        block. Invalid votes stay in the view as evidence only.
        """
        if not (self.is_connected(source.block) and self.is_connected(target.block)):
            return False
        return (
            source.slot < target.slot
            and source.slot >= self.blocks[source.block].slot
            and target.slot >= self.blocks[target.block].slot
            and self.is_ancestor(source.block, target.block)
        )


def view_merge(view: View, messages: Iterable[Message]) -> View:
    """Union of a view with a set of messages, as a new view."""
    merged = view.copy()
    merged.add_all(messages)
    return merged
